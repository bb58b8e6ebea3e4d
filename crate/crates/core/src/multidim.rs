//! Multidimensional pantograph machinery:
//! `dX = {B X(t) + A X(qt) + f(t)} dt + Σ(t) dW(t)` for d x d matrices
//! B, A and a d x r noise matrix driven by r independent Brownian motions.
//!
//! The stability side implements the Lyapunov equation `B^T Q + Q B = -I`,
//! the eigenvalue criteria (B Hurwitz, spectral radius of `B^{-1} A`
//! below one) and the sufficient energy condition `4 ||QA||² < c1/c2`
//! with c1, c2 the extreme eigenvalues of Q. The simulation side offers
//! vector Euler–Maruyama and the vector decomposition X = Z + Y; the
//! coupled Y update uses direct row sums over the r drivers rather than
//! the row-reduced scalar intensity, which only enters the S_i
//! classification (the time-changed representation is distributional and
//! would decouple the paths).
//!
//! Dimensions are capped at 8: everything the theory exercises lives at
//! d = 2..3 and the Kronecker solve stays trivial.

use crate::det::{rk4_delay_solve, DelaySystem, DetError, VectorForcing};
use crate::diagnostics::{classify_s_from_windows, SOverall, SVerdict};
use crate::forcing::{ForcingError, ForcingSpec, NoiseSpec};
use crate::history::{DenseSolution, HistoryError, Interp};
use crate::linalg::{
    eigenvalues, solve_dense, solve_matrix, spectral_norm, symmetric_eigenvalues, LinalgError, Mat,
};
use crate::stoch::{BrownianPath, StochError};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum MultidimError {
    /// B must be Hurwitz for the Lyapunov solve.
    NotHurwitz {
        max_real_part: f64,
    },
    SingularB,
    SingularSystem,
    DimensionMismatch(String),
    InvalidParams(String),
    Linalg(LinalgError),
    Det(DetError),
    Stoch(StochError),
    Forcing(ForcingError),
    History(HistoryError),
}

impl fmt::Display for MultidimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotHurwitz { max_real_part } => {
                write!(
                    f,
                    "B is not Hurwitz (max eigenvalue real part {max_real_part})"
                )
            }
            Self::SingularB => write!(f, "B is singular"),
            Self::SingularSystem => write!(f, "singular Kronecker system"),
            Self::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
            Self::InvalidParams(m) => write!(f, "invalid parameters: {m}"),
            Self::Linalg(e) => write!(f, "linalg: {e}"),
            Self::Det(e) => write!(f, "deterministic stage: {e}"),
            Self::Stoch(e) => write!(f, "stochastic stage: {e}"),
            Self::Forcing(e) => write!(f, "forcing: {e}"),
            Self::History(e) => write!(f, "history: {e}"),
        }
    }
}

impl std::error::Error for MultidimError {}

impl From<LinalgError> for MultidimError {
    fn from(e: LinalgError) -> Self {
        MultidimError::Linalg(e)
    }
}

impl From<DetError> for MultidimError {
    fn from(e: DetError) -> Self {
        MultidimError::Det(e)
    }
}

impl From<StochError> for MultidimError {
    fn from(e: StochError) -> Self {
        MultidimError::Stoch(e)
    }
}

impl From<ForcingError> for MultidimError {
    fn from(e: ForcingError) -> Self {
        MultidimError::Forcing(e)
    }
}

impl From<HistoryError> for MultidimError {
    fn from(e: HistoryError) -> Self {
        MultidimError::History(e)
    }
}

/// System matrices, noise matrix and forcing vector.
#[derive(Debug, Clone)]
pub struct MatrixParams {
    /// d x d instantaneous matrix.
    pub b_mat: Mat,
    /// d x d delayed matrix; must not be zero.
    pub a_mat: Mat,
    /// Proportional delay.
    pub q: f64,
    /// d x r matrix of noise intensities.
    pub sigma: Vec<Vec<NoiseSpec>>,
    /// d forcing components.
    pub f: Vec<ForcingSpec>,
}

impl MatrixParams {
    pub fn dim(&self) -> usize {
        self.b_mat.rows
    }

    pub fn drivers(&self) -> usize {
        self.sigma.first().map(|row| row.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), MultidimError> {
        let d = self.b_mat.rows;
        if !self.b_mat.is_square() || !self.a_mat.is_square() || self.a_mat.rows != d {
            return Err(MultidimError::DimensionMismatch(
                "B and A must be d x d".into(),
            ));
        }
        if d == 0 || d > MAX_DIM {
            return Err(MultidimError::InvalidParams(format!(
                "d = {d} outside 1..={MAX_DIM}"
            )));
        }
        if self.a_mat.max_abs() == 0.0 {
            return Err(MultidimError::InvalidParams(
                "A must not be the zero matrix".into(),
            ));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(MultidimError::InvalidParams(format!(
                "q must lie in (0,1), got {}",
                self.q
            )));
        }
        if self.f.len() != d {
            return Err(MultidimError::DimensionMismatch(format!(
                "forcing has {} components for d = {d}",
                self.f.len()
            )));
        }
        let r = self.drivers();
        if r == 0 || r > MAX_DIM {
            return Err(MultidimError::InvalidParams(format!(
                "r = {r} outside 1..={MAX_DIM}"
            )));
        }
        if self.sigma.len() != d || self.sigma.iter().any(|row| row.len() != r) {
            return Err(MultidimError::DimensionMismatch(
                "sigma must be d x r".into(),
            ));
        }
        Ok(())
    }
}

/// Output of the Lyapunov solve `B^T Q + Q B = -I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Q row-major.
    pub q_mat: Vec<Vec<f64>>,
    pub residual: f64,
    /// Minimal eigenvalue of Q.
    pub c1: f64,
    /// Maximal eigenvalue of Q.
    pub c2: f64,
    /// Spectral norm ||QA||.
    pub beta: f64,
}

/// Solve the Lyapunov equation via the d² x d² Kronecker system
/// `(I ⊗ B^T + B^T ⊗ I) vec(Q) = -vec(I)`, then symmetrize.
pub fn lyapunov_solve(b: &Mat, a: &Mat) -> Result<LyapunovResult, MultidimError> {
    if !b.is_square() {
        return Err(MultidimError::DimensionMismatch("B must be square".into()));
    }
    let d = b.rows;
    if d == 0 || d > MAX_DIM {
        return Err(MultidimError::InvalidParams(format!(
            "d = {d} outside 1..={MAX_DIM}"
        )));
    }
    // Hurwitz check first.
    let eigs = eigenvalues(b)?;
    let max_re = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(MultidimError::NotHurwitz {
            max_real_part: max_re,
        });
    }
    // Row-major vec: Q_{ij} at index i*d + j. The (i,j) equation of
    // B^T Q + Q B = -I reads Σ_k B_{ki} Q_{kj} + Σ_k Q_{ik} B_{kj} = -δ_{ij}.
    let n = d * d;
    let mut big = Mat::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for k in 0..d {
                big[(row, k * d + j)] += b[(k, i)];
                big[(row, i * d + k)] += b[(k, j)];
            }
        }
    }
    let mut rhs = vec![0.0; n];
    for i in 0..d {
        rhs[i * d + i] = -1.0;
    }
    let vec_q = solve_dense(&big, &rhs).map_err(|e| match e {
        LinalgError::Singular => MultidimError::SingularSystem,
        other => MultidimError::Linalg(other),
    })?;
    let mut q = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            q[(i, j)] = 0.5 * (vec_q[i * d + j] + vec_q[j * d + i]);
        }
    }
    // Residual ||B^T Q + Q B + I||_F.
    let bt = b.transpose();
    let mut res = bt.matmul(&q).add_scaled(&q.matmul(b), 1.0);
    for i in 0..d {
        res[(i, i)] += 1.0;
    }
    let residual = res.frobenius();
    let eig_q = symmetric_eigenvalues(&q)?;
    let c1 = eig_q[0];
    let c2 = eig_q[eig_q.len() - 1];
    let beta = spectral_norm(&q.matmul(a));
    let q_rows = (0..d)
        .map(|i| (0..d).map(|j| q[(i, j)]).collect())
        .collect();
    Ok(LyapunovResult {
        q_mat: q_rows,
        residual,
        c1,
        c2,
        beta,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IserlesReport {
    pub hurwitz: bool,
    /// Spectral radius of B^{-1} A.
    pub rho: f64,
    pub pass: bool,
}

/// Eigenvalue criteria: B Hurwitz and `ρ(B^{-1} A) < 1`.
pub fn check_iserles(b: &Mat, a: &Mat) -> Result<IserlesReport, MultidimError> {
    let eigs = eigenvalues(b)?;
    let hurwitz = eigs.iter().all(|z| z.re < 0.0);
    let m = solve_matrix(b, a).map_err(|e| match e {
        LinalgError::Singular => MultidimError::SingularB,
        other => MultidimError::Linalg(other),
    })?;
    let rho = eigenvalues(&m)?
        .into_iter()
        .map(|z| z.abs())
        .fold(0.0, f64::max);
    Ok(IserlesReport {
        hurwitz,
        rho,
        pass: hurwitz && rho < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabCond2Report {
    /// 4 ||QA||²
    pub lhs: f64,
    /// c1/c2
    pub rhs: f64,
    pub pass: bool,
}

/// Energy condition `4 ||QA||² < c1/c2`: sufficient (with B Hurwitz) for
/// vanishing perturbations to leave solutions convergent.
pub fn check_stabcond2(b: &Mat, a: &Mat) -> Result<StabCond2Report, MultidimError> {
    let ly = lyapunov_solve(b, a)?;
    let lhs = 4.0 * ly.beta * ly.beta;
    let rhs = ly.c1 / ly.c2;
    Ok(StabCond2Report {
        lhs,
        rhs,
        pass: lhs < rhs,
    })
}

/// Row-reduced scalar noise intensity `σ_i(t) = (Σ_j σ_ij²(t))^{1/2}`.
pub fn sigma_row(sigma: &[Vec<NoiseSpec>], i: usize, t: f64) -> f64 {
    sigma[i]
        .iter()
        .map(|s| s.eval(t).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// S_i classification: the S(ε) machinery applied to the row-reduced
/// intensity, with the window integrals summed over the drivers.
pub fn s_i_classification(
    sigma: &[Vec<NoiseSpec>],
    i: usize,
    epsilons: &[f64],
    n_max: usize,
) -> Result<(Vec<SVerdict>, SOverall), MultidimError> {
    let mut v = vec![0.0; n_max];
    for spec in &sigma[i] {
        for (n, slot) in v.iter_mut().enumerate() {
            *slot += spec.integrate_square(n as f64, n as f64 + 1.0)?;
        }
    }
    let (verdicts, _sums, overall) = classify_s_from_windows(&v, epsilons);
    Ok((verdicts, overall))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultidimMethod {
    EulerMaruyama,
    Decomposed,
}

/// Solve the d-dimensional forced pantograph SDE on the paths' shared
/// uniform grid. `paths[j]` drives the j-th noise column; path coupling
/// uses direct row sums `Σ_j σ_ij ΔW_j`.
pub fn solve_multidim(
    mp: &MatrixParams,
    paths: &[BrownianPath],
    x0: &[f64],
    method: MultidimMethod,
) -> Result<DenseSolution, MultidimError> {
    mp.validate()?;
    let d = mp.dim();
    let r = mp.drivers();
    if paths.len() != r {
        return Err(MultidimError::DimensionMismatch(format!(
            "{} paths supplied for r = {r}",
            paths.len()
        )));
    }
    if x0.len() != d {
        return Err(MultidimError::DimensionMismatch(format!(
            "x0 has {} components for d = {d}",
            x0.len()
        )));
    }
    let times = &paths[0].times;
    if times.is_empty() || times[0] != 0.0 {
        return Err(MultidimError::InvalidParams("grid must start at 0".into()));
    }
    for p in paths.iter().skip(1) {
        if p.times != *times {
            return Err(MultidimError::DimensionMismatch(
                "all driver paths must share one grid".into(),
            ));
        }
    }
    match method {
        MultidimMethod::EulerMaruyama => {
            let mut sol = DenseSolution::new(d, Interp::Linear);
            let mut x = x0.to_vec();
            sol.append(0.0, &x, None)?;
            let mut xq = vec![0.0; d];
            let mut drift = vec![0.0; d];
            let mut tmp = vec![0.0; d];
            for k in 0..times.len() - 1 {
                let (t, te) = (times[k], times[k + 1]);
                let h = te - t;
                sol.eval_into(mp.q * t, &mut xq)?;
                mp.b_mat.matvec(&x, &mut drift);
                mp.a_mat.matvec(&xq, &mut tmp);
                for i in 0..d {
                    drift[i] += tmp[i] + mp.f[i].eval(t);
                }
                for i in 0..d {
                    let mut shot = 0.0;
                    for (j, p) in paths.iter().enumerate() {
                        shot += mp.sigma[i][j].eval(t) * p.increments[k];
                    }
                    x[i] += h * drift[i] + shot;
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(MultidimError::Det(DetError::NonFinite { t: te }));
                }
                sol.append(te, &x, None)?;
            }
            Ok(sol)
        }
        MultidimMethod::Decomposed => Ok(solve_multidim_decomposed(mp, paths, x0)?.x),
    }
}

/// Components of the decomposed multidimensional solve: X = Z + Y with Y
/// the OU-type vector SDE and Z the pathwise-C¹ delay ODE.
#[derive(Debug, Clone)]
pub struct MultidimDecomposition {
    pub x: DenseSolution,
    pub z: DenseSolution,
    pub y: DenseSolution,
}

/// Decomposed solve returning all components (the plain entry point
/// discards Z and Y).
pub fn solve_multidim_decomposed(
    mp: &MatrixParams,
    paths: &[BrownianPath],
    x0: &[f64],
) -> Result<MultidimDecomposition, MultidimError> {
    mp.validate()?;
    let d = mp.dim();
    let times = &paths[0].times;
    // Component-wise coupled Y: dY_i = (-Y_i + f_i) dt + Σ_j σ_ij dW_j,
    // exact decay plus Gauss–Legendre for the drift convolution and
    // midpoint row sums for the shot noise (the scalar Coupled rule).
    let mut y = DenseSolution::new(d, Interp::Linear);
    let mut yk = vec![0.0; d];
    y.append(0.0, &yk, None)?;
    for k in 0..times.len() - 1 {
        let (t, te) = (times[k], times[k + 1]);
        let h = te - t;
        let decay = (-h).exp();
        let half = (-0.5 * h).exp();
        let tm = t + 0.5 * h;
        for i in 0..d {
            let drive = crate::det::convolve_exp_kernel(&mp.f[i], t, te)?;
            let mut shot = 0.0;
            for (j, p) in paths.iter().enumerate() {
                shot += half * mp.sigma[i][j].eval(tm) * p.increments[k];
            }
            yk[i] = decay * yk[i] + drive + shot;
        }
        if yk.iter().any(|v| !v.is_finite()) {
            return Err(MultidimError::Det(DetError::NonFinite { t: te }));
        }
        y.append(te, &yk, None)?;
    }
    // φ(t) = (I + B) Y(t) + A Y(qt), tabulated on the grid.
    let mut phi = DenseSolution::new(d, Interp::Linear);
    let mut yq = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    for (k, &t) in times.iter().enumerate() {
        y.eval_into(mp.q * t, &mut yq)?;
        let yt = y.path.value(k);
        mp.b_mat.matvec(yt, &mut v);
        mp.a_mat.matvec(&yq, &mut tmp);
        for i in 0..d {
            v[i] += yt[i] + tmp[i];
        }
        phi.append(t, &v, None)?;
    }
    let sys = DelaySystem {
        bmat: &mp.b_mat,
        amat: &mp.a_mat,
        q: mp.q,
        forcing: VectorForcing::Table(&phi),
    };
    let z_dense = rk4_delay_solve(&sys, x0, times)?;
    let mut z = DenseSolution::new(d, Interp::Linear);
    let mut x = DenseSolution::new(d, Interp::Linear);
    let mut zv = vec![0.0; d];
    for (k, &t) in times.iter().enumerate() {
        z_dense.eval_into(t, &mut zv)?;
        z.append(t, &zv, None)?;
        let yv = y.path.value(k);
        for i in 0..d {
            zv[i] += yv[i];
        }
        x.append(t, &zv, None)?;
    }
    Ok(MultidimDecomposition { x, z, y })
}

/// Energy `z(t) = Z^T Q Z` along a d-dimensional trajectory.
pub fn energy_along(sol: &DenseSolution, q_mat: &Mat) -> Vec<(f64, f64)> {
    let d = sol.dim();
    let mut out = Vec::with_capacity(sol.len());
    let mut qz = vec![0.0; d];
    for (k, &t) in sol.path.times.iter().enumerate() {
        let zv = sol.path.value(k);
        q_mat.matvec(zv, &mut qz);
        let e: f64 = zv.iter().zip(&qz).map(|(a, b)| a * b).sum();
        out.push((t, e));
    }
    out
}

/// Sampled check of the energy differential inequality along Z: at nodes
/// where the energy exceeds its sup over a neighbourhood of the delayed
/// argument (the regime where the inequality forces decay), the central
/// numerical derivative should be negative on average. Returns
/// `(mean slope over triggered nodes, triggered count)`.
pub fn energy_decay_when_dominating(
    z_traj: &DenseSolution,
    q_mat: &Mat,
    q: f64,
    margin: f64,
) -> (f64, usize) {
    let energy = energy_along(z_traj, q_mat);
    let times: Vec<f64> = energy.iter().map(|p| p.0).collect();
    let vals: Vec<f64> = energy.iter().map(|p| p.1).collect();
    let mut slope_sum = 0.0;
    let mut count = 0usize;
    for k in 1..times.len() - 1 {
        let t = times[k];
        let target = q * t;
        if target <= times[0] {
            continue;
        }
        // Delayed-neighbourhood sup over ±2% of the delayed time.
        let lo = times.partition_point(|&s| s < target * 0.98);
        let hi = times.partition_point(|&s| s <= target * 1.02).max(lo + 1);
        let delayed_sup = vals[lo..hi.min(vals.len())]
            .iter()
            .fold(0.0f64, |m, &v| m.max(v));
        if vals[k] > (1.0 + margin) * delayed_sup && delayed_sup > 0.0 {
            slope_sum += (vals[k + 1] - vals[k - 1]) / (times[k + 1] - times[k - 1]);
            count += 1;
        }
    }
    (
        if count > 0 {
            slope_sum / count as f64
        } else {
            0.0
        },
        count,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det::{uniform_times, PantographParams};
    use crate::stoch::{sample_brownian, solve_sdde, SddeMethod};

    fn mat2(rows: [[f64; 2]; 2]) -> Mat {
        Mat::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).unwrap()
    }

    #[test]
    fn lyapunov_diagonal() {
        // B = diag(-1, -2): Q = diag(1/2, 1/4).
        let b = mat2([[-1.0, 0.0], [0.0, -2.0]]);
        let a = mat2([[0.1, 0.05], [0.0, 0.1]]);
        let r = lyapunov_solve(&b, &a).unwrap();
        assert!((r.q_mat[0][0] - 0.5).abs() < 1e-12);
        assert!((r.q_mat[1][1] - 0.25).abs() < 1e-12);
        assert!((r.c1 - 0.25).abs() < 1e-12);
        assert!((r.c2 - 0.5).abs() < 1e-12);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn lyapunov_identity_and_jordan() {
        let b = mat2([[-1.0, 0.0], [0.0, -1.0]]);
        let a = mat2([[0.1, 0.0], [0.0, 0.1]]);
        let r = lyapunov_solve(&b, &a).unwrap();
        assert!((r.q_mat[0][0] - 0.5).abs() < 1e-12 && (r.q_mat[1][1] - 0.5).abs() < 1e-12);

        // Jordan-ish block: hand-checkable elimination gives
        // Q = [[0.5, 0.25], [0.25, 0.75]].
        let b = mat2([[-1.0, 1.0], [0.0, -1.0]]);
        let r = lyapunov_solve(&b, &a).unwrap();
        assert!((r.q_mat[0][0] - 0.5).abs() < 1e-12, "{:?}", r.q_mat);
        assert!((r.q_mat[0][1] - 0.25).abs() < 1e-12);
        assert!((r.q_mat[1][1] - 0.75).abs() < 1e-12);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn lyapunov_rejects_non_hurwitz() {
        let b = mat2([[1.0, 0.0], [0.0, -1.0]]);
        let a = mat2([[0.1, 0.0], [0.0, 0.1]]);
        assert!(matches!(
            lyapunov_solve(&b, &a),
            Err(MultidimError::NotHurwitz { .. })
        ));
    }

    #[test]
    fn lyapunov_random_hurwitz_battery() {
        // Hurwitz by construction: B = -M^T M - μ I.
        let mut seed = 0x243f6a8885a308d3u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for d in [2usize, 3, 5, 8] {
            let mut m = Mat::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = next();
                }
            }
            let mut b = m.transpose().matmul(&m);
            for x in b.data.iter_mut() {
                *x = -*x;
            }
            for i in 0..d {
                b[(i, i)] -= 0.3;
            }
            let a = Mat::identity(d);
            let r = lyapunov_solve(&b, &a).unwrap();
            assert!(r.residual <= 1e-10, "d={d}: residual {}", r.residual);
            assert!(r.c1 > 0.0, "d={d}: Q not positive definite");
        }
    }

    #[test]
    fn iserles_cases() {
        let b = mat2([[-1.0, 0.0], [0.0, -1.0]]);
        let half = mat2([[0.5, 0.0], [0.0, 0.5]]);
        let two = mat2([[2.0, 0.0], [0.0, 2.0]]);
        let r = check_iserles(&b, &half).unwrap();
        assert!(r.pass && (r.rho - 0.5).abs() < 1e-10);
        let r = check_iserles(&b, &two).unwrap();
        assert!(!r.pass && (r.rho - 2.0).abs() < 1e-10);
        // Triangular case: B^{-1}A has eigenvalues -0.1, -0.05.
        let b = mat2([[-1.0, 0.0], [0.0, -2.0]]);
        let a = mat2([[0.1, 0.05], [0.0, 0.1]]);
        let r = check_iserles(&b, &a).unwrap();
        assert!((r.rho - 0.1).abs() < 1e-10, "rho = {}", r.rho);
    }

    #[test]
    fn stabcond2_reference_case() {
        let b = mat2([[-1.0, 0.0], [0.0, -2.0]]);
        let a = mat2([[0.1, 0.05], [0.0, 0.1]]);
        let r = check_stabcond2(&b, &a).unwrap();
        assert!((r.rhs - 0.5).abs() < 1e-12);
        // QA = [[0.05, 0.025], [0, 0.025]]: spectral norm from the 2x2
        // singular-value formula gives lhs ≈ 0.0131.
        assert!(
            (r.lhs - 0.01309016994374948).abs() < 1e-10,
            "lhs = {}",
            r.lhs
        );
        assert!(r.pass);
        // Tiny A passes trivially.
        let eps = mat2([[1e-6, 0.0], [0.0, 1e-6]]);
        assert!(check_stabcond2(&b, &eps).unwrap().pass);
    }

    #[test]
    fn stabcond2_scalar_reduction() {
        // d = 1: the condition reduces to |a/b| < 1 exactly.
        let b = Mat::from_rows(&[vec![-1.0]]).unwrap();
        for (a_val, expect) in [(0.5, true), (1.5, false)] {
            let a = Mat::from_rows(&[vec![a_val]]).unwrap();
            let r = check_stabcond2(&b, &a).unwrap();
            // lhs = 4 (Q a)² with Q = 1/2: (a/b)².
            assert!((r.lhs - a_val * a_val).abs() < 1e-12);
            assert!((r.rhs - 1.0).abs() < 1e-12);
            assert_eq!(r.pass, expect, "a = {a_val}");
        }
    }

    #[test]
    fn sigma_row_pythagoras() {
        let sigma = vec![vec![
            ForcingSpec::Constant { c: 3.0 },
            ForcingSpec::Constant { c: 4.0 },
        ]];
        assert!((sigma_row(&sigma, 0, 2.0) - 5.0).abs() < 1e-14);
        // Zero row: S_i all-finite vacuously (zero terms).
        let zero_row = vec![vec![ForcingSpec::Zero, ForcingSpec::Zero]];
        let (verdicts, overall) = s_i_classification(&zero_row, 0, &[0.1, 1.0], 1500).unwrap();
        assert!(verdicts.iter().all(|&v| v == SVerdict::Convergent));
        assert!(matches!(overall, SOverall::AllFinite));
        // Exponentially decaying row reduces to the scalar classification.
        let row = vec![vec![
            ForcingSpec::Exponential { c: 1.0, rate: -1.0 },
            ForcingSpec::Exponential { c: 1.0, rate: -1.0 },
        ]];
        let (_v, overall) = s_i_classification(&row, 0, &[0.1, 1.0], 1500).unwrap();
        assert!(matches!(overall, SOverall::AllFinite));
    }

    #[test]
    fn d1_reduces_to_scalar_sdde() {
        let p = PantographParams::new(0.5, -1.0, 0.5).unwrap();
        let times = uniform_times(1e-3, 3.0);
        let path = sample_brownian(&times, 99, 5).unwrap();
        let scalar = solve_sdde(
            &p,
            &ForcingSpec::Constant { c: 0.3 },
            &ForcingSpec::Constant { c: 0.4 },
            &path,
            1.0,
            SddeMethod::EulerMaruyama,
        )
        .unwrap();
        let mp = MatrixParams {
            b_mat: Mat::from_rows(&[vec![-1.0]]).unwrap(),
            a_mat: Mat::from_rows(&[vec![0.5]]).unwrap(),
            q: 0.5,
            sigma: vec![vec![ForcingSpec::Constant { c: 0.4 }]],
            f: vec![ForcingSpec::Constant { c: 0.3 }],
        };
        let vector = solve_multidim(
            &mp,
            std::slice::from_ref(&path),
            &[1.0],
            MultidimMethod::EulerMaruyama,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for k in 0..scalar.len() {
            worst = worst.max((scalar.path.value(k)[0] - vector.path.value(k)[0]).abs());
        }
        assert!(worst <= 1e-12, "scalar embedding defect {worst}");

        let scalar_d = solve_sdde(
            &p,
            &ForcingSpec::Constant { c: 0.3 },
            &ForcingSpec::Constant { c: 0.4 },
            &path,
            1.0,
            SddeMethod::Decomposed,
        )
        .unwrap();
        let vector_d = solve_multidim(
            &mp,
            std::slice::from_ref(&path),
            &[1.0],
            MultidimMethod::Decomposed,
        )
        .unwrap();
        let mut worst = 0.0f64;
        for k in 0..scalar_d.len() {
            worst = worst.max((scalar_d.path.value(k)[0] - vector_d.path.value(k)[0]).abs());
        }
        assert!(worst <= 1e-12, "decomposed embedding defect {worst}");
    }

    #[test]
    fn energy_inequality_sampled_on_noisy_z() {
        // Z from the decomposition is pathwise C1; at nodes where its
        // Lyapunov energy dominates the delayed-window sup, the averaged
        // numerical derivative must be negative when the stability
        // condition holds (tolerance: strictly below zero on average,
        // >= 20 triggered samples).
        let b = mat2([[-1.0, 0.0], [0.0, -2.0]]);
        let a = mat2([[0.1, 0.05], [0.0, 0.1]]);
        let ly = lyapunov_solve(&b, &a).unwrap();
        assert!(check_stabcond2(&b, &a).unwrap().pass);
        let qm = Mat::from_rows(&[ly.q_mat[0].clone(), ly.q_mat[1].clone()]).unwrap();
        let mp = MatrixParams {
            b_mat: b,
            a_mat: a,
            q: 0.5,
            sigma: vec![
                vec![ForcingSpec::Exponential { c: 1.0, rate: -0.2 }],
                vec![ForcingSpec::Exponential { c: 0.5, rate: -0.2 }],
            ],
            f: vec![ForcingSpec::Zero, ForcingSpec::Zero],
        };
        let times = uniform_times(5e-3, 40.0);
        let mut total_slope = 0.0;
        let mut total_count = 0usize;
        for stream in 0..8u64 {
            let path = sample_brownian(&times, 2718, stream).unwrap();
            let parts = solve_multidim_decomposed(&mp, &[path], &[1.0, -0.5]).unwrap();
            let (slope, count) = energy_decay_when_dominating(&parts.z, &qm, 0.5, 0.05);
            total_slope += slope * count as f64;
            total_count += count;
        }
        assert!(total_count >= 20, "only {total_count} triggered samples");
        let mean = total_slope / total_count as f64;
        assert!(mean < 0.0, "mean slope {mean} over {total_count} samples");
    }

    #[test]
    fn energy_decreases_for_stable_system() {
        // Deterministic decaying run: the Lyapunov energy should trend
        // down once the stability condition holds.
        let b = mat2([[-1.0, 0.0], [0.0, -2.0]]);
        let a = mat2([[0.1, 0.05], [0.0, 0.1]]);
        let ly = lyapunov_solve(&b, &a).unwrap();
        let qm = Mat::from_rows(&[ly.q_mat[0].clone(), ly.q_mat[1].clone()]).unwrap();
        let mp = MatrixParams {
            b_mat: b,
            a_mat: a,
            q: 0.5,
            sigma: vec![vec![ForcingSpec::Zero], vec![ForcingSpec::Zero]],
            f: vec![ForcingSpec::Zero, ForcingSpec::Zero],
        };
        let times = uniform_times(1e-2, 20.0);
        let path = sample_brownian(&times, 1, 0).unwrap();
        let sol =
            solve_multidim(&mp, &[path], &[1.0, -0.5], MultidimMethod::EulerMaruyama).unwrap();
        let e = energy_along(&sol, &qm);
        assert!(e.last().unwrap().1 < 1e-3 * e.first().unwrap().1);
    }
}
