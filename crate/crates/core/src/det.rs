//! Deterministic solvers for the forced pantograph equation
//! `x'(t) = b x(t) + a x(qt) + f(t)`, general unbounded-delay equations,
//! and the auxiliary ODE `y' = -y + f`, plus an independent Taylor-series
//! oracle.
//!
//! # Stepping modes
//!
//! `UniformTime` is classic fixed-step RK4 with cubic-Hermite dense output;
//! delayed stage values come from the stored history. The first few steps
//! are special: a stage argument `q(t + h)` can exceed the computed front
//! when `t < qh/(1-q)`, so those steps are filled from the Taylor oracle
//! (or, for forcings with no power series, by fine substeps with one-node
//! extrapolation).
//!
//! `LogTime` is the long-horizon mode. Under `s = ln t` the proportional
//! delay becomes the constant lag `|ln q|`, so with `Δs = |ln q|/m` the
//! delayed argument of a node is again a node, and a horizon of `10^6`
//! costs a few thousand nodes. The instantaneous term `b x` is stiff on
//! this grid (`Δt ~ t·Δs` exceeds the explicit RK4 stability limit once
//! `|b| t Δs` is order one), so each step integrates the variation-of-
//! constants form exactly: the kernel `e^{b(t_{k+1}-τ)}` is applied to a
//! degree-5 collocation of the slow part `a x(qτ) + f(τ)` with
//! analytically computed kernel moments.

use crate::forcing::{ForcingError, ForcingSpec};
use crate::history::{DenseSolution, HistoryError, Interp};
use crate::linalg::{solve_dense, Mat};
use crate::quad::gl5;
use serde::{Deserialize, Serialize};
use std::fmt;

const MAX_NODES: usize = 100_000_000;
const TAYLOR_MAX_ORDER: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub enum DetError {
    InvalidParams(String),
    Grid(String),
    /// Taylor radius insufficient for the bootstrap span; shrink h.
    Bootstrap(String),
    OrderTooLarge {
        order: usize,
        max: usize,
    },
    StepTooLarge {
        h: f64,
        tau_min: f64,
    },
    NonFinite {
        t: f64,
    },
    History(HistoryError),
    Forcing(ForcingError),
}

impl fmt::Display for DetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidParams(m) => write!(f, "invalid parameters: {m}"),
            Self::Grid(m) => write!(f, "grid error: {m}"),
            Self::Bootstrap(m) => write!(f, "bootstrap error: {m}"),
            Self::OrderTooLarge { order, max } => {
                write!(f, "taylor order {order} exceeds max {max}")
            }
            Self::StepTooLarge { h, tau_min } => {
                write!(f, "step {h} not below minimal delay {tau_min}")
            }
            Self::NonFinite { t } => write!(f, "solution became non-finite near t = {t}"),
            Self::History(e) => write!(f, "history: {e}"),
            Self::Forcing(e) => write!(f, "forcing: {e}"),
        }
    }
}

impl std::error::Error for DetError {}

impl From<HistoryError> for DetError {
    fn from(e: HistoryError) -> Self {
        DetError::History(e)
    }
}

impl From<ForcingError> for DetError {
    fn from(e: ForcingError) -> Self {
        DetError::Forcing(e)
    }
}

/// Coefficients of the scalar pantograph equation with derived asymptotic
/// constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PantographParams {
    pub a: f64,
    pub b: f64,
    pub q: f64,
}

impl PantographParams {
    pub fn new(a: f64, b: f64, q: f64) -> Result<Self, DetError> {
        if a == 0.0 || !a.is_finite() {
            return Err(DetError::InvalidParams(format!(
                "a must be nonzero finite, got {a}"
            )));
        }
        if !b.is_finite() {
            return Err(DetError::InvalidParams("b must be finite".into()));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(DetError::InvalidParams(format!(
                "q must lie in (0,1), got {q}"
            )));
        }
        Ok(PantographParams { a, b, q })
    }

    /// Decay exponent `κ = -ln|b/a| / ln(1/q)`; `None` when b = 0.
    pub fn kappa(&self) -> Option<f64> {
        if self.b == 0.0 {
            None
        } else {
            Some(-(self.b / self.a).abs().ln() / (1.0 / self.q).ln())
        }
    }

    /// `c = ln q < 0`
    pub fn log_delay(&self) -> f64 {
        self.q.ln()
    }

    /// `α = |a/b|`
    pub fn alpha(&self) -> f64 {
        (self.a / self.b).abs()
    }

    /// All unforced solutions tend to zero iff `b < 0` and `|b| > |a|`.
    pub fn stable(&self) -> bool {
        self.b < 0.0 && self.b.abs() > self.a.abs()
    }
}

/// Time grids. `LogTime` stores the integer substep count per delay fold so
/// `Δs = |ln q|/m` divides the lag exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridSpec {
    UniformTime {
        h: f64,
        t_end: f64,
    },
    LogTime {
        steps_per_delay: usize,
        t0: f64,
        t_end: f64,
    },
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), DetError> {
        match *self {
            GridSpec::UniformTime { h, t_end } => {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(DetError::Grid(format!("h must be positive, got {h}")));
                }
                if !(t_end > 0.0 && t_end.is_finite()) {
                    return Err(DetError::Grid(format!(
                        "t_end must be positive, got {t_end}"
                    )));
                }
                let nodes = (t_end / h).ceil();
                if nodes > MAX_NODES as f64 {
                    return Err(DetError::Grid(format!(
                        "{nodes:.0} nodes exceed the {MAX_NODES} cap"
                    )));
                }
            }
            GridSpec::LogTime {
                steps_per_delay,
                t0,
                t_end,
            } => {
                if steps_per_delay < 4 {
                    return Err(DetError::Grid(format!(
                        "steps_per_delay must be >= 4, got {steps_per_delay}"
                    )));
                }
                if !(t0 > 0.0 && t0.is_finite()) {
                    return Err(DetError::Grid(format!("t0 must be positive, got {t0}")));
                }
                if !(t_end > t0) {
                    return Err(DetError::Grid(format!(
                        "t_end = {t_end} must exceed t0 = {t0}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Uniform node times `0, h, 2h, ..., t_end` (final node clipped to land
/// exactly on `t_end`).
pub(crate) fn uniform_times(h: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / h - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(n + 1);
    for k in 0..n {
        times.push(k as f64 * h);
    }
    times.push(t_end);
    times
}

/// Taylor coefficients of the pantograph solution about t = 0:
/// `c_0 = x0`, `(n+1) c_{n+1} = (b + a q^n) c_n + f_n`.
pub fn taylor_oracle(
    params: &PantographParams,
    f_coeffs: &[f64],
    x0: f64,
    order: usize,
) -> Result<Vec<f64>, DetError> {
    if order > TAYLOR_MAX_ORDER {
        return Err(DetError::OrderTooLarge {
            order,
            max: TAYLOR_MAX_ORDER,
        });
    }
    let mut c = Vec::with_capacity(order + 1);
    c.push(x0);
    let mut qn = 1.0;
    for n in 0..order {
        let fn_ = f_coeffs.get(n).copied().unwrap_or(0.0);
        let next = ((params.b + params.a * qn) * c[n] + fn_) / (n as f64 + 1.0);
        c.push(next);
        qn *= params.q;
    }
    Ok(c)
}

/// Horner evaluation of a power series.
pub fn eval_series(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coeffs.iter().rev() {
        acc = acc * t + c;
    }
    acc
}

/// Derivative of the power series at `t`.
pub fn eval_series_deriv(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for k in (1..coeffs.len()).rev() {
        acc = acc * t + k as f64 * coeffs[k];
    }
    acc
}

/// Vector forcing view used by the shared RK4 engine.
pub(crate) enum VectorForcing<'a> {
    Scalar(&'a ForcingSpec),
    Table(&'a DenseSolution),
}

impl<'a> VectorForcing<'a> {
    fn dim(&self) -> usize {
        match self {
            VectorForcing::Scalar(_) => 1,
            VectorForcing::Table(t) => t.dim(),
        }
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), DetError> {
        match self {
            VectorForcing::Scalar(f) => {
                out[0] = f.eval(t);
                Ok(())
            }
            VectorForcing::Table(table) => {
                table.eval_into(t, out)?;
                Ok(())
            }
        }
    }

    /// Per-component Taylor coefficients (time-major) with joint radius.
    fn taylor_coeffs(&self, order: usize) -> Option<(Vec<Vec<f64>>, f64)> {
        match self {
            VectorForcing::Scalar(f) => {
                let (c, r) = f.taylor_coeffs(order)?;
                Some((c.into_iter().map(|x| vec![x]).collect(), r))
            }
            VectorForcing::Table(_) => None,
        }
    }
}

/// Linear delayed system `x' = B x + A x(qt) + f(t)` for the RK4 engine
/// (scalar runs are the 1x1 case).
pub(crate) struct DelaySystem<'a> {
    pub bmat: &'a Mat,
    pub amat: &'a Mat,
    pub q: f64,
    pub forcing: VectorForcing<'a>,
}

impl<'a> DelaySystem<'a> {
    fn dim(&self) -> usize {
        self.bmat.rows
    }

    fn rhs(
        &self,
        t: f64,
        x: &[f64],
        xq: &[f64],
        scratch: &mut [f64],
        out: &mut [f64],
    ) -> Result<(), DetError> {
        self.bmat.matvec(x, out);
        self.amat.matvec(xq, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += s;
        }
        self.forcing.eval_into(t, scratch)?;
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += s;
        }
        Ok(())
    }
}

/// Vector Taylor recursion `(n+1) c_{n+1} = (B + A q^n) c_n + f_n`.
fn taylor_vec(
    sys: &DelaySystem<'_>,
    f_coeffs: &[Vec<f64>],
    x0: &[f64],
    order: usize,
) -> Vec<Vec<f64>> {
    let d = sys.dim();
    let mut coeffs = Vec::with_capacity(order + 1);
    coeffs.push(x0.to_vec());
    let mut qn = 1.0;
    let mut tmp1 = vec![0.0; d];
    let mut tmp2 = vec![0.0; d];
    for n in 0..order {
        sys.bmat.matvec(&coeffs[n], &mut tmp1);
        sys.amat.matvec(&coeffs[n], &mut tmp2);
        let mut next = vec![0.0; d];
        let zero = vec![0.0; d];
        let fn_ = f_coeffs.get(n).unwrap_or(&zero);
        for i in 0..d {
            next[i] = (tmp1[i] + qn * tmp2[i] + fn_[i]) / (n as f64 + 1.0);
        }
        coeffs.push(next);
        qn *= sys.q;
    }
    coeffs
}

fn eval_series_vec(coeffs: &[Vec<f64>], t: f64, out: &mut [f64]) {
    out.fill(0.0);
    for c in coeffs.iter().rev() {
        for (o, &ci) in out.iter_mut().zip(c.iter()) {
            *o = *o * t + ci;
        }
    }
}

fn eval_series_deriv_vec(coeffs: &[Vec<f64>], t: f64, out: &mut [f64]) {
    out.fill(0.0);
    for k in (1..coeffs.len()).rev() {
        for (j, o) in out.iter_mut().enumerate() {
            *o = *o * t + k as f64 * coeffs[k][j];
        }
    }
}

/// One RK4 step with delayed stage values drawn from `hist`; the closure
/// maps a delayed time to the lookup argument (proportional or general
/// delay).
fn rk4_step(
    sys: &DelaySystem<'_>,
    hist: &DenseSolution,
    t: f64,
    h: f64,
    x: &[f64],
    delayed: &mut dyn FnMut(&DenseSolution, f64, &mut [f64]) -> Result<(), DetError>,
    out: &mut [f64],
) -> Result<(), DetError> {
    let d = x.len();
    let mut xq = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut stage = vec![0.0; d];

    delayed(hist, sys.q * t, &mut xq)?;
    sys.rhs(t, x, &xq, &mut scratch, &mut k1)?;

    let tm = t + 0.5 * h;
    delayed(hist, sys.q * tm, &mut xq)?;
    for i in 0..d {
        stage[i] = x[i] + 0.5 * h * k1[i];
    }
    sys.rhs(tm, &stage, &xq, &mut scratch, &mut k2)?;

    for i in 0..d {
        stage[i] = x[i] + 0.5 * h * k2[i];
    }
    sys.rhs(tm, &stage, &xq, &mut scratch, &mut k3)?;

    let te = t + h;
    delayed(hist, sys.q * te, &mut xq)?;
    for i in 0..d {
        stage[i] = x[i] + h * k3[i];
    }
    sys.rhs(te, &stage, &xq, &mut scratch, &mut k4)?;

    for i in 0..d {
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

/// RK4 solve of `x' = B x + A x(qt) + f` on `times` (strictly increasing,
/// starting at 0). Early steps whose delayed stage argument would exceed
/// the computed front are bootstrapped from the Taylor series when the
/// forcing has one, otherwise by 64x substeps with front extrapolation.
pub(crate) fn rk4_delay_solve(
    sys: &DelaySystem<'_>,
    x0: &[f64],
    times: &[f64],
) -> Result<DenseSolution, DetError> {
    let d = sys.dim();
    if sys.forcing.dim() != d || sys.amat.rows != d || x0.len() != d {
        return Err(DetError::InvalidParams(
            "dimension mismatch in delay system".into(),
        ));
    }
    if times.len() < 2 || times[0] != 0.0 {
        return Err(DetError::Grid(
            "times must start at 0 with at least two nodes".into(),
        ));
    }
    let q = sys.q;
    // Steps whose stage delays outrun the front: t < q h/(1-q).
    let boot_steps = ((q / (1.0 - q)).ceil() as usize + 1).min(times.len() - 1);
    let t_boot = times[boot_steps];

    let mut sol = DenseSolution::new(d, Interp::CubicHermite);
    let mut xq = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut deriv = vec![0.0; d];

    let order = 24.min(TAYLOR_MAX_ORDER);
    match sys.forcing.taylor_coeffs(order) {
        Some((fc, radius)) if radius > t_boot => {
            let coeffs = taylor_vec(sys, &fc, x0, order);
            // Remainder check: the last retained term must be negligible at
            // the bootstrap edge.
            let mut scale = 0.0f64;
            let mut val = vec![0.0; d];
            eval_series_vec(&coeffs, t_boot, &mut val);
            for v in &val {
                scale = scale.max(v.abs());
            }
            let tail: f64 = coeffs[order]
                .iter()
                .map(|c| (c * t_boot.powi(order as i32)).abs())
                .sum();
            if !tail.is_finite() || tail > 1e-9 * scale.max(1.0) {
                return Err(DetError::Bootstrap(format!(
                    "taylor tail {tail:.3e} too large over [0, {t_boot}]; shrink h"
                )));
            }
            for &t in &times[..=boot_steps] {
                eval_series_vec(&coeffs, t, &mut val);
                eval_series_deriv_vec(&coeffs, t, &mut deriv);
                sol.append(t, &val, Some(&deriv))?;
            }
        }
        _ => {
            // No usable series: crawl to t_boot with fine substeps, letting
            // delayed stage arguments extrapolate at most one substep past
            // the front.
            let mut extrapolating = |hist: &DenseSolution, targ: f64, out: &mut [f64]| {
                hist.eval_into_or_extrapolate(targ, out)
                    .map_err(DetError::from)
            };
            sys.forcing.eval_into(0.0, &mut scratch)?;
            let mut x = x0.to_vec();
            {
                let mut k1 = vec![0.0; d];
                // x'(0) = B x0 + A x0 + f(0): the delayed argument at t = 0 is 0.
                sys.bmat.matvec(&x, &mut k1);
                sys.amat.matvec(&x, &mut deriv);
                for i in 0..d {
                    deriv[i] += k1[i] + scratch[i];
                }
            }
            sol.append(0.0, &x, Some(&deriv))?;
            let mut next = vec![0.0; d];
            for w in times[..=boot_steps].windows(2) {
                let sub = 64;
                let hs = (w[1] - w[0]) / sub as f64;
                for s in 0..sub {
                    let ts = w[0] + s as f64 * hs;
                    rk4_step(sys, &sol, ts, hs, &x, &mut extrapolating, &mut next)?;
                    let te = if s + 1 == sub { w[1] } else { ts + hs };
                    if next.iter().any(|v| !v.is_finite()) {
                        return Err(DetError::NonFinite { t: te });
                    }
                    // The delayed argument q*te may sit past the current
                    // front; extrapolation keeps the stored deriv within
                    // the bootstrap's own error budget.
                    sol.eval_into_or_extrapolate(q * te, &mut xq)?;
                    sys.rhs(te, &next, &xq, &mut scratch, &mut deriv)?;
                    sol.append(te, &next, Some(&deriv))?;
                    x.copy_from_slice(&next);
                }
            }
        }
    }

    // Main march: delayed stage arguments stay within the front from here
    // on (t >= q h / (1-q)), including the new node's own derivative.
    let mut strict = |hist: &DenseSolution, targ: f64, out: &mut [f64]| {
        hist.eval_into(targ, out).map_err(DetError::from)
    };
    let mut x = sol.path.value(sol.len() - 1).to_vec();
    let mut next = vec![0.0; d];
    for w in times[boot_steps..].windows(2) {
        let (t, te) = (w[0], w[1]);
        rk4_step(sys, &sol, t, te - t, &x, &mut strict, &mut next)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(DetError::NonFinite { t: te });
        }
        sol.eval_into(q * te, &mut xq)?;
        sys.rhs(te, &next, &xq, &mut scratch, &mut deriv)?;
        sol.append(te, &next, Some(&deriv))?;
        x.copy_from_slice(&next);
    }
    Ok(sol)
}

/// Initial data for the pantograph solve: a point value at t = 0, or a
/// dense history segment covering `[q t0, t0]` (LogTime mode only).
pub enum InitialData<'a> {
    Value(f64),
    History(&'a DenseSolution),
}

/// Solve the forced pantograph equation from `x(0) = x0`.
pub fn solve_pantograph(
    params: &PantographParams,
    f: &ForcingSpec,
    x0: f64,
    grid: &GridSpec,
) -> Result<DenseSolution, DetError> {
    solve_pantograph_with(params, f, &InitialData::Value(x0), grid)
}

/// Solve with explicit initial data (history segments feed manufactured-
/// solution runs, where the exact solution is prescribed on `[q t0, t0]`).
pub fn solve_pantograph_with(
    params: &PantographParams,
    f: &ForcingSpec,
    init: &InitialData<'_>,
    grid: &GridSpec,
) -> Result<DenseSolution, DetError> {
    grid.validate()?;
    match *grid {
        GridSpec::UniformTime { h, t_end } => {
            let x0 = match init {
                InitialData::Value(v) => *v,
                InitialData::History(_) => {
                    return Err(DetError::Grid(
                        "history initial data requires the log-time grid".into(),
                    ))
                }
            };
            let bmat = Mat::from_rows(&[vec![params.b]]).unwrap();
            let amat = Mat::from_rows(&[vec![params.a]]).unwrap();
            let sys = DelaySystem {
                bmat: &bmat,
                amat: &amat,
                q: params.q,
                forcing: VectorForcing::Scalar(f),
            };
            let times = uniform_times(h, t_end);
            rk4_delay_solve(&sys, &[x0], &times)
        }
        GridSpec::LogTime {
            steps_per_delay,
            t0,
            t_end,
        } => solve_logtime(params, f, init, steps_per_delay, t0, t_end),
    }
}

/// Kernel moments `m_k = ∫_0^1 v^k e^{z(1-v)} dv`, k = 0..order.
/// Series for small |z|, the stable forward recurrence otherwise.
fn kernel_moments(z: f64, order: usize, out: &mut [f64]) {
    if z.abs() < 15.0 {
        for (k, slot) in out.iter_mut().enumerate().take(order + 1) {
            // m_k = k! Σ_l z^l / (k+l+1)!
            let mut term = 1.0 / (k as f64 + 1.0); // l = 0 term: k!/(k+1)!
            let mut acc = term;
            for l in 1..200 {
                term *= z / (k as f64 + l as f64 + 1.0);
                acc += term;
                if term.abs() < 1e-18 * acc.abs().max(1e-30) {
                    break;
                }
            }
            *slot = acc;
        }
    } else {
        // Integration by parts of d/dv[v^k e^{z(1-v)}] over [0,1] gives
        // k m_{k-1} - z m_k = 1. The forward recurrence damps by 1/|z|
        // per level, so it is the stable direction for large |z|.
        out[0] = (z.exp() - 1.0) / z;
        for k in 1..=order {
            out[k] = (k as f64 * out[k - 1] - 1.0) / z;
        }
    }
}

/// Gauss–Legendre collocation abscissae on [0,1], 6 points.
const COLLOC: [f64; 6] = [
    0.03376524289842399,
    0.16939530676686776,
    0.3806904069584015,
    0.6193095930415985,
    0.8306046932331322,
    0.966234757101576,
];

fn solve_logtime(
    params: &PantographParams,
    f: &ForcingSpec,
    init: &InitialData<'_>,
    m: usize,
    t0: f64,
    t_end: f64,
) -> Result<DenseSolution, DetError> {
    let (a, b, q) = (params.a, params.b, params.q);
    let ds = (1.0 / q).ln() / m as f64;
    let n_march = ((t_end / t0).ln() / ds - 1e-9).ceil().max(1.0) as usize;
    if n_march + m + 1 > MAX_NODES {
        return Err(DetError::Grid("log-time grid exceeds node cap".into()));
    }
    // Node j sits at t0 e^{(j-m) ds}; j = m is the anchor t0, j < m is the
    // bootstrap segment down to q t0.
    let node_time = |j: usize| t0 * ((j as f64 - m as f64) * ds).exp();

    let mut sol = DenseSolution::new(1, Interp::CubicHermite);

    // Bootstrap segment [q t0, t0].
    match init {
        InitialData::Value(x0) => {
            // Crawl from zero on a uniform grid, then resample.
            let h_boot = t0 / 512.0;
            let pre = solve_pantograph(
                params,
                f,
                *x0,
                &GridSpec::UniformTime {
                    h: h_boot,
                    t_end: t0,
                },
            )?;
            for j in 0..=m {
                let t = node_time(j).min(t0);
                let v = pre.eval_scalar(t)?;
                let xq = pre.eval_scalar(q * t)?;
                let dv = b * v + a * xq + f.eval(t);
                sol.append(t, &[v], Some(&[dv]))?;
            }
        }
        InitialData::History(seg) => {
            let lo = seg.first_time().unwrap_or(f64::INFINITY);
            let hi = seg.last_time().unwrap_or(f64::NEG_INFINITY);
            if lo > q * t0 * (1.0 + 1e-12) || hi < t0 * (1.0 - 1e-12) {
                return Err(DetError::Bootstrap(format!(
                    "history [{lo}, {hi}] does not cover [{}, {t0}]",
                    q * t0
                )));
            }
            for j in 0..=m {
                let t = node_time(j).min(hi).max(lo);
                let v = seg.eval_scalar(t)?;
                let dv = seg.eval_deriv_scalar(t)?;
                sol.append(t, &[v], Some(&[dv]))?;
            }
        }
    }

    // Precompute (V^T)^{-1} for the collocation weights.
    let p = COLLOC.len();
    let mut vt = Mat::zeros(p, p);
    for (i, &v) in COLLOC.iter().enumerate() {
        let mut pw = 1.0;
        for k in 0..p {
            vt[(k, i)] = pw; // row k holds v_i^k: (V^T)[k][i]
            pw *= v;
        }
    }

    let mut moments = vec![0.0; p];
    let mut weights = vec![0.0; p];
    let mut g = vec![0.0; p];
    // q * tau equals a stored node up to rounding at the left edge of the
    // first step; clamp so a one-ulp undershoot cannot leave the domain.
    let first_node = sol.path.times[0];
    for j in m..m + n_march {
        let t_from = sol.path.times[j];
        let t_to = node_time(j + 1);
        let delta = t_to - t_from;
        let z = b * delta;
        kernel_moments(z, p - 1, &mut moments);
        let w =
            solve_dense(&vt, &moments).map_err(|e| DetError::Grid(format!("collocation: {e}")))?;
        weights.copy_from_slice(&w);
        for (i, &v) in COLLOC.iter().enumerate() {
            let tau = t_from + v * delta;
            let xq = sol.eval_scalar((q * tau).max(first_node))?;
            g[i] = a * xq + f.eval(tau);
        }
        let decay = z.exp();
        let x_prev = sol.path.value(j)[0];
        let mut x_new = decay * x_prev;
        for i in 0..p {
            x_new += delta * weights[i] * g[i];
        }
        if !x_new.is_finite() {
            return Err(DetError::NonFinite { t: t_to });
        }
        // Delayed node value is exactly node j + 1 - m.
        let xq_node = sol.path.value(j + 1 - m)[0];
        let dv = b * x_new + a * xq_node + f.eval(t_to);
        sol.append(t_to, &[x_new], Some(&[dv]))?;
    }
    Ok(sol)
}

/// Delay function families for the general unbounded-delay equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DelayFn {
    Constant {
        tau: f64,
    },
    /// τ(t) = t/2 + 1, so the delayed argument is t/2 - 1.
    HalfTPlusOne,
    /// τ(t) = p t + r with 0 <= p < 1, r > 0.
    Affine {
        p: f64,
        r: f64,
    },
}

impl DelayFn {
    pub fn tau(&self, t: f64) -> f64 {
        match *self {
            DelayFn::Constant { tau } => tau,
            DelayFn::HalfTPlusOne => 0.5 * t + 1.0,
            DelayFn::Affine { p, r } => p * t + r,
        }
    }

    /// Minimal delay over t >= 0.
    pub fn tau_min(&self) -> f64 {
        match *self {
            DelayFn::Constant { tau } => tau,
            DelayFn::HalfTPlusOne => 1.0,
            DelayFn::Affine { r, .. } => r,
        }
    }

    /// τ̄ = -inf_{t>=0} (t - τ(t)): the initial function must reach back
    /// this far.
    pub fn tau_bar(&self) -> f64 {
        match *self {
            DelayFn::Constant { tau } => tau,
            DelayFn::HalfTPlusOne => 1.0,
            DelayFn::Affine { r, .. } => r,
        }
    }

    pub fn validate(&self) -> Result<(), DetError> {
        match *self {
            DelayFn::Constant { tau } => {
                if !(tau > 0.0) {
                    return Err(DetError::InvalidParams(format!(
                        "tau must be > 0, got {tau}"
                    )));
                }
            }
            DelayFn::HalfTPlusOne => {}
            DelayFn::Affine { p, r } => {
                if !(0.0..1.0).contains(&p) || !(r > 0.0) {
                    return Err(DetError::InvalidParams(format!(
                        "affine delay needs 0 <= p < 1, r > 0; got p={p}, r={r}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// General-delay problem: delay family plus initial function ψ on [-τ̄, 0].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralDelaySpec {
    pub delay: DelayFn,
    pub initial: ForcingSpec,
}

/// RK4 for `x'(t) = b x(t) + a x(t - τ(t)) + f(t)`. Enforces `h < τ_min`,
/// so delayed stage arguments never outrun the front and negative
/// arguments go to the initial function.
pub fn solve_general_delay(
    b: f64,
    a: f64,
    spec: &GeneralDelaySpec,
    f: &ForcingSpec,
    grid: &GridSpec,
) -> Result<DenseSolution, DetError> {
    spec.delay.validate()?;
    grid.validate()?;
    let (h, t_end) = match *grid {
        GridSpec::UniformTime { h, t_end } => (h, t_end),
        _ => {
            return Err(DetError::Grid(
                "general delay solver requires uniform grid".into(),
            ))
        }
    };
    let tau_min = spec.delay.tau_min();
    if h >= tau_min {
        return Err(DetError::StepTooLarge { h, tau_min });
    }
    let psi = &spec.initial;
    let times = uniform_times(h, t_end);
    let mut sol = DenseSolution::new(1, Interp::CubicHermite);
    let x0 = psi.eval(0.0);
    let lag0 = -spec.delay.tau(0.0);
    let d0 = b * x0 + a * psi.eval(lag0) + f.eval(0.0);
    sol.append(0.0, &[x0], Some(&[d0]))?;

    let delayed_value = |sol: &DenseSolution, t: f64| -> Result<f64, DetError> {
        let arg = t - spec.delay.tau(t);
        if arg <= 0.0 {
            Ok(psi.eval(arg))
        } else {
            Ok(sol.eval_scalar(arg)?)
        }
    };

    let mut x = x0;
    for w in times.windows(2) {
        let (t, te) = (w[0], w[1]);
        let hh = te - t;
        let tm = t + 0.5 * hh;
        let xd1 = delayed_value(&sol, t)?;
        let k1 = b * x + a * xd1 + f.eval(t);
        let xdm = delayed_value(&sol, tm)?;
        let k2 = b * (x + 0.5 * hh * k1) + a * xdm + f.eval(tm);
        let k3 = b * (x + 0.5 * hh * k2) + a * xdm + f.eval(tm);
        let xde = delayed_value(&sol, te)?;
        let k4 = b * (x + hh * k3) + a * xde + f.eval(te);
        let xn = x + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !xn.is_finite() {
            return Err(DetError::NonFinite { t: te });
        }
        let dn = b * xn + a * xde + f.eval(te);
        sol.append(te, &[xn], Some(&[dn]))?;
        x = xn;
    }
    Ok(sol)
}

/// Exponential-integrator solve of the auxiliary ODE `y' = -y + f(t)`,
/// `y(0) = 0`: exact decay per step plus Gauss–Legendre quadrature of the
/// convolution integral (substepped for oscillatory forcings).
pub fn solve_aux_y(f: &ForcingSpec, grid: &GridSpec) -> Result<DenseSolution, DetError> {
    grid.validate()?;
    let (h, t_end) = match *grid {
        GridSpec::UniformTime { h, t_end } => (h, t_end),
        _ => {
            return Err(DetError::Grid(
                "aux ODE solver requires uniform grid".into(),
            ))
        }
    };
    let times = uniform_times(h, t_end);
    solve_aux_y_times(f, &times)
}

/// As [`solve_aux_y`] on an explicit strictly increasing grid starting at 0.
pub(crate) fn solve_aux_y_times(f: &ForcingSpec, times: &[f64]) -> Result<DenseSolution, DetError> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(DetError::Grid("aux grid must start at 0".into()));
    }
    let mut sol = DenseSolution::new(1, Interp::CubicHermite);
    let mut y = 0.0;
    sol.append(0.0, &[0.0], Some(&[f.eval(0.0)]))?;
    for w in times.windows(2) {
        let (t, te) = (w[0], w[1]);
        y = (t - te).exp() * y + convolve_exp_kernel(f, t, te)?;
        if !y.is_finite() {
            return Err(DetError::NonFinite { t: te });
        }
        sol.append(te, &[y], Some(&[-y + f.eval(te)]))?;
    }
    Ok(sol)
}

/// `∫_a^b e^{-(b - u)} f(u) du` with the forcing module's panel rules.
pub(crate) fn convolve_exp_kernel(f: &ForcingSpec, a: f64, b: f64) -> Result<f64, DetError> {
    let mut pts = vec![a, b];
    f.breakpoints(a, b, &mut pts);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut t = lo;
        while t < hi {
            let cap = f.osc_substep(t).min(0.5);
            let next = if hi - t <= cap { hi } else { t + cap };
            total += gl5(|u| (u - b).exp() * f.eval(u), t, next);
            t = next;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{manufactured_phi, ZSpec};

    fn std_params() -> PantographParams {
        PantographParams::new(0.5, -1.0, 0.5).unwrap()
    }

    #[test]
    fn params_derived_constants() {
        let p = std_params();
        assert!((p.kappa().unwrap() + 1.0).abs() < 1e-15);
        assert!(p.stable());
        assert!((p.alpha() - 0.5).abs() < 1e-15);
        assert!((p.log_delay() - 0.5f64.ln()).abs() < 1e-15);
        // |a| = |b| gives kappa = 0
        let p0 = PantographParams::new(1.0, -1.0, 0.3).unwrap();
        assert_eq!(p0.kappa().unwrap(), 0.0);
        // a = 0.25 gives kappa = -2
        let p2 = PantographParams::new(0.25, -1.0, 0.5).unwrap();
        assert!((p2.kappa().unwrap() + 2.0).abs() < 1e-15);
        assert!(PantographParams::new(0.0, -1.0, 0.5).is_err());
        assert!(PantographParams::new(0.5, -1.0, 1.5).is_err());
    }

    #[test]
    fn taylor_oracle_examples() {
        let p = std_params();
        let c = taylor_oracle(&p, &[], 1.0, 5).unwrap();
        assert!((c[1] + 0.5).abs() < 1e-15);
        assert!((c[2] - 0.1875).abs() < 1e-15);
        assert!((c[3] + 0.0546875).abs() < 1e-15);
        // zero initial condition stays zero
        let cz = taylor_oracle(&p, &[], 0.0, 10).unwrap();
        assert!(cz.iter().all(|&x| x == 0.0));
        // constant forcing: c1 = f0
        let cf = taylor_oracle(&p, &[1.0], 0.0, 3).unwrap();
        assert!((cf[1] - 1.0).abs() < 1e-15);
        assert!(taylor_oracle(&p, &[], 1.0, 61).is_err());
    }

    #[test]
    fn series_value_frozen() {
        // x(0.1) for a=0.5, b=-1, q=0.5, x0=1, from the coefficient
        // recursion summed in extended precision (independently
        // cross-checked against a fine RK4 run).
        let p = std_params();
        let c = taylor_oracle(&p, &[], 1.0, 40).unwrap();
        let x01 = eval_series(&c, 0.1);
        assert!((x01 - 0.9518215698063258).abs() < 1e-14, "x(0.1) = {x01}");
        let x1 = eval_series(&c, 1.0);
        assert!((x1 - 0.6435026592814430).abs() < 1e-13, "x(1) = {x1}");
    }

    #[test]
    fn rk4_matches_oracle() {
        let p = std_params();
        let sol = solve_pantograph(
            &p,
            &ForcingSpec::Zero,
            1.0,
            &GridSpec::UniformTime {
                h: 1e-3,
                t_end: 1.0,
            },
        )
        .unwrap();
        let c = taylor_oracle(&p, &[], 1.0, 40).unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in sol.path.times.iter().enumerate() {
            let err = (sol.path.value(k)[0] - eval_series(&c, t)).abs();
            worst = worst.max(err);
        }
        assert!(worst <= 1e-8, "max err {worst}");
    }

    #[test]
    fn rk4_order_four() {
        // Truncation must dominate roundoff for the ratio to be clean, so
        // measure at coarse steps.
        let p = std_params();
        let c = taylor_oracle(&p, &[], 1.0, 40).unwrap();
        let err_at = |h: f64| {
            let sol = solve_pantograph(
                &p,
                &ForcingSpec::Zero,
                1.0,
                &GridSpec::UniformTime { h, t_end: 1.0 },
            )
            .unwrap();
            let mut worst = 0.0f64;
            for (k, &t) in sol.path.times.iter().enumerate() {
                worst = worst.max((sol.path.value(k)[0] - eval_series(&c, t)).abs());
            }
            worst
        };
        let e1 = err_at(0.05);
        let e2 = err_at(0.025);
        let ratio = e1 / e2;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "ratio {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn uniform_grid_node_cap() {
        let g = GridSpec::UniformTime {
            h: 1e-9,
            t_end: 1e3,
        };
        assert!(matches!(g.validate(), Err(DetError::Grid(_))));
        assert!(matches!(
            GridSpec::LogTime {
                steps_per_delay: 3,
                t0: 1.0,
                t_end: 10.0
            }
            .validate(),
            Err(DetError::Grid(_))
        ));
    }

    #[test]
    fn zero_equilibrium_is_exact() {
        let p = std_params();
        let sol = solve_pantograph(
            &p,
            &ForcingSpec::Zero,
            0.0,
            &GridSpec::UniformTime {
                h: 1e-2,
                t_end: 3.0,
            },
        )
        .unwrap();
        assert!(sol.path.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_pure_power_logtime() {
        // Initial history t^{-1} on [0.5, 1]; the solution must stay t^{-1}.
        let p = std_params();
        let kappa = -1.0;
        let phi = manufactured_phi(ZSpec::PurePower { d: 1.0, kappa }, p.a, p.b, p.q).unwrap();
        let times: Vec<f64> = (0..=64)
            .map(|j| 0.5 * (2.0f64).powf(j as f64 / 64.0))
            .collect();
        let hist = DenseSolution::tabulate_scalar(
            &times,
            |t| t.powf(kappa),
            |t| kappa * t.powf(kappa - 1.0),
        )
        .unwrap();
        let sol = solve_pantograph_with(
            &p,
            &phi,
            &InitialData::History(&hist),
            &GridSpec::LogTime {
                steps_per_delay: 16,
                t0: 1.0,
                t_end: 100.0,
            },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in sol.path.times.iter().enumerate() {
            if t < 1.0 {
                continue;
            }
            let rel = (sol.path.value(k)[0] - t.powf(kappa)).abs() / t.powf(kappa);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-6, "manufactured rel err {worst}");
    }

    #[test]
    fn manufactured_log_periodic_logtime() {
        // Oscillatory manufactured target: z = t^κ {C + sin(2π ln t / ln(1/q))}
        // + D t^κ ∫_q^t ψ, with integrable ψ. Exercises the log-periodic
        // family and the stepper on a non-monotone exact solution.
        let p = std_params();
        let zspec = crate::forcing::ZSpec::PowerLogPeriodic {
            c: 2.0,
            d: 1.0,
            kappa: -1.0,
            psi: crate::forcing::PsiFamily::InvTLogSq,
        };
        let phi = manufactured_phi(zspec.clone(), p.a, p.b, p.q).unwrap();
        let times: Vec<f64> = (0..=128)
            .map(|j| 0.5 * (2.0f64).powf(j as f64 / 128.0))
            .collect();
        let hist =
            DenseSolution::tabulate_scalar(&times, |t| zspec.eval(t, p.q), |t| zspec.deriv(t, p.q))
                .unwrap();
        let sol = solve_pantograph_with(
            &p,
            &phi,
            &InitialData::History(&hist),
            &GridSpec::LogTime {
                steps_per_delay: 40,
                t0: 1.0,
                t_end: 1e3,
            },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in sol.path.times.iter().enumerate() {
            if t < 1.0 {
                continue;
            }
            let exact = zspec.eval(t, p.q);
            worst = worst.max((sol.path.value(k)[0] - exact).abs() / exact.abs());
        }
        assert!(worst <= 1e-5, "log-periodic manufactured rel err {worst}");

        // The bounded component oscillates, so the envelope slope sits at κ.
        let est = crate::diagnostics::estimate_exponent(
            &sol,
            &crate::diagnostics::Window { lo: 1.0, hi: 1e3 },
            &crate::diagnostics::EstimateMethod::RunMaxEnvelope,
            &Default::default(),
        )
        .unwrap();
        assert!(
            (est.exponent + 1.0).abs() <= 0.05,
            "envelope {}",
            est.exponent
        );
    }

    #[test]
    fn manufactured_power_psi_growth_family() {
        // ψ = t^ρ with ρ > -1: Ψ grows like t^{ρ+1}, so the target decays
        // slower than t^κ; the solver must still track it exactly.
        let p = std_params();
        let zspec = crate::forcing::ZSpec::PowerTimesPsiIntegral {
            d: 1.0,
            kappa: -1.0,
            psi: crate::forcing::PsiFamily::TPow { rho: -0.5 },
        };
        let phi = manufactured_phi(zspec.clone(), p.a, p.b, p.q).unwrap();
        let times: Vec<f64> = (0..=128)
            .map(|j| 0.5 * (2.0f64).powf(j as f64 / 128.0))
            .collect();
        let hist =
            DenseSolution::tabulate_scalar(&times, |t| zspec.eval(t, p.q), |t| zspec.deriv(t, p.q))
                .unwrap();
        let sol = solve_pantograph_with(
            &p,
            &phi,
            &InitialData::History(&hist),
            &GridSpec::LogTime {
                steps_per_delay: 24,
                t0: 1.0,
                t_end: 1e3,
            },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in sol.path.times.iter().enumerate() {
            if t < 2.1 {
                continue; // z crosses zero near 2: relative error undefined
            }
            let exact = zspec.eval(t, p.q);
            worst = worst.max((sol.path.value(k)[0] - exact).abs() / exact.abs().max(1e-3));
        }
        assert!(worst <= 1e-5, "t^rho psi manufactured rel err {worst}");
    }

    #[test]
    fn logtime_agrees_with_uniform() {
        let p = std_params();
        let f = ForcingSpec::Constant { c: 1.0 };
        let uni = solve_pantograph(
            &p,
            &f,
            1.0,
            &GridSpec::UniformTime {
                h: 1e-3,
                t_end: 10.0,
            },
        )
        .unwrap();
        let log = solve_pantograph(
            &p,
            &f,
            1.0,
            &GridSpec::LogTime {
                steps_per_delay: 16,
                t0: 1.0,
                t_end: 10.0,
            },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in log.path.times.iter().enumerate() {
            if t < 1.0 || t > 10.0 {
                continue;
            }
            let u = uni.eval_scalar(t).unwrap();
            let rel = (log.path.value(k)[0] - u).abs() / u.abs().max(1e-12);
            worst = worst.max(rel);
        }
        assert!(worst <= 5e-6, "grid consistency {worst}");
    }

    #[test]
    fn linearity_in_x0_and_f() {
        let p = std_params();
        let grid = GridSpec::UniformTime {
            h: 1e-2,
            t_end: 2.0,
        };
        let f1 = ForcingSpec::Constant { c: 0.7 };
        let f2 = ForcingSpec::Sinusoid {
            amplitude: 0.3,
            omega: 2.0,
            phase: 0.0,
        };
        let s1 = solve_pantograph(&p, &f1, 0.4, &grid).unwrap();
        let s2 = solve_pantograph(&p, &f2, 0.6, &grid).unwrap();
        let sum_f = ForcingSpec::Sum {
            terms: vec![f1, f2],
        };
        let s12 = solve_pantograph(&p, &sum_f, 1.0, &grid).unwrap();
        let mut worst = 0.0f64;
        for k in 0..s12.len() {
            let lin = s1.path.value(k)[0] + s2.path.value(k)[0];
            worst = worst.max((s12.path.value(k)[0] - lin).abs());
        }
        assert!(worst <= 1e-12, "linearity defect {worst}");
    }

    #[test]
    fn aux_y_closed_forms() {
        // f = 1: y(t) = 1 - e^{-t}
        let y = solve_aux_y(
            &ForcingSpec::Constant { c: 1.0 },
            &GridSpec::UniformTime {
                h: 1e-2,
                t_end: 1.0,
            },
        )
        .unwrap();
        let y1 = y.eval_scalar(1.0).unwrap();
        assert!((y1 - 0.6321205588285577).abs() < 1e-10, "y(1) = {y1}");

        // f = 0: y stays 0
        let y0 = solve_aux_y(
            &ForcingSpec::Zero,
            &GridSpec::UniformTime { h: 0.1, t_end: 2.0 },
        )
        .unwrap();
        assert!(y0.path.values.iter().all(|&v| v == 0.0));

        // f = e^{-2t}: y(t) = e^{-t} - e^{-2t}
        let y = solve_aux_y(
            &ForcingSpec::Exponential { c: 1.0, rate: -2.0 },
            &GridSpec::UniformTime {
                h: 1e-2,
                t_end: 1.0,
            },
        )
        .unwrap();
        let got = y.eval_scalar(1.0).unwrap();
        let expect = (-1.0f64).exp() - (-2.0f64).exp();
        assert!((got - expect).abs() < 1e-10, "y(1) = {got}");
    }

    #[test]
    fn general_delay_constant_tau_decouples() {
        // τ = 1, a = 0: plain x' = -x, so x(1) = e^{-1}.
        let spec = GeneralDelaySpec {
            delay: DelayFn::Constant { tau: 1.0 },
            initial: ForcingSpec::Constant { c: 1.0 },
        };
        let sol = solve_general_delay(
            -1.0,
            0.0,
            &spec,
            &ForcingSpec::Zero,
            &GridSpec::UniformTime {
                h: 1e-3,
                t_end: 1.0,
            },
        )
        .unwrap();
        let got = sol.eval_scalar(1.0).unwrap();
        assert!((got - (-1.0f64).exp()).abs() <= 1e-8, "x(1) = {got}");
    }

    #[test]
    fn general_delay_zero_stays_zero() {
        let spec = GeneralDelaySpec {
            delay: DelayFn::HalfTPlusOne,
            initial: ForcingSpec::Zero,
        };
        let sol = solve_general_delay(
            -1.0,
            0.25,
            &spec,
            &ForcingSpec::Zero,
            &GridSpec::UniformTime {
                h: 0.05,
                t_end: 10.0,
            },
        )
        .unwrap();
        assert!(sol.path.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn general_delay_step_guard() {
        let spec = GeneralDelaySpec {
            delay: DelayFn::Affine { p: 0.0, r: 0.05 },
            initial: ForcingSpec::Constant { c: 1.0 },
        };
        let err = solve_general_delay(
            -1.0,
            0.1,
            &spec,
            &ForcingSpec::Zero,
            &GridSpec::UniformTime { h: 0.1, t_end: 1.0 },
        );
        assert!(matches!(err, Err(DetError::StepTooLarge { .. })));
    }

    #[test]
    fn general_delay_halved_step_consistency() {
        let spec = GeneralDelaySpec {
            delay: DelayFn::HalfTPlusOne,
            initial: ForcingSpec::Constant { c: 1.0 },
        };
        let f = ForcingSpec::ShiftedPowerLaw { c: 1.0, beta: -1.0 };
        let a = solve_general_delay(
            -1.0,
            0.25,
            &spec,
            &f,
            &GridSpec::UniformTime {
                h: 0.02,
                t_end: 20.0,
            },
        )
        .unwrap();
        let b = solve_general_delay(
            -1.0,
            0.25,
            &spec,
            &f,
            &GridSpec::UniformTime {
                h: 0.01,
                t_end: 20.0,
            },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in a.path.times.iter().enumerate() {
            let vb = b.eval_scalar(t).unwrap();
            worst = worst.max((a.path.value(k)[0] - vb).abs());
        }
        assert!(worst <= 1e-6, "halved-step defect {worst}");
    }

    #[test]
    fn kernel_moments_match_quadrature() {
        for z in [-0.3, -5.0, -40.0, -3000.0, 0.0, 2.0] {
            let mut m = vec![0.0; 6];
            kernel_moments(z, 5, &mut m);
            // Panels must resolve the boundary layer of width 1/|z|.
            let max_h = (1.0f64 / 64.0).min(0.5 / z.abs().max(1.0));
            for k in 0..6 {
                let direct = crate::quad::composite_gl5(
                    &|v: f64| v.powi(k as i32) * (z * (1.0 - v)).exp(),
                    0.0,
                    1.0,
                    max_h,
                );
                let err = (m[k] - direct).abs() / direct.abs().max(1e-12);
                assert!(err < 1e-9, "z={z} k={k}: {} vs {direct}", m[k]);
            }
        }
    }
}
