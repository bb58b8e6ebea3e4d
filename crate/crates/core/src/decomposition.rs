//! Additive decomposition machinery: `x = z + y` (deterministic) and
//! `X = Z + Y` (stochastic), the induced perturbation
//! `φ(t) = a y(qt) + (1+b) y(t)`, and the representation identity
//!
//! `y(t) = x(t) - ξ e^{-t} - ∫_0^t e^{-(t-s)} {(1+b) x(s) + a x(qs)} ds`
//!
//! whose residual over solver output is the consistency gate for both the
//! deterministic and the stochastic route.

use crate::det::PantographParams;
use crate::forcing::ForcingSpec;
use crate::history::{DenseSolution, HistoryError, Interp};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum DecompositionError {
    /// φ tabulation needs y down to q·t0.
    OutOfDomain {
        needed: f64,
        have: f64,
    },
    GridMismatch(String),
    History(HistoryError),
}

impl fmt::Display for DecompositionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutOfDomain { needed, have } => {
                write!(f, "y must be defined down to {needed}, starts at {have}")
            }
            Self::GridMismatch(m) => write!(f, "grid mismatch: {m}"),
            Self::History(e) => write!(f, "history: {e}"),
        }
    }
}

impl std::error::Error for DecompositionError {}

impl From<HistoryError> for DecompositionError {
    fn from(e: HistoryError) -> Self {
        DecompositionError::History(e)
    }
}

/// Tabulate `φ(t) = a y(qt) + (1+b) y(t)` on y's grid as a forcing spec.
pub fn build_phi(
    y: &DenseSolution,
    params: &PantographParams,
) -> Result<ForcingSpec, DecompositionError> {
    let first = y.first_time().ok_or(DecompositionError::OutOfDomain {
        needed: 0.0,
        have: f64::NAN,
    })?;
    let needed = params.q * first;
    if first > 0.0 && first > needed + 1e-15 * first.abs() {
        // q*first < first whenever first > 0: the grid must start at 0 (or
        // the caller must supply deeper history).
        return Err(DecompositionError::OutOfDomain {
            needed,
            have: first,
        });
    }
    let mut table = DenseSolution::new(1, Interp::Linear);
    for (k, &t) in y.path.times.iter().enumerate() {
        let yq = y.eval_scalar(params.q * t)?;
        let v = params.a * yq + (1.0 + params.b) * y.path.value(k)[0];
        table.append(t, &[v], None)?;
    }
    Ok(ForcingSpec::Tabulated { table })
}

/// Max-norm residual of the representation identity over the common grid,
/// with the convolution integral accumulated by trapezoid against the
/// exponential kernel.
pub fn check_representation(
    x: &DenseSolution,
    y: &DenseSolution,
    params: &PantographParams,
) -> Result<f64, DecompositionError> {
    if x.path.times != y.path.times {
        return Err(DecompositionError::GridMismatch(
            "x and y must share their grid".into(),
        ));
    }
    let times = &x.path.times;
    if times.is_empty() || times[0] != 0.0 {
        return Err(DecompositionError::GridMismatch(
            "grid must start at 0".into(),
        ));
    }
    let xi = x.path.value(0)[0];
    let g = |k: usize, t: f64| -> Result<f64, DecompositionError> {
        let xq = x.eval_scalar(params.q * t)?;
        Ok((1.0 + params.b) * x.path.value(k)[0] + params.a * xq)
    };
    let mut integral = 0.0;
    let mut residual = 0.0f64;
    let mut g_prev = g(0, times[0])?;
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let h = t - times[k - 1];
            let g_here = g(k, t)?;
            integral = (-h).exp() * integral + 0.5 * h * ((-h).exp() * g_prev + g_here);
            g_prev = g_here;
        }
        let lhs = y.path.value(k)[0];
        let rhs = x.path.value(k)[0] - xi * (-t).exp() - integral;
        residual = residual.max((lhs - rhs).abs());
    }
    Ok(residual)
}

/// Bundle of one decomposition run: components, the induced forcing, and
/// the representation residual.
#[derive(Debug, Clone)]
pub struct DecompositionRecord {
    pub x: DenseSolution,
    pub y: DenseSolution,
    pub z: DenseSolution,
    pub phi: ForcingSpec,
    pub representation_residual: f64,
}

/// Build the record from solver output: `z = x - y` node-wise exactly.
pub fn decompose(
    x: &DenseSolution,
    y: &DenseSolution,
    params: &PantographParams,
) -> Result<DecompositionRecord, DecompositionError> {
    if x.path.times != y.path.times {
        return Err(DecompositionError::GridMismatch(
            "x and y must share their grid".into(),
        ));
    }
    let mut z = DenseSolution::new(1, Interp::Linear);
    for (k, &t) in x.path.times.iter().enumerate() {
        z.append(t, &[x.path.value(k)[0] - y.path.value(k)[0]], None)?;
    }
    let phi = build_phi(y, params)?;
    let residual = check_representation(x, y, params)?;
    Ok(DecompositionRecord {
        x: x.clone(),
        y: y.clone(),
        z,
        phi,
        representation_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det::{solve_aux_y, solve_pantograph, GridSpec};
    use crate::forcing::ForcingSpec;

    fn std_params() -> PantographParams {
        PantographParams::new(0.5, -1.0, 0.5).unwrap()
    }

    fn tab(times: &[f64], f: impl Fn(f64) -> f64) -> DenseSolution {
        let mut sol = DenseSolution::new(1, Interp::Linear);
        for &t in times {
            sol.append(t, &[f(t)], None).unwrap();
        }
        sol
    }

    #[test]
    fn phi_of_constants() {
        let p = std_params();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        // y = 0 -> φ = 0
        let phi = build_phi(&tab(&times, |_| 0.0), &p).unwrap();
        assert_eq!(phi.eval(3.3), 0.0);
        // y = 1, a = 0.5, b = -1 -> φ = 0.5
        let phi = build_phi(&tab(&times, |_| 1.0), &p).unwrap();
        assert!((phi.eval(4.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn phi_of_exponential() {
        // y = e^{-t}: (1+b) = 0 kills the instantaneous term, so
        // φ(t) = 0.5 e^{-t/2}.
        let p = std_params();
        let times: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let phi = build_phi(&tab(&times, |t| (-t).exp()), &p).unwrap();
        for t in [0.4, 1.0, 3.7] {
            let expect = 0.5 * (-t / 2.0f64).exp();
            let got = phi.eval(t);
            assert!((got - expect).abs() < 1e-4, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn representation_residual_zero_case() {
        let p = std_params();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let x = tab(&times, |_| 0.0);
        let y = tab(&times, |_| 0.0);
        assert_eq!(check_representation(&x, &y, &p).unwrap(), 0.0);
    }

    #[test]
    fn representation_residual_unperturbed() {
        // f = 0: y ≡ 0 and the identity reduces to a statement about the
        // unperturbed solution; residual is solver + trapezoid error.
        let p = std_params();
        let h = 1e-3;
        let grid = GridSpec::UniformTime { h, t_end: 5.0 };
        let x = solve_pantograph(&p, &ForcingSpec::Zero, 1.0, &grid).unwrap();
        let y = solve_aux_y(&ForcingSpec::Zero, &grid).unwrap();
        let r = check_representation(&x, &y, &p).unwrap();
        assert!(r <= 1e-5, "residual {r}");
    }

    #[test]
    fn representation_residual_order_two() {
        let p = std_params();
        let res_at = |h: f64| {
            let grid = GridSpec::UniformTime { h, t_end: 5.0 };
            let x = solve_pantograph(&p, &ForcingSpec::Constant { c: 1.0 }, 1.0, &grid).unwrap();
            let y = solve_aux_y(&ForcingSpec::Constant { c: 1.0 }, &grid).unwrap();
            check_representation(&x, &y, &p).unwrap()
        };
        let r1 = res_at(0.02);
        let r2 = res_at(0.01);
        let ratio = r1 / r2;
        assert!(
            (2.8..=5.5).contains(&ratio),
            "trapezoid order ratio {ratio} ({r1:.2e}/{r2:.2e})"
        );
    }

    #[test]
    fn roundtrip_x_equals_z_plus_y() {
        // solve_pantograph(f) minus solve_aux_y(f) must equal the solution
        // of the z-equation driven by build_phi(y).
        let p = std_params();
        let grid = GridSpec::UniformTime {
            h: 1e-3,
            t_end: 8.0,
        };
        let f = ForcingSpec::ShiftedPowerLaw { c: 1.0, beta: -1.0 };
        let x = solve_pantograph(&p, &f, 1.0, &grid).unwrap();
        let y = solve_aux_y(&f, &grid).unwrap();
        let phi = build_phi(&y, &p).unwrap();
        let z = solve_pantograph(&p, &phi, 1.0, &grid).unwrap();
        let mut worst = 0.0f64;
        for (k, &t) in x.path.times.iter().enumerate() {
            let zk = z.eval_scalar(t).unwrap();
            let yk = y.path.value(k)[0];
            worst = worst.max((x.path.value(k)[0] - (zk + yk)).abs());
        }
        assert!(worst <= 5e-6, "roundtrip defect {worst}");
    }

    #[test]
    fn decompose_record() {
        let p = std_params();
        let grid = GridSpec::UniformTime {
            h: 1e-2,
            t_end: 3.0,
        };
        let f = ForcingSpec::Constant { c: 1.0 };
        let x = solve_pantograph(&p, &f, 1.0, &grid).unwrap();
        let y = solve_aux_y(&f, &grid).unwrap();
        let rec = decompose(&x, &y, &p).unwrap();
        for k in 0..rec.z.len() {
            assert_eq!(
                rec.z.path.value(k)[0] + rec.y.path.value(k)[0],
                rec.x.path.value(k)[0]
            );
        }
        assert!(rec.representation_residual < 1e-3);
    }
}
