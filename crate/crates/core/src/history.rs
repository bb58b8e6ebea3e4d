//! Trajectory storage with dense output.
//!
//! Solvers for equations with proportional delay need the *whole* computed
//! past: evaluating `x'(t) = b x(t) + a x(qt) + f(t)` requires `x` at the
//! delayed argument `qt`, which may fall anywhere in `[0, t]`. A
//! [`DenseSolution`] stores node values (and optionally node derivatives)
//! on a strictly increasing, possibly non-uniform grid and interpolates
//! between them, either linearly or with cubic Hermite segments.
//!
//! Cubic Hermite matches the fourth-order accuracy of the RK4 stepper and
//! costs no extra derivative evaluations: the ODE right-hand side *is* the
//! node derivative.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Errors from history construction and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryError {
    /// Appended time is not strictly greater than the last stored time.
    NonMonotoneTime { last: f64, attempted: f64 },
    /// A value, derivative or time is NaN or infinite.
    NonFinite,
    /// Evaluation time lies outside the stored range.
    OutOfDomain { t: f64, first: f64, last: f64 },
    /// Vector length does not match the path dimension.
    DimensionMismatch { expected: usize, got: usize },
    /// Hermite interpolation requested but no derivatives stored.
    MissingDerivatives,
    /// Malformed CSV input.
    Csv(String),
}

impl fmt::Display for HistoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonMonotoneTime { last, attempted } => {
                write!(
                    f,
                    "append time {attempted} not greater than last time {last}"
                )
            }
            Self::NonFinite => write!(f, "non-finite time, value or derivative"),
            Self::OutOfDomain { t, first, last } => {
                write!(
                    f,
                    "evaluation time {t} outside stored range [{first}, {last}]"
                )
            }
            Self::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Self::MissingDerivatives => write!(f, "cubic Hermite requires stored derivatives"),
            Self::Csv(msg) => write!(f, "csv: {msg}"),
        }
    }
}

impl std::error::Error for HistoryError {}

/// Interpolation scheme between stored nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Linear,
    CubicHermite,
}

/// A sampled trajectory: strictly increasing times, a d-vector per node,
/// and optionally node-exact derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flattened row-major: `values[k*dim..(k+1)*dim]` is node k.
    pub values: Vec<f64>,
    pub derivs: Option<Vec<f64>>,
}

impl SampledPath {
    pub fn new(dim: usize) -> Self {
        SampledPath {
            dim,
            times: Vec::new(),
            values: Vec::new(),
            derivs: None,
        }
    }

    pub fn with_derivs(dim: usize) -> Self {
        SampledPath {
            dim,
            times: Vec::new(),
            values: Vec::new(),
            derivs: Some(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn deriv(&self, k: usize) -> Option<&[f64]> {
        self.derivs
            .as_ref()
            .map(|d| &d[k * self.dim..(k + 1) * self.dim])
    }

    pub fn push(&mut self, t: f64, v: &[f64], dv: Option<&[f64]>) -> Result<(), HistoryError> {
        if v.len() != self.dim {
            return Err(HistoryError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if let Some(dv) = dv {
            if dv.len() != self.dim {
                return Err(HistoryError::DimensionMismatch {
                    expected: self.dim,
                    got: dv.len(),
                });
            }
        }
        if !t.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(HistoryError::NonFinite);
        }
        if let Some(dv) = dv {
            if dv.iter().any(|x| !x.is_finite()) {
                return Err(HistoryError::NonFinite);
            }
        }
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(HistoryError::NonMonotoneTime { last, attempted: t });
            }
        }
        match (&mut self.derivs, dv) {
            (Some(store), Some(dv)) => store.extend_from_slice(dv),
            (None, None) => {}
            (Some(_), None) => return Err(HistoryError::MissingDerivatives),
            (None, Some(_)) => {
                // First node decides whether the path carries derivatives.
                if self.times.is_empty() {
                    self.derivs = Some(dv.unwrap().to_vec());
                } else {
                    return Err(HistoryError::MissingDerivatives);
                }
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(v);
        Ok(())
    }
}

/// A trajectory plus an interpolation rule. Evaluation at a stored node
/// returns the stored value bit-exactly; between nodes the two bracketing
/// nodes alone determine the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSolution {
    pub path: SampledPath,
    pub interp: Interp,
}

impl DenseSolution {
    pub fn new(dim: usize, interp: Interp) -> Self {
        let path = match interp {
            Interp::CubicHermite => SampledPath::with_derivs(dim),
            Interp::Linear => SampledPath::new(dim),
        };
        DenseSolution { path, interp }
    }

    pub fn from_path(path: SampledPath, interp: Interp) -> Result<Self, HistoryError> {
        if interp == Interp::CubicHermite && path.derivs.is_none() {
            return Err(HistoryError::MissingDerivatives);
        }
        Ok(DenseSolution { path, interp })
    }

    /// Tabulate a scalar function (with derivative) on the given grid.
    pub fn tabulate_scalar<F, G>(times: &[f64], f: F, df: G) -> Result<Self, HistoryError>
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
    {
        let mut sol = DenseSolution::new(1, Interp::CubicHermite);
        for &t in times {
            sol.append(t, &[f(t)], Some(&[df(t)]))?;
        }
        Ok(sol)
    }

    pub fn dim(&self) -> usize {
        self.path.dim
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    pub fn first_time(&self) -> Option<f64> {
        self.path.times.first().copied()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.path.times.last().copied()
    }

    /// Append a node, extending the dense domain to `t`.
    pub fn append(&mut self, t: f64, v: &[f64], dv: Option<&[f64]>) -> Result<(), HistoryError> {
        if self.interp == Interp::CubicHermite && dv.is_none() {
            return Err(HistoryError::MissingDerivatives);
        }
        self.path.push(t, v, dv)
    }

    /// Index of the segment containing `t`, via binary search.
    fn bracket(&self, t: f64) -> Result<usize, HistoryError> {
        let times = &self.path.times;
        let n = times.len();
        if n == 0 {
            return Err(HistoryError::OutOfDomain {
                t,
                first: f64::NAN,
                last: f64::NAN,
            });
        }
        let (first, last) = (times[0], times[n - 1]);
        if t < first || t > last {
            return Err(HistoryError::OutOfDomain { t, first, last });
        }
        // partition_point gives the first index with times[i] > t.
        let i = times.partition_point(|&x| x <= t);
        if i >= n {
            Ok(if n >= 2 { n - 2 } else { 0 })
        } else {
            Ok(i.saturating_sub(1))
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        let dim = self.path.dim;
        if out.len() != dim {
            return Err(HistoryError::DimensionMismatch {
                expected: dim,
                got: out.len(),
            });
        }
        let i = self.bracket(t)?;
        let times = &self.path.times;
        // Node hit: return stored value exactly.
        if t == times[i] {
            out.copy_from_slice(self.path.value(i));
            return Ok(());
        }
        if i + 1 < times.len() && t == times[i + 1] {
            out.copy_from_slice(self.path.value(i + 1));
            return Ok(());
        }
        if self.path.len() == 1 {
            out.copy_from_slice(self.path.value(0));
            return Ok(());
        }
        let (t0, t1) = (times[i], times[i + 1]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let y0 = self.path.value(i);
        let y1 = self.path.value(i + 1);
        match self.interp {
            Interp::Linear => {
                for j in 0..dim {
                    out[j] = y0[j] + u * (y1[j] - y0[j]);
                }
            }
            Interp::CubicHermite => {
                let d = self
                    .path
                    .derivs
                    .as_ref()
                    .ok_or(HistoryError::MissingDerivatives)?;
                let d0 = &d[i * dim..(i + 1) * dim];
                let d1 = &d[(i + 1) * dim..(i + 2) * dim];
                let u2 = u * u;
                let u3 = u2 * u;
                let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
                let h10 = u3 - 2.0 * u2 + u;
                let h01 = -2.0 * u3 + 3.0 * u2;
                let h11 = u3 - u2;
                for j in 0..dim {
                    out[j] = h00 * y0[j] + h10 * h * d0[j] + h01 * y1[j] + h11 * h * d1[j];
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, HistoryError> {
        let mut out = vec![0.0; self.path.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Scalar convenience for one-dimensional paths.
    pub fn eval_scalar(&self, t: f64) -> Result<f64, HistoryError> {
        let mut out = [0.0];
        self.eval_into(t, &mut out)?;
        Ok(out[0])
    }

    /// Derivative of the interpolant at `t` (piecewise constant slope for
    /// linear paths).
    pub fn eval_deriv_scalar(&self, t: f64) -> Result<f64, HistoryError> {
        if self.path.dim != 1 {
            return Err(HistoryError::DimensionMismatch {
                expected: 1,
                got: self.path.dim,
            });
        }
        let i = self.bracket(t)?;
        let times = &self.path.times;
        if self.path.len() == 1 {
            return Ok(self.path.deriv(0).map(|d| d[0]).unwrap_or(0.0));
        }
        let i = i.min(times.len() - 2);
        let (t0, t1) = (times[i], times[i + 1]);
        let h = t1 - t0;
        let u = (t - t0) / h;
        let y0 = self.path.value(i)[0];
        let y1 = self.path.value(i + 1)[0];
        match self.interp {
            Interp::Linear => Ok((y1 - y0) / h),
            Interp::CubicHermite => {
                let d = self
                    .path
                    .derivs
                    .as_ref()
                    .ok_or(HistoryError::MissingDerivatives)?;
                let d0 = d[i];
                let d1 = d[i + 1];
                let u2 = u * u;
                let dh00 = 6.0 * u2 - 6.0 * u;
                let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
                let dh01 = -6.0 * u2 + 6.0 * u;
                let dh11 = 3.0 * u2 - 2.0 * u;
                Ok((dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1)
            }
        }
    }

    /// Like `eval_into` but permits `t` slightly past the last node, using
    /// the final node's linear extension. Bootstrap helper for steppers
    /// whose delayed stage argument overshoots the computed front.
    pub(crate) fn eval_into_or_extrapolate(
        &self,
        t: f64,
        out: &mut [f64],
    ) -> Result<(), HistoryError> {
        match self.eval_into(t, out) {
            Ok(()) => Ok(()),
            Err(HistoryError::OutOfDomain { .. }) => {
                let n = self.path.len();
                if n == 0 {
                    return Err(HistoryError::OutOfDomain {
                        t,
                        first: f64::NAN,
                        last: f64::NAN,
                    });
                }
                let tl = self.path.times[n - 1];
                if t < tl {
                    return Err(HistoryError::OutOfDomain {
                        t,
                        first: self.path.times[0],
                        last: tl,
                    });
                }
                let dim = self.path.dim;
                let v = self.path.value(n - 1);
                for j in 0..dim {
                    let slope = match self.path.deriv(n - 1) {
                        Some(d) => d[j],
                        None if n >= 2 => {
                            (v[j] - self.path.value(n - 2)[j]) / (tl - self.path.times[n - 2])
                        }
                        None => 0.0,
                    };
                    out[j] = v[j] + slope * (t - tl);
                }
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    #[allow(dead_code)]
    pub(crate) fn eval_scalar_or_extrapolate(&self, t: f64) -> Result<f64, HistoryError> {
        match self.eval_scalar(t) {
            Ok(v) => Ok(v),
            Err(HistoryError::OutOfDomain { .. }) => {
                let n = self.path.len();
                if n == 0 {
                    return Err(HistoryError::OutOfDomain {
                        t,
                        first: f64::NAN,
                        last: f64::NAN,
                    });
                }
                let tl = self.path.times[n - 1];
                if t < tl {
                    return Err(HistoryError::OutOfDomain {
                        t,
                        first: self.path.times[0],
                        last: tl,
                    });
                }
                let v = self.path.value(n - 1)[0];
                let slope = match self.path.deriv(n - 1) {
                    Some(d) => d[0],
                    None if n >= 2 => {
                        (v - self.path.value(n - 2)[0]) / (tl - self.path.times[n - 2])
                    }
                    None => 0.0,
                };
                Ok(v + slope * (t - tl))
            }
            Err(e) => Err(e),
        }
    }
}

/// Format with 17 significant digits, enough to round-trip any f64.
pub fn fmt_full(x: f64) -> String {
    format!("{:.16e}", x)
}

/// CSV serialization: header `t,v0[,v1,...][,d0,...]`, one node per row,
/// full double precision.
pub fn to_csv(sol: &DenseSolution) -> String {
    let dim = sol.path.dim;
    let mut s = String::from("t");
    for j in 0..dim {
        s.push_str(&format!(",v{j}"));
    }
    if sol.path.derivs.is_some() {
        for j in 0..dim {
            s.push_str(&format!(",d{j}"));
        }
    }
    s.push('\n');
    for k in 0..sol.path.len() {
        s.push_str(&fmt_full(sol.path.times[k]));
        for v in sol.path.value(k) {
            s.push(',');
            s.push_str(&fmt_full(*v));
        }
        if let Some(d) = sol.path.deriv(k) {
            for v in d {
                s.push(',');
                s.push_str(&fmt_full(*v));
            }
        }
        s.push('\n');
    }
    s
}

/// Parse the CSV format produced by [`to_csv`]. Derivative columns, when
/// present, select cubic Hermite interpolation.
pub fn from_csv(text: &str) -> Result<DenseSolution, HistoryError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| HistoryError::Csv("empty input".into()))?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    if cols.is_empty() || cols[0] != "t" {
        return Err(HistoryError::Csv(format!(
            "expected leading 't' column, got {header:?}"
        )));
    }
    let dim = cols.iter().filter(|c| c.starts_with('v')).count();
    let nder = cols.iter().filter(|c| c.starts_with('d')).count();
    if dim == 0 {
        return Err(HistoryError::Csv("no value columns".into()));
    }
    if nder != 0 && nder != dim {
        return Err(HistoryError::Csv(format!(
            "{nder} deriv columns for {dim} values"
        )));
    }
    let interp = if nder > 0 {
        Interp::CubicHermite
    } else {
        Interp::Linear
    };
    let mut sol = DenseSolution::new(dim, interp);
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + dim + nder {
            return Err(HistoryError::Csv(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                1 + dim + nder,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, HistoryError> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| HistoryError::Csv(format!("row {}: {e}", lineno + 2)))
        };
        let t = parse(fields[0])?;
        let mut v = Vec::with_capacity(dim);
        for fsub in &fields[1..1 + dim] {
            v.push(parse(fsub)?);
        }
        if nder > 0 {
            let mut d = Vec::with_capacity(dim);
            for fsub in &fields[1 + dim..] {
                d.push(parse(fsub)?);
            }
            sol.append(t, &v, Some(&d))?;
        } else {
            sol.append(t, &v, None)?;
        }
    }
    Ok(sol)
}
