//! Asymptotic functionals and classifiers.
//!
//! Everything the characterization theory is stated in terms of lives
//! here: the decay exponent `κ`, the window averages
//! `f_θ(t) = ∫_{(t-θ)^+}^t f`, the noise windows `σ²₁(t)`, the series
//! `S(ε) = Σ √(∫_{n-1}^n σ²) exp(-ε ∫_{n-1}^n σ²)` whose finiteness
//! pattern decides almost-sure convergence/boundedness, growth-rate
//! estimators on solver output, the fundamental envelope sequence `K_n`, and
//! Perron ratios `log|x| / θ(t)`.
//!
//! Numerical caveats are explicit: series divergence is undecidable from
//! finitely many terms, so `classify_s` applies a ratio test and a
//! partial-sum growth fit and returns `Inconclusive` when neither fires.
//! limsup-type quantities are approximated by window suprema with a
//! reported trend. Windowing is in log-t throughout, because the phenomena
//! are power laws and log-periodic oscillations, which make linear-t
//! windows misleading.

use crate::det::PantographParams;
use crate::forcing::{ForcingError, ForcingSpec, NoiseSpec, WeightSpec};
use crate::history::{DenseSolution, HistoryError};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum DiagError {
    /// κ needs b != 0.
    UndefinedKappa,
    WindowTooShort(String),
    /// No sample in the window rises above the magnitude floor.
    AllBelowFloor,
    InsufficientDomain {
        needed_lo: f64,
        needed_hi: f64,
        have_lo: f64,
        have_hi: f64,
    },
    NMaxTooSmall {
        got: usize,
        min: usize,
    },
    InvalidInput(String),
    Forcing(ForcingError),
    History(HistoryError),
}

impl fmt::Display for DiagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UndefinedKappa => write!(f, "kappa undefined for b = 0"),
            Self::WindowTooShort(m) => write!(f, "window too short: {m}"),
            Self::AllBelowFloor => write!(f, "all samples below magnitude floor"),
            Self::InsufficientDomain {
                needed_lo,
                needed_hi,
                have_lo,
                have_hi,
            } => write!(
                f,
                "solution domain [{have_lo}, {have_hi}] does not cover [{needed_lo}, {needed_hi}]"
            ),
            Self::NMaxTooSmall { got, min } => write!(f, "N_max = {got} below minimum {min}"),
            Self::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Self::Forcing(e) => write!(f, "forcing: {e}"),
            Self::History(e) => write!(f, "history: {e}"),
        }
    }
}

impl std::error::Error for DiagError {}

impl From<ForcingError> for DiagError {
    fn from(e: ForcingError) -> Self {
        DiagError::Forcing(e)
    }
}

impl From<HistoryError> for DiagError {
    fn from(e: HistoryError) -> Self {
        DiagError::History(e)
    }
}

/// `κ = -ln|b/a| / ln(1/q)`: the power-law rate of the unforced equation.
pub fn kappa(a: f64, b: f64, q: f64) -> Result<f64, DiagError> {
    if b == 0.0 {
        return Err(DiagError::UndefinedKappa);
    }
    if a == 0.0 || !(q > 0.0 && q < 1.0) {
        return Err(DiagError::InvalidInput(format!(
            "need a != 0, q in (0,1); got a={a}, q={q}"
        )));
    }
    Ok(-(b / a).abs().ln() / (1.0 / q).ln())
}

/// `f_θ(t) = ∫_{(t-θ)^+}^t f(s) ds`
pub fn f_theta(f: &ForcingSpec, t: f64, theta: f64) -> Result<f64, DiagError> {
    let lo = (t - theta).max(0.0);
    Ok(f.integrate(lo, t)?)
}

/// `sup_{θ in [0,1]} |f_θ(t)|` over a θ grid of `n_theta >= 33` points.
pub fn sup_f_theta(f: &ForcingSpec, t: f64, n_theta: usize) -> Result<f64, DiagError> {
    let n = n_theta.max(33);
    let mut best = 0.0f64;
    // Incremental: integrate each θ shell once.
    let mut acc = 0.0;
    let mut prev_lo = t;
    for j in 1..n {
        let theta = j as f64 / (n - 1) as f64;
        let lo = (t - theta).max(0.0);
        acc += f.integrate(lo, prev_lo)?;
        prev_lo = lo;
        best = best.max(acc.abs());
    }
    Ok(best)
}

/// `σ²₁(t) = ∫_{(t-1)^+}^t σ²(s) ds`
pub fn sigma2_1(sigma: &NoiseSpec, t: f64) -> Result<f64, DiagError> {
    let lo = (t - 1.0).max(0.0);
    Ok(sigma.integrate_square(lo, t)?)
}

/// Per-ε verdict for the S(ε) series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Overall verdict across the ε grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "snake_case")]
pub enum SOverall {
    AllFinite,
    FiniteAboveThreshold { eps_estimate: f64 },
    AllInfinite,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SClassification {
    pub epsilons: Vec<f64>,
    pub verdicts: Vec<SVerdict>,
    /// Final partial sum per ε (a lower bound for S(ε)).
    pub partial_sums: Vec<f64>,
    pub overall: SOverall,
    /// Sampled `σ²₁(n) ln n` values (n, value): the sufficient condition
    /// for a.s. convergence is that these tend to zero.
    pub sigma2_log_n: Vec<(f64, f64)>,
    pub sigma2_log_n_to_zero: bool,
    pub n_max: usize,
}

/// Verdict for one ε from the window integrals `v_n = ∫_{n-1}^n σ²`.
fn s_verdict(v: &[f64], eps: f64) -> (SVerdict, f64) {
    let n_max = v.len();
    let terms: Vec<f64> = v
        .iter()
        .map(|&vn| vn.max(0.0).sqrt() * (-eps * vn).exp())
        .collect();
    let mut partial = 0.0;
    let mut partials = Vec::with_capacity(n_max);
    for &a in &terms {
        partial += a;
        partials.push(partial);
    }
    let decade_start = n_max / 10;
    let tail = &terms[decade_start..];
    // Vanished terms: converged beyond doubt at double precision.
    if tail.iter().all(|&a| a < 1e-300) {
        return (SVerdict::Convergent, partial);
    }
    // Ratio test on the last decade.
    let mut ratios_ok = true;
    let mut any_ratio = false;
    for w in tail.windows(2) {
        if w[0] > 1e-300 && w[1] > 1e-300 {
            any_ratio = true;
            if w[1] / w[0] >= 0.99 {
                ratios_ok = false;
                break;
            }
        }
    }
    if any_ratio && ratios_ok {
        return (SVerdict::Convergent, partial);
    }
    // Power-law comparison on the terms themselves: a_n ~ n^p with
    // p < -1 summable, p > -1 not. Without this the polynomially decaying
    // convergent side near a threshold is undecidable (ratio -> 1).
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in decade_start.max(1)..n_max {
        if terms[n] > 1e-300 {
            xs.push(((n + 1) as f64).ln());
            ys.push(terms[n].ln());
        }
    }
    if xs.len() >= 8 {
        let (p, _): (f64, f64) = least_squares(&xs, &ys);
        if p < -1.05 {
            return (SVerdict::Convergent, partial);
        }
        if p > -0.95 {
            return (SVerdict::Divergent, partial);
        }
    }
    // Partial-sum growth fit over the last decade: S_N ~ c N^δ.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in decade_start.max(1)..n_max {
        if partials[n] > 0.0 {
            xs.push(((n + 1) as f64).ln());
            ys.push(partials[n].ln());
        }
    }
    if xs.len() >= 8 {
        let (slope, _resid) = least_squares(&xs, &ys);
        if slope > 0.01 {
            return (SVerdict::Divergent, partial);
        }
    }
    (SVerdict::Inconclusive, partial)
}

/// Classify the S(ε) series from precomputed window integrals.
pub fn classify_s_from_windows(v: &[f64], epsilons: &[f64]) -> (Vec<SVerdict>, Vec<f64>, SOverall) {
    let mut verdicts = Vec::with_capacity(epsilons.len());
    let mut sums = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let (verdict, sum) = s_verdict(v, eps);
        verdicts.push(verdict);
        sums.push(sum);
    }
    // Terms decrease in ε, so the admissible patterns are D*C* (divergent
    // below a threshold, convergent above).
    let overall = if verdicts.iter().all(|&x| x == SVerdict::Convergent) {
        SOverall::AllFinite
    } else if verdicts.iter().all(|&x| x == SVerdict::Divergent) {
        SOverall::AllInfinite
    } else {
        let mut split = None;
        let mut monotone = true;
        for (i, w) in verdicts.windows(2).enumerate() {
            match (w[0], w[1]) {
                (SVerdict::Divergent, SVerdict::Convergent) => {
                    if split.is_some() {
                        monotone = false;
                    }
                    split = Some(i);
                }
                (SVerdict::Convergent, SVerdict::Divergent) => monotone = false,
                (SVerdict::Inconclusive, _) | (_, SVerdict::Inconclusive) => monotone = false,
                _ => {}
            }
        }
        match (split, monotone) {
            (Some(i), true) => SOverall::FiniteAboveThreshold {
                eps_estimate: (epsilons[i] * epsilons[i + 1]).sqrt(),
            },
            _ => SOverall::Inconclusive,
        }
    };
    (verdicts, sums, overall)
}

/// Classify S(ε): window integrals by quadrature of the analytic spec,
/// then ratio/growth tests per ε, plus the `σ²₁(n) ln n` report.
pub fn classify_s(
    sigma: &NoiseSpec,
    epsilons: &[f64],
    n_max: usize,
) -> Result<SClassification, DiagError> {
    if n_max < 1000 {
        return Err(DiagError::NMaxTooSmall {
            got: n_max,
            min: 1000,
        });
    }
    if epsilons.is_empty() {
        return Err(DiagError::InvalidInput("empty epsilon grid".into()));
    }
    let mut v = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        v.push(sigma.integrate_square((n - 1) as f64, n as f64)?);
    }
    let (verdicts, partial_sums, overall) = classify_s_from_windows(&v, epsilons);
    // σ²₁(n) ln n at geometrically spaced n.
    let mut sigma2_log_n = Vec::new();
    let mut n = 8usize;
    while n <= n_max {
        let val = v[n - 1] * (n as f64).ln();
        sigma2_log_n.push((n as f64, val));
        n *= 2;
    }
    let peak = sigma2_log_n.iter().map(|x| x.1).fold(0.0f64, f64::max);
    let last = sigma2_log_n.last().map(|x| x.1).unwrap_or(0.0);
    let sigma2_log_n_to_zero = last <= 0.02 * peak || last < 1e-6;
    Ok(SClassification {
        epsilons: epsilons.to_vec(),
        verdicts,
        partial_sums,
        overall,
        sigma2_log_n,
        sigma2_log_n_to_zero,
        n_max,
    })
}

/// Least squares fit y = a + slope·x, returning (slope, rms residual).
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss += r * r;
    }
    (slope, (ss / n).sqrt())
}

/// Exponent-estimation windows in t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

/// Rate-estimation methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Least-squares slope of `ln|x|` against `ln t` over all nodes.
    LogLogSlope,
    /// Slope through per-subwindow running maxima, robust to log-periodic
    /// oscillation and sign changes.
    RunMaxEnvelope,
    /// Trend of `|x(t)|/γ(t)`.
    RatioVsWeight { weight: WeightSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVerdict {
    BigO,
    LittleO,
    ExactOrder,
    /// Ratio grows: not O(γ) on this window.
    NotBigO,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub exponent: f64,
    pub method: EstimateMethod,
    pub window: Window,
    /// RMS residual of the underlying fit (log scale); for Perron ratios
    /// this slot carries the block trend instead.
    pub residual: f64,
    pub verdict: RateVerdict,
    /// Max of |x|/γ over the window (ratio method only).
    pub sup_ratio: Option<f64>,
    /// Slope tolerance used for the verdict.
    pub slope_tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateOptions {
    pub subwindows: usize,
    pub slope_tol: f64,
    /// Relative magnitude floor: samples below `floor_rel * max|x|` are
    /// ignored in log fits.
    pub floor_rel: f64,
    pub max_samples: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            subwindows: 8,
            slope_tol: 0.05,
            floor_rel: 1e-13,
            max_samples: 200_000,
        }
    }
}

fn window_nodes(
    sol: &DenseSolution,
    window: &Window,
    max_samples: usize,
) -> Result<(Vec<f64>, Vec<f64>), DiagError> {
    let (have_lo, have_hi) = (
        sol.first_time().unwrap_or(f64::NAN),
        sol.last_time().unwrap_or(f64::NAN),
    );
    if !(window.lo > 0.0) || !(window.hi > window.lo) {
        return Err(DiagError::WindowTooShort(format!(
            "window [{}, {}] must be positive and increasing",
            window.lo, window.hi
        )));
    }
    if window.lo < have_lo * (1.0 - 1e-12) || window.hi > have_hi * (1.0 + 1e-12) {
        return Err(DiagError::InsufficientDomain {
            needed_lo: window.lo,
            needed_hi: window.hi,
            have_lo,
            have_hi,
        });
    }
    let times = &sol.path.times;
    let i0 = times.partition_point(|&t| t < window.lo);
    let i1 = times.partition_point(|&t| t <= window.hi);
    let count = i1.saturating_sub(i0);
    if count < 4 {
        return Err(DiagError::WindowTooShort(format!(
            "{count} nodes in window"
        )));
    }
    let stride = (count / max_samples).max(1);
    let mut ts = Vec::with_capacity(count / stride + 1);
    let mut vs = Vec::with_capacity(count / stride + 1);
    let mut k = i0;
    while k < i1 {
        ts.push(times[k]);
        vs.push(sol.path.value(k)[0]);
        k += stride;
    }
    Ok((ts, vs))
}

/// Estimate the growth/decay exponent of a trajectory over `window`
/// (at least one decade long).
pub fn estimate_exponent(
    sol: &DenseSolution,
    window: &Window,
    method: &EstimateMethod,
    opts: &EstimateOptions,
) -> Result<RateEstimate, DiagError> {
    if window.hi < 10.0 * window.lo {
        return Err(DiagError::WindowTooShort(format!(
            "window [{}, {}] spans less than one decade",
            window.lo, window.hi
        )));
    }
    let (ts, vs) = window_nodes(sol, window, opts.max_samples)?;
    let vmax = vs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax <= 0.0 {
        return Err(DiagError::AllBelowFloor);
    }
    let floor = opts.floor_rel * vmax;
    match method {
        EstimateMethod::LogLogSlope => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (t, v) in ts.iter().zip(&vs) {
                if v.abs() > floor {
                    xs.push(t.ln());
                    ys.push(v.abs().ln());
                }
            }
            if xs.len() < 4 {
                return Err(DiagError::AllBelowFloor);
            }
            let (slope, resid) = least_squares(&xs, &ys);
            Ok(RateEstimate {
                exponent: slope,
                method: method.clone(),
                window: *window,
                residual: resid,
                verdict: if resid <= 0.15 {
                    RateVerdict::ExactOrder
                } else {
                    RateVerdict::BigO
                },
                sup_ratio: None,
                slope_tol: opts.slope_tol,
            })
        }
        EstimateMethod::RunMaxEnvelope => {
            let pts = subwindow_maxima(&ts, &vs, window, opts.subwindows, floor);
            if pts.len() < 3 {
                return Err(DiagError::AllBelowFloor);
            }
            let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
            let (slope, resid) = least_squares(&xs, &ys);
            Ok(RateEstimate {
                exponent: slope,
                method: method.clone(),
                window: *window,
                residual: resid,
                verdict: if resid <= 0.15 {
                    RateVerdict::ExactOrder
                } else {
                    RateVerdict::BigO
                },
                sup_ratio: None,
                slope_tol: opts.slope_tol,
            })
        }
        EstimateMethod::RatioVsWeight { weight } => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut sup_ratio = 0.0f64;
            let mut ratios = Vec::with_capacity(ts.len());
            for (t, v) in ts.iter().zip(&vs) {
                let g = weight.eval(*t);
                let r = v.abs() / g;
                ratios.push(r);
                sup_ratio = sup_ratio.max(r);
                if v.abs() > floor {
                    xs.push(t.ln());
                    ys.push(r.ln());
                }
            }
            if xs.len() < 4 {
                return Err(DiagError::AllBelowFloor);
            }
            let (slope, resid) = least_squares(&xs, &ys);
            // Subwindow sups of the ratio decide ExactOrder.
            let pts = subwindow_maxima(&ts, &ratios, window, opts.subwindows, 0.0);
            let sup_min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let verdict = if slope < -opts.slope_tol {
                RateVerdict::LittleO
            } else if slope > opts.slope_tol {
                RateVerdict::NotBigO
            } else if sup_min >= 0.1 * sup_ratio {
                RateVerdict::ExactOrder
            } else {
                RateVerdict::BigO
            };
            Ok(RateEstimate {
                exponent: slope,
                method: method.clone(),
                window: *window,
                residual: resid,
                verdict,
                sup_ratio: Some(sup_ratio),
                slope_tol: opts.slope_tol,
            })
        }
    }
}

/// Per-subwindow (argmax t, max |value|), subwindows equal in ln t.
fn subwindow_maxima(
    ts: &[f64],
    vs: &[f64],
    window: &Window,
    subwindows: usize,
    floor: f64,
) -> Vec<(f64, f64)> {
    let l0 = window.lo.ln();
    let l1 = window.hi.ln();
    let width = (l1 - l0) / subwindows as f64;
    let mut out = Vec::with_capacity(subwindows);
    let mut best: Option<(f64, f64)> = None;
    let mut edge = l0 + width;
    fn push(best: &mut Option<(f64, f64)>, out: &mut Vec<(f64, f64)>, floor: f64) {
        if let Some(p) = best.take() {
            if p.1 > floor {
                out.push(p);
            }
        }
    }
    for (t, v) in ts.iter().zip(vs) {
        let lt = t.ln();
        while lt > edge && out.len() + 1 < subwindows {
            push(&mut best, &mut out, floor);
            edge += width;
        }
        let mag = v.abs();
        if best.map_or(true, |b| mag > b.1) {
            best = Some((*t, mag));
        }
    }
    push(&mut best, &mut out, floor);
    out
}

/// `K_n = sup_{s in I_n} e^{-κ s} |z(e^s)|` with `I_n = [s0 - n c, s0 - (n+1) c]`,
/// `c = ln q < 0`, sampled at `samples >= 64` points per interval.
pub fn k_n_sequence(
    z: &DenseSolution,
    params: &PantographParams,
    s0: f64,
    count: usize,
    samples: usize,
) -> Result<Vec<f64>, DiagError> {
    let kap = params.kappa().ok_or(DiagError::UndefinedKappa)?;
    let c = params.log_delay();
    let samples = samples.max(64);
    let needed_hi = (s0 - (count as f64) * c).exp();
    let needed_lo = s0.exp();
    let (have_lo, have_hi) = (
        z.first_time().unwrap_or(f64::NAN),
        z.last_time().unwrap_or(f64::NAN),
    );
    if needed_lo < have_lo * (1.0 - 1e-12) || needed_hi > have_hi * (1.0 + 1e-12) {
        return Err(DiagError::InsufficientDomain {
            needed_lo,
            needed_hi,
            have_lo,
            have_hi,
        });
    }
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let lo = s0 - n as f64 * c;
        let hi = s0 - (n as f64 + 1.0) * c;
        let mut sup = 0.0f64;
        for j in 0..=samples {
            let s = lo + (hi - lo) * j as f64 / samples as f64;
            let t = s.exp().clamp(have_lo, have_hi);
            let v = z.eval_scalar(t)?;
            sup = sup.max((-kap * s).exp() * v.abs());
        }
        out.push(sup);
    }
    Ok(out)
}

/// `ε_n = sup_{s in I_n} |φ(e^s)|` for n = 1..=count, by dense sampling
/// (suitable for the smooth families; spike trains need finer handling).
pub fn eps_sequence(
    phi: &ForcingSpec,
    params: &PantographParams,
    s0: f64,
    count: usize,
    samples: usize,
) -> Vec<f64> {
    let c = params.log_delay();
    let samples = samples.max(64);
    (1..=count)
        .map(|n| {
            let lo = s0 - n as f64 * c;
            let hi = s0 - (n as f64 + 1.0) * c;
            let mut sup = 0.0f64;
            for j in 0..=samples {
                let s = lo + (hi - lo) * j as f64 / samples as f64;
                sup = sup.max(phi.eval(s.exp()).abs());
            }
            sup
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub k_star: f64,
    pub max_ratio: f64,
    pub satisfied: bool,
    /// Bound shape Σ_{j<=n} ε_j / α^j per n.
    pub bounds: Vec<f64>,
}

/// Fit the single constant `K*` of the envelope `K_n <= K* Σ_{j<=n} ε_j/α^j`
/// by least squares in the log domain and report the worst ratio.
/// `eps[j]` is `ε_{j+1}`. The bound is an asymptotic statement (its closed
/// form drops the K_0 transient term), so the fit and the ratio scan skip
/// the leading quarter of the intervals.
pub fn envelope_check(k_n: &[f64], eps: &[f64], alpha: f64) -> Result<EnvelopeReport, DiagError> {
    if k_n.len() < 3 || eps.len() + 1 < k_n.len() {
        return Err(DiagError::InvalidInput(format!(
            "need >= 3 K_n values and eps for each n >= 1; got {} and {}",
            k_n.len(),
            eps.len()
        )));
    }
    let mut bounds = Vec::with_capacity(k_n.len());
    bounds.push(0.0); // n = 0 has an empty sum
    let mut acc = 0.0;
    for (j, &e) in eps.iter().enumerate().take(k_n.len() - 1) {
        acc += e / alpha.powi(j as i32 + 1);
        bounds.push(acc);
    }
    let start = (k_n.len() / 4).max(1);
    let mut logs = Vec::new();
    for n in start..k_n.len() {
        if k_n[n] > 0.0 && bounds[n] > 0.0 {
            logs.push(k_n[n].ln() - bounds[n].ln());
        }
    }
    if logs.is_empty() {
        return Err(DiagError::AllBelowFloor);
    }
    let k_star = (logs.iter().sum::<f64>() / logs.len() as f64).exp();
    let mut max_ratio = 0.0f64;
    for n in start..k_n.len() {
        if bounds[n] > 0.0 {
            max_ratio = max_ratio.max(k_n[n] / (k_star * bounds[n]));
        }
    }
    Ok(EnvelopeReport {
        k_star,
        max_ratio,
        satisfied: max_ratio <= 1.05,
        bounds,
    })
}

/// Reference scales θ(t) for Perron-type ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "snake_case")]
pub enum ThetaSpec {
    /// θ(t) = κ ln t
    KappaLogT { kappa: f64 },
    /// θ(t) = η ln t
    EtaLogT { eta: f64 },
    /// θ(t) = rate · t (the η = ∞ branch)
    LinearT { rate: f64 },
    /// θ(t) = ln γ(t)
    Custom { weight: WeightSpec },
}

impl ThetaSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ThetaSpec::KappaLogT { kappa } => kappa * t.ln(),
            ThetaSpec::EtaLogT { eta } => eta * t.ln(),
            ThetaSpec::LinearT { rate } => rate * t,
            ThetaSpec::Custom { weight } => weight.eval(t).ln(),
        }
    }
}

/// Perron ratio `sup_blocks ln(sup |x|) / θ(t_argmax)` with trend. The sign
/// convention is direct division `ln|x(t)| / θ(t)`; both numerator and
/// denominator may be negative.
pub fn perron_ratio(
    sol: &DenseSolution,
    theta: &ThetaSpec,
    window: &Window,
    opts: &EstimateOptions,
) -> Result<RateEstimate, DiagError> {
    if window.hi < 10.0 * window.lo {
        return Err(DiagError::WindowTooShort(
            "perron window below one decade".into(),
        ));
    }
    let (ts, vs) = window_nodes(sol, window, opts.max_samples)?;
    let vmax = vs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vmax <= 0.0 {
        return Err(DiagError::AllBelowFloor);
    }
    let pts = subwindow_maxima(&ts, &vs, window, opts.subwindows, opts.floor_rel * vmax);
    if pts.len() < 3 {
        return Err(DiagError::AllBelowFloor);
    }
    let mut ratio = f64::NEG_INFINITY;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t_arg, sup) in &pts {
        let th = theta.eval(*t_arg);
        if th.abs() < 1e-12 {
            continue;
        }
        let r = sup.ln() / th;
        ratio = ratio.max(r);
        xs.push(t_arg.ln());
        ys.push(r);
    }
    if xs.len() < 3 {
        return Err(DiagError::AllBelowFloor);
    }
    let (trend, _) = least_squares(&xs, &ys);
    let verdict = if (ratio - 1.0).abs() <= opts.slope_tol {
        RateVerdict::ExactOrder
    } else if ratio <= 1.0 + opts.slope_tol {
        RateVerdict::BigO
    } else {
        RateVerdict::NotBigO
    };
    Ok(RateEstimate {
        exponent: ratio,
        method: EstimateMethod::LogLogSlope,
        window: *window,
        residual: trend,
        verdict,
        sup_ratio: None,
        slope_tol: opts.slope_tol,
    })
}

/// Convergence classification verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LimitVerdict {
    ConvergesToZero,
    ConvergesTo { limit: f64 },
    BoundedNonconvergent,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowEvidence {
    pub lo: f64,
    pub hi: f64,
    pub sup_abs: f64,
    pub mean: f64,
    pub sup_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitClass {
    pub verdict: LimitVerdict,
    pub windows: Vec<WindowEvidence>,
    pub ztol: f64,
    pub mtol_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Portion of the log-time span forming the evidence tail.
    pub tail_fraction: f64,
    /// ConvergesToZero needs the final sup below `ztol` times the first
    /// tail window's sup.
    pub ztol: f64,
    pub mtol_rel: f64,
    pub mtol_abs: f64,
    pub unbounded_factor: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tail_fraction: 0.5,
            ztol: 0.05,
            mtol_rel: 0.01,
            mtol_abs: 1e-8,
            unbounded_factor: 2.0,
        }
    }
}

/// Classify the tail behaviour of a trajectory from three equal
/// log-windows over the trailing `tail_fraction` of the domain.
pub fn classify_limit(
    sol: &DenseSolution,
    opts: &ClassifyOptions,
) -> Result<LimitClass, DiagError> {
    let times = &sol.path.times;
    if times.len() < 12 {
        return Err(DiagError::WindowTooShort("need at least 12 nodes".into()));
    }
    let t_end = *times.last().unwrap();
    let t_pos = *times
        .iter()
        .find(|&&t| t > 0.0)
        .ok_or_else(|| DiagError::WindowTooShort("no positive times".into()))?;
    if !(t_end > t_pos) {
        return Err(DiagError::WindowTooShort("degenerate time span".into()));
    }
    let l_end = t_end.ln();
    let l_start = t_pos.ln() + (1.0 - opts.tail_fraction.clamp(0.05, 1.0)) * (l_end - t_pos.ln());
    let width = (l_end - l_start) / 3.0;
    let mut windows = Vec::with_capacity(3);
    for w in 0..3 {
        let lo = (l_start + w as f64 * width).exp();
        let hi = (l_start + (w + 1) as f64 * width).exp();
        let i0 = times.partition_point(|&t| t < lo);
        let i1 = times.partition_point(|&t| t <= hi);
        if i1.saturating_sub(i0) < 3 {
            return Err(DiagError::WindowTooShort(format!(
                "tail window [{lo:.3}, {hi:.3}] holds {} nodes",
                i1.saturating_sub(i0)
            )));
        }
        let mut sup = 0.0f64;
        let mut sum = 0.0;
        for k in i0..i1 {
            let v = sol.path.value(k)[0];
            sup = sup.max(v.abs());
            sum += v;
        }
        let mean = sum / (i1 - i0) as f64;
        let mut dev = 0.0f64;
        for k in i0..i1 {
            dev = dev.max((sol.path.value(k)[0] - mean).abs());
        }
        windows.push(WindowEvidence {
            lo,
            hi,
            sup_abs: sup,
            mean,
            sup_dev: dev,
        });
    }
    let (w1, w2, w3) = (windows[0], windows[1], windows[2]);
    let verdict = if w3.sup_abs <= w2.sup_abs && w3.sup_abs <= opts.ztol * w1.sup_abs {
        LimitVerdict::ConvergesToZero
    } else if (w2.mean - w3.mean).abs() <= opts.mtol_rel * w3.mean.abs().max(opts.mtol_abs)
        && w3.sup_dev <= w2.sup_dev.max(opts.mtol_abs)
        && w3.mean.abs() > opts.mtol_abs
    {
        LimitVerdict::ConvergesTo { limit: w3.mean }
    } else if w1.sup_abs < w2.sup_abs
        && w2.sup_abs < w3.sup_abs
        && w3.sup_abs >= opts.unbounded_factor * w1.sup_abs
    {
        LimitVerdict::Unbounded
    } else {
        LimitVerdict::BoundedNonconvergent
    };
    Ok(LimitClass {
        verdict,
        windows,
        ztol: opts.ztol,
        mtol_rel: opts.mtol_rel,
    })
}
