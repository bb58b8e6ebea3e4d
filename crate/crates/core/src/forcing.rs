//! Analytic library of forcing functions, noise intensities and weight
//! functions.
//!
//! Every family is a closed-form tagged union, so window integrals and
//! Taylor coefficients have independent oracles and configs stay
//! declarative (no user callbacks). The families cover constant, power-law
//! and exponential envelopes, high-frequency oscillators `e^{βt} sin(e^{θt})`
//! with `θ > β > 0`, triangular spike trains with rule-generated heights and
//! widths, and manufactured forcings `φ(t) = z'(t) − b z(t) − a z(qt)` whose
//! induced solution is a prescribed `z`.
//!
//! Quadrature is 5-point Gauss–Legendre, split at family breakpoints
//! (spike edges, power-law regularization points) and substepped so that an
//! oscillatory integrand gets at least eight panels per local period of
//! `sin(e^{θt})`. That rule caps feasible horizons for the oscillatory
//! family; the budget error reports when a request would exceed it.

use crate::history::DenseSolution;
use crate::quad::gl5;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};
use std::fmt;

const OSC_BUDGET: usize = 1 << 23;

#[derive(Debug, Clone, PartialEq)]
pub enum ForcingError {
    /// Spec violates a family invariant.
    Invalid(String),
    /// Oscillation-aware substepping would exceed the panel budget.
    OscillationBudget { requested: usize },
    /// Tabulated data does not cover the requested range.
    TabulatedDomain { t: f64 },
    /// Manufactured target not defined on the requested range.
    Domain(String),
}

impl fmt::Display for ForcingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(msg) => write!(f, "invalid spec: {msg}"),
            Self::OscillationBudget { requested } => {
                write!(
                    f,
                    "oscillatory quadrature needs {requested} panels, over budget"
                )
            }
            Self::TabulatedDomain { t } => write!(f, "tabulated spec not defined at t = {t}"),
            Self::Domain(msg) => write!(f, "domain error: {msg}"),
        }
    }
}

impl std::error::Error for ForcingError {}

/// Integer-sequence rules for spike heights `h_n` and widths `w_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SpikeRule {
    Constant {
        c: f64,
    },
    /// `a*n + b`
    Linear {
        a: f64,
        b: f64,
    },
    /// `c * n^p` for n >= 1; at n = 0: `c` if p == 0, else 0.
    Power {
        c: f64,
        p: f64,
    },
    /// `1/n^2` for n >= 1; 0 at n = 0.
    InvSquare,
    /// `1/(n+1)^2`
    InvSquareShift,
    /// Width rule only: `w_n = 1/h_n`.
    ReciprocalHeight,
}

impl SpikeRule {
    fn eval(&self, n: u64) -> f64 {
        let nf = n as f64;
        match self {
            SpikeRule::Constant { c } => *c,
            SpikeRule::Linear { a, b } => a * nf + b,
            SpikeRule::Power { c, p } => {
                if n == 0 {
                    if *p == 0.0 {
                        *c
                    } else {
                        0.0
                    }
                } else {
                    c * nf.powf(*p)
                }
            }
            SpikeRule::InvSquare => {
                if n == 0 {
                    0.0
                } else {
                    1.0 / (nf * nf)
                }
            }
            SpikeRule::InvSquareShift => 1.0 / ((nf + 1.0) * (nf + 1.0)),
            SpikeRule::ReciprocalHeight => f64::NAN,
        }
    }
}

/// Closed families of ψ with closed-form antiderivatives, used inside the
/// manufactured targets. The log-squared member is shifted to
/// `1/((t+e) ln²(t+e))` so it is smooth and integrable from t = 0 while
/// staying regularly varying with index -1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    OneOverT,
    InvTLogSq,
    /// `t^rho`, rho > -1.
    TPow {
        rho: f64,
    },
}

impl PsiFamily {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PsiFamily::OneOverT => 1.0 / t,
            PsiFamily::InvTLogSq => {
                let u = t + E;
                let l = u.ln();
                1.0 / (u * l * l)
            }
            PsiFamily::TPow { rho } => t.powf(*rho),
        }
    }

    pub fn antideriv(&self, t: f64) -> f64 {
        match self {
            PsiFamily::OneOverT => t.ln(),
            PsiFamily::InvTLogSq => -1.0 / (t + E).ln(),
            PsiFamily::TPow { rho } => t.powf(rho + 1.0) / (rho + 1.0),
        }
    }

    /// `∫_lo^t ψ(s) ds`
    pub fn integral(&self, lo: f64, t: f64) -> f64 {
        self.antideriv(t) - self.antideriv(lo)
    }
}

/// Manufactured solution targets: closed-form `z` with closed-form `z'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ZSpec {
    /// `D t^κ`
    PurePower { d: f64, kappa: f64 },
    /// `D t^κ Ψ(t)` with `Ψ(t) = ∫_{1/q}^t ψ(s) ds`
    PowerTimesPsiIntegral { d: f64, kappa: f64, psi: PsiFamily },
    /// `t^κ {C + sin(2π ln t / ln(1/q))} + D t^κ ∫_q^t ψ(s) ds`
    PowerLogPeriodic {
        c: f64,
        d: f64,
        kappa: f64,
        psi: PsiFamily,
    },
}

impl ZSpec {
    pub fn eval(&self, t: f64, q: f64) -> f64 {
        match self {
            ZSpec::PurePower { d, kappa } => {
                if *d == 0.0 {
                    0.0
                } else {
                    d * t.powf(*kappa)
                }
            }
            ZSpec::PowerTimesPsiIntegral { d, kappa, psi } => {
                d * t.powf(*kappa) * psi.integral(1.0 / q, t)
            }
            ZSpec::PowerLogPeriodic { c, d, kappa, psi } => {
                let lq = (1.0 / q).ln();
                let osc = c + (2.0 * PI * t.ln() / lq).sin();
                t.powf(*kappa) * osc + d * t.powf(*kappa) * psi.integral(q, t)
            }
        }
    }

    pub fn deriv(&self, t: f64, q: f64) -> f64 {
        match self {
            ZSpec::PurePower { d, kappa } => {
                if *d == 0.0 {
                    0.0
                } else {
                    d * kappa * t.powf(kappa - 1.0)
                }
            }
            ZSpec::PowerTimesPsiIntegral { d, kappa, psi } => {
                d * kappa * t.powf(kappa - 1.0) * psi.integral(1.0 / q, t)
                    + d * t.powf(*kappa) * psi.eval(t)
            }
            ZSpec::PowerLogPeriodic { c, d, kappa, psi } => {
                let lq = (1.0 / q).ln();
                let arg = 2.0 * PI * t.ln() / lq;
                let osc = c + arg.sin();
                kappa * t.powf(kappa - 1.0) * osc
                    + t.powf(kappa - 1.0) * (2.0 * PI / lq) * arg.cos()
                    + d * kappa * t.powf(kappa - 1.0) * psi.integral(q, t)
                    + d * t.powf(*kappa) * psi.eval(t)
            }
        }
    }

    pub fn validate(&self) -> Result<(), ForcingError> {
        let psi = match self {
            ZSpec::PurePower { .. } => None,
            ZSpec::PowerTimesPsiIntegral { psi, .. } => Some(psi),
            ZSpec::PowerLogPeriodic { psi, .. } => Some(psi),
        };
        if let Some(PsiFamily::TPow { rho }) = psi {
            if !(*rho > -1.0) {
                return Err(ForcingError::Invalid(format!(
                    "TPow rho must be > -1, got {rho}"
                )));
            }
        }
        Ok(())
    }
}

/// Tagged union of forcing functions. Also serves as the noise-intensity
/// family ([`NoiseSpec`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Zero,
    Constant {
        c: f64,
    },
    /// `A sin(ω t + φ)`
    Sinusoid {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `C t^β` for t >= 1, `C` below (regularized so negative β has no
    /// singularity at zero).
    PowerLaw {
        c: f64,
        beta: f64,
    },
    /// `C (1+t)^β`, smooth on [0, ∞).
    ShiftedPowerLaw {
        c: f64,
        beta: f64,
    },
    /// `C t^β (ln t)^m` for t >= e; `C t^β` on [1, e); `C` below 1.
    PowerLogLaw {
        c: f64,
        beta: f64,
        m: i32,
    },
    /// `e^{βt} sin(e^{θt})`, θ > β > 0.
    HighFreqOsc {
        beta: f64,
        theta: f64,
    },
    /// Triangular spikes centered at n + 1/2 with height `h_n`, width `w_n`.
    SpikeTrain {
        heights: SpikeRule,
        widths: SpikeRule,
    },
    /// `C e^{rate t}`
    Exponential {
        c: f64,
        rate: f64,
    },
    /// `φ(t) = z'(t) − b z(t) − a z(qt)`
    Manufactured {
        z: ZSpec,
        a: f64,
        b: f64,
        q: f64,
    },
    Tabulated {
        table: DenseSolution,
    },
    Sum {
        terms: Vec<ForcingSpec>,
    },
    Scale {
        factor: f64,
        inner: Box<ForcingSpec>,
    },
}

/// Noise intensities draw from the same closed family.
pub type NoiseSpec = ForcingSpec;

/// Triangle profile for spike `n`: apex `h` at `n + 1/2`, support width `w`.
fn spike_profile(t: f64, n: u64, h: f64, w: f64) -> f64 {
    if !(h > 0.0) || !(w > 0.0) || !h.is_finite() || !w.is_finite() {
        return 0.0;
    }
    let w = w.min(1.0);
    let center = n as f64 + 0.5;
    let half = 0.5 * w;
    let dist = (t - center).abs();
    if dist >= half {
        0.0
    } else {
        h * (1.0 - dist / half)
    }
}

fn spike_params(heights: &SpikeRule, widths: &SpikeRule, n: u64) -> (f64, f64) {
    let h = heights.eval(n);
    let w = match widths {
        SpikeRule::ReciprocalHeight => {
            if h > 0.0 {
                1.0 / h
            } else {
                0.0
            }
        }
        rule => rule.eval(n),
    };
    (h, w)
}

impl ForcingSpec {
    pub fn scaled(factor: f64, inner: ForcingSpec) -> ForcingSpec {
        ForcingSpec::Scale {
            factor,
            inner: Box::new(inner),
        }
    }

    /// Pointwise evaluation of the analytic formula.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant { c } => *c,
            ForcingSpec::Sinusoid {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
            ForcingSpec::PowerLaw { c, beta } => {
                if t >= 1.0 {
                    c * t.powf(*beta)
                } else {
                    *c
                }
            }
            ForcingSpec::ShiftedPowerLaw { c, beta } => c * (1.0 + t).powf(*beta),
            ForcingSpec::PowerLogLaw { c, beta, m } => {
                if t >= E {
                    c * t.powf(*beta) * t.ln().powi(*m)
                } else if t >= 1.0 {
                    c * t.powf(*beta)
                } else {
                    *c
                }
            }
            ForcingSpec::HighFreqOsc { beta, theta } => (beta * t).exp() * (theta * t).exp().sin(),
            ForcingSpec::SpikeTrain { heights, widths } => {
                if t < 0.0 {
                    return 0.0;
                }
                let n = t.floor() as u64;
                let (h, w) = spike_params(heights, widths, n);
                spike_profile(t, n, h, w)
            }
            ForcingSpec::Exponential { c, rate } => c * (rate * t).exp(),
            ForcingSpec::Manufactured { z, a, b, q } => {
                z.deriv(t, *q) - b * z.eval(t, *q) - a * z.eval(q * t, *q)
            }
            ForcingSpec::Tabulated { table } => table.eval_scalar(t).unwrap_or(f64::NAN),
            ForcingSpec::Sum { terms } => terms.iter().map(|f| f.eval(t)).sum(),
            ForcingSpec::Scale { factor, inner } => factor * inner.eval(t),
        }
    }

    /// Family invariants, checked on sampled spike indices where the rule
    /// is sequence-valued.
    pub fn validate(&self) -> Result<(), ForcingError> {
        match self {
            ForcingSpec::HighFreqOsc { beta, theta } => {
                if !(*theta > *beta && *beta > 0.0) {
                    return Err(ForcingError::Invalid(format!(
                        "high_freq_osc requires theta > beta > 0, got beta={beta}, theta={theta}"
                    )));
                }
            }
            ForcingSpec::SpikeTrain { heights, widths } => {
                for n in 1..=64u64 {
                    let (h, w) = spike_params(heights, widths, n);
                    if h > 0.0 && !(w > 0.0 && w <= 1.0) {
                        return Err(ForcingError::Invalid(format!(
                            "spike_train width w_{n} = {w} outside (0, 1]"
                        )));
                    }
                }
            }
            ForcingSpec::Manufactured { z, a, q, .. } => {
                if *a == 0.0 {
                    return Err(ForcingError::Invalid("manufactured requires a != 0".into()));
                }
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(ForcingError::Invalid(format!(
                        "manufactured requires q in (0,1), got {q}"
                    )));
                }
                z.validate()?;
            }
            ForcingSpec::Tabulated { table } => {
                if table.is_empty() {
                    return Err(ForcingError::Invalid("tabulated spec is empty".into()));
                }
            }
            ForcingSpec::Sum { terms } => {
                for f in terms {
                    f.validate()?;
                }
            }
            ForcingSpec::Scale { inner, .. } => inner.validate()?,
            _ => {}
        }
        Ok(())
    }

    /// Largest admissible quadrature substep near time `t`: one eighth of
    /// the local oscillation period for the oscillatory families, unbounded
    /// otherwise.
    pub(crate) fn osc_substep(&self, t: f64) -> f64 {
        match self {
            ForcingSpec::Sinusoid { omega, .. } => {
                if *omega == 0.0 {
                    f64::INFINITY
                } else {
                    2.0 * PI / omega.abs() / 8.0
                }
            }
            ForcingSpec::HighFreqOsc { theta, .. } => 2.0 * PI * (-theta * t).exp() / 8.0,
            ForcingSpec::Sum { terms } => terms
                .iter()
                .map(|f| f.osc_substep(t))
                .fold(f64::INFINITY, f64::min),
            ForcingSpec::Scale { inner, .. } => inner.osc_substep(t),
            _ => f64::INFINITY,
        }
    }

    /// Power-series coefficients about t = 0 and a validity radius, when
    /// the family is analytic there. Feeds the Taylor bootstrap of the
    /// delay solvers; `None` means the caller must bootstrap numerically.
    pub fn taylor_coeffs(&self, order: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            ForcingSpec::Zero => Some((vec![0.0; order + 1], f64::INFINITY)),
            ForcingSpec::Constant { c } => {
                let mut v = vec![0.0; order + 1];
                v[0] = *c;
                Some((v, f64::INFINITY))
            }
            ForcingSpec::Sinusoid {
                amplitude,
                omega,
                phase,
            } => {
                let mut v = Vec::with_capacity(order + 1);
                let mut pw = 1.0; // ω^k / k!
                for k in 0..=order {
                    let quarter = match k % 4 {
                        0 => phase.sin(),
                        1 => phase.cos(),
                        2 => -phase.sin(),
                        _ => -phase.cos(),
                    };
                    v.push(amplitude * pw * quarter);
                    pw *= omega / (k + 1) as f64;
                }
                Some((v, f64::INFINITY))
            }
            ForcingSpec::PowerLaw { c, .. } | ForcingSpec::PowerLogLaw { c, .. } => {
                // Constant C below t = 1.
                let mut v = vec![0.0; order + 1];
                v[0] = *c;
                Some((v, 1.0))
            }
            ForcingSpec::ShiftedPowerLaw { c, beta } => {
                let mut v = Vec::with_capacity(order + 1);
                let mut coeff = *c;
                for k in 0..=order {
                    v.push(coeff);
                    coeff *= (beta - k as f64) / (k + 1) as f64;
                }
                Some((v, 1.0))
            }
            ForcingSpec::Exponential { c, rate } => {
                let mut v = Vec::with_capacity(order + 1);
                let mut coeff = *c;
                for k in 0..=order {
                    v.push(coeff);
                    coeff *= rate / (k + 1) as f64;
                }
                Some((v, f64::INFINITY))
            }
            ForcingSpec::HighFreqOsc { beta, theta } => {
                // sin(e^{θt}) = Σ_m (−1)^m e^{(2m+1)θt}/(2m+1)!, so the
                // product with e^{βt} is a tame exponential series:
                // f_k = Σ_m (−1)^m (β+(2m+1)θ)^k / ((2m+1)! k!).
                let mut v = Vec::with_capacity(order + 1);
                let mut ln_k_fact = 0.0;
                for k in 0..=order {
                    if k > 0 {
                        ln_k_fact += (k as f64).ln();
                    }
                    let mut acc = 0.0;
                    let mut ln_odd_fact = 0.0; // ln((2m+1)!)
                    let mut small_streak = 0;
                    for m in 0..400u32 {
                        if m > 0 {
                            let mm = 2 * m;
                            ln_odd_fact += (mm as f64).ln() + (mm as f64 + 1.0).ln();
                        }
                        let rate = beta + (2 * m + 1) as f64 * theta;
                        let ln_mag = k as f64 * rate.ln() - ln_odd_fact - ln_k_fact;
                        let term = ln_mag.exp() * if m % 2 == 0 { 1.0 } else { -1.0 };
                        acc += term;
                        if term.abs() < 1e-22 * (acc.abs() + 1e-300) {
                            small_streak += 1;
                            if small_streak >= 3 {
                                break;
                            }
                        } else {
                            small_streak = 0;
                        }
                    }
                    v.push(acc);
                }
                Some((v, f64::INFINITY))
            }
            ForcingSpec::SpikeTrain { heights, widths } => {
                // Identically zero up to the first active spike.
                for n in 0..1024u64 {
                    let (h, w) = spike_params(heights, widths, n);
                    if h > 0.0 && w > 0.0 {
                        let start = n as f64 + 0.5 - 0.5 * w.min(1.0);
                        if start <= 0.0 {
                            return None;
                        }
                        return Some((vec![0.0; order + 1], start));
                    }
                }
                Some((vec![0.0; order + 1], 1024.0))
            }
            ForcingSpec::Sum { terms } => {
                let mut v = vec![0.0; order + 1];
                let mut radius = f64::INFINITY;
                for f in terms {
                    let (cs, r) = f.taylor_coeffs(order)?;
                    radius = radius.min(r);
                    for (dst, src) in v.iter_mut().zip(cs) {
                        *dst += src;
                    }
                }
                Some((v, radius))
            }
            ForcingSpec::Scale { factor, inner } => {
                let (mut cs, r) = inner.taylor_coeffs(order)?;
                for c in cs.iter_mut() {
                    *c *= factor;
                }
                Some((cs, r))
            }
            ForcingSpec::Manufactured { .. } | ForcingSpec::Tabulated { .. } => None,
        }
    }

    /// Kink locations inside `(a, b)` where quadrature panels must split.
    pub(crate) fn breakpoints(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        let push = |out: &mut Vec<f64>, x: f64| {
            if x > a && x < b {
                out.push(x);
            }
        };
        match self {
            ForcingSpec::PowerLaw { .. } => push(out, 1.0),
            ForcingSpec::PowerLogLaw { .. } => {
                push(out, 1.0);
                push(out, E);
            }
            ForcingSpec::SpikeTrain { heights, widths } => {
                let lo = a.floor().max(0.0) as u64;
                let hi = b.ceil().max(0.0) as u64;
                for n in lo..=hi {
                    let (h, w) = spike_params(heights, widths, n);
                    if h > 0.0 && w > 0.0 {
                        let w = w.min(1.0);
                        let c = n as f64 + 0.5;
                        push(out, c - 0.5 * w);
                        push(out, c);
                        push(out, c + 0.5 * w);
                    }
                }
            }
            ForcingSpec::Sum { terms } => {
                for f in terms {
                    f.breakpoints(a, b, out);
                }
            }
            ForcingSpec::Scale { inner, .. } => inner.breakpoints(a, b, out),
            _ => {}
        }
    }

    /// `∫_a^b f(s) ds` by breakpoint-split, oscillation-aware composite
    /// Gauss–Legendre. Tabulated data integrates its interpolant exactly.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64, ForcingError> {
        self.integrate_transformed(a, b, |x| x)
    }

    /// `∫_a^b f(s)^2 ds`, same panel rules (used for noise intensities).
    pub fn integrate_square(&self, a: f64, b: f64) -> Result<f64, ForcingError> {
        self.integrate_transformed(a, b, |x| x * x)
    }

    fn integrate_transformed(
        &self,
        a: f64,
        b: f64,
        map: impl Fn(f64) -> f64 + Copy,
    ) -> Result<f64, ForcingError> {
        if b <= a {
            return Ok(0.0);
        }
        if let ForcingSpec::Tabulated { table } = self {
            return integrate_tabulated(table, a, b, map);
        }
        let mut pts = vec![a, b];
        self.breakpoints(a, b, &mut pts);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts.dedup();
        let mut total = 0.0;
        let mut panels: usize = 0;
        for win in pts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            // March substeps left to right; the admissible step shrinks
            // with t for the high-frequency family.
            let mut t = lo;
            while t < hi {
                let cap = self.osc_substep(t).min(0.25);
                let step = cap.min(hi - t);
                let next = if hi - t - step < 1e-15 * hi.abs().max(1.0) {
                    hi
                } else {
                    t + step
                };
                total += gl5(|s| map(self.eval(s)), t, next);
                panels += 1;
                if panels > OSC_BUDGET {
                    return Err(ForcingError::OscillationBudget { requested: panels });
                }
                t = next;
            }
        }
        Ok(total)
    }
}

fn integrate_tabulated(
    table: &DenseSolution,
    a: f64,
    b: f64,
    map: impl Fn(f64) -> f64 + Copy,
) -> Result<f64, ForcingError> {
    let first = table
        .first_time()
        .ok_or(ForcingError::TabulatedDomain { t: a })?;
    let last = table.last_time().unwrap();
    if a < first || b > last {
        return Err(ForcingError::TabulatedDomain {
            t: if a < first { a } else { b },
        });
    }
    let times = &table.path.times;
    let mut total = 0.0;
    let i0 = times.partition_point(|&x| x <= a).saturating_sub(1);
    let mut lo = a;
    let mut i = i0;
    while lo < b {
        let seg_end = if i + 1 < times.len() {
            times[i + 1]
        } else {
            last
        };
        let hi = seg_end.min(b);
        if hi > lo {
            // One panel per segment: exact for the cubic interpolant
            // composed with an affine map, more than enough for |.|^2.
            total += gl5(|s| map(table.eval_scalar(s).unwrap()), lo, hi);
        }
        lo = hi;
        i += 1;
        if i + 1 >= times.len() && lo >= last {
            break;
        }
    }
    Ok(total)
}

/// Triangle-area window integral `∫_n^{n+1} f = w_n h_n / 2` for a spike
/// train, computed analytically.
pub fn spike_window_integral(heights: &SpikeRule, widths: &SpikeRule, n: u64) -> f64 {
    let (h, w) = spike_params(heights, widths, n);
    if h > 0.0 && w > 0.0 {
        0.5 * w.min(1.0) * h
    } else {
        0.0
    }
}

/// Build the forcing whose induced solution (given matching initial
/// history) is exactly `z`.
pub fn manufactured_phi(z: ZSpec, a: f64, b: f64, q: f64) -> Result<ForcingSpec, ForcingError> {
    let spec = ForcingSpec::Manufactured { z, a, b, q };
    spec.validate()?;
    Ok(spec)
}

/// Monotone C¹ weight families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MonotoneFamily {
    /// `c t^p`, p > 0
    Power { c: f64, p: f64 },
    /// `c e^{rate t}`, rate > 0
    Exp { c: f64, rate: f64 },
    /// `c ln(e + t)`
    Log { c: f64 },
}

/// Subexponential weight families: `exp(c t^rho)` with 0 < rho < 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SubexpFamily {
    ExpPow { c: f64, rho: f64 },
}

/// Weight functions `γ` for rate comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `t^η (ln t)^m` for t >= e, `t^η` below: regularly varying with
    /// index η and slowly varying factor `(ln t)^m`.
    RegularlyVarying {
        eta: f64,
        log_power: u32,
    },
    MonotoneC1 {
        family: MonotoneFamily,
    },
    Subexponential {
        family: SubexpFamily,
    },
}

impl WeightSpec {
    pub fn rv(eta: f64) -> Self {
        WeightSpec::RegularlyVarying { eta, log_power: 0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            WeightSpec::RegularlyVarying { eta, log_power } => {
                let base = t.powf(*eta);
                if t >= E && *log_power > 0 {
                    base * t.ln().powi(*log_power as i32)
                } else {
                    base
                }
            }
            WeightSpec::MonotoneC1 { family } => match family {
                MonotoneFamily::Power { c, p } => c * t.powf(*p),
                MonotoneFamily::Exp { c, rate } => c * (rate * t).exp(),
                MonotoneFamily::Log { c } => c * (E + t).ln(),
            },
            WeightSpec::Subexponential { family } => match family {
                SubexpFamily::ExpPow { c, rho } => (c * t.powf(*rho)).exp(),
            },
        }
    }
}

/// `eval_weight(γ, t)` — positive weight value at t > 0.
pub fn eval_weight(w: &WeightSpec, t: f64) -> f64 {
    w.eval(t)
}
