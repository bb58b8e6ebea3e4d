//! Config-driven scenario execution: single runs, Monte Carlo ensembles,
//! and report emission.
//!
//! Configs are JSON (one file per scenario), trajectories CSV, reports
//! JSON. A run is a pure function of `(config, seed)`: ensemble path i
//! uses RNG stream i (multidim drivers use streams `i*r + j`), so verdicts
//! are independent of worker count and scheduling.

use crate::decomposition;
use crate::det::{
    solve_aux_y, solve_general_delay, solve_pantograph, DelayFn, DetError, GeneralDelaySpec,
    GridSpec, PantographParams,
};
use crate::diagnostics::{
    self, classify_limit, classify_s, ClassifyOptions, DiagError, EstimateMethod, EstimateOptions,
    LimitClass, LimitVerdict, RateEstimate, SClassification, ThetaSpec, Window,
};
use crate::forcing::{ForcingError, ForcingSpec, NoiseSpec};
use crate::history::{to_csv, DenseSolution, HistoryError};
use crate::linalg::Mat;
use crate::multidim::{solve_multidim, MatrixParams, MultidimError, MultidimMethod};
use crate::stoch::{
    sample_brownian, sdde_times, solve_multiplicative, solve_sdde, GeometricGrid,
    MultiplicativeParams, SddeMethod, StochError,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `params.q`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Det(DetError),
    Stoch(StochError),
    Multidim(MultidimError),
    Diag(DiagError),
    Forcing(ForcingError),
    History(HistoryError),
    Io(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Det(e) => write!(f, "solver: {e}"),
            Self::Stoch(e) => write!(f, "solver: {e}"),
            Self::Multidim(e) => write!(f, "solver: {e}"),
            Self::Diag(e) => write!(f, "diagnostics: {e}"),
            Self::Forcing(e) => write!(f, "forcing: {e}"),
            Self::History(e) => write!(f, "history: {e}"),
            Self::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

macro_rules! from_err {
    ($var:ident, $ty:ty) => {
        impl From<$ty> for RunError {
            fn from(e: $ty) -> Self {
                RunError::$var(e)
            }
        }
    };
}

from_err!(Config, ConfigError);
from_err!(Det, DetError);
from_err!(Stoch, StochError);
from_err!(Multidim, MultidimError);
from_err!(Diag, DiagError);
from_err!(Forcing, ForcingError);
from_err!(History, HistoryError);

fn cfg_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.into(),
    }
}

/// Equation selection with its coefficients and driving terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquationKind {
    DetPantograph {
        a: f64,
        b: f64,
        q: f64,
        x0: f64,
        forcing: ForcingSpec,
    },
    StochPantograph {
        a: f64,
        b: f64,
        q: f64,
        x0: f64,
        forcing: ForcingSpec,
        noise: NoiseSpec,
        method: SddeMethod,
    },
    GeneralDelay {
        a: f64,
        b: f64,
        delay: DelayFn,
        initial: ForcingSpec,
        forcing: ForcingSpec,
    },
    Multidim {
        b: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
        q: f64,
        x0: Vec<f64>,
        forcing: Vec<ForcingSpec>,
        sigma: Vec<Vec<NoiseSpec>>,
        method: MultidimMethod,
    },
    Multiplicative {
        a: f64,
        b: f64,
        q: f64,
        sigma: f64,
        x0: f64,
    },
    AuxOnly {
        forcing: ForcingSpec,
    },
}

impl EquationKind {
    pub fn is_stochastic(&self) -> bool {
        matches!(
            self,
            EquationKind::StochPantograph { .. }
                | EquationKind::Multidim { .. }
                | EquationKind::Multiplicative { .. }
        )
    }
}

fn default_steps_per_delay() -> usize {
    16
}

/// Grid selection; `Geometric` serves the multiplicative solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GridConfig {
    UniformTime {
        h: f64,
        t_end: f64,
    },
    LogTime {
        #[serde(default = "default_steps_per_delay")]
        steps_per_delay: usize,
        t0: f64,
        t_end: f64,
    },
    Geometric {
        t0: f64,
        #[serde(default = "default_steps_per_delay")]
        steps_per_qfold: usize,
        t_end: f64,
    },
}

/// Requested post-run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "diag", rename_all = "snake_case")]
pub enum DiagnosticsRequest {
    Kappa,
    ClassifyLimit {
        #[serde(default)]
        options: Option<ClassifyOptions>,
    },
    RateEstimate {
        window: Window,
        method: EstimateMethod,
    },
    Perron {
        window: Window,
        theta: ThetaSpec,
    },
    SClassification {
        epsilons: Vec<f64>,
        n_max: usize,
    },
    KnTable {
        s0: f64,
        count: usize,
    },
    /// Lyapunov equation analysis of the multidim system matrices.
    Lyapunov,
    RepresentationResidual,
    SupFTheta {
        times: Vec<f64>,
    },
}

/// Keyed diagnostics report; absent sections were not requested.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rate_estimates: Vec<RateEstimate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub perron_ratios: Vec<RateEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_classification: Option<SClassification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_class: Option<LimitClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_n_table: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<crate::multidim::LyapunovResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_condition: Option<crate::multidim::StabCond2Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation_residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sup_f_theta: Vec<(f64, f64)>,
    /// Classifier thresholds the limit verdict used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds_used: Option<ClassifyOptions>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Trajectory CSV filename (written when a run directory is given).
    #[serde(default)]
    pub trajectory: Option<String>,
    /// Report JSON filename.
    #[serde(default)]
    pub report: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub equation: EquationKind,
    pub grid: GridConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticsRequest>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| cfg_err("<root>", format!("json parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check_q = |q: f64| -> Result<(), ConfigError> {
            if !(q > 0.0 && q < 1.0) {
                Err(cfg_err("params.q", format!("q must lie in (0,1), got {q}")))
            } else {
                Ok(())
            }
        };
        let check_forcing = |f: &ForcingSpec, field: &str| -> Result<(), ConfigError> {
            f.validate().map_err(|e| cfg_err(field, e.to_string()))
        };
        match &self.equation {
            EquationKind::DetPantograph { a, q, forcing, .. } => {
                check_q(*q)?;
                if *a == 0.0 {
                    return Err(cfg_err("params.a", "a must be nonzero"));
                }
                check_forcing(forcing, "forcing")?;
            }
            EquationKind::StochPantograph {
                a,
                q,
                forcing,
                noise,
                ..
            } => {
                check_q(*q)?;
                if *a == 0.0 {
                    return Err(cfg_err("params.a", "a must be nonzero"));
                }
                check_forcing(forcing, "forcing")?;
                check_forcing(noise, "noise")?;
            }
            EquationKind::GeneralDelay {
                delay,
                initial,
                forcing,
                ..
            } => {
                delay
                    .validate()
                    .map_err(|e| cfg_err("params.delay", e.to_string()))?;
                check_forcing(initial, "initial")?;
                check_forcing(forcing, "forcing")?;
            }
            EquationKind::Multidim {
                b,
                a,
                q,
                x0,
                forcing,
                sigma,
                ..
            } => {
                check_q(*q)?;
                let mp = matrix_params(b, a, *q, forcing, sigma)?;
                mp.validate()
                    .map_err(|e| cfg_err("params", e.to_string()))?;
                if x0.len() != mp.dim() {
                    return Err(cfg_err("params.x0", "length must match the dimension"));
                }
            }
            EquationKind::Multiplicative { q, x0, a, .. } => {
                check_q(*q)?;
                if *a < 0.0 {
                    return Err(cfg_err("params.a", "multiplicative solver requires a >= 0"));
                }
                if !(*x0 > 0.0) {
                    return Err(cfg_err(
                        "params.x0",
                        "multiplicative solver requires x0 > 0",
                    ));
                }
            }
            EquationKind::AuxOnly { forcing } => check_forcing(forcing, "forcing")?,
        }
        if self.equation.is_stochastic() && self.seed.is_none() && seed_from_env().is_none() {
            return Err(cfg_err(
                "seed",
                "stochastic scenarios need a seed (config, flag or PANTOLAB_SEED)",
            ));
        }
        if let Some(e) = &self.ensemble {
            if e.paths == 0 {
                return Err(cfg_err("ensemble.paths", "must be >= 1"));
            }
        }
        Ok(())
    }
}

fn matrix_params(
    b: &[Vec<f64>],
    a: &[Vec<f64>],
    q: f64,
    forcing: &[ForcingSpec],
    sigma: &[Vec<NoiseSpec>],
) -> Result<MatrixParams, ConfigError> {
    let b_mat = Mat::from_rows(b).map_err(|e| cfg_err("params.b", e.to_string()))?;
    let a_mat = Mat::from_rows(a).map_err(|e| cfg_err("params.a", e.to_string()))?;
    Ok(MatrixParams {
        b_mat,
        a_mat,
        q,
        sigma: sigma.to_vec(),
        f: forcing.to_vec(),
    })
}

pub fn seed_from_env() -> Option<u64> {
    std::env::var("PANTOLAB_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
}

/// Seed priority: explicit override, then config, then PANTOLAB_SEED.
pub fn resolve_seed(
    config: &ScenarioConfig,
    override_seed: Option<u64>,
) -> Result<u64, ConfigError> {
    override_seed
        .or(config.seed)
        .or_else(seed_from_env)
        .ok_or_else(|| cfg_err("seed", "no seed available"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub stream: u64,
    pub t_end: f64,
    pub terminal: Vec<f64>,
    pub diagnostics: DiagnosticsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
    pub version: String,
}

/// Solve one trajectory for `config` on RNG stream `stream`.
pub fn solve_scenario(
    config: &ScenarioConfig,
    seed: u64,
    stream: u64,
) -> Result<DenseSolution, RunError> {
    match (&config.equation, &config.grid) {
        (
            EquationKind::DetPantograph {
                a,
                b,
                q,
                x0,
                forcing,
            },
            grid,
        ) => {
            let params = PantographParams::new(*a, *b, *q)?;
            let gs = det_grid(grid)?;
            Ok(solve_pantograph(&params, forcing, *x0, &gs)?)
        }
        (EquationKind::AuxOnly { forcing }, grid) => {
            let gs = det_grid(grid)?;
            Ok(solve_aux_y(forcing, &gs)?)
        }
        (
            EquationKind::GeneralDelay {
                a,
                b,
                delay,
                initial,
                forcing,
            },
            grid,
        ) => {
            let gs = det_grid(grid)?;
            let spec = GeneralDelaySpec {
                delay: *delay,
                initial: initial.clone(),
            };
            Ok(solve_general_delay(*b, *a, &spec, forcing, &gs)?)
        }
        (
            EquationKind::StochPantograph {
                a,
                b,
                q,
                x0,
                forcing,
                noise,
                method,
            },
            GridConfig::UniformTime { h, t_end },
        ) => {
            let params = PantographParams::new(*a, *b, *q)?;
            let times = sdde_times(*h, *t_end);
            let path = sample_brownian(&times, seed, stream)?;
            Ok(solve_sdde(&params, forcing, noise, &path, *x0, *method)?)
        }
        (EquationKind::StochPantograph { .. }, _) => Err(RunError::Config(cfg_err(
            "grid.mode",
            "stochastic pantograph runs need a uniform grid",
        ))),
        (
            EquationKind::Multidim {
                b,
                a,
                q,
                x0,
                forcing,
                sigma,
                method,
            },
            GridConfig::UniformTime { h, t_end },
        ) => {
            let mp = matrix_params(b, a, *q, forcing, sigma)?;
            let times = sdde_times(*h, *t_end);
            let r = mp.drivers();
            let paths: Vec<_> = (0..r)
                .map(|j| sample_brownian(&times, seed, stream * r as u64 + j as u64))
                .collect::<Result<_, _>>()?;
            Ok(solve_multidim(&mp, &paths, x0, *method)?)
        }
        (EquationKind::Multidim { .. }, _) => Err(RunError::Config(cfg_err(
            "grid.mode",
            "multidimensional runs need a uniform grid",
        ))),
        (
            EquationKind::Multiplicative { a, b, q, sigma, x0 },
            GridConfig::Geometric {
                t0,
                steps_per_qfold,
                t_end,
            },
        ) => {
            let mp = MultiplicativeParams::new(*a, *b, *q, *sigma)?;
            let grid = GeometricGrid {
                t0: *t0,
                steps_per_qfold: *steps_per_qfold,
                t_end: *t_end,
            };
            let times = grid.brownian_times(mp.q);
            let path = sample_brownian(&times, seed, stream)?;
            Ok(solve_multiplicative(&mp, &path, *x0, &grid)?.x)
        }
        (EquationKind::Multiplicative { .. }, _) => Err(RunError::Config(cfg_err(
            "grid.mode",
            "multiplicative runs need the geometric grid",
        ))),
    }
}

fn det_grid(grid: &GridConfig) -> Result<GridSpec, RunError> {
    match *grid {
        GridConfig::UniformTime { h, t_end } => Ok(GridSpec::UniformTime { h, t_end }),
        GridConfig::LogTime {
            steps_per_delay,
            t0,
            t_end,
        } => Ok(GridSpec::LogTime {
            steps_per_delay,
            t0,
            t_end,
        }),
        GridConfig::Geometric { .. } => Err(RunError::Config(cfg_err(
            "grid.mode",
            "geometric grid is reserved for the multiplicative solver",
        ))),
    }
}

fn pantograph_coeffs(eq: &EquationKind) -> Option<(f64, f64, f64)> {
    match eq {
        EquationKind::DetPantograph { a, b, q, .. }
        | EquationKind::StochPantograph { a, b, q, .. }
        | EquationKind::Multiplicative { a, b, q, .. } => Some((*a, *b, *q)),
        _ => None,
    }
}

/// Run requested diagnostics over a finished trajectory.
pub fn run_diagnostics(
    config: &ScenarioConfig,
    sol: &DenseSolution,
) -> Result<DiagnosticsReport, RunError> {
    let mut out = DiagnosticsReport::default();
    for req in &config.diagnostics {
        match req {
            DiagnosticsRequest::Kappa => {
                let (a, b, q) = pantograph_coeffs(&config.equation).ok_or_else(|| {
                    RunError::Config(cfg_err(
                        "diagnostics.kappa",
                        "kappa needs pantograph coefficients",
                    ))
                })?;
                out.kappa = Some(diagnostics::kappa(a, b, q)?);
            }
            DiagnosticsRequest::ClassifyLimit { options } => {
                let opts = options.unwrap_or_default();
                out.limit_class = Some(classify_limit(sol, &opts)?);
                out.thresholds_used = Some(opts);
            }
            DiagnosticsRequest::RateEstimate { window, method } => {
                let est = diagnostics::estimate_exponent(
                    sol,
                    window,
                    method,
                    &EstimateOptions::default(),
                )?;
                out.rate_estimates.push(est);
            }
            DiagnosticsRequest::Perron { window, theta } => {
                let est =
                    diagnostics::perron_ratio(sol, theta, window, &EstimateOptions::default())?;
                out.perron_ratios.push(est);
            }
            DiagnosticsRequest::SClassification { epsilons, n_max } => {
                let noise = match &config.equation {
                    EquationKind::StochPantograph { noise, .. } => noise.clone(),
                    _ => {
                        return Err(RunError::Config(cfg_err(
                            "diagnostics.s_classification",
                            "needs a scalar noise spec",
                        )))
                    }
                };
                out.s_classification = Some(classify_s(&noise, epsilons, *n_max)?);
            }
            DiagnosticsRequest::KnTable { s0, count } => {
                let (a, b, q) = pantograph_coeffs(&config.equation).ok_or_else(|| {
                    RunError::Config(cfg_err(
                        "diagnostics.kn_table",
                        "K_n needs pantograph coefficients",
                    ))
                })?;
                let params = PantographParams::new(a, b, q)?;
                out.k_n_table = Some(diagnostics::k_n_sequence(sol, &params, *s0, *count, 64)?);
            }
            DiagnosticsRequest::Lyapunov => {
                let (b, a) = match &config.equation {
                    EquationKind::Multidim { b, a, .. } => (
                        Mat::from_rows(b)
                            .map_err(|e| RunError::Config(cfg_err("params.b", e.to_string())))?,
                        Mat::from_rows(a)
                            .map_err(|e| RunError::Config(cfg_err("params.a", e.to_string())))?,
                    ),
                    _ => {
                        return Err(RunError::Config(cfg_err(
                            "diagnostics.lyapunov",
                            "needs a multidim equation",
                        )))
                    }
                };
                out.lyapunov = Some(crate::multidim::lyapunov_solve(&b, &a)?);
                out.stability_condition = Some(crate::multidim::check_stabcond2(&b, &a)?);
            }
            DiagnosticsRequest::RepresentationResidual => {
                let (forcing, params) = match &config.equation {
                    EquationKind::DetPantograph {
                        a, b, q, forcing, ..
                    } => (forcing.clone(), PantographParams::new(*a, *b, *q)?),
                    _ => {
                        return Err(RunError::Config(cfg_err(
                            "diagnostics.representation_residual",
                            "only available for det_pantograph scenarios",
                        )))
                    }
                };
                let grid = det_grid(&config.grid)?;
                let y = solve_aux_y(&forcing, &grid)?;
                let residual = decomposition::check_representation(sol, &y, &params)
                    .map_err(|e| RunError::Io(e.to_string()))?;
                out.representation_residual = Some(residual);
            }
            DiagnosticsRequest::SupFTheta { times } => {
                let f = match &config.equation {
                    EquationKind::DetPantograph { forcing, .. }
                    | EquationKind::StochPantograph { forcing, .. }
                    | EquationKind::AuxOnly { forcing }
                    | EquationKind::GeneralDelay { forcing, .. } => forcing.clone(),
                    _ => {
                        return Err(RunError::Config(cfg_err(
                            "diagnostics.sup_f_theta",
                            "needs a scalar forcing",
                        )))
                    }
                };
                for &t in times {
                    out.sup_f_theta
                        .push((t, diagnostics::sup_f_theta(&f, t, 33)?));
                }
            }
        }
    }
    Ok(out)
}

/// Execute a single run: solve, diagnose, optionally write trajectory CSV
/// and report JSON under `out_dir`.
pub fn run_simulate(
    config: &ScenarioConfig,
    override_seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<RunReport, RunError> {
    config.validate()?;
    let seed = if config.equation.is_stochastic() {
        resolve_seed(config, override_seed)?
    } else {
        override_seed
            .or(config.seed)
            .or_else(seed_from_env)
            .unwrap_or(0)
    };
    let sol = solve_scenario(config, seed, 0)?;
    let diagnostics = run_diagnostics(config, &sol)?;
    let mut report = RunReport {
        config: config.clone(),
        seed,
        stream: 0,
        t_end: sol.last_time().unwrap_or(f64::NAN),
        terminal: sol.path.value(sol.len() - 1).to_vec(),
        diagnostics,
        trajectory_csv: None,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(e.to_string()))?;
        let name = config
            .output
            .trajectory
            .clone()
            .unwrap_or_else(|| "trajectory.csv".into());
        let path = dir.join(&name);
        std::fs::write(&path, to_csv(&sol)).map_err(|e| RunError::Io(e.to_string()))?;
        report.trajectory_csv = Some(name);
        let report_name = config
            .output
            .report
            .clone()
            .unwrap_or_else(|| "report.json".into());
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| RunError::Io(e.to_string()))?;
        std::fs::write(dir.join(report_name), json).map_err(|e| RunError::Io(e.to_string()))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VerdictTally {
    pub converges_to_zero: usize,
    pub converges_to_limit: usize,
    pub bounded_nonconvergent: usize,
    pub unbounded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileWindow {
    pub t_lo: f64,
    pub t_hi: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub stream: u64,
    pub terminal: Vec<f64>,
    pub verdict: LimitVerdict,
    /// `(1/t) ln X(t)` at the horizon, multiplicative runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_lyapunov: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub paths: usize,
    pub tally: VerdictTally,
    pub quantiles: Vec<QuantileWindow>,
    pub per_path: Vec<PathSummary>,
    pub version: String,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn classify_options(config: &ScenarioConfig) -> ClassifyOptions {
    config
        .diagnostics
        .iter()
        .find_map(|d| match d {
            DiagnosticsRequest::ClassifyLimit { options } => Some(options.unwrap_or_default()),
            _ => None,
        })
        .unwrap_or_default()
}

/// Monte Carlo ensemble: path i on stream i, optional worker threads, and
/// a per-time-window quantile summary of the per-path sup |X|.
pub fn run_ensemble(
    config: &ScenarioConfig,
    override_seed: Option<u64>,
    threads: usize,
    out_dir: Option<&Path>,
) -> Result<EnsembleReport, RunError> {
    config.validate()?;
    if !config.equation.is_stochastic() {
        return Err(RunError::Config(cfg_err(
            "equation.kind",
            "ensembles need a stochastic kind",
        )));
    }
    let n_paths = config.ensemble.map(|e| e.paths).unwrap_or(1);
    let seed = resolve_seed(config, override_seed)?;
    let opts = classify_options(config);
    let threads = threads.max(1).min(n_paths);

    let run_one = |stream: u64| -> Result<(PathSummary, Vec<f64>, Vec<f64>), RunError> {
        // Multiplicative paths report the Lyapunov functional from the
        // factorized solve (log-exact even when X overflows).
        let (sol, lyap) = match (&config.equation, &config.grid) {
            (
                EquationKind::Multiplicative { a, b, q, sigma, x0 },
                GridConfig::Geometric {
                    t0,
                    steps_per_qfold,
                    t_end,
                },
            ) => {
                let mp = MultiplicativeParams::new(*a, *b, *q, *sigma)?;
                let grid = GeometricGrid {
                    t0: *t0,
                    steps_per_qfold: *steps_per_qfold,
                    t_end: *t_end,
                };
                let times = grid.brownian_times(mp.q);
                let path = sample_brownian(&times, seed, stream)?;
                let msol = solve_multiplicative(&mp, &path, *x0, &grid)?;
                let lyap = msol.terminal_lyapunov();
                (msol.x, Some(lyap))
            }
            _ => (solve_scenario(config, seed, stream)?, None),
        };
        let verdict = classify_limit(&sol, &opts)?.verdict;
        let summary = PathSummary {
            stream,
            terminal: sol.path.value(sol.len() - 1).to_vec(),
            verdict,
            terminal_lyapunov: lyap,
        };
        // Per-window sup |X| over ten node-index blocks.
        let n = sol.len();
        let d = sol.dim();
        let mut sups = Vec::with_capacity(10);
        let mut edges = Vec::with_capacity(10);
        for w in 0..10 {
            let i0 = w * n / 10;
            let i1 = ((w + 1) * n / 10).max(i0 + 1).min(n);
            let mut sup = 0.0f64;
            for k in i0..i1 {
                let norm = if d == 1 {
                    sol.path.value(k)[0].abs()
                } else {
                    sol.path.value(k).iter().map(|v| v * v).sum::<f64>().sqrt()
                };
                sup = sup.max(norm);
            }
            sups.push(sup);
            edges.push(sol.path.times[i0]);
        }
        edges.push(sol.last_time().unwrap());
        Ok((summary, sups, edges))
    };

    let mut results: Vec<Option<(PathSummary, Vec<f64>, Vec<f64>)>> = Vec::new();
    results.resize_with(n_paths, || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<Result<(PathSummary, Vec<f64>, Vec<f64>), RunError>>>> =
        (0..n_paths).map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n_paths {
                    break;
                }
                let out = run_one(i as u64);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    for (i, slot) in slots.into_iter().enumerate() {
        let val = slot.into_inner().unwrap().expect("worker finished")?;
        results[i] = Some(val);
    }
    let results: Vec<(PathSummary, Vec<f64>, Vec<f64>)> =
        results.into_iter().map(|r| r.unwrap()).collect();

    let mut tally = VerdictTally::default();
    for (s, _, _) in &results {
        match s.verdict {
            LimitVerdict::ConvergesToZero => tally.converges_to_zero += 1,
            LimitVerdict::ConvergesTo { .. } => tally.converges_to_limit += 1,
            LimitVerdict::BoundedNonconvergent => tally.bounded_nonconvergent += 1,
            LimitVerdict::Unbounded => tally.unbounded += 1,
        }
    }
    let edges = results[0].2.clone();
    let mut quantiles = Vec::with_capacity(10);
    for w in 0..10 {
        let mut vals: Vec<f64> = results.iter().map(|(_, sups, _)| sups[w]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        quantiles.push(QuantileWindow {
            t_lo: edges[w],
            t_hi: edges[w + 1],
            q05: quantile(&vals, 0.05),
            q25: quantile(&vals, 0.25),
            q50: quantile(&vals, 0.50),
            q75: quantile(&vals, 0.75),
            q95: quantile(&vals, 0.95),
        });
    }
    let report = EnsembleReport {
        config: config.clone(),
        seed,
        paths: n_paths,
        tally,
        quantiles,
        per_path: results.into_iter().map(|(s, _, _)| s).collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(e.to_string()))?;
        let name = config
            .output
            .report
            .clone()
            .unwrap_or_else(|| "ensemble.json".into());
        let json =
            serde_json::to_string_pretty(&report).map_err(|e| RunError::Io(e.to_string()))?;
        std::fs::write(dir.join(name), json).map_err(|e| RunError::Io(e.to_string()))?;
    }
    Ok(report)
}

/// The multiplicative per-path Lyapunov values, when present.
pub fn lyapunov_values(report: &EnsembleReport) -> Vec<f64> {
    report
        .per_path
        .iter()
        .filter_map(|p| p.terminal_lyapunov)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det_config() -> ScenarioConfig {
        ScenarioConfig {
            equation: EquationKind::DetPantograph {
                a: 0.5,
                b: -1.0,
                q: 0.5,
                x0: 1.0,
                forcing: ForcingSpec::Zero,
            },
            grid: GridConfig::UniformTime {
                h: 1e-3,
                t_end: 1.0,
            },
            seed: None,
            ensemble: None,
            diagnostics: vec![DiagnosticsRequest::Kappa],
            output: OutputConfig::default(),
        }
    }

    #[test]
    fn kn_table_request() {
        let mut cfg = det_config();
        cfg.grid = GridConfig::LogTime {
            steps_per_delay: 16,
            t0: 1.0,
            t_end: 300.0,
        };
        cfg.diagnostics = vec![DiagnosticsRequest::KnTable { s0: 0.0, count: 6 }];
        let report = run_simulate(&cfg, None, None).unwrap();
        let kn = report.diagnostics.k_n_table.unwrap();
        assert_eq!(kn.len(), 6);
        // Unforced solution is O(t^κ): the normalized sups stay bounded.
        assert!(kn.iter().all(|&k| k.is_finite() && k > 0.0 && k < 10.0));
    }

    #[test]
    fn lyapunov_request_on_multidim() {
        let cfg = ScenarioConfig {
            equation: EquationKind::Multidim {
                b: vec![vec![-1.0, 0.0], vec![0.0, -2.0]],
                a: vec![vec![0.1, 0.05], vec![0.0, 0.1]],
                q: 0.5,
                x0: vec![1.0, -0.5],
                forcing: vec![ForcingSpec::Zero, ForcingSpec::Zero],
                sigma: vec![vec![ForcingSpec::Zero], vec![ForcingSpec::Zero]],
                method: crate::multidim::MultidimMethod::EulerMaruyama,
            },
            grid: GridConfig::UniformTime {
                h: 0.01,
                t_end: 2.0,
            },
            seed: Some(1),
            ensemble: None,
            diagnostics: vec![DiagnosticsRequest::Lyapunov],
            output: OutputConfig::default(),
        };
        let report = run_simulate(&cfg, None, None).unwrap();
        let ly = report.diagnostics.lyapunov.unwrap();
        assert!(ly.residual <= 1e-10);
        assert!((ly.c1 - 0.25).abs() < 1e-12 && (ly.c2 - 0.5).abs() < 1e-12);
        assert!(report.diagnostics.stability_condition.unwrap().pass);
    }

    #[test]
    fn json_round_trip() {
        let cfg = det_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn invalid_q_reports_field() {
        let mut cfg = det_config();
        if let EquationKind::DetPantograph { ref mut q, .. } = cfg.equation {
            *q = 1.5;
        }
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "params.q");
    }

    #[test]
    fn simulate_deterministic() {
        let report = run_simulate(&det_config(), None, None).unwrap();
        assert!((report.diagnostics.kappa.unwrap() + 1.0).abs() < 1e-12);
        assert!((report.terminal[0] - 0.6435026592814430).abs() < 1e-7);
    }

    #[test]
    fn aux_only_closed_form() {
        let cfg = ScenarioConfig {
            equation: EquationKind::AuxOnly {
                forcing: ForcingSpec::Constant { c: 1.0 },
            },
            grid: GridConfig::UniformTime {
                h: 1e-3,
                t_end: 1.0,
            },
            seed: None,
            ensemble: None,
            diagnostics: vec![],
            output: OutputConfig::default(),
        };
        let report = run_simulate(&cfg, None, None).unwrap();
        assert!((report.terminal[0] - 0.6321205588285577).abs() < 1e-9);
    }

    #[test]
    fn ensemble_deterministic_in_threads() {
        let cfg = ScenarioConfig {
            equation: EquationKind::StochPantograph {
                a: 0.5,
                b: -1.0,
                q: 0.5,
                x0: 1.0,
                forcing: ForcingSpec::Zero,
                noise: ForcingSpec::Constant { c: 0.3 },
                method: SddeMethod::EulerMaruyama,
            },
            grid: GridConfig::UniformTime {
                h: 0.01,
                t_end: 5.0,
            },
            seed: Some(7),
            ensemble: Some(EnsembleConfig { paths: 12 }),
            diagnostics: vec![],
            output: OutputConfig::default(),
        };
        let r1 = run_ensemble(&cfg, None, 1, None).unwrap();
        let r4 = run_ensemble(&cfg, None, 4, None).unwrap();
        let j1 = serde_json::to_string(&r1).unwrap();
        let j4 = serde_json::to_string(&r4).unwrap();
        assert_eq!(j1, j4, "ensemble must be scheduling-invariant");
    }

    #[test]
    fn ensemble_of_one_matches_simulate() {
        let cfg = ScenarioConfig {
            equation: EquationKind::StochPantograph {
                a: 0.5,
                b: -1.0,
                q: 0.5,
                x0: 1.0,
                forcing: ForcingSpec::Zero,
                noise: ForcingSpec::Constant { c: 0.3 },
                method: SddeMethod::EulerMaruyama,
            },
            grid: GridConfig::UniformTime {
                h: 0.01,
                t_end: 5.0,
            },
            seed: Some(11),
            ensemble: Some(EnsembleConfig { paths: 1 }),
            diagnostics: vec![],
            output: OutputConfig::default(),
        };
        let single = run_simulate(&cfg, None, None).unwrap();
        let ens = run_ensemble(&cfg, None, 2, None).unwrap();
        assert_eq!(ens.per_path.len(), 1);
        assert_eq!(ens.per_path[0].terminal, single.terminal);
    }

    #[test]
    fn missing_seed_is_config_error() {
        let mut cfg = det_config();
        cfg.equation = EquationKind::StochPantograph {
            a: 0.5,
            b: -1.0,
            q: 0.5,
            x0: 1.0,
            forcing: ForcingSpec::Zero,
            noise: ForcingSpec::Zero,
            method: SddeMethod::EulerMaruyama,
        };
        cfg.seed = None;
        std::env::remove_var("PANTOLAB_SEED");
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "seed");
    }
}
