//! pantolab: a numerical laboratory for perturbed deterministic and
//! stochastic pantograph equations.
//!
//! The unforced pantograph equation `u'(t) = b u(t) + a u(qt)` with
//! proportional delay `qt`, q in (0,1), has power-law asymptotics
//! `u(t) = O(t^κ)` with `κ = -ln|b/a|/ln(1/q)` whenever `b < 0`,
//! `|b| > |a|`. This crate simulates the deterministically and
//! stochastically forced variants at desk scale and implements the
//! asymptotic functionals (`f_θ` window averages, `σ²₁`, the `S(ε)`
//! series, `K_n` envelopes, Perron ratios) whose behaviour characterizes
//! convergence, boundedness and growth of the forced solutions.
//!
//! Module map:
//! - [`history`]: dense trajectories; delayed evaluation anywhere in the past
//! - [`forcing`]: closed analytic families of forcings, noises and weights
//! - [`det`]: deterministic solvers (uniform RK4, log-time long-horizon
//!   stepper, general unbounded delay, auxiliary ODE) and the Taylor oracle
//! - [`stoch`]: Brownian paths, OU-type auxiliary SDEs, forced pantograph
//!   SDE (Euler–Maruyama and decomposed), multiplicative-noise solver
//! - [`decomposition`]: the additive decomposition X = Z + Y and its
//!   representation-identity residual checks
//! - [`diagnostics`]: rate estimators, S(ε) classification, limit
//!   classifiers, fundamental-envelope checks
//! - [`multidim`]: d-dimensional systems, Lyapunov equation, stability
//!   criteria, row-reduced noise classification
//! - [`scenario`]: config-driven runs and ensembles
//! - [`verify`]: the acceptance suites behind `pantolab verify`

pub mod decomposition;
pub mod det;
pub mod diagnostics;
pub mod forcing;
pub mod history;
pub mod linalg;
pub mod multidim;
pub mod quad;
pub mod rng;
pub mod scenario;
pub mod stoch;
pub mod verify;

pub use det::{
    solve_aux_y, solve_general_delay, solve_pantograph, solve_pantograph_with, taylor_oracle,
    DetError, GridSpec, InitialData, PantographParams,
};
pub use forcing::{ForcingSpec, NoiseSpec, WeightSpec, ZSpec};
pub use history::{DenseSolution, Interp, SampledPath};
pub use stoch::{
    sample_brownian, solve_multiplicative, solve_sdde, solve_y, solve_y0, BrownianPath,
    MultiplicativeParams, SddeMethod, Y0Mode,
};
