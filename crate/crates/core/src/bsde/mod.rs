//! Backward stochastic differential equations on a Brownian path ensemble.
//!
//! [`solve_lipschitz`] runs regression-based backward induction for
//! drivers with integrable Lipschitz weights. [`solve_ucg`] regularizes a
//! uniformly continuous generator along a schedule `n₁ < n₂ < …`, solves
//! each regularized equation on the same ensemble and records the Cauchy
//! gaps between consecutive solutions. [`uniqueness_diagnostic`] compares
//! two solutions against the deterministic bound sequence `f^{n,j}`.

pub mod diagnostic;
pub mod export;
pub mod paths;
pub mod regression;
pub mod solver;
pub mod ucg;

pub use diagnostic::{uniqueness_diagnostic, DiagnosticReport};
pub use paths::{simulate_paths, PathEnsemble};
pub use regression::RegressionSpec;
pub use solver::{
    mean_se, solve_lipschitz, BsdeDriver, BsdeSolution, CauchyEntry, ConvergenceRecord, ResidualProbe, Terminal,
};
pub use ucg::{solve_ucg, ScheduleEntry, SquareIntegrability, UcgOutcome};
