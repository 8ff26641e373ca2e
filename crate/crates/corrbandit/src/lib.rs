//! Simulation and analysis toolkit for best-arm identification in
//! correlated Gaussian bandits where the sampling unit is a pair of arms
//! and arm quality is the aggregate mean-squared error of predicting the
//! remaining arms.

pub mod algorithms;
pub mod environment;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod theory;

pub use algorithms::{
    phase_schedule, successive_rejects, theoretical_error_bound, uniform_sampling, BoundKind,
    BoundParams, PhaseSchedule, RunResult, DEFAULT_BOUND_C,
};
pub use environment::{
    complexity_summary, derive_seed, gap_profile, true_mse, ComplexitySummary, CovarianceModel,
    Environment, GapProfile,
};
pub use error::{AlgError, EnvError, EstimatorError, TheoryError};
pub use estimator::{MseEstimates, PairStore, VarianceMode};
pub use harness::{
    run_concentration_study, run_experiment, run_theory_report, Algorithm, BudgetSpec,
    HarnessError, Study, StudyConfig,
};
pub use theory::{
    empirical_kl, kl_analytic_cap, kl_bivariate, kl_gaussian, kl_pairwise, lower_bound_value,
    LowerBoundParams,
};
