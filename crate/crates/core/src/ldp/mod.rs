//! Large-deviation rate functions on truncated prime-digit state spaces.

pub mod closed_form;
pub mod measure;
pub mod solver;
pub mod state;

pub use closed_form::{bernoulli_kl, k1_rate, rate_at_one, squarefree_rate};
pub use measure::{
    empirical_measure, empirical_measure_binary, kernel_sums, kl_divergence, quadratic_functional,
    subset_sum_transform, TruncatedMeasure,
};
pub use solver::{
    fixed_point, measure_checksum, rate_curve, rate_function_point, uniform_grid, FixedPoint,
    RateCurve, RateDiagnostics, RatePoint, RateRecord, RateSolver, SolverConfig,
};
pub use state::{kernel_f, kernel_f_ell, MixedKernel, MixedState, Mode, StateSpace};
