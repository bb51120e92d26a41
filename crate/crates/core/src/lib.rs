//! Limit theorems for the density of gcds of uniform random integers.
//!
//! For `X_1, ..., X_n` uniform on `{1..n}` the fraction of ordered pairs with
//! `gcd(X_i, X_j) = ell` tends to `6 / (pi^2 ell^2)`. This crate computes that
//! statistic exactly and by simulation, measures its Gaussian fluctuations,
//! evaluates its truncated large-deviation rate function, and checks the
//! tail estimates used along the way.
//!
//! Floating-point routines are generic over [`Real`] (`f32` or `f64`); exact
//! probabilities use integer ratios and big rationals. The `*64` and `*32`
//! aliases below fix the scalar for the common case.

pub mod brute;
pub mod clt;
pub mod error;
pub mod exact;
pub mod ldp;
pub mod primes;
pub mod report;
pub mod sampler;
pub mod scalar;
pub mod tails;

pub use clt::{
    baldi_bound, convergence_fit, ks_distance, ks_report, replicate_statistic, ConvergenceFit,
    DegreeMode, KSReport, Normalization, ReplicaEnsemble, ScaleConvention,
};
pub use error::{Error, Result};
pub use exact::{
    exact_pair_prob, exact_triple_prob, exact_variance, limit_variance, squarefree_count, ExactProb,
    ExactStats, LimitVariance,
};
pub use ldp::{
    kernel_f, kernel_f_ell, kl_divergence, quadratic_functional, rate_curve, rate_function_point,
    squarefree_rate, MixedKernel, RateCurve, RatePoint, SolverConfig, StateSpace, TruncatedMeasure,
};
pub use primes::{euler_product, mertens_sum, EulerFamily, EulerProductResult, PrimeTable, PrimeWindow};
pub use sampler::{crt_coupling, sample_uniform, CoupledBatch, SampleBatch};
pub use scalar::Real;
pub use tails::{mc_tail_estimate, TailExperiment, TailMeasure};

pub type EulerProductResult64 = EulerProductResult<f64>;
pub type ExactStats64 = ExactStats<f64>;
pub type LimitVariance64 = LimitVariance<f64>;
pub type TruncatedMeasure64 = TruncatedMeasure<f64>;
pub type StateSpace64 = StateSpace<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type RatePoint64 = RatePoint<f64>;
pub type RateCurve64 = RateCurve<f64>;
pub type ReplicaEnsemble64 = ReplicaEnsemble<f64>;
pub type KSReport64 = KSReport<f64>;
pub type TailExperiment64 = TailExperiment<f64>;

pub type EulerProductResult32 = EulerProductResult<f32>;
pub type TruncatedMeasure32 = TruncatedMeasure<f32>;
pub type StateSpace32 = StateSpace<f32>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type RateCurve32 = RateCurve<f32>;
pub type ReplicaEnsemble32 = ReplicaEnsemble<f32>;
pub type KSReport32 = KSReport<f32>;
