//! Fixed-confidence best-arm identification in stochastic linear bandits.
//!
//! The crate implements Lazy Track-and-Stop (LTS): a forced-exploration /
//! tracking sampling rule that follows a lazily re-optimized allocation, a
//! generalized log-likelihood ratio (GLLR) stopping rule whose threshold
//! depends on the ambient dimension only, and the least-squares decision
//! rule. It also ships the unit-sphere variant, two reference baselines and a
//! reproducible Monte-Carlo harness.
//!
//! Module map:
//!
//! - [`linalg`]: small symmetric-matrix kernels (eigen bounds, pseudo-inverse
//!   solves, shifted log-determinants).
//! - [`instance`]: arm sets, problem instances, benchmark generators, CSV I/O.
//! - [`environment`]: seeded Gaussian reward feedback.
//! - [`estimator`]: incremental least-squares sufficient statistics.
//! - [`allocation`]: the allocation objective, its maximization by
//!   Frank-Wolfe, and the sample-complexity lower bound.
//! - [`lts`]: the LTS sampling / stopping machinery and run loop.
//! - [`sphere`]: best-arm identification on the unit sphere.
//! - [`baselines`]: oracle-allocation and static-allocation tracking.
//! - [`harness`]: batch experiments, aggregation and persistence.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod baselines;
pub mod environment;
mod error;
pub mod estimator;
pub mod harness;
pub mod instance;
pub mod linalg;
pub mod lts;
pub mod record;
pub mod rng;
pub mod sphere;
pub mod tol;

pub use allocation::{
    characteristic_time, d_infty, kl_bernoulli, optimize_allocation, psi, psi_supergradient,
    sample_complexity_lower_bound, Allocation, OptimizerResult, OptimizerSettings,
};
pub use baselines::{run_oracle_tracking, run_static};
pub use environment::RewardStream;
pub use error::{Error, Result};
pub use estimator::DesignState;
pub use harness::{bench, AlgorithmSpec, BenchConfig, BenchTable, InstanceSpec, SummaryRow};
pub use instance::{gen_many_arms, gen_orthonormal_basis, ArmKind, ArmSet, Instance};
pub use linalg::SymMatrix;
pub use lts::{
    run_lts, LazySchedule, LtsConfig, StopConfig, ThresholdProfile, TrackerState, TrackingMode,
};
pub use record::{Answer, RunRecord};
pub use sphere::{run_sphere, sphere_lower_bound, EpsilonRule, SphereConfig};
