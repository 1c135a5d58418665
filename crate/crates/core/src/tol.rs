//! Numerical tolerances shared across the crate.
//!
//! Every threshold that decides a discrete outcome (invertibility, support
//! membership, uniqueness of the best arm) lives here so tests can refer to
//! the same values the library uses.

/// Absolute tolerance for the symmetry check of [`SymMatrix`](crate::SymMatrix).
pub const SYMMETRY: f64 = 1e-10;

/// Eigenvalues below `PINV_REL_CUTOFF * lambda_max` are dropped by the pseudo-inverse.
pub const PINV_REL_CUTOFF: f64 = 1e-10;

/// A design matrix counts as invertible when `lambda_min > INVERTIBLE_REL * lambda_max`.
pub const INVERTIBLE_REL: f64 = 1e-12;

/// Minimal gap between the two largest inner products for a unique best arm.
pub const BEST_ARM_GAP: f64 = 1e-12;

/// Weights above this value belong to the support of an allocation.
pub const SUPPORT_CUTOFF: f64 = 1e-9;

/// Allowed deviation of allocation weights from summing to one.
pub const SIMPLEX_SUM: f64 = 1e-12;

/// Norm tolerance for unit vectors produced by the generators.
pub const UNIT_NORM: f64 = 1e-12;
