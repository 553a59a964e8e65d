//! Numerical thresholds shared across modules.

/// Default relative rank threshold (singular values below `RANK_REL * sigma_max` are zero).
pub const RANK_REL: f64 = 1e-9;
/// Singular values at or below this are zero regardless of scale.
pub const RANK_ABS: f64 = 1e-11;

/// `|det - 1|` allowed for an `SL(2, C)` image.
pub const DET_TOL: f64 = 1e-10;

/// Frobenius residual allowed for a relator evaluated at a representation.
pub const RELATOR_TOL: f64 = 1e-10;

/// Separating curves must map to the identity within this residual.
pub const SEPARATING_TOL: f64 = 1e-8;

/// Relative residual for preimages (sections).
pub const PREIMAGE_TOL: f64 = 1e-8;

/// Basis condition number above which transition determinants are refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative antisymmetry defect tolerated before a Pfaffian is taken.
pub const ANTISYM_TOL: f64 = 1e-8;

/// Relative residual for cocycle checks.
pub const COCYCLE_TOL: f64 = 1e-8;

/// Sampled block images with a larger Frobenius norm are redrawn; keeps
/// entries O(1) so the relative tolerances apply.
pub const MAX_IMAGE_NORM: f64 = 10.0;

/// Sampled blocks whose coboundary `delta1` has a larger operator norm are
/// redrawn; rounding in the cup form grows with its square.
pub const MAX_COBOUNDARY_NORM: f64 = 1e3;

/// Threshold on `|tr[u, v] - 2|` certifying irreducibility.
pub const IRREDUCIBLE_TOL: f64 = 1e-6;

/// Targets with `|tr T - 2|` at or below this are treated as parabolic.
pub const PARABOLIC_TOL: f64 = 1e-6;

/// Composite of consecutive maps in an exact sequence.
pub const EXACTNESS_TOL: f64 = 1e-9;

/// Corrective terms of constructed bases must be one within this.
pub const CORRECTIVE_TOL: f64 = 1e-9;
