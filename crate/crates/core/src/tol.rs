//! Numerical thresholds shared across modules.
//!
//! Every tolerance used by the library lives here so that predicates in
//! different modules agree with one another.

/// Minimum distance from an open domain boundary for a point to count as inside.
pub const DOMAIN_MARGIN: f64 = 1e-12;

/// Divergences in `[-NUM_CLAMP, 0)` are rounding noise and are clamped to zero.
pub const NUM_CLAMP: f64 = 1e-10;

/// Target accuracy of numeric gradient inversion, relative to `1 + |y|`.
pub const INV_GRAD: f64 = 1e-12;

/// Normalized in-sphere determinants below this magnitude report "on the sphere".
pub const IN_SPHERE: f64 = 1e-9;

/// Simplices whose lifted system is worse conditioned than this are rejected.
pub const MAX_CONDITION: f64 = 1e-12_f64.recip();

/// Stationarity target and iteration cap of the projected-gradient solver.
pub const PROJECTION: f64 = 1e-6;
pub const PROJECTION_MAX_ITER: usize = 10_000;

/// Absolute accuracy of adaptive Simpson quadrature along geodesics.
pub const QUADRATURE: f64 = 1e-8;

/// Number of directions and bisection accuracy of the Euclidean sandwich scan.
pub const SANDWICH_DIRECTIONS: usize = 256;
pub const SANDWICH_BISECTION: f64 = 1e-10;

/// Orthogonality and equality tests relative to a problem scale.
pub const ORTHOGONAL: f64 = 1e-9;

/// Two sites closer than this (Euclidean) are treated as duplicates.
pub const DUPLICATE_SITE: f64 = 1e-9;

/// Natural-space margin of the univariate normal: theta_2 < -NORMAL_THETA2.
pub const NORMAL_THETA2: f64 = 1e-9;

/// Hard cap on the size of an epsilon-net.
pub const EPS_NET_MAX_POINTS: usize = 1_000_000;

/// Largest number of k-subsets the k-order diagram will enumerate (C(14, 7)).
pub const MAX_SUBSETS: u128 = 3432;

/// Samples per curved edge (geodesic arcs, second-type cell boundaries).
pub const GEODESIC_SAMPLES: usize = 32;

/// Relative height perturbation used to break cospherical ties in triangulations.
pub const GENERAL_POSITION: f64 = 1e-10;
