//! Globally consistent normal orientation for raw 3D point clouds.
//!
//! The estimated quantity is a per-point oriented surface element `mu_i`
//! whose direction is the outward normal. The discretized winding-number
//! field of a cloud with normals is (approximately) the indicator function
//! of the enclosed region: 1 inside, 1/2 on the surface, 0 outside. The
//! solver exploits two consequences at once:
//!
//! * the field must evaluate to 1/2 at every sample, which yields the
//!   quadratic energy `||A(mu) - b||^2` driven down by exact line-search
//!   gradient steps, and
//! * correctly oriented normals are parallel to the negative field gradient
//!   at their own points (winding-number normal consistency), which yields
//!   the fixed-point update `mu -> G(mu)` applied with a magnitude-
//!   preserving rescale.
//!
//! Alternating the two from a zero start, under a linearly decreasing
//! smoothing width, converges to globally consistent outward normals. All
//! operator applications run either as dense `O(N^2)` reference sums or
//! through a Barnes-Hut style octree treecode.
//!
//! # Quick start
//!
//! ```
//! use wnnc::geometry::{denormalize_normals, normalize_cloud};
//! use wnnc::shapes::{sample_shape, SamplingMode, ShapeKind, SyntheticShape};
//! use wnnc::solver::{solve, SolverParams};
//!
//! let sample = sample_shape(&SyntheticShape {
//!     kind: ShapeKind::Sphere { radius: 1.0 },
//!     samples: 500,
//!     noise_sigma: 0.0,
//!     seed: 1,
//!     sampling: SamplingMode::Random,
//! })
//! .unwrap();
//! let cloud = normalize_cloud(&sample.positions).unwrap();
//! let params = SolverParams {
//!     iterations: 10,
//!     ..SolverParams::default()
//! };
//! let result = solve(&cloud, &params).unwrap();
//! let (unit_normals, degenerate) = denormalize_normals(&result.mu, &cloud).unwrap();
//! assert!(degenerate.is_empty());
//! assert_eq!(unit_normals.len(), 500);
//! ```

pub mod error;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod octree;
pub mod operators;
pub mod shapes;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{
    denormalize_normals, normalize_cloud, NormalField, PointCloud, ScalarField,
    SimilarityTransform, Vec3,
};
pub use kernels::SmoothingWidth;
pub use metrics::{angular_error, NormalAccuracyReport};
pub use operators::{BackendMode, FieldOperators, OperatorBackend};
pub use solver::{solve, SolveResult, SolverParams, SolverRun};
