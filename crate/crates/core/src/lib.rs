//! Discontinuity-preserving normal integration.
//!
//! Recovers a depth map from a single-view normal map. The integration domain
//! is discretized as one quadrilateral per masked pixel (four depth vertices,
//! four edges carrying the normal-derived gradient targets), with adjacent
//! quadrilaterals bridged by *auxiliary edges* that carry an explicit jump
//! value `g'`. Depth jumps across self-occlusions, invisible to the normal
//! map itself, are recovered by an iterative optimization that alternates
//! weighted least-squares depth solves, IRLS reweighting of the auxiliary
//! residuals, and explicit filtering of the auxiliary-edge gradients under a
//! two-pass soft/hard lambda schedule.
//!
//! # Coordinate conventions
//!
//! Image coordinates: `u` grows rightward, `v` grows downward; pixel centers
//! sit at integer coordinates and pixel corners at `(u ± 0.5, v ± 0.5)`.
//! Normals live in camera space with `+x` right, `+y` up, `+z` toward the
//! camera, and are front-facing (`n_z > 0`) on masked pixels. Depth grows
//! away from the camera. Under these conventions the depth gradient along
//! `u` is `n_x / n_z` and along `v` is `-n_y / n_z`; the single `y`/`v` sign
//! flip is applied once, in [`gradients::edge_targets`]. The round trip
//! scene → normals → integration → mesh normals is covered by tests.

pub mod error;
pub mod gradients;
pub mod graph;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod optimize;
pub mod par;
pub mod scene;
pub mod solver;

pub use error::Error;
pub use gradients::{CameraModel, EdgeWeights, GradientTargets, NormalMap};
pub use graph::{Axis, Corner, DepthSolution, EdgeId, PixelGraph, ProjectionMode};
pub use grid::ScalarMap;
pub use metrics::EvalReport;
pub use optimize::{OptimizeResult, OptimizeTrace, SolverConfig};
pub use scene::Scene;
pub use solver::{LinearSystem, SolveReport};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
