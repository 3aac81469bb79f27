//! Feasible-by-construction outputs for convex, bounded regions.
//!
//! Points of a [`FeasibleRegion`] are represented as a unit direction from a
//! strictly feasible origin plus a radius in `[0, 1]` measured against the
//! distance to the region's frontier along that direction. A model that
//! predicts such pairs cannot produce an infeasible output. The crate also
//! ships the baselines (projection, penalty training) and the experiment
//! runners used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod constraint;
pub mod datagen;
pub mod error;
pub mod hyperspherical;
pub mod learner;
pub mod linalg;
pub mod projection;
pub mod region_file;
pub mod rootfind;

pub use bench::{BenchmarkReport, RoundtripReport, RunRecord, Stat};
pub use constraint::{Constraint, ConstraintKind, FeasibleRegion, GenericConvex};
pub use datagen::{Dataset, SeriesTask, SyntheticSpec};
pub use error::{ErrorCategory, HcrError, Result};
pub use hyperspherical::{
    from_hyperspherical, frontier_distance, normalize_direction, restrict_constraints,
    to_hyperspherical, AccelConfig, Frontier, HypersphericalCoord,
};
pub use learner::{
    checkpoint::Checkpoint, fit, predict, train, LagrangianConfig, ModelParameters, Prediction,
    TrainConfig, Variant,
};
pub use projection::{project, project_ball, project_polytope, DykstraConfig};
pub use region_file::{load_region, save_region, RegionFile};
pub use rootfind::{bracket_root, brent_root, RootConfig};
