//! Grasp candidate generation, scoring and evaluation for parallel-jaw grippers
//! on 3-D point clouds.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod collision;
pub mod confidence;
pub mod contact;
pub mod dataio;
pub mod error;
pub mod grasp;
pub mod losses;
pub mod metrics;
pub mod policy;
pub mod sampling;
pub mod spatial;

pub use error::{Error, Result};
pub use grasp::{Grasp, GraspFrame, GripperParams, PointCloud, ScoredGrasp, Vec3};
