//! Non-neural core of keypoint-based cooperative vehicle detection.
//!
//! * [`geometry`]: oriented boxes, poses, rotated BEV IoU.
//! * [`matching`]: cooperative proposal clustering and merging, NMS baseline.
//! * [`localization`]: maximum-consensus pose error correction.
//! * [`keypoints`]: furthest point sampling and keypoint filtering.
//! * [`cpm`]: the collective perception message wire format and size model.
//! * [`simulator`]: seeded multi-vehicle scenes and a detector surrogate.
//! * [`eval`]: AP evaluation and the fusion pipelines.
//!
//! Math is generic over [`Real`] (`f32` or `f64`); the aliases below fix the
//! scalar for the common cases. Messages and simulation use `f64`.

pub mod cpm;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod keypoints;
pub mod localization;
pub mod matching;
pub mod persist;
pub mod scalar;
pub mod simulator;

pub use error::{Error, Result};
pub use scalar::Real;

pub type BBox7F64 = geometry::BBox7<f64>;
pub type BBox7F32 = geometry::BBox7<f32>;
pub type Pose2F64 = geometry::Pose2<f64>;
pub type Pose2F32 = geometry::Pose2<f32>;
pub type Point2F64 = geometry::Point2<f64>;
pub type Point3F64 = geometry::Point3<f64>;
pub type DetectionF64 = matching::Detection<f64>;
pub type DetectionF32 = matching::Detection<f32>;
pub type ClusterF64 = matching::Cluster<f64>;
pub type MatchConfigF64 = matching::MatchConfig<f64>;
pub type LandmarkF64 = localization::LandmarkPoint<f64>;
pub type ConsensusConfigF64 = localization::ConsensusConfig<f64>;
pub type PoseCorrectionF64 = localization::PoseCorrection<f64>;
pub type KeypointSetF64 = keypoints::KeypointSet<f64>;
pub type ApResultF64 = eval::ApResult<f64>;
