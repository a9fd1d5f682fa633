//! Plane-segment based registration and localization of heterogeneous 3D
//! point clouds (laser scans vs. vision-derived reconstructions).
//!
//! The pipeline extracts planar segments from unorganized point clouds,
//! matches them across clouds with an extent-overlap check, and solves for
//! the rigid transform in two closed-form steps: rotation from corresponding
//! unit normals, translation from the plane-distance system `N t = d` with
//! an explicit SVD rank decision. Directions the planes do not constrain are
//! reported as null directions and can be filled from odometry.
//!
//! On top of the registration core sit a relative pose tracker, a global
//! optimizer against a prior vision-built map, a metascan relative
//! optimizer for map dropouts, and a structural initial-pose cell search.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod hull;
pub mod io;
pub mod localization;
pub mod preprocess;
pub mod registration;
pub mod segmentation;
pub mod spatial;
pub mod synth;

pub use config::Config;
pub use error::{Error, Result};
pub use geometry::{
    Point3, PointCloud, PlanarSegment, Pose, RigidTransform, SourceTag, Trajectory,
};
pub use registration::{CorrespondenceSet, MatchParams, RegistrationResult};
pub use segmentation::SegmentationParams;
