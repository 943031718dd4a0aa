//! Scan-to-scan registration: FPFH coarse alignment, closed-form SVD rigid
//! estimation, and surface-gated point-to-plane ICP refinement.

mod coarse;
mod fpfh;
mod icp;
mod surfaces;
mod svd;

pub use coarse::{coarse_align, CoarseAlignParams, OrientationPrior};
pub use fpfh::{
    compute_fpfh, match_correspondences, Correspondence, CorrespondenceSet, FpfhDescriptor,
};
pub use icp::{
    icp_point_to_plane, point_to_plane_objective, point_to_plane_system, IcpParams, IcpResult,
    SurfaceGatingParams,
};
pub use surfaces::segment_surfaces;
pub use svd::estimate_rigid_svd;

use crate::cloud::CloudError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistrationError {
    #[error("cloud is missing normals")]
    MissingNormals,
    #[error("radius must be positive")]
    NonPositiveRadius,
    #[error("descriptor lists must be nonempty")]
    EmptyDescriptors,
    #[error("correspondences are fewer than 3 or geometrically degenerate")]
    DegenerateGeometry,
    #[error("best consensus inlier fraction {best:.3} below required {required:.3}")]
    InsufficientInliers { best: f64, required: f64 },
    #[error("no correspondence within the distance cap")]
    NoCorrespondences,
    #[error(transparent)]
    Cloud(#[from] CloudError),
}
