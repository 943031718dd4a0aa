//! Perception-to-planning toolkit for laser-scanned environments.
//!
//! The crate covers the full chain from raw 3D scans to a repairable path:
//!
//! * [`cloud`] — point-cloud primitives: voxel downsampling, kd-tree
//!   neighbor queries, normal estimation, and SE(3) transform algebra.
//! * [`registration`] — FPFH-based coarse alignment, closed-form SVD rigid
//!   estimation, and surface-gated point-to-plane ICP refinement.
//! * [`mapping`] — ground-plane extraction, height filtering, and top-down
//!   projection to a centimeter occupancy grid.
//! * [`costmap`] — embodiment-aware obstacle inflation with accumulated
//!   Gaussian penalties.
//! * [`planner`] — D* Lite incremental search over the 8-connected cost grid.
//! * [`synth`] — deterministic synthetic scene generation with ground-truth
//!   inter-scan transforms, used for end-to-end validation.

pub mod cloud;
pub mod costmap;
pub mod mapping;
pub mod planner;
pub mod registration;
pub mod synth;

pub use cloud::{Mat3, Point3, PointCloud, RigidTransform, Vec3};
