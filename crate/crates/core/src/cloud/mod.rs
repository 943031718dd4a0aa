//! Point-cloud primitives: geometric types, voxel downsampling, kd-tree
//! neighbor queries, normal estimation, and rigid-transform algebra.

mod kdtree;
mod normals;
mod voxel;

pub use kdtree::NeighborIndex;
pub use normals::estimate_normals;
pub use voxel::voxel_downsample;

use thiserror::Error;

/// 3D point in meters.
pub type Point3 = nalgebra::Point3<f64>;
/// 3D vector.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 real matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Elementwise tolerance for rotation-matrix validation.
const ROTATION_TOL: f64 = 1e-9;
/// Tolerance on |n| - 1 for unit normals.
pub(crate) const NORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CloudError {
    #[error("point coordinates must be finite")]
    NonFinite,
    #[error("normal count {normals} does not match point count {points}")]
    NormalCountMismatch { points: usize, normals: usize },
    #[error("normal at index {0} is not unit length")]
    NotUnitNormal(usize),
    #[error("matrix is not a proper rotation (orthonormal, det +1)")]
    InvalidRotation,
    #[error("voxel edge must be positive")]
    NonPositiveEdge,
    #[error("spatial index requires a nonempty cloud")]
    EmptyIndex,
    #[error("k = {k} exceeds cloud size {size}")]
    KExceedsSize { k: usize, size: usize },
    #[error("need at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },
}

/// Ordered set of 3D points, optionally carrying one unit normal per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    /// Builds a cloud from points, rejecting NaN/infinite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self, CloudError> {
        if points
            .iter()
            .any(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(CloudError::NonFinite);
        }
        Ok(Self {
            points,
            normals: None,
        })
    }

    /// Builds a cloud with per-point unit normals.
    pub fn with_normals(points: Vec<Point3>, normals: Vec<Vec3>) -> Result<Self, CloudError> {
        if normals.len() != points.len() {
            return Err(CloudError::NormalCountMismatch {
                points: points.len(),
                normals: normals.len(),
            });
        }
        for (i, n) in normals.iter().enumerate() {
            if !n.iter().all(|c| c.is_finite()) || (n.norm() - 1.0).abs() > NORMAL_TOL {
                return Err(CloudError::NotUnitNormal(i));
            }
        }
        let mut cloud = Self::new(points)?;
        cloud.normals = Some(normals);
        Ok(cloud)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Keeps the points (and normals) selected by `keep`, preserving order.
    pub(crate) fn filtered(&self, keep: impl Fn(usize) -> bool) -> PointCloud {
        let points: Vec<Point3> = self
            .points
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, p)| *p)
            .collect();
        let normals = self.normals.as_ref().map(|ns| {
            ns.iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, n)| *n)
                .collect()
        });
        PointCloud { points, normals }
    }
}

/// SE(3) element: proper rotation plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    /// Validates RᵀR = I and det(R) = +1 (both within 1e-9).
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, CloudError> {
        let delta = rotation.transpose() * rotation - Mat3::identity();
        if delta.iter().any(|v| v.abs() > ROTATION_TOL)
            || (rotation.determinant() - 1.0).abs() > ROTATION_TOL
            || translation.iter().any(|v| !v.is_finite())
        {
            return Err(CloudError::InvalidRotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// For internal use where the rotation is orthonormal by construction.
    pub(crate) fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        debug_assert!(
            (rotation.transpose() * rotation - Mat3::identity())
                .iter()
                .all(|v| v.abs() <= 1e-7),
            "rotation drifted from orthonormality"
        );
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let rotation =
            nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
        Self {
            rotation: rotation.into_inner(),
            translation: Vec3::zeros(),
        }
    }

    /// ZYX convention: R = Rz(yaw)·Ry(pitch)·Rx(roll).
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let rotation = nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw);
        Self {
            rotation: rotation.into_inner(),
            translation: Vec3::zeros(),
        }
    }

    pub fn with_translation(mut self, translation: Vec3) -> Self {
        self.translation = translation;
        self
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Angle in radians of the relative rotation between two transforms.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }

    /// Euclidean distance between the two translation parts.
    pub fn translation_distance_to(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

/// Maps every point to R·p + t; normals, when present, are rotated.
pub fn apply_transform(cloud: &PointCloud, transform: &RigidTransform) -> PointCloud {
    let points = cloud
        .points()
        .iter()
        .map(|p| transform.apply_point(p))
        .collect();
    let normals = cloud
        .normals()
        .map(|ns| ns.iter().map(|n| transform.apply_vector(n)).collect());
    PointCloud { points, normals }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_transform(rng: &mut ChaCha8Rng) -> RigidTransform {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let t = Vec3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        RigidTransform::from_axis_angle(&axis, angle).with_translation(t)
    }

    pub(crate) fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        let points = (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        PointCloud::new(points).unwrap()
    }

    #[test]
    fn rejects_non_finite_points() {
        let err = PointCloud::new(vec![Point3::new(0.0, f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, CloudError::NonFinite);
    }

    #[test]
    fn rejects_bad_normals() {
        let pts = vec![Point3::origin()];
        let err =
            PointCloud::with_normals(pts.clone(), vec![Vec3::new(0.0, 0.0, 2.0)]).unwrap_err();
        assert_eq!(err, CloudError::NotUnitNormal(0));
        let err = PointCloud::with_normals(pts, vec![]).unwrap_err();
        assert_eq!(
            err,
            CloudError::NormalCountMismatch {
                points: 1,
                normals: 0
            }
        );
    }

    #[test]
    fn rejects_improper_rotation() {
        let mut m = Mat3::identity();
        m[(0, 0)] = -1.0; // reflection
        assert_eq!(
            RigidTransform::new(m, Vec3::zeros()).unwrap_err(),
            CloudError::InvalidRotation
        );
    }

    #[test]
    fn identity_transform_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cloud = random_cloud(&mut rng, 50);
        let out = apply_transform(&cloud, &RigidTransform::identity());
        assert_eq!(out, cloud);
    }

    #[test]
    fn quarter_turn_about_z() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let t = RigidTransform::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        let out = apply_transform(&cloud, &t);
        assert_relative_eq!(out.points()[0].x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.points()[0].y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.points()[0].z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cloud = random_cloud(&mut rng, 40);
        let t1 = random_transform(&mut rng);
        let t2 = random_transform(&mut rng);
        let once = apply_transform(&cloud, &t2.compose(&t1));
        let twice = apply_transform(&apply_transform(&cloud, &t1), &t2);
        for (a, b) in once.points().iter().zip(twice.points()) {
            for k in 0..3 {
                assert!((a.coords[k] - b.coords[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn compose_with_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_transform(&mut rng);
        let id = RigidTransform::identity();
        assert_eq!(id.compose(&t), t);
        assert_eq!(id.inverse(), id);

        let round = t.inverse().compose(&t);
        for (a, b) in round.rotation.iter().zip(Mat3::identity().iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(round.translation.norm() < 1e-10);
    }

    #[test]
    fn transforms_preserve_pairwise_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let cloud = random_cloud(&mut rng, 60);
        let t = random_transform(&mut rng);
        let moved = apply_transform(&cloud, &t);
        for i in 0..cloud.len() {
            for j in (i + 1)..cloud.len() {
                let before = (cloud.points()[i] - cloud.points()[j]).norm();
                let after = (moved.points()[i] - moved.points()[j]).norm();
                assert!((before - after).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normals_rotate_with_the_cloud() {
        let pts = vec![Point3::new(1.0, 2.0, 3.0)];
        let cloud = PointCloud::with_normals(pts, vec![Vec3::x()]).unwrap();
        let t = RigidTransform::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2);
        let out = apply_transform(&cloud, &t);
        let n = out.normals().unwrap()[0];
        assert_relative_eq!(n.y, 1.0, epsilon = 1e-12);
    }
}
