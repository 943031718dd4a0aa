//! Closed-form least-squares rigid alignment (Kabsch/Umeyama).

use nalgebra::SVD;

use super::RegistrationError;
use crate::cloud::{Mat3, Point3, RigidTransform, Vec3};

/// Relative second-singular-value floor below which the correspondence
/// geometry is treated as collinear.
const RANK_TOL: f64 = 1e-9;

/// Projects an arbitrary matrix to the nearest proper rotation.
pub(crate) fn project_rotation(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut d = Mat3::identity();
    d[(2, 2)] = (u * v_t).determinant().signum();
    u * d * v_t
}

/// Least-squares rigid transform mapping `src[pair.0]` onto `dst[pair.1]`:
/// centroids are subtracted, the cross-covariance is decomposed by SVD, and
/// the reflection case is corrected so det(R) = +1.
pub fn estimate_rigid_svd(
    src: &[Point3],
    dst: &[Point3],
    pairs: &[(usize, usize)],
) -> Result<RigidTransform, RegistrationError> {
    if pairs.len() < 3 {
        return Err(RegistrationError::DegenerateGeometry);
    }
    let n = pairs.len() as f64;
    let mut p_bar = Vec3::zeros();
    let mut q_bar = Vec3::zeros();
    for &(s, t) in pairs {
        p_bar += src[s].coords;
        q_bar += dst[t].coords;
    }
    p_bar /= n;
    q_bar /= n;
    let mut h = Mat3::zeros();
    for &(s, t) in pairs {
        h += (src[s].coords - p_bar) * (dst[t].coords - q_bar).transpose();
    }
    let svd = SVD::new(h, true, true);
    let sigma = &svd.singular_values;
    // a collinear (or coincident) correspondence set leaves the rotation
    // about the common axis unconstrained
    if sigma[1] <= RANK_TOL * sigma[0] {
        return Err(RegistrationError::DegenerateGeometry);
    }
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let v = v_t.transpose();
    let mut d = Mat3::identity();
    d[(2, 2)] = (v * u.transpose()).determinant().signum();
    let rotation = v * d * u.transpose();
    let translation = q_bar - rotation * p_bar;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::tests::{random_cloud, random_transform};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (i, i)).collect()
    }

    #[test]
    fn identical_sets_give_identity() {
        let pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.3, 0.4, 0.9),
        ];
        let t = estimate_rigid_svd(&pts, &pts, &identity_pairs(4)).unwrap();
        assert!(t.rotation_angle_to(&RigidTransform::identity()) < 1e-12);
        assert!(t.translation().norm() < 1e-12);
    }

    #[test]
    fn recovers_quarter_turn_with_translation() {
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let truth = RigidTransform::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2)
            .with_translation(Vec3::new(1.0, 0.0, 0.0));
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply_point(p)).collect();
        let t = estimate_rigid_svd(&src, &dst, &identity_pairs(4)).unwrap();
        assert!(t.rotation_angle_to(&truth) < 1e-9);
        assert!(t.translation_distance_to(&truth) < 1e-9);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let src: Vec<Point3> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let dst = src.clone();
        assert_eq!(
            estimate_rigid_svd(&src, &dst, &identity_pairs(5)),
            Err(RegistrationError::DegenerateGeometry)
        );
    }

    #[test]
    fn fewer_than_three_pairs_are_degenerate() {
        let pts = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(
            estimate_rigid_svd(&pts, &pts, &[(0, 0), (1, 1)]),
            Err(RegistrationError::DegenerateGeometry)
        );
    }

    #[test]
    fn exact_correspondences_recover_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let n = rng.random_range(3..40);
            let cloud = random_cloud(&mut rng, n);
            let truth = random_transform(&mut rng);
            let dst: Vec<Point3> = cloud
                .points()
                .iter()
                .map(|p| truth.apply_point(p))
                .collect();
            let t = match estimate_rigid_svd(cloud.points(), &dst, &identity_pairs(n)) {
                Ok(t) => t,
                Err(RegistrationError::DegenerateGeometry) => continue, // unlucky near-collinear draw
                Err(e) => panic!("{e}"),
            };
            let rms = (cloud
                .points()
                .iter()
                .zip(&dst)
                .map(|(p, q)| (t.apply_point(p) - q).norm_squared())
                .sum::<f64>()
                / n as f64)
                .sqrt();
            assert!(rms <= 1e-10, "rms {rms}");
            assert_relative_eq!(t.rotation().determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn never_returns_a_reflection() {
        // mirrored targets tempt the unconstrained solution into det = −1
        let src = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let dst: Vec<Point3> = src.iter().map(|p| Point3::new(-p.x, p.y, p.z)).collect();
        let t = estimate_rigid_svd(&src, &dst, &identity_pairs(4)).unwrap();
        assert_relative_eq!(t.rotation().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rotation_projection_returns_nearest_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let truth = random_transform(&mut rng);
            // perturb the rotation off the manifold, then project back
            let mut noisy = *truth.rotation();
            for r in 0..3 {
                for c in 0..3 {
                    noisy[(r, c)] += rng.random_range(-1e-4..1e-4);
                }
            }
            let projected = project_rotation(&noisy);
            let gram = projected.transpose() * projected;
            assert!((gram - Mat3::identity()).abs().max() < 1e-12);
            assert_relative_eq!(projected.determinant(), 1.0, epsilon = 1e-12);
            assert!((projected - truth.rotation()).abs().max() < 1e-3);
        }
    }
}
