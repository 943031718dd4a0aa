//! Point-to-plane ICP with optional gating of correspondences to mutually
//! overlapping plane segments of the two scans.

use nalgebra::{Matrix6, Rotation3, Vector6};

use super::surfaces::segment_surfaces;
use super::svd::project_rotation;
use super::RegistrationError;
use crate::cloud::{
    apply_transform, Mat3, NeighborIndex, Point3, PointCloud, RigidTransform, Vec3,
};
use crate::mapping::PlaneModel;

/// Planes from the two scans gate correspondences when their normals agree
/// within this angle.
const GATE_MAX_NORMAL_ANGLE: f64 = 15.0 * std::f64::consts::PI / 180.0;
/// Accepted per-step objective increase; keeps the residual history
/// nonincreasing up to rounding.
const MONOTONE_SLACK: f64 = 1e-12;
/// Step-halving attempts before declaring stagnation.
const MAX_STEP_HALVINGS: usize = 12;

/// Plane-extraction settings for surface gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceGatingParams {
    /// RANSAC point-to-plane inlier distance; the offset-overlap budget is
    /// three times this value.
    pub dist_threshold: f64,
    /// Minimum member count for an extracted plane.
    pub min_inliers: usize,
    /// Cap on planes extracted per scan.
    pub max_planes: usize,
    /// Seed for the plane-extraction consensus sampler.
    pub seed: u64,
}

impl Default for SurfaceGatingParams {
    fn default() -> Self {
        Self {
            dist_threshold: 0.02,
            min_inliers: 200,
            max_planes: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Reject correspondences farther than this (meters).
    pub max_correspondence_distance: f64,
    /// Converged when one step moves the translation less than this.
    pub translation_epsilon: f64,
    /// Converged when one step rotates less than this (radians).
    pub rotation_epsilon: f64,
    /// `Some` restricts correspondences to mutually overlapping plane
    /// segments of the two scans.
    pub surface_gating: Option<SurfaceGatingParams>,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 30,
            max_correspondence_distance: 0.10,
            translation_epsilon: 1e-6,
            rotation_epsilon: 1e-6,
            surface_gating: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// RMS point-to-plane residual over the final correspondence set.
    pub rms_residual: f64,
    pub iterations_used: usize,
    pub converged: bool,
    /// RMS residual before each accepted step plus the final value;
    /// nonincreasing within 1e-9.
    pub residual_history: Vec<f64>,
}

/// Membership gate: a pair participates when the source point and its
/// matched target point lie on plane segments that mutually overlap.
pub(crate) struct Gate {
    src_plane: Vec<Option<u16>>,
    dst_plane: Vec<Option<u16>>,
    overlap: Vec<Vec<bool>>,
}

impl Gate {
    /// Segments both clouds (source first mapped by `init`) and marks plane
    /// pairs whose normals agree within 15° and whose offsets agree within
    /// three distance thresholds.
    pub(crate) fn build(
        src: &PointCloud,
        dst: &PointCloud,
        init: &RigidTransform,
        params: &SurfaceGatingParams,
    ) -> Gate {
        let aligned = apply_transform(src, init);
        let src_planes = segment_surfaces(
            &aligned,
            params.dist_threshold,
            params.min_inliers,
            params.max_planes,
            params.seed,
        );
        let dst_planes = segment_surfaces(
            dst,
            params.dist_threshold,
            params.min_inliers,
            params.max_planes,
            params.seed.wrapping_add(1),
        );
        let mut src_plane = vec![None; src.len()];
        for (i, (_, members)) in src_planes.iter().enumerate() {
            for &id in members {
                src_plane[id] = Some(i as u16);
            }
        }
        let mut dst_plane = vec![None; dst.len()];
        for (j, (_, members)) in dst_planes.iter().enumerate() {
            for &id in members {
                dst_plane[id] = Some(j as u16);
            }
        }
        let overlap = src_planes
            .iter()
            .map(|(p, _)| {
                dst_planes
                    .iter()
                    .map(|(q, _)| planes_overlap(p, q, params))
                    .collect()
            })
            .collect();
        Gate {
            src_plane,
            dst_plane,
            overlap,
        }
    }

    fn allows(&self, src_id: usize, dst_id: usize) -> bool {
        match (self.src_plane[src_id], self.dst_plane[dst_id]) {
            (Some(i), Some(j)) => self.overlap[i as usize][j as usize],
            _ => false,
        }
    }
}

fn planes_overlap(p: &PlaneModel, q: &PlaneModel, params: &SurfaceGatingParams) -> bool {
    // sign-normalize before comparing: n and −n describe the same surface
    let (pn, pd) = if p.normal().dot(q.normal()) < 0.0 {
        (-p.normal(), -p.offset())
    } else {
        (*p.normal(), p.offset())
    };
    let angle = pn.dot(q.normal()).clamp(-1.0, 1.0).acos();
    angle < GATE_MAX_NORMAL_ANGLE && (pd - q.offset()).abs() < 3.0 * params.dist_threshold
}

/// Nearest-neighbor correspondences of the transformed source into the
/// target, capped by distance and optionally gated; returns the pairs and
/// the RMS point-to-plane residual.
fn correspondences(
    src_points: &[Point3],
    transform: &RigidTransform,
    dst_index: &NeighborIndex,
    dst_points: &[Point3],
    dst_normals: &[Vec3],
    cap: f64,
    gate: Option<&Gate>,
) -> (Vec<(usize, usize)>, f64) {
    let mut pairs = Vec::new();
    let mut sum_sq = 0.0;
    for (s, p) in src_points.iter().enumerate() {
        let moved = transform.apply_point(p);
        let (t, dist) = dst_index.knn(&moved, 1).expect("nonempty index")[0];
        if dist > cap {
            continue;
        }
        if let Some(gate) = gate {
            if !gate.allows(s, t) {
                continue;
            }
        }
        let r = dst_normals[t].dot(&(moved - dst_points[t]));
        sum_sq += r * r;
        pairs.push((s, t));
    }
    let rms = if pairs.is_empty() {
        0.0
    } else {
        (sum_sq / pairs.len() as f64).sqrt()
    };
    (pairs, rms)
}

fn skew(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Normal equations of the linearized point-to-plane objective at the given
/// source placement: `A = Σ aaᵀ`, `b = Σ a·r` with `a = [p×n; n]` and
/// `r = n·(p − q)`; the objective gradient at zero is `2b`.
pub fn point_to_plane_system(
    src_points: &[Point3],
    dst_points: &[Point3],
    dst_normals: &[Vec3],
    pairs: &[(usize, usize)],
) -> (Matrix6<f64>, Vector6<f64>) {
    let mut a_mat = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for &(s, t) in pairs {
        let p = src_points[s].coords;
        let n = dst_normals[t];
        let r = n.dot(&(p - dst_points[t].coords));
        let mut a = Vector6::zeros();
        a.fixed_rows_mut::<3>(0).copy_from(&p.cross(&n));
        a.fixed_rows_mut::<3>(3).copy_from(&n);
        a_mat += a * a.transpose();
        b += a * r;
    }
    (a_mat, b)
}

/// Point-to-plane objective `Σ (n·(exp(ω)·p + v − q))²` for the twist
/// `ξ = [ω; v]` applied on top of the given source placement.
pub fn point_to_plane_objective(
    src_points: &[Point3],
    dst_points: &[Point3],
    dst_normals: &[Vec3],
    pairs: &[(usize, usize)],
    xi: &Vector6<f64>,
) -> f64 {
    let omega: Vec3 = xi.fixed_rows::<3>(0).into_owned();
    let v: Vec3 = xi.fixed_rows::<3>(3).into_owned();
    let rot = Rotation3::from_scaled_axis(omega);
    pairs
        .iter()
        .map(|&(s, t)| {
            let moved = rot * src_points[s] + v;
            let r = dst_normals[t].dot(&(moved - dst_points[t]));
            r * r
        })
        .sum()
}

/// One linearized step: solve `Aξ = −b`, returning `None` when the residual
/// gradient vanishes or the system cannot be factored.
fn solve_step(a: &Matrix6<f64>, b: &Vector6<f64>) -> Option<Vector6<f64>> {
    if b.norm() < 1e-15 {
        return None;
    }
    let rhs = -b;
    if let Some(chol) = a.cholesky() {
        return Some(chol.solve(&rhs));
    }
    a.lu().solve(&rhs)
}

/// Small-angle step composed onto `current`, with the rotation factor
/// projected back onto SO(3).
fn compose_step(current: &RigidTransform, xi: &Vector6<f64>) -> RigidTransform {
    let omega: Vec3 = xi.fixed_rows::<3>(0).into_owned();
    let v: Vec3 = xi.fixed_rows::<3>(3).into_owned();
    let delta_rot = project_rotation(&(Mat3::identity() + skew(&omega)));
    let delta = RigidTransform::from_parts_unchecked(delta_rot, v);
    delta.compose(current)
}

/// Refines `init` by iterated linearized point-to-plane minimization with
/// step halving; each accepted step keeps the (re-measured) RMS residual
/// from increasing.
pub fn icp_point_to_plane(
    src: &PointCloud,
    dst: &PointCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpResult, RegistrationError> {
    assert!(params.max_iterations > 0, "need at least one iteration");
    assert!(
        params.max_correspondence_distance > 0.0,
        "distance cap must be positive"
    );
    assert!(
        params.max_correspondence_distance.is_finite(),
        "distance cap must be finite"
    );
    assert!(
        params.translation_epsilon > 0.0,
        "translation epsilon must be positive"
    );
    assert!(
        params.rotation_epsilon > 0.0,
        "rotation epsilon must be positive"
    );
    let dst_normals = dst.normals().ok_or(RegistrationError::MissingNormals)?;
    let dst_points = dst.points();
    let dst_index = NeighborIndex::build(dst)?;
    let src_points = src.points();
    let gate = params
        .surface_gating
        .as_ref()
        .map(|gating| Gate::build(src, dst, init, gating));
    let cap = params.max_correspondence_distance;

    let pair_pass = |t: &RigidTransform| {
        correspondences(
            src_points,
            t,
            &dst_index,
            dst_points,
            dst_normals,
            cap,
            gate.as_ref(),
        )
    };

    let mut transform = *init;
    let (mut pairs, mut rms) = pair_pass(&transform);
    if pairs.is_empty() {
        return Err(RegistrationError::NoCorrespondences);
    }
    let mut history = vec![rms];
    let mut iterations_used = 0;
    let mut converged = false;
    while iterations_used < params.max_iterations {
        let moved: Vec<Point3> = src_points
            .iter()
            .map(|p| transform.apply_point(p))
            .collect();
        let (a, b) = point_to_plane_system(&moved, dst_points, dst_normals, &pairs);
        let Some(step) = solve_step(&a, &b) else {
            converged = true; // zero gradient: nothing left to improve
            break;
        };
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..=MAX_STEP_HALVINGS {
            let candidate = compose_step(&transform, &(step * scale));
            let (next_pairs, next_rms) = pair_pass(&candidate);
            if !next_pairs.is_empty() && next_rms <= rms + MONOTONE_SLACK {
                accepted = Some((candidate, next_pairs, next_rms));
                break;
            }
            scale *= 0.5;
        }
        let Some((next_transform, next_pairs, next_rms)) = accepted else {
            converged = true; // no admissible step: local minimum reached
            break;
        };
        let rot_change = transform.rotation_angle_to(&next_transform);
        let trans_change = (transform.translation() - next_transform.translation()).norm();
        transform = next_transform;
        pairs = next_pairs;
        rms = next_rms;
        history.push(rms);
        iterations_used += 1;
        if rot_change < params.rotation_epsilon && trans_change < params.translation_epsilon {
            converged = true;
            break;
        }
    }
    // composed rotations can drift off SO(3) by a few ulps; project once
    let rotation = project_rotation(transform.rotation());
    let transform = RigidTransform::new(rotation, *transform.translation())
        .expect("projected rotation is orthonormal");
    Ok(IcpResult {
        transform,
        rms_residual: rms,
        iterations_used,
        converged,
        residual_history: history,
    })
}
