//! Greedy plane extraction used to gate ICP correspondences to shared
//! geometric surfaces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{Mat3, Point3, PointCloud, Vec3};
use crate::mapping::PlaneModel;

/// Iteration cap per extracted plane; the adaptive consensus loop usually
/// stops far earlier.
const MAX_SAMPLE_ROUNDS: usize = 1000;
/// Target confidence of having drawn at least one all-inlier sample.
const CONFIDENCE: f64 = 0.999;

/// Repeatedly fits the dominant plane, removes its inliers, and recurses on
/// the remainder until `max_planes` are found or no plane reaches
/// `min_inliers` support. Planes come back largest-first, with member ids
/// indexing the original cloud.
pub fn segment_surfaces(
    cloud: &PointCloud,
    dist_threshold: f64,
    min_inliers: usize,
    max_planes: usize,
    seed: u64,
) -> Vec<(PlaneModel, Vec<usize>)> {
    assert!(dist_threshold > 0.0, "distance threshold must be positive");
    let points = cloud.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut assigned = vec![false; points.len()];
    let mut planes: Vec<(PlaneModel, Vec<usize>)> = Vec::new();
    while planes.len() < max_planes && remaining.len() >= min_inliers.max(3) {
        let Some((plane, members)) = dominant_plane(points, &remaining, dist_threshold, &mut rng)
        else {
            break;
        };
        if members.len() < min_inliers {
            break;
        }
        for &id in &members {
            assigned[id] = true;
        }
        remaining.retain(|&id| !assigned[id]);
        planes.push((plane, members));
    }
    planes.sort_by_key(|p| std::cmp::Reverse(p.1.len()));
    planes
}

/// Best plane over the `active` subset by adaptive 3-point consensus,
/// refined with a least-squares pass and re-scored.
fn dominant_plane(
    points: &[Point3],
    active: &[usize],
    dist_threshold: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(PlaneModel, Vec<usize>)> {
    let mut best: Option<(usize, PlaneModel)> = None;
    let mut rounds = MAX_SAMPLE_ROUNDS;
    let mut i = 0;
    while i < rounds {
        i += 1;
        let sample = rand::seq::index::sample(rng, active.len(), 3);
        let (a, b, c) = (
            points[active[sample.index(0)]],
            points[active[sample.index(1)]],
            points[active[sample.index(2)]],
        );
        let mut n = (b - a).cross(&(c - a));
        let norm = n.norm();
        if norm < 1e-12 {
            continue;
        }
        n /= norm;
        let plane = canonical(PlaneModel::new(n, -n.dot(&a.coords)).expect("unit normal"));
        let count = active
            .iter()
            .filter(|&&id| plane.signed_height(&points[id]).abs() <= dist_threshold)
            .count();
        if best
            .as_ref()
            .is_none_or(|(best_count, _)| count > *best_count)
        {
            best = Some((count, plane));
            // shrink the round budget as support evidence accumulates
            let w = count as f64 / active.len() as f64;
            if w > 0.0 {
                let denom = (1.0 - w.powi(3)).max(1e-12).ln();
                let needed = ((1.0 - CONFIDENCE).ln() / denom).ceil();
                if needed.is_finite() && needed >= 1.0 {
                    rounds = rounds.min(needed as usize);
                }
            }
        }
    }
    let (_, sample_plane) = best?;
    let sample_members: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&id| sample_plane.signed_height(&points[id]).abs() <= dist_threshold)
        .collect();
    let plane = lsq_plane(points, &sample_members).map_or(sample_plane, canonical);
    let members: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&id| plane.signed_height(&points[id]).abs() <= dist_threshold)
        .collect();
    if members.len() >= sample_members.len() {
        Some((plane, members))
    } else {
        Some((sample_plane, sample_members))
    }
}

fn lsq_plane(points: &[Point3], ids: &[usize]) -> Option<PlaneModel> {
    if ids.len() < 3 {
        return None;
    }
    let mut centroid = Vec3::zeros();
    for &i in ids {
        centroid += points[i].coords;
    }
    centroid /= ids.len() as f64;
    let mut cov = Mat3::zeros();
    for &i in ids {
        let d = points[i].coords - centroid;
        cov += d * d.transpose();
    }
    let eigen = nalgebra::SymmetricEigen::new(cov);
    let mut smallest = 0;
    for i in 1..3 {
        if eigen.eigenvalues[i] < eigen.eigenvalues[smallest] {
            smallest = i;
        }
    }
    let n: Vec3 = eigen.eigenvectors.column(smallest).into_owned();
    let norm = n.norm();
    if norm < 1e-12 {
        return None;
    }
    PlaneModel::new(n / norm, -(n / norm).dot(&centroid)).ok()
}

/// Fixes the normal sign so the largest-magnitude component is positive,
/// making plane models comparable across clouds.
fn canonical(plane: PlaneModel) -> PlaneModel {
    let n = plane.normal();
    let dominant = (0..3)
        .max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()))
        .expect("3 axes");
    if n[dominant] < 0.0 {
        plane.flipped()
    } else {
        plane
    }
}
