//! Feature-based rough alignment: FPFH matching filtered by a seeded
//! three-sample consensus loop, optionally seeded by an orientation prior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fpfh::{compute_fpfh, match_correspondences, FpfhDescriptor};
use super::svd::estimate_rigid_svd;
use super::RegistrationError;
use crate::cloud::{apply_transform, NeighborIndex, PointCloud, RigidTransform};

/// Roll/pitch/yaw (radians) from an orientation tracker, consumed as a
/// rotation-only pre-alignment of the source cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationPrior {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl OrientationPrior {
    /// The prior as a rotation-only transform.
    pub fn rotation(&self) -> RigidTransform {
        RigidTransform::from_euler(self.roll, self.pitch, self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoarseAlignParams {
    /// FPFH neighborhood radius in meters.
    pub feature_radius: f64,
    /// Number of three-sample consensus rounds.
    pub consensus_iterations: usize,
    /// A drawn source feature is an inlier when its post-transform distance
    /// to the nearest target point is below this (meters).
    pub inlier_threshold: f64,
    /// Minimum accepted inlier fraction over the matched feature set.
    pub min_inlier_fraction: f64,
    /// Cap on matched source features (evenly subsampled above this).
    pub max_correspondences: usize,
    /// Seed for the consensus sampler; fixes the result bit-exactly.
    pub seed: u64,
}

impl Default for CoarseAlignParams {
    fn default() -> Self {
        Self {
            feature_radius: 0.05,
            consensus_iterations: 500,
            inlier_threshold: 0.03,
            min_inlier_fraction: 0.25,
            max_correspondences: 1500,
            seed: 0,
        }
    }
}

fn validate(params: &CoarseAlignParams) {
    assert!(
        params.feature_radius > 0.0,
        "feature radius must be positive"
    );
    assert!(
        params.consensus_iterations > 0,
        "need at least one consensus round"
    );
    assert!(
        params.inlier_threshold > 0.0,
        "inlier threshold must be positive"
    );
    assert!(
        params.min_inlier_fraction > 0.0 && params.min_inlier_fraction <= 1.0,
        "inlier fraction must lie in (0, 1]"
    );
    assert!(
        params.max_correspondences > 0,
        "correspondence cap must be positive"
    );
}

/// Evenly spaced subset of `0..len` capped at `max` entries.
fn subsample_ids(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|i| i * len / max).collect()
    }
}

/// Rough source-to-target transform from FPFH matches and sample consensus,
/// plus the final inlier fraction. With a prior, matching runs on the
/// pre-rotated source and the returned transform includes the prior.
///
/// Candidate transforms come from minimal samples of descriptor matches but
/// are scored by alignment quality: a drawn source feature counts as an
/// inlier when its transformed position lies within the inlier threshold of
/// its nearest target point. Descriptor matches on featureless regions carry
/// no positional information (every patch of a flat wall looks alike), so
/// scoring against the matched target instead would reject perfectly aligned
/// clouds.
pub fn coarse_align(
    src: &PointCloud,
    dst: &PointCloud,
    params: &CoarseAlignParams,
    prior: Option<&OrientationPrior>,
) -> Result<(RigidTransform, f64), RegistrationError> {
    validate(params);
    let prior_rotation = prior.map(|p| p.rotation());
    let pre_aligned_owned;
    let pre_aligned = match &prior_rotation {
        Some(rotation) => {
            pre_aligned_owned = apply_transform(src, rotation);
            &pre_aligned_owned
        }
        None => src,
    };
    let src_descs = compute_fpfh(pre_aligned, params.feature_radius)?;
    let dst_descs = compute_fpfh(dst, params.feature_radius)?;
    let picked = subsample_ids(src_descs.len(), params.max_correspondences);
    let picked_descs: Vec<FpfhDescriptor> = picked.iter().map(|&i| src_descs[i].clone()).collect();
    let matches = match_correspondences(&picked_descs, &dst_descs)?;
    let pairs: Vec<(usize, usize)> = matches
        .pairs
        .iter()
        .map(|c| (picked[c.source], c.target))
        .collect();

    let src_points = pre_aligned.points();
    let dst_points = dst.points();
    let dst_index = NeighborIndex::build(dst)?;
    // nearest-target id for a transformed source point, with its distance
    let nearest = |t: &RigidTransform, s: usize| {
        let moved = t.apply_point(&src_points[s]);
        dst_index.knn(&moved, 1).expect("index is nonempty")[0]
    };
    let count_inliers = |t: &RigidTransform| {
        picked
            .iter()
            .filter(|&&s| nearest(t, s).1 < params.inlier_threshold)
            .count()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<(usize, RigidTransform)> = None;
    for _ in 0..params.consensus_iterations {
        let sample = rand::seq::index::sample(&mut rng, pairs.len(), 3.min(pairs.len()));
        let minimal: Vec<(usize, usize)> = sample.iter().map(|i| pairs[i]).collect();
        let Ok(candidate) = estimate_rigid_svd(src_points, dst_points, &minimal) else {
            continue;
        };
        let count = count_inliers(&candidate);
        if best
            .as_ref()
            .is_none_or(|(best_count, _)| count > *best_count)
        {
            best = Some((count, candidate));
        }
    }
    let required = params.min_inlier_fraction;
    let Some((best_count, best_transform)) = best else {
        return Err(RegistrationError::InsufficientInliers {
            best: 0.0,
            required,
        });
    };
    let fraction = best_count as f64 / picked.len() as f64;
    if fraction < required {
        return Err(RegistrationError::InsufficientInliers {
            best: fraction,
            required,
        });
    }
    // re-estimate over the nearest-point pairs of the winning transform
    let inlier_pairs: Vec<(usize, usize)> = picked
        .iter()
        .filter_map(|&s| {
            let (d, dist) = nearest(&best_transform, s);
            (dist < params.inlier_threshold).then_some((s, d))
        })
        .collect();
    let refined =
        estimate_rigid_svd(src_points, dst_points, &inlier_pairs).unwrap_or(best_transform);
    let refined_fraction = count_inliers(&refined) as f64 / picked.len() as f64;
    let total = match &prior_rotation {
        Some(rotation) => refined.compose(rotation),
        None => refined,
    };
    Ok((total, refined_fraction.max(fraction)))
}
