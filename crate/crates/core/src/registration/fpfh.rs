//! Fast Point Feature Histograms: 33-bin local geometry descriptors built
//! from inverse-distance-weighted angular-feature histograms.

use super::RegistrationError;
use crate::cloud::{NeighborIndex, Point3, PointCloud, Vec3};

/// Bins per angular feature (α, φ, θ).
pub const BINS_PER_FEATURE: usize = 11;
/// Total descriptor length: 3 features × 11 bins.
pub const DESCRIPTOR_LEN: usize = 3 * BINS_PER_FEATURE;

/// 33-bin FPFH signature. Each 11-bin feature block sums to 100 (percentage
/// normalization) or is all-zero for a point with no neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct FpfhDescriptor {
    bins: [f64; DESCRIPTOR_LEN],
}

impl FpfhDescriptor {
    fn zero() -> Self {
        Self {
            bins: [0.0; DESCRIPTOR_LEN],
        }
    }

    pub fn bins(&self) -> &[f64; DESCRIPTOR_LEN] {
        &self.bins
    }

    pub fn l1_distance(&self, other: &FpfhDescriptor) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn l2_distance(&self, other: &FpfhDescriptor) -> f64 {
        self.bins
            .iter()
            .zip(&other.bins)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Squared L2 distance with an early exit once `bound` is exceeded.
    fn l2_sq_bounded(&self, other: &FpfhDescriptor, bound: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.bins.iter().zip(&other.bins) {
            let d = a - b;
            acc += d * d;
            if acc > bound {
                return acc;
            }
        }
        acc
    }
}

/// One descriptor match: source id, target id, L2 descriptor distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
}

/// Nearest-descriptor matches from a source cloud into a target cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    /// The (source, target) index pairs, dropping distances.
    pub fn index_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|c| (c.source, c.target)).collect()
    }
}

/// The three angular pair features of the Darboux frame between two oriented
/// points, or `None` for degenerate pairs (coincident points or a direction
/// parallel to the source normal).
fn pair_features(p1: &Point3, n1: &Vec3, p2: &Point3, n2: &Vec3) -> Option<(f64, f64, f64)> {
    let mut d = p2 - p1;
    let dist = d.norm();
    if dist < 1e-12 {
        return None;
    }
    d /= dist;
    // the point whose normal makes the smaller angle with the connecting
    // line acts as the frame source
    let (u, n_other) = if n1.dot(&d).abs() >= n2.dot(&d).abs() {
        (n1, n2)
    } else {
        d = -d;
        (n2, n1)
    };
    let mut v = d.cross(u);
    let v_norm = v.norm();
    if v_norm < 1e-12 {
        return None;
    }
    v /= v_norm;
    let w = u.cross(&v);
    let alpha = v.dot(n_other);
    let phi = u.dot(&d);
    let theta = w.dot(n_other).atan2(u.dot(n_other));
    Some((alpha, phi, theta))
}

/// Histogram bin for `value` in `[lo, hi]`, clamped to the edge bins.
fn bin_index(value: f64, lo: f64, hi: f64) -> usize {
    let t = (value - lo) / (hi - lo);
    ((t * BINS_PER_FEATURE as f64).floor() as isize).clamp(0, BINS_PER_FEATURE as isize - 1)
        as usize
}

/// Unweighted per-point histogram over the point's radius neighbors.
fn spfh(
    points: &[Point3],
    normals: &[Vec3],
    center: usize,
    neighbors: &[(usize, f64)],
) -> [f64; DESCRIPTOR_LEN] {
    let mut hist = [0.0; DESCRIPTOR_LEN];
    for &(j, _) in neighbors {
        if j == center {
            continue;
        }
        let Some((alpha, phi, theta)) =
            pair_features(&points[center], &normals[center], &points[j], &normals[j])
        else {
            continue;
        };
        hist[bin_index(alpha, -1.0, 1.0)] += 1.0;
        hist[BINS_PER_FEATURE + bin_index(phi, -1.0, 1.0)] += 1.0;
        hist[2 * BINS_PER_FEATURE
            + bin_index(theta, -std::f64::consts::PI, std::f64::consts::PI)] += 1.0;
    }
    hist
}

/// Computes one FPFH descriptor per point: the point's own SPFH plus the
/// inverse-distance-weighted mean of its neighbors' SPFHs, each feature
/// block renormalized to sum 100.
pub fn compute_fpfh(
    cloud: &PointCloud,
    radius: f64,
) -> Result<Vec<FpfhDescriptor>, RegistrationError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(RegistrationError::NonPositiveRadius);
    }
    let normals = cloud.normals().ok_or(RegistrationError::MissingNormals)?;
    let points = cloud.points();
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let index = NeighborIndex::build(cloud)?;
    let neighborhoods: Vec<Vec<(usize, f64)>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            index
                .radius_search(p, radius)
                .into_iter()
                .filter(|&(j, _)| j != i)
                .collect()
        })
        .collect();
    let spfhs: Vec<[f64; DESCRIPTOR_LEN]> = (0..points.len())
        .map(|i| spfh(points, normals, i, &neighborhoods[i]))
        .collect();
    let mut descriptors = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let mut desc = FpfhDescriptor::zero();
        for (b, v) in desc.bins.iter_mut().zip(&spfhs[i]) {
            *b = *v;
        }
        let weighted: Vec<(usize, f64)> = neighborhoods[i]
            .iter()
            .filter(|&&(_, dist)| dist > 1e-12)
            .copied()
            .collect();
        if !weighted.is_empty() {
            let k = weighted.len() as f64;
            for (j, dist) in weighted {
                let w = 1.0 / (k * dist);
                for (b, v) in desc.bins.iter_mut().zip(&spfhs[j]) {
                    *b += w * v;
                }
            }
        }
        for block in 0..3 {
            let range = block * BINS_PER_FEATURE..(block + 1) * BINS_PER_FEATURE;
            let sum: f64 = desc.bins[range.clone()].iter().sum();
            if sum > 0.0 {
                for b in &mut desc.bins[range] {
                    *b *= 100.0 / sum;
                }
            }
        }
        descriptors.push(desc);
    }
    Ok(descriptors)
}

/// The L2-nearest `targets` entry for `query`; ties go to the lower id.
fn nearest_descriptor(query: &FpfhDescriptor, targets: &[FpfhDescriptor]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (t, desc) in targets.iter().enumerate() {
        let d2 = query.l2_sq_bounded(desc, best.1);
        if d2 < best.1 {
            best = (t, d2);
        }
    }
    (best.0, best.1.sqrt())
}

/// Matches every source descriptor to its L2-nearest target descriptor.
pub fn match_correspondences(
    src: &[FpfhDescriptor],
    dst: &[FpfhDescriptor],
) -> Result<CorrespondenceSet, RegistrationError> {
    if src.is_empty() || dst.is_empty() {
        return Err(RegistrationError::EmptyDescriptors);
    }
    let pairs = src
        .iter()
        .enumerate()
        .map(|(s, desc)| {
            let (target, distance) = nearest_descriptor(desc, dst);
            Correspondence {
                source: s,
                target,
                distance,
            }
        })
        .collect();
    Ok(CorrespondenceSet { pairs })
}
