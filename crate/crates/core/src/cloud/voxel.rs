//! Voxel-grid downsampling.

use std::collections::HashMap;

use super::{CloudError, Point3, PointCloud, Vec3};

/// Replaces the points inside each cubic voxel by their centroid.
///
/// The grid is axis-aligned and anchored at the world origin: a point maps to
/// voxel `floor(coord / edge)` per axis. Output points are ordered by
/// ascending lexicographic voxel index (ix, iy, iz). Normals are dropped;
/// estimate them again on the reduced cloud if needed.
pub fn voxel_downsample(cloud: &PointCloud, edge: f64) -> Result<PointCloud, CloudError> {
    if edge.is_nan() || edge <= 0.0 {
        return Err(CloudError::NonPositiveEdge);
    }
    let mut cells: HashMap<(i64, i64, i64), (Vec3, usize)> = HashMap::new();
    for p in cloud.points() {
        let key = (
            (p.x / edge).floor() as i64,
            (p.y / edge).floor() as i64,
            (p.z / edge).floor() as i64,
        );
        let entry = cells.entry(key).or_insert((Vec3::zeros(), 0));
        entry.0 += p.coords;
        entry.1 += 1;
    }
    let mut entries: Vec<_> = cells.into_iter().collect();
    entries.sort_unstable_by_key(|(key, _)| *key);
    let points = entries
        .into_iter()
        .map(|(_, (sum, count))| Point3::from(sum / count as f64))
        .collect();
    PointCloud::new(points)
}
