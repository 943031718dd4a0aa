//! Surface normal estimation from local neighborhoods.

use nalgebra::SymmetricEigen;

use super::{CloudError, Mat3, NeighborIndex, Point3, PointCloud, Vec3};

/// Estimates a unit normal per point from the covariance of its `k` nearest
/// neighbors (the query point itself included) and orients each normal toward
/// `viewpoint`.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    viewpoint: &Point3,
) -> Result<PointCloud, CloudError> {
    if k < 3 || cloud.len() < k {
        return Err(CloudError::TooFewPoints {
            required: k.max(3),
            actual: cloud.len(),
        });
    }
    let index = NeighborIndex::build(cloud)?;
    let points = cloud.points();
    let mut normals = Vec::with_capacity(points.len());
    for p in points {
        let neighbors = index.knn(p, k)?;
        let mut centroid = Vec3::zeros();
        for &(id, _) in &neighbors {
            centroid += points[id].coords;
        }
        centroid /= neighbors.len() as f64;
        let mut cov = Mat3::zeros();
        for &(id, _) in &neighbors {
            let d = points[id].coords - centroid;
            cov += d * d.transpose();
        }
        let eigen = SymmetricEigen::new(cov);
        let mut smallest = 0;
        for i in 1..3 {
            if eigen.eigenvalues[i] < eigen.eigenvalues[smallest] {
                smallest = i;
            }
        }
        let mut n: Vec3 = eigen.eigenvectors.column(smallest).into_owned();
        let norm = n.norm();
        if norm > 0.0 {
            n /= norm;
        } else {
            n = Vec3::z(); // fully degenerate neighborhood; pick an arbitrary axis
        }
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        normals.push(n);
    }
    PointCloud::with_normals(points.to_vec(), normals)
}
