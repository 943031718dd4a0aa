//! Cloud merging, ground extraction, height filtering, and top-down
//! projection to a centimeter occupancy grid.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{
    apply_transform, voxel_downsample, CloudError, Mat3, Point3, PointCloud, RigidTransform, Vec3,
};

/// Ground band removed around the fitted floor: the nominal [0, 2] cm of
/// traversable shift widened by one 1 cm noise deviation on both sides.
pub const GROUND_BAND: (f64, f64) = (-0.01, 0.03);
/// Points higher than this above the floor cannot obstruct the platform.
pub const CEILING: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MappingError {
    #[error("need at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },
    #[error("no plane sample satisfied the axis-tilt constraint")]
    NoConstrainedPlane,
    #[error("cannot project an empty cloud")]
    EmptyCloud,
    #[error("{clouds} clouds but {transforms} transforms")]
    LengthMismatch { clouds: usize, transforms: usize },
    #[error("resolution must be positive")]
    NonPositiveResolution,
    #[error(transparent)]
    Cloud(#[from] CloudError),
}

/// Plane n·x + d = 0 with |n| = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    normal: Vec3,
    d: f64,
}

impl PlaneModel {
    pub fn new(normal: Vec3, d: f64) -> Result<Self, CloudError> {
        if (normal.norm() - 1.0).abs() > crate::cloud::NORMAL_TOL {
            return Err(CloudError::NotUnitNormal(0));
        }
        Ok(Self { normal, d })
    }

    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.d
    }

    /// Height of `p` above the plane, positive on the normal side.
    pub fn signed_height(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.d
    }

    /// The same plane with the normal flipped.
    pub fn flipped(&self) -> PlaneModel {
        PlaneModel {
            normal: -self.normal,
            d: -self.d,
        }
    }

    /// Plane re-expressed after moving its points by `transform`.
    pub fn transformed(&self, transform: &RigidTransform) -> PlaneModel {
        // x on plane, y = Rx + t on image: n·x + d = n·Rᵀ(y − t) + d
        let normal = transform.rotation() * self.normal;
        let d = self.d - normal.dot(transform.translation());
        PlaneModel { normal, d }
    }
}

/// Top-down raster: `origin` is the planar (u, v) of the corner of cell
/// (0, 0); `u` grows along columns, `v` along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    origin: [f64; 2],
    resolution: f64,
    width: usize,
    height: usize,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new_empty(
        origin: [f64; 2],
        resolution: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, MappingError> {
        if resolution.is_nan() || resolution <= 0.0 {
            return Err(MappingError::NonPositiveResolution);
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
            occupied: vec![false; width * height],
        })
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.occupied[row * self.width + col]
    }

    pub fn set_occupied(&mut self, row: usize, col: usize, value: bool) {
        self.occupied[row * self.width + col] = value;
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Row-major iterator over occupied (row, col) cells.
    pub fn occupied_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(move |(i, _)| (i / width, i % width))
    }
}

/// Deterministic in-plane basis: `e1` is the normalized projection of world
/// +x onto the plane (+y when x is parallel to the normal), `e2 = n × e1`.
pub fn plane_basis(plane: &PlaneModel) -> (Vec3, Vec3) {
    let n = plane.normal();
    let mut e1 = Vec3::x() - n.x * n;
    if e1.norm() < 1e-6 {
        e1 = Vec3::y() - n.y * n;
    }
    e1.normalize_mut();
    (e1, n.cross(&e1))
}

/// Fits the dominant plane whose normal lies within `max_tilt` of `axis`,
/// using seeded 3-point samples refined by a least-squares pass over the
/// winning sample's inliers. Returns the plane (normal oriented along
/// `axis`) and the ids of its inliers.
pub fn ransac_plane(
    cloud: &PointCloud,
    dist_threshold: f64,
    iterations: usize,
    axis: &Vec3,
    max_tilt: f64,
    seed: u64,
) -> Result<(PlaneModel, Vec<usize>), MappingError> {
    let points = cloud.points();
    if points.len() < 3 {
        return Err(MappingError::TooFewPoints {
            required: 3,
            actual: points.len(),
        });
    }
    let axis = axis.normalize();
    let min_dot = max_tilt.cos();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, PlaneModel)> = None;
    for _ in 0..iterations {
        let sample = rand::seq::index::sample(&mut rng, points.len(), 3);
        let (a, b, c) = (
            points[sample.index(0)],
            points[sample.index(1)],
            points[sample.index(2)],
        );
        let mut n = (b - a).cross(&(c - a));
        let norm = n.norm();
        if norm < 1e-12 {
            continue; // collinear sample
        }
        n /= norm;
        if n.dot(&axis) < 0.0 {
            n = -n;
        }
        if n.dot(&axis) < min_dot {
            continue;
        }
        let plane = PlaneModel {
            normal: n,
            d: -n.dot(&a.coords),
        };
        let count = points
            .iter()
            .filter(|p| plane.signed_height(p).abs() <= dist_threshold)
            .count();
        // strict > keeps the first-found plane on ties
        if best
            .as_ref()
            .is_none_or(|(best_count, _)| count > *best_count)
        {
            best = Some((count, plane));
        }
    }
    let (_, sample_plane) = best.ok_or(MappingError::NoConstrainedPlane)?;
    let sample_inliers: Vec<usize> = (0..points.len())
        .filter(|&i| sample_plane.signed_height(&points[i]).abs() <= dist_threshold)
        .collect();
    // least-squares refinement; fall back to the sample plane if the refined
    // normal drifts past the tilt constraint
    let plane = lsq_plane(points, &sample_inliers, &axis)
        .filter(|p| p.normal.dot(&axis) >= min_dot)
        .unwrap_or(sample_plane);
    let inliers: Vec<usize> = (0..points.len())
        .filter(|&i| plane.signed_height(&points[i]).abs() <= dist_threshold)
        .collect();
    Ok((plane, inliers))
}

fn lsq_plane(points: &[Point3], ids: &[usize], axis: &Vec3) -> Option<PlaneModel> {
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
    let eigen = SymmetricEigen::new(cov);
    let mut smallest = 0;
    for i in 1..3 {
        if eigen.eigenvalues[i] < eigen.eigenvalues[smallest] {
            smallest = i;
        }
    }
    let mut n: Vec3 = eigen.eigenvectors.column(smallest).into_owned();
    let norm = n.norm();
    if norm < 1e-12 {
        return None;
    }
    n /= norm;
    if n.dot(axis) < 0.0 {
        n = -n;
    }
    Some(PlaneModel {
        normal: n,
        d: -n.dot(&centroid),
    })
}

/// Removes the ground band `h ∈ [band.0, band.1]` (closed) and everything
/// strictly above `ceiling`; order is preserved.
pub fn filter_heights_with(
    cloud: &PointCloud,
    plane: &PlaneModel,
    band: (f64, f64),
    ceiling: f64,
) -> PointCloud {
    let points = cloud.points();
    cloud.filtered(|i| {
        let h = plane.signed_height(&points[i]);
        !(h >= band.0 && h <= band.1) && h <= ceiling
    })
}

/// [`filter_heights_with`] at the platform defaults: band [−1, 3] cm,
/// ceiling 1.5 m.
pub fn filter_heights(cloud: &PointCloud, plane: &PlaneModel) -> PointCloud {
    filter_heights_with(cloud, plane, GROUND_BAND, CEILING)
}

fn planar_coords(p: &Point3, e1: &Vec3, e2: &Vec3) -> (f64, f64) {
    (p.coords.dot(e1), p.coords.dot(e2))
}

/// Projects the (already height-filtered) cloud onto the plane and bins it
/// at `resolution`; the grid origin is the elementwise minimum of the
/// projected coordinates.
pub fn project_topdown(
    cloud: &PointCloud,
    plane: &PlaneModel,
    resolution: f64,
) -> Result<OccupancyGrid, MappingError> {
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(MappingError::NonPositiveResolution);
    }
    if cloud.is_empty() {
        return Err(MappingError::EmptyCloud);
    }
    let (e1, e2) = plane_basis(plane);
    let coords: Vec<(f64, f64)> = cloud
        .points()
        .iter()
        .map(|p| planar_coords(p, &e1, &e2))
        .collect();
    let min_u = coords.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let min_v = coords.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let mut max_col = 0usize;
    let mut max_row = 0usize;
    let cells: Vec<(usize, usize)> = coords
        .iter()
        .map(|&(u, v)| {
            let col = ((u - min_u) / resolution).floor() as usize;
            let row = ((v - min_v) / resolution).floor() as usize;
            max_col = max_col.max(col);
            max_row = max_row.max(row);
            (row, col)
        })
        .collect();
    let mut grid = OccupancyGrid::new_empty([min_u, min_v], resolution, max_col + 1, max_row + 1)?;
    for (row, col) in cells {
        grid.set_occupied(row, col, true);
    }
    Ok(grid)
}

/// Projects into the frame of `template` (same origin, resolution, and
/// extent) so successive scans share cell indices; points falling outside
/// the template extent are dropped.
pub fn project_topdown_into(
    cloud: &PointCloud,
    plane: &PlaneModel,
    template: &OccupancyGrid,
) -> OccupancyGrid {
    let (e1, e2) = plane_basis(plane);
    let [min_u, min_v] = template.origin();
    let resolution = template.resolution();
    let mut grid = OccupancyGrid::new_empty(
        template.origin(),
        resolution,
        template.width(),
        template.height(),
    )
    .expect("template resolution already validated");
    for p in cloud.points() {
        let (u, v) = planar_coords(p, &e1, &e2);
        let col = ((u - min_u) / resolution).floor();
        let row = ((v - min_v) / resolution).floor();
        if col >= 0.0 && row >= 0.0 && (col as usize) < grid.width && (row as usize) < grid.height {
            grid.set_occupied(row as usize, col as usize, true);
        }
    }
    grid
}

/// Concatenates each cloud mapped by its transform, then voxel-downsamples
/// the union. Normals are dropped (the centroid of a voxel has none).
pub fn merge_clouds(
    clouds: &[PointCloud],
    transforms: &[RigidTransform],
    voxel_edge: f64,
) -> Result<PointCloud, MappingError> {
    if clouds.len() != transforms.len() {
        return Err(MappingError::LengthMismatch {
            clouds: clouds.len(),
            transforms: transforms.len(),
        });
    }
    let mut merged = Vec::new();
    for (cloud, transform) in clouds.iter().zip(transforms) {
        merged.extend_from_slice(apply_transform(cloud, transform).points());
    }
    let union = PointCloud::new(merged)?;
    Ok(voxel_downsample(&union, voxel_edge)?)
}
