//! Seeded synthetic scenes: a ground plane plus box obstacles sampled into
//! per-pose sensor-frame scans with known ground-truth alignment, standing
//! in for field data when exercising the registration and mapping stages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::{Point3, PointCloud, RigidTransform, Vec3};

/// Axis-aligned box resting on the ground plane, described by its footprint
/// center and full extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxObstacle {
    pub center: [f64; 2],
    pub size: [f64; 3],
}

/// Deterministic recipe for a multi-scan scene. The seed fixes the sampled
/// world and all per-scan noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    /// Half-extent of the square ground patch, meters.
    pub ground_extent: f64,
    pub boxes: Vec<BoxObstacle>,
    /// Sensor-to-world pose per scan; at least two.
    pub poses: Vec<RigidTransform>,
    pub points_per_scan: usize,
    /// Per-axis Gaussian noise, meters.
    pub noise_sigma: f64,
}

impl SceneSpec {
    fn validate(&self) {
        assert!(self.poses.len() >= 2, "a scene needs at least two poses");
        assert!(self.ground_extent > 0.0, "ground extent must be positive");
        assert!(self.points_per_scan > 0, "need at least one point per scan");
        assert!(self.noise_sigma >= 0.0, "noise sigma must be nonnegative");
        for b in &self.boxes {
            assert!(
                b.size.iter().all(|&s| s > 0.0),
                "box extents must be positive"
            );
        }
    }
}

/// One world point on the ground or on a box face, area-weighted over the
/// four sides and the top.
fn sample_box_point(rng: &mut ChaCha8Rng, b: &BoxObstacle) -> Point3 {
    let [cx, cy] = b.center;
    let [sx, sy, sz] = b.size;
    let (hx, hy) = (sx / 2.0, sy / 2.0);
    let side_x = sy * sz;
    let side_y = sx * sz;
    let top = sx * sy;
    let total = 2.0 * side_x + 2.0 * side_y + top;
    let pick = rng.random_range(0.0..total);
    let (u, v) = (rng.random_range(0.0f64..1.0), rng.random_range(0.0f64..1.0));
    if pick < 2.0 * side_x {
        let x = if pick < side_x { cx + hx } else { cx - hx };
        Point3::new(x, cy - hy + u * sy, v * sz)
    } else if pick < 2.0 * side_x + 2.0 * side_y {
        let y = if pick < 2.0 * side_x + side_y {
            cy + hy
        } else {
            cy - hy
        };
        Point3::new(cx - hx + u * sx, y, v * sz)
    } else {
        Point3::new(cx - hx + u * sx, cy - hy + v * sy, sz)
    }
}

fn sample_world(spec: &SceneSpec) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.points_per_scan;
    let ground_count = if spec.boxes.is_empty() {
        total
    } else {
        total * 55 / 100
    };
    let mut world = Vec::with_capacity(total);
    for _ in 0..ground_count {
        world.push(Point3::new(
            rng.random_range(-spec.ground_extent..spec.ground_extent),
            rng.random_range(-spec.ground_extent..spec.ground_extent),
            0.0,
        ));
    }
    if !spec.boxes.is_empty() {
        let remaining = total - ground_count;
        let per_box = remaining / spec.boxes.len();
        for (i, b) in spec.boxes.iter().enumerate() {
            let count = if i + 1 == spec.boxes.len() {
                remaining - per_box * i
            } else {
                per_box
            };
            for _ in 0..count {
                world.push(sample_box_point(&mut rng, b));
            }
        }
    }
    world
}

/// Samples the world once, expresses it in every sensor frame with per-scan
/// noise, and returns the scans plus the exact scan-to-first-scan transforms
/// (index 0 is the identity). Bit-deterministic per seed.
pub fn generate_scene(spec: &SceneSpec) -> (Vec<PointCloud>, Vec<RigidTransform>) {
    spec.validate();
    let world = sample_world(spec);
    let reference_inverse = spec.poses[0].inverse();
    let mut scans = Vec::with_capacity(spec.poses.len());
    let mut truths = Vec::with_capacity(spec.poses.len());
    for (i, pose) in spec.poses.iter().enumerate() {
        let world_to_sensor = pose.inverse();
        let mut points: Vec<Point3> = world
            .iter()
            .map(|p| world_to_sensor.apply_point(p))
            .collect();
        if spec.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(1 + i as u64);
            let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
            for p in &mut points {
                *p += Vec3::new(
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                );
            }
        }
        scans.push(PointCloud::new(points).expect("scan is nonempty"));
        truths.push(if i == 0 {
            RigidTransform::identity()
        } else {
            reference_inverse.compose(pose)
        });
    }
    (scans, truths)
}

/// Benign two-scan recipe for registration exercises: flat-ish relative pose
/// (rotation under 30 degrees, translation under 2 m), three boxes, 5 mm
/// noise.
pub fn two_scan_spec(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(99);
    let roll = rng.random_range(-3.0f64..3.0).to_radians();
    let pitch = rng.random_range(-3.0f64..3.0).to_radians();
    let yaw = rng.random_range(-22.0f64..22.0).to_radians();
    let translation = Vec3::new(
        rng.random_range(-1.3..1.3),
        rng.random_range(-1.3..1.3),
        rng.random_range(-0.1..0.1),
    );
    let second = RigidTransform::from_euler(roll, pitch, yaw).with_translation(translation);
    let boxes = (0..3)
        .map(|_| BoxObstacle {
            center: [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            size: [
                rng.random_range(0.5..1.2),
                rng.random_range(0.5..1.2),
                rng.random_range(0.6..1.5),
            ],
        })
        .collect();
    SceneSpec {
        seed,
        ground_extent: 3.0,
        boxes,
        poses: vec![RigidTransform::identity(), second],
        points_per_scan: 4000,
        noise_sigma: 0.005,
    }
}

/// Compact dense scene with a chain of mildly stepped poses, sized so that
/// centimeter-scale feature radii see well-populated neighborhoods.
pub fn chained_scan_spec(
    seed: u64,
    scan_count: usize,
    points_per_scan: usize,
    noise_sigma: f64,
) -> SceneSpec {
    assert!(scan_count >= 2, "a scene needs at least two poses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(98);
    let mut poses = vec![RigidTransform::identity()];
    for _ in 1..scan_count {
        let step = RigidTransform::from_euler(
            rng.random_range(-1.0f64..1.0).to_radians(),
            rng.random_range(-1.0f64..1.0).to_radians(),
            rng.random_range(-8.0f64..8.0).to_radians(),
        )
        .with_translation(Vec3::new(
            rng.random_range(0.2..0.35),
            rng.random_range(-0.15..0.15),
            rng.random_range(-0.02..0.02),
        ));
        poses.push(poses.last().expect("nonempty").compose(&step));
    }
    let boxes = (0..3)
        .map(|_| BoxObstacle {
            center: [rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)],
            size: [
                rng.random_range(0.4..0.9),
                rng.random_range(0.4..0.9),
                rng.random_range(0.5..1.2),
            ],
        })
        .collect();
    SceneSpec {
        seed,
        ground_extent: 1.8 + 0.3 * (scan_count - 1) as f64,
        boxes,
        poses,
        points_per_scan,
        noise_sigma,
    }
}
