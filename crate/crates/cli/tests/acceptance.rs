//! Full-toolkit acceptance gate: registration accuracy, solver exactness,
//! costmap semantics, planner parity against independent oracles, and
//! end-to-end throughput. Each numbered check prints one pass/fail line
//! (run with `--nocapture` to see them); the test fails if any check does.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};
use std::process::Command;
use std::time::Instant;

use lasernav::config::PipelineConfig;
use lasernav::io;
use lasernav::pipeline::run_pipeline;
use lasernav_core::cloud::estimate_normals;
use lasernav_core::costmap::{
    embodiment_radius_cells, inflate, CostField, EmbodimentSpec, GaussianParams,
};
use lasernav_core::mapping::{filter_heights_with, OccupancyGrid, PlaneModel};
use lasernav_core::planner::{edge_cost, CellChange, DstarLite, GridVertex, PlannerError};
use lasernav_core::registration::{
    coarse_align, estimate_rigid_svd, icp_point_to_plane, point_to_plane_objective,
    point_to_plane_system, CoarseAlignParams, IcpParams,
};
use lasernav_core::synth::{chained_scan_spec, generate_scene, two_scan_spec};
use lasernav_core::{Point3, PointCloud, RigidTransform, Vec3};
use nalgebra::Vector6;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_lasernav")
}

fn with_normals(cloud: &PointCloud) -> PointCloud {
    estimate_normals(cloud, 12, &Point3::origin()).expect("normal estimation")
}

/// Registration parameters sized for the synthetic scenes' ~10 cm spacing.
fn recovery_coarse_params(seed: u64) -> CoarseAlignParams {
    CoarseAlignParams {
        feature_radius: 0.3,
        consensus_iterations: 400,
        inlier_threshold: 0.05,
        min_inlier_fraction: 0.25,
        max_correspondences: 800,
        seed,
    }
}

fn recovery_icp_params() -> IcpParams {
    IcpParams {
        max_iterations: 50,
        max_correspondence_distance: 0.25,
        translation_epsilon: 1e-7,
        rotation_epsilon: 1e-7,
        surface_gating: None,
    }
}

fn random_point(rng: &mut ChaCha8Rng, extent: f64) -> Point3 {
    Point3::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    )
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm() > 1e-3 {
            break v.normalize();
        }
    }
}

/// 1: twenty synthetic two-scan scenes with 5 mm noise must register within
/// 1 deg / 2 cm at least 18 times, all inside a 60 s budget. The residual
/// histories feed check 3.
fn registration_accuracy(histories: &mut Vec<Vec<f64>>) -> Result<String, String> {
    let clock = Instant::now();
    let mut hits = 0;
    for seed in 0..20u64 {
        let (scans, truths) = generate_scene(&two_scan_spec(seed));
        let src = with_normals(&scans[1]);
        let dst = with_normals(&scans[0]);
        let (initial, _) = coarse_align(&src, &dst, &recovery_coarse_params(seed), None)
            .map_err(|e| format!("seed {seed}: coarse alignment failed: {e}"))?;
        let result = icp_point_to_plane(&src, &dst, &initial, &recovery_icp_params())
            .map_err(|e| format!("seed {seed}: refinement failed: {e}"))?;
        let rot = result.transform.rotation_angle_to(&truths[1]).to_degrees();
        let trans = result.transform.translation_distance_to(&truths[1]);
        if rot < 1.0 && trans < 0.02 {
            hits += 1;
        }
        histories.push(result.residual_history);
    }
    let elapsed = clock.elapsed().as_secs_f64();
    if hits < 18 {
        return Err(format!("only {hits}/20 pairs within 1 deg / 2 cm"));
    }
    if elapsed >= 60.0 {
        return Err(format!("20 pairs took {elapsed:.1} s (budget 60 s)"));
    }
    Ok(format!(
        "{hits}/20 pairs within 1 deg / 2 cm in {elapsed:.1} s"
    ))
}

/// 2: the closed-form rigid solver must be exact (rms <= 1e-10) on 1000
/// random correspondence sets, every third one coplanar to tempt the
/// reflection branch, and always return a proper rotation.
fn svd_exactness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_rms = 0.0f64;
    let mut worst_det = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(4..=40);
        let mut src: Vec<Point3> = (0..n).map(|_| random_point(&mut rng, 2.0)).collect();
        if case % 3 == 0 {
            for p in &mut src {
                p.z = 0.0;
            }
        }
        let truth = RigidTransform::from_euler(
            rng.random_range(-PI..PI),
            rng.random_range(-1.5..1.5),
            rng.random_range(-PI..PI),
        )
        .with_translation(Vec3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        ));
        let dst: Vec<Point3> = src.iter().map(|p| truth.apply_point(p)).collect();
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        let est = estimate_rigid_svd(&src, &dst, &pairs)
            .map_err(|e| format!("case {case} (n = {n}): {e}"))?;
        let rms = (src
            .iter()
            .zip(&dst)
            .map(|(p, q)| (est.apply_point(p) - q).norm_squared())
            .sum::<f64>()
            / n as f64)
            .sqrt();
        worst_rms = worst_rms.max(rms);
        worst_det = worst_det.max((est.rotation().determinant() - 1.0).abs());
    }
    if worst_rms > 1e-10 {
        return Err(format!(
            "worst rms alignment error {worst_rms:.3e} m exceeds 1e-10"
        ));
    }
    if worst_det > 1e-9 {
        return Err(format!("worst |det(R) - 1| = {worst_det:.3e}"));
    }
    Ok(format!(
        "1000 instances: worst rms {worst_rms:.2e} m, worst |det(R) - 1| {worst_det:.2e}"
    ))
}

/// 3: every refinement residual history from check 1 must be nonincreasing,
/// and the linearized point-to-plane system must reproduce finite-difference
/// directional derivatives (50 random directions plus the solved step, which
/// must descend).
fn refinement_consistency(histories: &[Vec<f64>]) -> Result<String, String> {
    if histories.is_empty() {
        return Err("no residual histories recorded by check 1".into());
    }
    for (i, history) in histories.iter().enumerate() {
        if history.is_empty() {
            return Err(format!("history {i} is empty"));
        }
        for w in history.windows(2) {
            if w[1] > w[0] + 1e-9 {
                return Err(format!(
                    "history {i} rises from {:.6e} to {:.6e}",
                    w[0], w[1]
                ));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 400;
    let src: Vec<Point3> = (0..n).map(|_| random_point(&mut rng, 1.0)).collect();
    let dst: Vec<Point3> = src
        .iter()
        .map(|p| p + random_unit(&mut rng).scale(rng.random_range(0.0..0.1)))
        .collect();
    let normals: Vec<Vec3> = (0..n).map(|_| random_unit(&mut rng)).collect();
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    let (a_mat, b) = point_to_plane_system(&src, &dst, &normals, &pairs);
    let objective = |xi: &Vector6<f64>| point_to_plane_objective(&src, &dst, &normals, &pairs, xi);
    let step = a_mat
        .lu()
        .solve(&(-b))
        .ok_or_else(|| "normal equations are singular".to_string())?;
    let slope_along_step = 2.0 * b.dot(&step.normalize());
    if slope_along_step >= 0.0 {
        return Err(format!(
            "solved step is not a descent direction (slope {slope_along_step:.3e})"
        ));
    }
    let mut directions: Vec<Vector6<f64>> = (0..50)
        .map(|_| Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize())
        .collect();
    directions.push(step.normalize());
    let eps = 1e-5;
    let mut worst_rel = 0.0f64;
    for dir in &directions {
        let fd = (objective(&(dir * eps)) - objective(&(dir * -eps))) / (2.0 * eps);
        let analytic = 2.0 * b.dot(dir);
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-12);
        if rel >= 1e-3 {
            return Err(format!(
                "directional derivative mismatch: finite difference {fd:.6e} vs linearized {analytic:.6e}"
            ));
        }
        worst_rel = worst_rel.max(rel);
    }
    Ok(format!(
        "{} histories nonincreasing; worst gradient deviation {worst_rel:.1e} over {} directions",
        histories.len(),
        directions.len()
    ))
}

/// 4: the documented platform footprint inflates to exactly 29 cells on the
/// centimeter grid.
fn embodiment_radius() -> Result<String, String> {
    let spec = EmbodimentSpec::new(0.40, 0.41).map_err(|e| e.to_string())?;
    let cells = embodiment_radius_cells(&spec, 0.01);
    if cells == 29 {
        Ok("0.40 m x 0.41 m footprint at 1 cm resolution -> 29 cells".into())
    } else {
        Err(format!("expected 29 cells, got {cells}"))
    }
}

/// 5: inflation must match a brute-force accumulation oracle on 50 random
/// grids and hit the pinned unit-sigma spot values.
fn inflation_matches_brute_force() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let mut grid =
            OccupancyGrid::new_empty([0.0, 0.0], 0.01, 64, 64).map_err(|e| e.to_string())?;
        for row in 0..64 {
            for col in 0..64 {
                if rng.random_bool(0.04) {
                    grid.set_occupied(row, col, true);
                }
            }
        }
        let params = GaussianParams::new(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0))
            .map_err(|e| e.to_string())?;
        let radius = rng.random_range(0..=29usize);
        let field = inflate(&grid, radius, &params);
        let occupied: Vec<(usize, usize)> = grid.occupied_cells().collect();
        let (sx, sy) = (params.sigma_x(), params.sigma_y());
        for row in 0..64 {
            for col in 0..64 {
                if field.is_lethal(row, col) != grid.is_occupied(row, col) {
                    return Err(format!(
                        "case {case}: lethal mask diverges at ({row}, {col})"
                    ));
                }
                let expected: f64 = if grid.is_occupied(row, col) {
                    0.0
                } else {
                    occupied
                        .iter()
                        .map(|&(orow, ocol)| {
                            if row.abs_diff(orow) > radius || col.abs_diff(ocol) > radius {
                                return 0.0;
                            }
                            let dx = col as f64 - ocol as f64;
                            let dy = row as f64 - orow as f64;
                            (-(dx * dx / (2.0 * sx * sx) + dy * dy / (2.0 * sy * sy))).exp()
                        })
                        .sum()
                };
                let diff = (field.penalty(row, col) - expected).abs();
                if diff > 1e-12 {
                    return Err(format!(
                        "case {case}: penalty at ({row}, {col}) off by {diff:.3e}"
                    ));
                }
                worst = worst.max(diff);
            }
        }
    }
    let unit = GaussianParams::new(1.0, 1.0).map_err(|e| e.to_string())?;
    let mut single = OccupancyGrid::new_empty([0.0, 0.0], 0.01, 9, 9).map_err(|e| e.to_string())?;
    single.set_occupied(4, 4, true);
    let one = inflate(&single, 3, &unit).penalty(4, 5);
    if (one - 0.6065307).abs() > 5e-8 {
        return Err(format!("one-cell neighbor penalty {one:.7} != 0.6065307"));
    }
    let mut twin = OccupancyGrid::new_empty([0.0, 0.0], 0.01, 9, 9).map_err(|e| e.to_string())?;
    twin.set_occupied(4, 3, true);
    twin.set_occupied(4, 5, true);
    let mid = inflate(&twin, 3, &unit).penalty(4, 4);
    if (mid - 1.2130613).abs() > 5e-8 {
        return Err(format!("between-obstacles penalty {mid:.7} != 1.2130613"));
    }
    Ok(format!(
        "50 random grids match brute force (worst diff {worst:.1e}); unit-sigma spots {one:.7} and {mid:.7}"
    ))
}

fn random_field(rng: &mut ChaCha8Rng, size: usize, lethal_p: f64) -> CostField {
    let mut field = CostField::new_empty([0.0, 0.0], 0.05, size, size);
    for row in 0..size {
        for col in 0..size {
            if rng.random_bool(lethal_p) {
                field.set_lethal(row, col, true);
            } else {
                field.set_penalty(row, col, rng.random_range(0.0..1.5));
            }
        }
    }
    field.set_lethal(0, 0, false);
    field.set_lethal(size - 1, size - 1, false);
    field
}

/// Textbook Dijkstra over the same edge costs; nonnegative finite costs keep
/// the to_bits ordering monotone.
fn dijkstra(field: &CostField, start: &GridVertex, goal: &GridVertex) -> f64 {
    let (w, h) = (field.width(), field.height());
    let mut dist = vec![f64::INFINITY; w * h];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    dist[start.row * w + start.col] = 0.0;
    heap.push(Reverse((0u64, start.row * w + start.col)));
    while let Some(Reverse((bits, idx))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[idx] {
            continue;
        }
        if idx == goal.row * w + goal.col {
            return d;
        }
        let u = GridVertex::new(idx / w, idx % w);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (u.row as i64 + dr, u.col as i64 + dc);
                if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                    continue;
                }
                let v = GridVertex::new(r as usize, c as usize);
                let cost = edge_cost(field, &u, &v).expect("adjacent cells");
                if !cost.is_finite() {
                    continue;
                }
                let vi = v.row * w + v.col;
                if d + cost < dist[vi] {
                    dist[vi] = d + cost;
                    heap.push(Reverse(((d + cost).to_bits(), vi)));
                }
            }
        }
    }
    f64::INFINITY
}

/// 6: the incremental planner must match an independent Dijkstra oracle on
/// 100 random 50x50 fields within 1e-9, cross an empty 100x100 field on the
/// exact diagonal, and never take a second per plan.
fn planner_matches_dijkstra() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = GridVertex::new(0, 0);
    let goal = GridVertex::new(49, 49);
    let mut reachable = 0;
    let mut worst_gap = 0.0f64;
    let mut slowest = 0.0f64;
    for case in 0..100 {
        let field = random_field(&mut rng, 50, 0.15);
        let clock = Instant::now();
        let planned = DstarLite::plan(&field, &start, &goal);
        slowest = slowest.max(clock.elapsed().as_secs_f64());
        let oracle = dijkstra(&field, &start, &goal);
        match planned {
            Ok((path, _)) => {
                if !oracle.is_finite() {
                    return Err(format!(
                        "case {case}: planner found a path the oracle says cannot exist"
                    ));
                }
                let gap = (path.total_cost - oracle).abs();
                if gap > 1e-9 {
                    return Err(format!(
                        "case {case}: cost {} vs oracle {}",
                        path.total_cost, oracle
                    ));
                }
                worst_gap = worst_gap.max(gap);
                reachable += 1;
            }
            Err(PlannerError::NoPath) => {
                if oracle.is_finite() {
                    return Err(format!(
                        "case {case}: planner missed a path of cost {oracle}"
                    ));
                }
            }
            Err(other) => return Err(format!("case {case}: {other}")),
        }
    }
    if reachable < 90 {
        return Err(format!(
            "only {reachable}/100 instances reachable; fixture too hostile"
        ));
    }
    let open = CostField::new_empty([0.0, 0.0], 0.05, 100, 100);
    let clock = Instant::now();
    let (diagonal, _) = DstarLite::plan(&open, &GridVertex::new(0, 0), &GridVertex::new(99, 99))
        .map_err(|e| e.to_string())?;
    slowest = slowest.max(clock.elapsed().as_secs_f64());
    if (diagonal.total_cost - 99.0 * SQRT_2).abs() > 1e-9 {
        return Err(format!(
            "open-field diagonal costs {} (expected 99*sqrt(2))",
            diagonal.total_cost
        ));
    }
    if slowest >= 1.0 {
        return Err(format!("slowest plan took {slowest:.3} s (budget 1 s)"));
    }
    Ok(format!(
        "{reachable}/100 oracle matches (worst gap {worst_gap:.1e}); open diagonal exact; slowest plan {slowest:.3} s"
    ))
}

/// 7: incremental repair after each of 20 random change batches on 10 random
/// fields must cost the same as planning from scratch.
fn repair_matches_fresh_plans() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = GridVertex::new(0, 0);
    let goal = GridVertex::new(49, 49);
    let mut compared = 0;
    for field_idx in 0..10 {
        let mut field = random_field(&mut rng, 50, 0.12);
        let mut state = match DstarLite::plan(&field, &start, &goal) {
            Ok((_, state)) => state,
            Err(PlannerError::NoPath) => continue,
            Err(other) => return Err(format!("field {field_idx}: {other}")),
        };
        for batch in 0..20 {
            let count = rng.random_range(1..=12);
            let changes: Vec<CellChange> = (0..count)
                .map(|_| loop {
                    let vertex = GridVertex::new(rng.random_range(0..50), rng.random_range(0..50));
                    if vertex != start && vertex != goal {
                        break CellChange {
                            vertex,
                            lethal: rng.random_bool(0.3),
                            penalty: rng.random_range(0.0..2.0),
                        };
                    }
                })
                .collect();
            let repaired = state.update_cells(&mut field, &changes);
            let fresh = DstarLite::plan(&field, &start, &goal);
            match (repaired, fresh) {
                (Ok(a), Ok((b, _))) => {
                    if (a.total_cost - b.total_cost).abs() > 1e-9 {
                        return Err(format!(
                            "field {field_idx} batch {batch}: repaired {} vs fresh {}",
                            a.total_cost, b.total_cost
                        ));
                    }
                    compared += 1;
                }
                (Err(PlannerError::NoPath), Err(PlannerError::NoPath)) => {}
                (repaired, fresh) => {
                    return Err(format!(
                        "field {field_idx} batch {batch}: repair {:?} vs fresh {:?} disagree",
                        repaired.map(|p| p.total_cost),
                        fresh.map(|(p, _)| p.total_cost)
                    ))
                }
            }
        }
    }
    if compared < 120 {
        return Err(format!(
            "only {compared} comparable batches; fixture too hostile"
        ));
    }
    Ok(format!(
        "{compared} repaired plans match from-scratch costs within 1e-9"
    ))
}

/// 8: the ground band is closed and the ceiling strict: of the seven probe
/// heights exactly {-0.02, 0.05, 1.5} survive.
fn height_band_filter() -> Result<String, String> {
    let plane = PlaneModel::new(Vec3::z(), 0.0).map_err(|e| e.to_string())?;
    let heights = [-0.02, -0.01, 0.005, 0.03, 0.05, 1.5, 1.6];
    let points = heights
        .iter()
        .enumerate()
        .map(|(i, &h)| Point3::new(i as f64 * 0.1, 0.0, h))
        .collect();
    let cloud = PointCloud::new(points).map_err(|e| e.to_string())?;
    let kept: Vec<f64> = filter_heights_with(&cloud, &plane, (-0.01, 0.03), 1.5)
        .points()
        .iter()
        .map(|p| p.z)
        .collect();
    if kept == [-0.02, 0.05, 1.5] {
        Ok(format!("band [-0.01, 0.03] + ceiling 1.5 keeps {kept:?}"))
    } else {
        Err(format!("kept {kept:?}, expected [-0.02, 0.05, 1.5]"))
    }
}

/// 9: on a two-corridor map the geometry-only plan must be strictly shorter
/// and the embodiment-aware plan strictly cheaper in accumulated penalty,
/// both produced by the installed binary.
fn embodiment_tradeoff() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut grid = OccupancyGrid::new_empty([0.0, 0.0], 0.05, 21, 21).map_err(|e| e.to_string())?;
    for row in 9..=11 {
        for col in 0..21 {
            // narrow gap at column 6, wide gap across columns 12..=16
            if col != 6 && !(12..=16).contains(&col) {
                grid.set_occupied(row, col, true);
            }
        }
    }
    let field = inflate(
        &grid,
        4,
        &GaussianParams::new(1.0, 1.0).map_err(|e| e.to_string())?,
    );
    let field_path = dir.path().join("field.txt");
    io::save_costfield_txt(&field, &field_path).map_err(|e| e.to_string())?;
    let run = |label: &str, no_embodiment: bool| -> Result<Vec<GridVertex>, String> {
        let out = dir.path().join(label);
        let mut cmd = Command::new(binary());
        cmd.arg("--out-dir")
            .arg(&out)
            .args(["--start", "2,8", "--goal", "18,8"]);
        if no_embodiment {
            cmd.arg("--no-embodiment");
        }
        let output = cmd
            .arg("plan")
            .arg(&field_path)
            .output()
            .map_err(|e| e.to_string())?;
        if !output.status.success() {
            return Err(format!(
                "plan ({label}) exited {:?}: {}",
                output.status.code(),
                String::from_utf8_lossy(&output.stderr)
            ));
        }
        io::load_path_csv(&out.join("path.csv")).map_err(|e| e.to_string())
    };
    let embodied = run("embodied", false)?;
    let direct = run("direct", true)?;
    // diagonal moves absorb lateral detours, so compare metric length
    let metric_length = |path: &[GridVertex]| {
        path.windows(2)
            .map(|w| {
                if w[0].row != w[1].row && w[0].col != w[1].col {
                    SQRT_2
                } else {
                    1.0
                }
            })
            .sum::<f64>()
    };
    let penalty_sum = |path: &[GridVertex]| {
        path.iter()
            .map(|v| field.penalty(v.row, v.col))
            .sum::<f64>()
    };
    let (embodied_length, direct_length) = (metric_length(&embodied), metric_length(&direct));
    let (embodied_penalty, direct_penalty) = (penalty_sum(&embodied), penalty_sum(&direct));
    if direct_length >= embodied_length {
        return Err(format!(
            "geometry-only path is {direct_length:.3} cells long, embodied {embodied_length:.3}"
        ));
    }
    if embodied_penalty >= direct_penalty {
        return Err(format!(
            "embodied path accumulates {embodied_penalty:.3} penalty vs {direct_penalty:.3}"
        ));
    }
    Ok(format!(
        "geometry-only {:.2} long / {:.2} penalty vs embodied {:.2} long / {:.2} penalty",
        direct_length, direct_penalty, embodied_length, embodied_penalty
    ))
}

/// 10: the bench subcommand emits the documented three-row table over five
/// repetitions, and the full pipeline clears a 100k-point pair inside 120 s.
fn pipeline_throughput() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synth = Command::new(binary())
        .arg("--out-dir")
        .arg(dir.path())
        .args(["--seed", "9", "synth", "--scans", "2", "--points", "8000"])
        .output()
        .map_err(|e| e.to_string())?;
    if !synth.status.success() {
        return Err(format!(
            "synth failed: {}",
            String::from_utf8_lossy(&synth.stderr)
        ));
    }
    let bench = Command::new(binary())
        .arg("--out-dir")
        .arg(dir.path())
        .args(["bench", "--repetitions", "5"])
        .arg(dir.path().join("scan_0.txt"))
        .arg(dir.path().join("scan_1.txt"))
        .output()
        .map_err(|e| e.to_string())?;
    if !bench.status.success() {
        return Err(format!(
            "bench failed: {}",
            String::from_utf8_lossy(&bench.stderr)
        ));
    }
    let stdout = String::from_utf8_lossy(&bench.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != 4 {
        return Err(format!(
            "expected a header plus 3 rows, got {} lines",
            lines.len()
        ));
    }
    for (row, label) in lines[1..].iter().zip(["FPFH", "ICP", "D* Lite"]) {
        if !row.starts_with(label) {
            return Err(format!("row {row:?} does not start with {label:?}"));
        }
        let mut nums = row[label.len()..].split_whitespace().map(str::parse::<f64>);
        match (nums.next(), nums.next(), nums.next()) {
            (Some(Ok(mean)), Some(Ok(std)), None) if mean > 0.0 && std >= 0.0 => {}
            _ => {
                return Err(format!(
                    "row {row:?} is not 'label mean std' with positive mean"
                ))
            }
        }
    }
    let (scans, _) = generate_scene(&chained_scan_spec(77, 2, 100_000, 0.002));
    let clock = Instant::now();
    let (_, path, _) =
        run_pipeline(&PipelineConfig::default(), &scans, None).map_err(|e| e.to_string())?;
    let secs = clock.elapsed().as_secs_f64();
    if secs >= 120.0 {
        return Err(format!(
            "100k-point pipeline took {secs:.1} s (budget 120 s)"
        ));
    }
    if path.vertices.len() < 2 {
        return Err("100k-point pipeline produced a trivial path".into());
    }
    Ok(format!(
        "bench table well-formed over 5 repetitions; 100k-point pipeline finished in {secs:.1} s"
    ))
}

#[test]
fn acceptance() {
    let mut histories = Vec::new();
    let results: Vec<(&str, Result<String, String>)> = vec![
        (
            " 1 registration accuracy on twenty synthetic pairs",
            registration_accuracy(&mut histories),
        ),
        (" 2 closed-form rigid estimation exactness", svd_exactness()),
        (
            " 3 refinement monotonicity and gradient consistency",
            refinement_consistency(&histories),
        ),
        (" 4 embodiment inflation radius", embodiment_radius()),
        (
            " 5 penalty inflation against brute force",
            inflation_matches_brute_force(),
        ),
        (
            " 6 planner optimality against an independent oracle",
            planner_matches_dijkstra(),
        ),
        (
            " 7 incremental repair equals from-scratch planning",
            repair_matches_fresh_plans(),
        ),
        (" 8 ground band and ceiling filtering", height_band_filter()),
        (" 9 embodiment-aware route trade-off", embodiment_tradeoff()),
        (
            "10 bench table and end-to-end throughput",
            pipeline_throughput(),
        ),
    ];
    let mut failures = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                println!("FAIL {name}: {reason}");
                failures += 1;
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance check(s) failed");
}
