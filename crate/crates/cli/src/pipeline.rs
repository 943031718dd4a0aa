//! The register→map→inflate→plan chain, the replanning harness, and the
//! stage-timing benchmark.

use std::time::Instant;

use lasernav_core::cloud::estimate_normals;
use lasernav_core::costmap::{embodiment_radius_cells, inflate, CostField};
use lasernav_core::mapping::{
    filter_heights_with, merge_clouds, project_topdown, project_topdown_into, ransac_plane,
    OccupancyGrid, PlaneModel,
};
use lasernav_core::planner::{CellChange, DstarLite, GridPath, GridVertex, PlannerError};
use lasernav_core::registration::{coarse_align, icp_point_to_plane};
use lasernav_core::{Point3, PointCloud, RigidTransform};
use thiserror::Error;

use crate::config::PipelineConfig;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("{stage}: no path between start and goal")]
    NoPath { stage: String },
}

fn stage_err(stage: &str, error: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage: stage.to_string(),
        message: error.to_string(),
    }
}

impl PipelineError {
    /// Planner failures keep their stage label; an unreachable goal stays
    /// distinguishable for the exit-code mapping.
    pub fn from_planner(stage: &str, error: PlannerError) -> Self {
        match error {
            PlannerError::NoPath => PipelineError::NoPath {
                stage: stage.to_string(),
            },
            other => stage_err(stage, other),
        }
    }
}

fn plan_err(stage: &str, error: PlannerError) -> PipelineError {
    PipelineError::from_planner(stage, error)
}

/// Wall times and result metrics for one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub coarse_seconds: f64,
    pub icp_seconds: f64,
    pub plan_seconds: f64,
    /// Worst per-scan errors against ground truth, when truth is known.
    pub rotation_error_degrees: Option<f64>,
    pub translation_error_meters: Option<f64>,
    pub path_cost: f64,
    pub path_cells: usize,
}

impl std::fmt::Display for RunReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "coarse_seconds={}", self.coarse_seconds)?;
        writeln!(f, "icp_seconds={}", self.icp_seconds)?;
        writeln!(f, "plan_seconds={}", self.plan_seconds)?;
        if let Some(rot) = self.rotation_error_degrees {
            writeln!(f, "rotation_error_degrees={rot}")?;
        }
        if let Some(trans) = self.translation_error_meters {
            writeln!(f, "translation_error_meters={trans}")?;
        }
        writeln!(f, "path_cost={}", self.path_cost)?;
        write!(f, "path_cells={}", self.path_cells)
    }
}

/// One registered pair: the transform mapping the source scan into the
/// target frame plus quality metrics and stage timings.
#[derive(Debug, Clone)]
pub struct RegistrationOutcome {
    pub transform: RigidTransform,
    pub inlier_fraction: f64,
    pub rms_residual: f64,
    pub icp_iterations: usize,
    pub converged: bool,
    pub coarse_seconds: f64,
    pub icp_seconds: f64,
}

/// The scans live in their own sensor frames; normals therefore face the
/// origin of each frame.
fn with_normals(config: &PipelineConfig, cloud: &PointCloud) -> Result<PointCloud, PipelineError> {
    estimate_normals(cloud, config.normal_k, &Point3::origin())
        .map_err(|e| stage_err("registration/normals", e))
}

/// Coarse FPFH consensus plus point-to-plane ICP for one scan pair.
pub fn register_pair(
    config: &PipelineConfig,
    src: &PointCloud,
    dst: &PointCloud,
) -> Result<RegistrationOutcome, PipelineError> {
    let src_n = with_normals(config, src)?;
    let dst_n = with_normals(config, dst)?;
    register_prepared(config, &src_n, &dst_n)
}

/// Same as [`register_pair`], but the inputs already carry normals.
fn register_prepared(
    config: &PipelineConfig,
    src: &PointCloud,
    dst: &PointCloud,
) -> Result<RegistrationOutcome, PipelineError> {
    let clock = Instant::now();
    let (coarse, fraction) = coarse_align(src, dst, &config.coarse_params(), None)
        .map_err(|e| stage_err("registration/coarse", e))?;
    let coarse_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let icp = icp_point_to_plane(src, dst, &coarse, &config.icp_params())
        .map_err(|e| stage_err("registration/icp", e))?;
    let icp_seconds = clock.elapsed().as_secs_f64();

    Ok(RegistrationOutcome {
        transform: icp.transform,
        inlier_fraction: fraction,
        rms_residual: icp.rms_residual,
        icp_iterations: icp.iterations_used,
        converged: icp.converged,
        coarse_seconds,
        icp_seconds,
    })
}

/// Everything the mapping half of the pipeline produces; kept around so the
/// replanning harness can re-project new scans into the same frame.
#[derive(Debug, Clone)]
pub struct MapProducts {
    /// Transforms into the first scan's frame, one per input scan.
    pub transforms: Vec<RigidTransform>,
    pub plane: PlaneModel,
    pub grid: OccupancyGrid,
    pub field: CostField,
    pub coarse_seconds: f64,
    pub icp_seconds: f64,
}

/// Registers successive scans into the first frame, merges them, extracts
/// the ground plane, and inflates the obstacle cost field.
pub fn build_map(
    config: &PipelineConfig,
    scans: &[PointCloud],
) -> Result<MapProducts, PipelineError> {
    if scans.is_empty() {
        return Err(stage_err("input", "at least one scan is required"));
    }
    let mut transforms = vec![RigidTransform::identity()];
    let mut coarse_seconds = 0.0;
    let mut icp_seconds = 0.0;
    if scans.len() > 1 {
        let mut dst_n = with_normals(config, &scans[0])?;
        for scan in &scans[1..] {
            let src_n = with_normals(config, scan)?;
            let outcome = register_prepared(config, &src_n, &dst_n)?;
            coarse_seconds += outcome.coarse_seconds;
            icp_seconds += outcome.icp_seconds;
            let previous = transforms.last().expect("starts with identity");
            transforms.push(previous.compose(&outcome.transform));
            dst_n = src_n;
        }
    }
    let (plane, grid, field) = map_in_frame(config, scans, &transforms)?;
    Ok(MapProducts {
        transforms,
        plane,
        grid,
        field,
        coarse_seconds,
        icp_seconds,
    })
}

/// Merge → ground plane → height filter → top-down projection → inflation,
/// with the grid frame derived from the data.
fn map_in_frame(
    config: &PipelineConfig,
    scans: &[PointCloud],
    transforms: &[RigidTransform],
) -> Result<(PlaneModel, OccupancyGrid, CostField), PipelineError> {
    let merged = merge_clouds(scans, transforms, config.voxel_size)
        .map_err(|e| stage_err("mapping/merge", e))?;
    let (plane, _) = ransac_plane(
        &merged,
        config.ransac_distance_threshold,
        config.ransac_iterations,
        &config.ransac_axis.vector(),
        config.max_tilt_degrees.to_radians(),
        config.ransac_seed,
    )
    .map_err(|e| stage_err("mapping/ransac", e))?;
    let obstacles = filter_heights_with(&merged, &plane, config.band(), config.ceiling);
    // Frame the grid over everything sensed (including the ground) so the
    // traversable floor around the obstacles is part of the map, then bin
    // only the obstacle points into it.
    let frame = project_topdown(&merged, &plane, config.resolution)
        .map_err(|e| stage_err("mapping/project", e))?;
    let grid = project_topdown_into(&obstacles, &plane, &frame);
    let field = inflate_per_config(config, &grid);
    Ok((plane, grid, field))
}

fn inflate_per_config(config: &PipelineConfig, grid: &OccupancyGrid) -> CostField {
    let radius = embodiment_radius_cells(&config.embodiment(), config.resolution);
    let mut field = inflate(grid, radius, &config.gaussian());
    if !config.embodiment_enabled {
        for row in 0..field.height() {
            for col in 0..field.width() {
                if !field.is_lethal(row, col) {
                    field.set_penalty(row, col, 0.0);
                }
            }
        }
    }
    field
}

/// Picks endpoints: configured cells, else the first and last free cell in
/// row-major order (which coincide on a single-free-cell map).
pub fn choose_endpoints(
    config: &PipelineConfig,
    field: &CostField,
) -> Result<(GridVertex, GridVertex), PipelineError> {
    let mut free = (0..field.height())
        .flat_map(|r| (0..field.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| !field.is_lethal(r, c));
    let first = free.next();
    let last = free.next_back().or(first);
    let pick = |cell: Option<(usize, usize)>| {
        cell.map(|(r, c)| GridVertex::new(r, c))
            .ok_or_else(|| stage_err("plan", "no free cells"))
    };
    let start = match config.start {
        Some((r, c)) => GridVertex::new(r, c),
        None => pick(first)?,
    };
    let goal = match config.goal {
        Some((r, c)) => GridVertex::new(r, c),
        None => pick(last)?,
    };
    Ok((start, goal))
}

/// Full pipeline: register, map, inflate, plan. `truth` holds per-scan
/// ground-truth transforms into the first frame (synthetic scenes).
pub fn run_pipeline(
    config: &PipelineConfig,
    scans: &[PointCloud],
    truth: Option<&[RigidTransform]>,
) -> Result<(CostField, GridPath, RunReport), PipelineError> {
    let products = build_map(config, scans)?;
    let (rotation_error_degrees, translation_error_meters) = match truth {
        Some(expected) if expected.len() == products.transforms.len() => {
            let worst = |f: &dyn Fn(&RigidTransform, &RigidTransform) -> f64| {
                products
                    .transforms
                    .iter()
                    .zip(expected)
                    .map(|(got, want)| f(got, want))
                    .fold(0.0, f64::max)
            };
            (
                Some(worst(&|a, b| a.rotation_angle_to(b).to_degrees())),
                Some(worst(&|a, b| a.translation_distance_to(b))),
            )
        }
        _ => (None, None),
    };

    let (start, goal) = choose_endpoints(config, &products.field)?;
    let clock = Instant::now();
    let (path, _) =
        DstarLite::plan(&products.field, &start, &goal).map_err(|e| plan_err("plan", e))?;
    let plan_seconds = clock.elapsed().as_secs_f64();

    let report = RunReport {
        coarse_seconds: products.coarse_seconds,
        icp_seconds: products.icp_seconds,
        plan_seconds,
        rotation_error_degrees,
        translation_error_meters,
        path_cost: path.total_cost,
        path_cells: path.vertices.len(),
    };
    Ok((products.field, path, report))
}

/// Everything `simulate_replanning` ends with: the per-stage plans plus the
/// final field and endpoints, so a from-scratch plan can cross-check the
/// last repair.
#[derive(Debug)]
pub struct SimulationTrace {
    /// Original plan first, then one entry per schedule stage.
    pub stages: Vec<(GridPath, RunReport)>,
    pub field: CostField,
    /// The platform cell after the last trigger (the final plan's start).
    pub start: GridVertex,
    pub goal: GridVertex,
}

/// Walks the planned path and, at each scheduled trigger, registers the new
/// scan into the map frame, rebuilds the grid in place, and repairs the
/// plan from the platform's current cell. Returns the original plan first,
/// then one entry per schedule stage.
pub fn simulate_replanning(
    config: &PipelineConfig,
    scans: &[PointCloud],
    schedule: &[(usize, PointCloud)],
) -> Result<Vec<(GridPath, RunReport)>, PipelineError> {
    simulate_trace(config, scans, schedule).map(|trace| trace.stages)
}

/// [`simulate_replanning`] keeping the final field and endpoints.
pub fn simulate_trace(
    config: &PipelineConfig,
    scans: &[PointCloud],
    schedule: &[(usize, PointCloud)],
) -> Result<SimulationTrace, PipelineError> {
    let mut products = build_map(config, scans)?;
    let (start, goal) = choose_endpoints(config, &products.field)?;
    let clock = Instant::now();
    let (path, mut planner) =
        DstarLite::plan(&products.field, &start, &goal).map_err(|e| plan_err("plan", e))?;
    let plan_seconds = clock.elapsed().as_secs_f64();
    let report = RunReport {
        coarse_seconds: products.coarse_seconds,
        icp_seconds: products.icp_seconds,
        plan_seconds,
        rotation_error_degrees: None,
        translation_error_meters: None,
        path_cost: path.total_cost,
        path_cells: path.vertices.len(),
    };

    let mut all_scans: Vec<PointCloud> = scans.to_vec();
    let mut last_normals = with_normals(config, all_scans.last().expect("checked nonempty"))?;
    let mut current_path = path.clone();
    let mut current_start = start;
    let mut outputs = vec![(path, report)];

    for (index, (trigger, scan)) in schedule.iter().enumerate() {
        let stage = format!("replan[{index}]");
        let at = (*trigger).min(current_path.vertices.len() - 1);
        let here = current_path.vertices[at];

        let src_n = with_normals(config, scan)?;
        let outcome = register_prepared(config, &src_n, &last_normals)?;
        let previous = products.transforms.last().expect("nonempty");
        products
            .transforms
            .push(previous.compose(&outcome.transform));
        all_scans.push(scan.clone());
        last_normals = src_n;

        let merged = merge_clouds(&all_scans, &products.transforms, config.voxel_size)
            .map_err(|e| stage_err("mapping/merge", e))?;
        let obstacles =
            filter_heights_with(&merged, &products.plane, config.band(), config.ceiling);
        let regrid = project_topdown_into(&obstacles, &products.plane, &products.grid);
        let refield = inflate_per_config(config, &regrid);

        let changes = diff_fields(&products.field, &refield);
        let clock = Instant::now();
        planner
            .move_start(&products.field, &here)
            .map_err(|e| plan_err(&stage, e))?;
        let repaired = planner
            .update_cells(&mut products.field, &changes)
            .map_err(|e| plan_err(&stage, e))?;
        let plan_seconds = clock.elapsed().as_secs_f64();

        products.grid = regrid;
        let report = RunReport {
            coarse_seconds: outcome.coarse_seconds,
            icp_seconds: outcome.icp_seconds,
            plan_seconds,
            rotation_error_degrees: None,
            translation_error_meters: None,
            path_cost: repaired.total_cost,
            path_cells: repaired.vertices.len(),
        };
        current_path = repaired.clone();
        current_start = here;
        outputs.push((repaired, report));
    }
    Ok(SimulationTrace {
        stages: outputs,
        field: products.field,
        start: current_start,
        goal,
    })
}

/// Cells whose lethality or penalty differ between the two fields.
pub fn diff_fields(old: &CostField, new: &CostField) -> Vec<CellChange> {
    assert_eq!(old.width(), new.width());
    assert_eq!(old.height(), new.height());
    let mut changes = Vec::new();
    for row in 0..old.height() {
        for col in 0..old.width() {
            let lethal = new.is_lethal(row, col);
            let penalty = new.penalty(row, col);
            if old.is_lethal(row, col) != lethal || old.penalty(row, col) != penalty {
                changes.push(CellChange {
                    vertex: GridVertex::new(row, col),
                    lethal,
                    penalty,
                });
            }
        }
    }
    changes
}

/// Mean and sample standard deviation of one pipeline stage's wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub stage: &'static str,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Times `run_pipeline` `repetitions` times and aggregates the three stage
/// timings (coarse feature consensus, ICP, planning).
pub fn benchmark(
    config: &PipelineConfig,
    scans: &[PointCloud],
    repetitions: usize,
) -> Result<Vec<BenchRow>, PipelineError> {
    if repetitions == 0 {
        return Err(stage_err("bench", "repetitions must be at least 1"));
    }
    let mut samples = [Vec::new(), Vec::new(), Vec::new()];
    for _ in 0..repetitions {
        let (_, _, report) = run_pipeline(config, scans, None)?;
        samples[0].push(report.coarse_seconds);
        samples[1].push(report.icp_seconds);
        samples[2].push(report.plan_seconds);
    }
    let stats = |values: &[f64]| {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        (mean, std)
    };
    Ok(["FPFH", "ICP", "D* Lite"]
        .into_iter()
        .zip(&samples)
        .map(|(stage, values)| {
            let (mean_seconds, std_seconds) = stats(values);
            BenchRow {
                stage,
                mean_seconds,
                std_seconds,
            }
        })
        .collect())
}
