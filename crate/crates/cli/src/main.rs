use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lasernav_core::planner::DstarLite;
use lasernav_core::synth::{chained_scan_spec, generate_scene};
use lasernav_core::PointCloud;

use lasernav::config::PipelineConfig;
use lasernav::io::{self, IoError};
use lasernav::pipeline::{self, PipelineError};

#[derive(Parser)]
#[command(
    name = "lasernav",
    version,
    about = "Register laser scans, build centimeter costmaps, and plan repairable paths"
)]
struct Cli {
    /// key=value config file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seeded stage (consensus, RANSAC, scene generation).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for all artifacts; created when missing.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Start cell, overriding the config.
    #[arg(long, global = true, value_name = "R,C")]
    start: Option<String>,
    /// Goal cell, overriding the config.
    #[arg(long, global = true, value_name = "R,C")]
    goal: Option<String>,
    /// Keep the lethal dilation but zero all Gaussian penalties.
    #[arg(long, global = true)]
    no_embodiment: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register a source scan onto a target scan.
    Register { src: PathBuf, dst: PathBuf },
    /// Build and export the inflated costmap from one or more scans.
    Map {
        #[arg(required = true)]
        scans: Vec<PathBuf>,
    },
    /// Plan on a previously exported costfield text file.
    Plan { field: PathBuf },
    /// Full register → map → inflate → plan run with a report.
    Pipeline {
        #[arg(required = true)]
        scans: Vec<PathBuf>,
    },
    /// Generate a synthetic scene with ground-truth transforms.
    Synth {
        /// Number of scans along the pose chain.
        #[arg(long, default_value_t = 2)]
        scans: usize,
        /// Points per scan.
        #[arg(long, default_value_t = 30000)]
        points: usize,
        /// Gaussian noise sigma in meters.
        #[arg(long, default_value_t = 0.002)]
        noise: f64,
    },
    /// Replay mid-route scans and repair the plan at each trigger.
    Simulate {
        #[arg(required = true)]
        scans: Vec<PathBuf>,
        /// Trigger as INDEX:SCAN_FILE, repeatable, applied in order.
        #[arg(long, value_name = "IDX:FILE")]
        schedule: Vec<String>,
    },
    /// Time the pipeline stages over repeated identical runs.
    Bench {
        #[arg(required = true)]
        scans: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
}

/// CLI failures sorted by exit code: usage/parse problems exit 2, stage
/// failures 3, an unreachable goal 4.
enum CliError {
    Usage(String),
    Stage(String),
    NoPath(String),
}

impl From<PipelineError> for CliError {
    fn from(error: PipelineError) -> Self {
        match error {
            PipelineError::NoPath { .. } => CliError::NoPath(error.to_string()),
            PipelineError::Stage { .. } => CliError::Stage(error.to_string()),
        }
    }
}

fn usage(error: impl std::fmt::Display) -> CliError {
    CliError::Usage(error.to_string())
}

fn export(error: IoError) -> CliError {
    CliError::Stage(format!("export: {error}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Stage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
        Err(CliError::NoPath(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(4)
        }
    }
}

fn parse_cell(text: &str, flag: &str) -> Result<(usize, usize), CliError> {
    let bad = || usage(format!("--{flag} expects ROW,COL, got {text:?}"));
    let (r, c) = text.split_once(',').ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_file(path).map_err(usage)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.consensus_seed = seed;
        config.ransac_seed = seed;
    }
    if let Some(text) = &cli.start {
        config.start = Some(parse_cell(text, "start")?);
    }
    if let Some(text) = &cli.goal {
        config.goal = Some(parse_cell(text, "goal")?);
    }
    config.embodiment_enabled = !cli.no_embodiment;
    Ok(config)
}

fn load_scans(paths: &[PathBuf]) -> Result<Vec<PointCloud>, CliError> {
    paths
        .iter()
        .map(|p| io::load_cloud(p).map_err(|e| usage(format!("{}: {e}", p.display()))))
        .collect()
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Stage(format!("creating {}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = effective_config(&cli)?;
    ensure_out_dir(&cli.out_dir)?;
    let out = |name: &str| cli.out_dir.join(name);

    match &cli.command {
        Command::Register { src, dst } => {
            let scans = load_scans(&[src.clone(), dst.clone()])?;
            let outcome = pipeline::register_pair(&config, &scans[0], &scans[1])?;
            io::save_transform_txt(&outcome.transform, &out("transform.txt")).map_err(export)?;
            println!("inlier_fraction={}", outcome.inlier_fraction);
            println!("rms_residual={}", outcome.rms_residual);
            println!("icp_iterations={}", outcome.icp_iterations);
            println!("converged={}", outcome.converged);
            println!("wrote {}", out("transform.txt").display());
        }
        Command::Map { scans } => {
            let clouds = load_scans(scans)?;
            let products = pipeline::build_map(&config, &clouds)?;
            io::save_costfield_txt(&products.field, &out("costfield.txt")).map_err(export)?;
            io::save_costfield_pgm(&products.field, &out("costfield.pgm")).map_err(export)?;
            println!(
                "grid {}x{} cells, {} lethal",
                products.field.width(),
                products.field.height(),
                products.field.lethal_count()
            );
            println!("wrote {}", out("costfield.txt").display());
            println!("wrote {}", out("costfield.pgm").display());
        }
        Command::Plan { field } => {
            let mut costfield = io::load_costfield_txt(field)
                .map_err(|e| usage(format!("{}: {e}", field.display())))?;
            if !config.embodiment_enabled {
                for row in 0..costfield.height() {
                    for col in 0..costfield.width() {
                        if !costfield.is_lethal(row, col) {
                            costfield.set_penalty(row, col, 0.0);
                        }
                    }
                }
            }
            let (start, goal) = pipeline::choose_endpoints(&config, &costfield)?;
            let (path, _) = DstarLite::plan(&costfield, &start, &goal)
                .map_err(|e| PipelineError::from_planner("plan", e))?;
            io::save_path_csv(&path, &out("path.csv")).map_err(export)?;
            io::save_overlay_ppm(&costfield, &path, &out("overlay.ppm")).map_err(export)?;
            println!("path_cost={}", path.total_cost);
            println!("path_cells={}", path.vertices.len());
            println!("wrote {}", out("path.csv").display());
            println!("wrote {}", out("overlay.ppm").display());
        }
        Command::Pipeline { scans } => {
            let clouds = load_scans(scans)?;
            let (field, path, report) = pipeline::run_pipeline(&config, &clouds, None)?;
            io::save_costfield_txt(&field, &out("costfield.txt")).map_err(export)?;
            io::save_costfield_pgm(&field, &out("costfield.pgm")).map_err(export)?;
            io::save_path_csv(&path, &out("path.csv")).map_err(export)?;
            io::save_overlay_ppm(&field, &path, &out("overlay.ppm")).map_err(export)?;
            io::write_text(&out("report.txt"), &format!("{report}\n")).map_err(export)?;
            println!("{report}");
        }
        Command::Synth {
            scans,
            points,
            noise,
        } => {
            if *scans < 2 {
                return Err(usage("--scans must be at least 2"));
            }
            if *points == 0 {
                return Err(usage("--points must be positive"));
            }
            if *noise < 0.0 {
                return Err(usage("--noise must be nonnegative"));
            }
            let spec = chained_scan_spec(cli.seed.unwrap_or(0), *scans, *points, *noise);
            let (clouds, truths) = generate_scene(&spec);
            for (i, (cloud, truth)) in clouds.iter().zip(&truths).enumerate() {
                io::save_cloud_txt(cloud, &out(&format!("scan_{i}.txt"))).map_err(export)?;
                io::save_transform_txt(truth, &out(&format!("truth_{i}.txt"))).map_err(export)?;
            }
            println!(
                "wrote {} scans with ground truth to {}",
                clouds.len(),
                cli.out_dir.display()
            );
        }
        Command::Simulate { scans, schedule } => {
            let clouds = load_scans(scans)?;
            let mut stages = Vec::new();
            for entry in schedule {
                let bad = || usage(format!("--schedule expects IDX:FILE, got {entry:?}"));
                let (index, file) = entry.split_once(':').ok_or_else(bad)?;
                let trigger: usize = index.trim().parse().map_err(|_| bad())?;
                let cloud = io::load_cloud(Path::new(file.trim()))
                    .map_err(|e| usage(format!("{file}: {e}")))?;
                stages.push((trigger, cloud));
            }
            let outputs = pipeline::simulate_replanning(&config, &clouds, &stages)?;
            for (k, (path, report)) in outputs.iter().enumerate() {
                io::save_path_csv(path, &out(&format!("path_{k}.csv"))).map_err(export)?;
                io::write_text(&out(&format!("report_{k}.txt")), &format!("{report}\n"))
                    .map_err(export)?;
                println!(
                    "stage {k}: cost={} cells={}",
                    path.total_cost,
                    path.vertices.len()
                );
            }
        }
        Command::Bench { scans, repetitions } => {
            let clouds = load_scans(scans)?;
            let rows = pipeline::benchmark(&config, &clouds, *repetitions)?;
            let mut table = format!("{:<10} {:>12} {:>12}\n", "stage", "mean_s", "std_s");
            for row in &rows {
                table.push_str(&format!(
                    "{:<10} {:>12.6} {:>12.6}\n",
                    row.stage, row.mean_seconds, row.std_seconds
                ));
            }
            io::write_text(&out("bench.txt"), &table).map_err(export)?;
            print!("{table}");
        }
    }
    Ok(())
}
