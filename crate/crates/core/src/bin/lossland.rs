//! Command-line workflow: train → directions → landscape/trajectory → render
//! → bench. Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use lossland::bench::bench_projection_methods;
use lossland::dataset::load_node_classification_dataset;
use lossland::landscape::{
    evaluate_landscape_grid, project_trajectory, LandscapeGrid, MaskKind, Trajectory2D,
    TrajectoryPoint,
};
use lossland::model::ModelConfig;
use lossland::optim::AdamConfig;
use lossland::projection::{
    build_difference_matrix, fit_learnable_projection, pca_directions,
    random_directions_filter_normalized, FitOptions, PcaMode, ProjectionMethod,
};
use lossland::snapshot::{read_directions, read_snapshots, write_directions, write_snapshots};
use lossland::svg::{render_contour_svg, Levels};
use lossland::train::{train, TrainOptions};
use lossland::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lossland",
    about = "Loss-landscape visualization for small graph neural networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and record per-epoch parameter snapshots.
    Train(TrainArgs),
    /// Compute a 2D direction basis from a snapshot file.
    Directions(DirectionsArgs),
    /// Evaluate the loss surface on a 2D grid around Θ*.
    Landscape(LandscapeArgs),
    /// Project the optimizer trajectory onto a direction basis.
    Trajectory(TrajectoryArgs),
    /// Render a grid (and optional trajectory) as an SVG contour plot.
    Render(RenderArgs),
    /// Benchmark projection methods on a snapshot file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Model config JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Output directory; the snapshot file is written as <out>/snap.
    #[arg(long)]
    out: PathBuf,
    /// Override the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.002)]
    weight_decay: f64,
}

#[derive(Args)]
struct DirectionsArgs {
    /// Snapshot file produced by `train`.
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long, value_parser = ProjectionMethod::from_str)]
    method: ProjectionMethod,
    /// Batch size for the learnable fit.
    #[arg(long)]
    batch: Option<usize>,
    /// Seed for random directions and the learnable initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; defaults to <snapshots>.dirs-<method>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LandscapeArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    directions: PathBuf,
    /// Model config JSON (must match the training run).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output grid JSON.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 51)]
    resolution: usize,
    /// Half-width r of the symmetric plane window [-r, r]².
    #[arg(long, default_value_t = 1.0)]
    range: f64,
    #[arg(long, default_value = "train", value_parser = MaskKind::from_str)]
    mask: MaskKind,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long)]
    snapshots: PathBuf,
    #[arg(long)]
    directions: PathBuf,
    /// Output trajectory CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Grid JSON produced by `landscape`.
    #[arg(long)]
    grid: PathBuf,
    /// Optional trajectory CSV produced by `trajectory`.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Number of contour levels.
    #[arg(long, default_value_t = 10)]
    levels: usize,
    /// Space levels logarithmically between grid min and max.
    #[arg(long)]
    log_levels: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    snapshots: PathBuf,
    /// Comma-separated subset of pca-gram, pca-naive, learnable.
    #[arg(long, value_delimiter = ',', value_parser = ProjectionMethod::from_str)]
    methods: Vec<ProjectionMethod>,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Output CSV path; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut config: ModelConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let g = load_node_classification_dataset(&args.data)?;
    let opts = TrainOptions {
        epochs_max: args.epochs,
        patience: args.patience,
        adam: AdamConfig {
            lr: args.lr,
            weight_decay: args.weight_decay,
            ..AdamConfig::default()
        },
    };
    let record = train(&config, &g, &opts)?;
    fs::create_dir_all(&args.out)?;
    let snap = args.out.join("snap");
    write_snapshots(&record, &snap)?;
    println!(
        "trained {} epochs; best epoch {} (val loss {:.6}); snapshots -> {}",
        record.num_snapshots() - 1,
        record.best_epoch,
        record.val_loss[record.best_epoch],
        snap.display()
    );
    Ok(())
}

fn cmd_directions(args: &DirectionsArgs) -> Result<()> {
    let record = read_snapshots(&args.snapshots)?;
    let dirs = match args.method {
        ProjectionMethod::Random => {
            let star = record.theta_star();
            random_directions_filter_normalized(&record.layout, &star, args.seed)?
        }
        ProjectionMethod::PcaGram => {
            pca_directions(&build_difference_matrix(&record)?, PcaMode::Gram)?
        }
        ProjectionMethod::PcaNaive => {
            pca_directions(&build_difference_matrix(&record)?, PcaMode::Naive)?
        }
        ProjectionMethod::Learnable => {
            let diff = build_difference_matrix(&record)?;
            let mut opts = FitOptions::defaults_for(diff.rows());
            if let Some(b) = args.batch {
                opts.batch_size = b;
            }
            opts.seed = args.seed;
            fit_learnable_projection(&diff, &opts)?
        }
    };
    let out = args.out.clone().unwrap_or_else(|| {
        let mut os = args.snapshots.as_os_str().to_owned();
        os.push(format!(".dirs-{}", args.method));
        PathBuf::from(os)
    });
    write_directions(&dirs, &out)?;
    println!(
        "directions ({}) defect {:.3e} -> {}",
        dirs.method,
        dirs.orthonormality_defect,
        out.display()
    );
    Ok(())
}

fn cmd_landscape(args: &LandscapeArgs) -> Result<()> {
    if !(args.range.is_finite() && args.range > 0.0) {
        return Err(Error::InvalidArgument("range must be finite and > 0".into()));
    }
    let config: ModelConfig = serde_json::from_str(&fs::read_to_string(&args.config)?)?;
    let g = load_node_classification_dataset(&args.data)?;
    let record = read_snapshots(&args.snapshots)?;
    let dirs = read_directions(&args.directions)?;
    let dataset_id = args
        .data
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| args.data.display().to_string());
    let grid = evaluate_landscape_grid(
        &config,
        &g,
        &record.theta_star(),
        &dirs,
        (-args.range, args.range),
        (-args.range, args.range),
        args.resolution,
        args.mask,
        &dataset_id,
    )?;
    fs::write(&args.out, serde_json::to_string(&grid)?)?;
    println!(
        "grid {0}x{0} over [-{1}, {1}]^2 -> {2}",
        args.resolution,
        args.range,
        args.out.display()
    );
    Ok(())
}

fn trajectory_to_csv(traj: &Trajectory2D) -> String {
    let mut out = format!("# method={}\nepoch,x,y,residual_l1,train_loss\n", traj.method);
    for p in &traj.points {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            p.epoch, p.x, p.y, p.residual_l1, p.train_loss
        ));
    }
    out
}

fn trajectory_from_csv(text: &str) -> Result<Trajectory2D> {
    let mut method = ProjectionMethod::Random;
    let mut points = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# method=") {
            method = rest.trim().parse()?;
            continue;
        }
        if line.starts_with("epoch,") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "bad trajectory CSV row: {line}"
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number in CSV: {s}")))
        };
        points.push(TrajectoryPoint {
            epoch: fields[0]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad epoch in CSV: {}", fields[0])))?,
            x: parse(fields[1])?,
            y: parse(fields[2])?,
            residual_l1: parse(fields[3])?,
            train_loss: parse(fields[4])?,
        });
    }
    Ok(Trajectory2D { points, method })
}

fn cmd_trajectory(args: &TrajectoryArgs) -> Result<()> {
    let record = read_snapshots(&args.snapshots)?;
    let dirs = read_directions(&args.directions)?;
    let traj = project_trajectory(&record, &dirs)?;
    fs::write(&args.out, trajectory_to_csv(&traj))?;
    println!(
        "trajectory: {} points ({}) -> {}",
        traj.points.len(),
        traj.method,
        args.out.display()
    );
    Ok(())
}

fn cmd_render(args: &RenderArgs) -> Result<()> {
    let grid: LandscapeGrid = serde_json::from_str(&fs::read_to_string(&args.grid)?)?;
    let traj = match &args.trajectory {
        Some(path) => Some(trajectory_from_csv(&fs::read_to_string(path)?)?),
        None => None,
    };
    let levels = if args.log_levels {
        Levels::LogCount(args.levels)
    } else {
        Levels::Count(args.levels)
    };
    render_contour_svg(&grid, traj.as_ref(), &levels, &args.out)?;
    println!("svg -> {}", args.out.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.methods.is_empty() {
        return Err(Error::InvalidArgument(
            "bench requires at least one --methods entry".into(),
        ));
    }
    let record = read_snapshots(&args.snapshots)?;
    let diff = build_difference_matrix(&record)?;
    let report = bench_projection_methods(&diff, &args.methods, args.batch, args.repeats)?;
    let csv = report.to_csv();
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 for usage errors; the contract here is 1
            // (2 is reserved for data errors). Help/version remain success.
            use clap::error::ErrorKind;
            let is_help =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            e.print().ok();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let result = match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Directions(args) => cmd_directions(args),
        Command::Landscape(args) => cmd_landscape(args),
        Command::Trajectory(args) => cmd_trajectory(args),
        Command::Render(args) => cmd_render(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidArgument(_)) => {
            eprintln!("usage error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
