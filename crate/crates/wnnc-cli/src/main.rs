//! Command-line front end: `orient` estimates normals, `eval` scores them
//! against ground truth, `bench` times the pipeline across input sizes.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error (unreadable or
//! malformed input), 4 numerical failure (e.g. a degenerate cloud).

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use wnnc::geometry::{denormalize_normals, normalize_cloud, Vec3};
use wnnc::io::{read_cloud, write_cloud, CloudFormat};
use wnnc::metrics::angular_error;
use wnnc::operators::BackendMode;
use wnnc::shapes::{sample_shape, SamplingMode, ShapeKind, SyntheticShape};
use wnnc::solver::{solve, SolveResult, SolverParams};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<wnnc::Error> for CliError {
    fn from(err: wnnc::Error) -> Self {
        use wnnc::Error;
        let code = match &err {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::EmptyCloud
            | Error::InvalidCoordinate
            | Error::LengthMismatch { .. } => EXIT_DATA,
            Error::DegenerateCloud | Error::SingularEvaluation => EXIT_NUMERICAL,
            Error::InvalidParameter(_) | Error::IterationOutOfRange { .. } => EXIT_USAGE,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "wnnc",
    version,
    about = "Globally consistent normal orientation for raw point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate consistently oriented normals and write the oriented cloud
    Orient(OrientArgs),
    /// Compare estimated normals against a ground-truth cloud
    Eval(EvalArgs),
    /// Time preprocessing and the main stage across input sizes
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Number of solver iterations
    #[arg(long = "iters", default_value_t = 40)]
    iters: usize,
    /// Final (smallest) smoothing width, in the normalized frame
    #[arg(long = "w-min", default_value_t = 0.002)]
    w_min: f64,
    /// Initial (largest) smoothing width, in the normalized frame
    #[arg(long = "w-max", default_value_t = 0.016)]
    w_max: f64,
    /// Octree depth cap for the treecode backend
    #[arg(long, default_value_t = 15)]
    depth: u32,
    /// Treecode opening constant
    #[arg(long = "opening-c", default_value_t = 2.0)]
    opening_c: f64,
    /// Summation backend
    #[arg(long, value_parser = parse_backend, default_value = "treecode")]
    backend: BackendMode,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl SolverFlags {
    fn validate(&self) -> Result<(), CliError> {
        if !(self.w_min > 0.0) || !(self.w_max > 0.0) {
            return Err(CliError::usage("smoothing widths must be positive"));
        }
        if self.w_min > self.w_max {
            return Err(CliError::usage(format!(
                "--w-min ({}) must not exceed --w-max ({})",
                self.w_min, self.w_max
            )));
        }
        Ok(())
    }

    fn to_params(&self) -> SolverParams {
        SolverParams {
            w_min: self.w_min,
            w_max: self.w_max,
            iterations: self.iters,
            tree_depth: self.depth,
            opening_c: self.opening_c,
            backend: self.backend,
            threads: self.threads,
            wnnc_updates: true,
        }
    }
}

fn parse_sampling(s: &str) -> Result<SamplingMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "even" => Ok(SamplingMode::Even),
        "random" => Ok(SamplingMode::Random),
        other => Err(format!("unknown sampling mode '{other}' (use even or random)")),
    }
}

fn parse_backend(s: &str) -> Result<BackendMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "dense" => Ok(BackendMode::Dense),
        "treecode" => Ok(BackendMode::Treecode),
        other => Err(format!("unknown backend '{other}' (use treecode or dense)")),
    }
}

#[derive(Args)]
struct OrientArgs {
    /// Input point cloud (.xyz or .ply)
    #[arg(long, conflicts_with = "shape", required_unless_present = "shape")]
    input: Option<PathBuf>,
    /// Synthetic shape instead of a file, as name:count
    /// (sphere, torus, box, twospheres)
    #[arg(long)]
    shape: Option<String>,
    /// Output path for the oriented cloud (.xyz or .ply)
    #[arg(long)]
    output: PathBuf,
    /// Also write the ground-truth cloud of a synthetic shape here
    #[arg(long = "write-gt", requires = "shape")]
    write_gt: Option<PathBuf>,
    /// Gaussian noise sigma for synthetic shapes, as a fraction of the
    /// bounding-box diagonal
    #[arg(long, requires = "shape")]
    noise: Option<f64>,
    /// Seed for synthetic shape sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Surface sampling mode for synthetic shapes
    #[arg(long, value_parser = parse_sampling, default_value = "even")]
    sampling: SamplingMode,
    /// Emit the run report as a flat JSON object
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct EvalArgs {
    /// Cloud with estimated normals
    #[arg(long)]
    recon: PathBuf,
    /// Cloud with ground-truth normals, index-aligned with --recon
    #[arg(long)]
    gt: PathBuf,
    /// Emit the report as a flat JSON object
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Shape name (sphere, torus, box, twospheres)
    #[arg(long, default_value = "sphere")]
    shape: String,
    /// Comma-separated sample counts
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Gaussian noise sigma as a fraction of the bounding-box diagonal
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Seed for shape sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Surface sampling mode
    #[arg(long, value_parser = parse_sampling, default_value = "even")]
    sampling: SamplingMode,
    /// Emit one flat JSON object per size instead of a table
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Orient(args) => cmd_orient(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn parse_shape_spec(spec: &str) -> Result<(ShapeKind, usize), CliError> {
    let (name, count) = spec
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("--shape expects name:count, got '{spec}'")))?;
    let kind = ShapeKind::by_name(name)
        .ok_or_else(|| CliError::usage(format!("unknown shape '{name}'")))?;
    let count: usize = count
        .parse()
        .map_err(|_| CliError::usage(format!("invalid sample count '{count}'")))?;
    if count == 0 {
        return Err(CliError::usage("sample count must be >= 1"));
    }
    Ok((kind, count))
}

fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

struct OrientInput {
    positions: Vec<Vec3>,
    gt_normals: Option<Vec<Vec3>>,
}

fn load_orient_input(args: &OrientArgs) -> Result<OrientInput, CliError> {
    if let Some(spec) = &args.shape {
        let (kind, count) = parse_shape_spec(spec)?;
        let sample = sample_shape(&SyntheticShape {
            kind,
            samples: count,
            noise_sigma: args.noise.unwrap_or(0.0),
            seed: args.seed,
    sampling: SamplingMode::Random,
})?;
        Ok(OrientInput {
            positions: sample.positions,
            gt_normals: Some(sample.gt_normals),
        })
    } else {
        let path = args.input.as_ref().expect("clap enforces input xor shape");
        let data = read_cloud(path)?;
        // pre-existing normals in the file are ignored: orientation is
        // estimated from positions alone
        Ok(OrientInput {
            positions: data.positions,
            gt_normals: None,
        })
    }
}

/// Runs normalize + solve and reports the timing split the way the
/// benchmarks expect: `t_pre` covers normalization and octree build,
/// `t_main` the iterations. File I/O stays outside.
fn run_pipeline(
    positions: &[Vec3],
    params: &SolverParams,
) -> Result<(wnnc::PointCloud, SolveResult, f64, f64), CliError> {
    let t0 = Instant::now();
    let cloud = normalize_cloud(positions)?;
    let normalize_seconds = t0.elapsed().as_secs_f64();
    let result = solve(&cloud, params)?;
    let t_pre = normalize_seconds + result.diagnostics.preprocess_seconds;
    let t_main = result.diagnostics.main_seconds;
    Ok((cloud, result, t_pre, t_main))
}

fn backend_name(mode: BackendMode) -> &'static str {
    match mode {
        BackendMode::Dense => "dense",
        BackendMode::Treecode => "treecode",
    }
}

fn cmd_orient(args: OrientArgs) -> Result<(), CliError> {
    args.solver.validate()?;
    let input = load_orient_input(&args)?;
    let params = args.solver.to_params();
    let (cloud, result, t_pre, t_main) = run_pipeline(&input.positions, &params)?;
    let (unit_normals, _flagged) = denormalize_normals(&result.mu, &cloud)?;

    write_cloud(
        &args.output,
        &input.positions,
        Some(unit_normals.as_slice()),
        CloudFormat::from_path(&args.output),
    )?;
    if let Some(gt_path) = &args.write_gt {
        let gt = input
            .gt_normals
            .as_ref()
            .expect("clap ties --write-gt to --shape");
        write_cloud(
            gt_path,
            &input.positions,
            Some(gt),
            CloudFormat::from_path(gt_path),
        )?;
    }

    let last = result
        .diagnostics
        .iterations
        .last()
        .expect("at least one iteration ran");
    let peak = peak_memory_bytes();
    if args.json {
        let mut report = serde_json::Map::new();
        report.insert("input_points".into(), cloud.len().into());
        report.insert("backend".into(), backend_name(params.backend).into());
        report.insert("iterations".into(), params.iterations.into());
        report.insert("t_pre".into(), t_pre.into());
        report.insert("t_main".into(), t_main.into());
        if let Some(peak) = peak {
            report.insert("peak_memory".into(), peak.into());
        }
        report.insert("final_width".into(), last.width.into());
        report.insert("final_energy".into(), last.energy_after.into());
        report.insert("final_alpha".into(), last.alpha.into());
        report.insert(
            "mean_update_ratio".into(),
            last.mean_update_ratio.into(),
        );
        report.insert(
            "zero_normals".into(),
            result.diagnostics.zero_normal_indices.len().into(),
        );
        report.insert("output".into(), args.output.display().to_string().into());
        println!("{}", serde_json::Value::Object(report));
    } else {
        println!("input_points: {}", cloud.len());
        println!("backend: {}", backend_name(params.backend));
        println!("iterations: {}", params.iterations);
        println!("t_pre: {t_pre:.6}");
        println!("t_main: {t_main:.6}");
        if let Some(peak) = peak {
            println!("peak_memory: {peak}");
        }
        println!("final_width: {}", last.width);
        println!("final_energy: {:.6e}", last.energy_after);
        println!("final_alpha: {:.6e}", last.alpha);
        println!("mean_update_ratio: {:.3e}", last.mean_update_ratio);
        println!(
            "zero_normals: {}",
            result.diagnostics.zero_normal_indices.len()
        );
        println!("output: {}", args.output.display());
    }
    Ok(())
}

fn unitized(normals: &[Vec3]) -> Vec<Vec3> {
    normals
        .iter()
        .map(|n| n.normalized().unwrap_or(Vec3::ZERO))
        .collect()
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let recon = read_cloud(&args.recon)?;
    let gt = read_cloud(&args.gt)?;
    let recon_normals = recon
        .normals
        .ok_or_else(|| CliError::data(format!("{}: no normals", args.recon.display())))?;
    let gt_normals = gt
        .normals
        .ok_or_else(|| CliError::data(format!("{}: no normals", args.gt.display())))?;
    let report = angular_error(&unitized(&recon_normals), &unitized(&gt_normals))?;
    if args.json {
        let mut out = serde_json::Map::new();
        out.insert("points".into(), report.point_count().into());
        out.insert("ae_pcd".into(), report.ae_pcd.into());
        out.insert("p_co".into(), report.p_co.into());
        out.insert("flipped_count".into(), report.flipped_count.into());
        println!("{}", serde_json::Value::Object(out));
    } else {
        println!("{report}");
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    args.solver.validate()?;
    let kind = ShapeKind::by_name(&args.shape)
        .ok_or_else(|| CliError::usage(format!("unknown shape '{}'", args.shape)))?;
    if args.sizes.is_empty() {
        return Err(CliError::usage("--sizes needs at least one entry"));
    }
    let params = args.solver.to_params();
    if !args.json {
        println!(
            "{:>10} {:>12} {:>12}   backend={} iters={}",
            "N",
            "t_pre",
            "t_main",
            backend_name(params.backend),
            params.iterations
        );
    }
    for &size in &args.sizes {
        if size == 0 {
            return Err(CliError::usage("sizes must be >= 1"));
        }
        let sample = sample_shape(&SyntheticShape {
            kind,
            samples: size,
            noise_sigma: args.noise,
            seed: args.seed,
    sampling: SamplingMode::Random,
})?;
        let (_, _, t_pre, t_main) = run_pipeline(&sample.positions, &params)?;
        if args.json {
            let mut row = serde_json::Map::new();
            row.insert("n".into(), size.into());
            row.insert("t_pre".into(), t_pre.into());
            row.insert("t_main".into(), t_main.into());
            println!("{}", serde_json::Value::Object(row));
        } else {
            println!("{size:>10} {t_pre:>12.6} {t_main:>12.6}");
        }
    }
    Ok(())
}
