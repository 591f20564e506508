use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cecme::crb::constrained_crb;
use cecme::synth::{generate_scene, make_correspondences, CameraIntrinsics, SimConfig};
use cecme::{EstimatorConfig, SolverRegistry};
use cecme_bench::ingest::{format_from_path, ingest_correspondences, write_correspondences};
use cecme_bench::report::write_report;
use cecme_bench::{run_monte_carlo_with_threads, BenchError, OutputFormat, Result, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Two-view relative pose estimation and Monte Carlo benchmarks.
///
/// Exit codes: 0 success, 2 config error, 3 data error, 4 estimation failure.
#[derive(Debug, Parser)]
#[command(name = "cecme", version)]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic correspondence file from a scene config.
    Simulate(SimulateArgs),
    /// Estimate the relative pose from a correspondence file; prints JSON.
    Estimate(EstimateArgs),
    /// Print the Cramér-Rao bound of a synthetic scene as JSON.
    Crb(CrbArgs),
    /// Run a Monte Carlo experiment and write its report.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct PixelArgs {
    /// Coordinates are pixels; convert with the intrinsics below.
    #[arg(long)]
    pixels: bool,
    #[arg(long, requires = "pixels")]
    fx: Option<f64>,
    #[arg(long, requires = "pixels")]
    fy: Option<f64>,
    #[arg(long, requires = "pixels")]
    u0: Option<f64>,
    #[arg(long, requires = "pixels")]
    v0: Option<f64>,
}

impl PixelArgs {
    fn intrinsics(&self, base: CameraIntrinsics) -> Result<Option<CameraIntrinsics>> {
        if !self.pixels {
            return Ok(None);
        }
        let intr = CameraIntrinsics {
            fx: self.fx.unwrap_or(base.fx),
            fy: self.fy.unwrap_or(base.fy),
            u0: self.u0.unwrap_or(base.u0),
            v0: self.v0.unwrap_or(base.v0),
            ..base
        };
        intr.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(Some(intr))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scene config (TOML, keys of the `[sim]` table of a run config).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the ground truth as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    pixel: PixelArgs,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Correspondence file.
    input: PathBuf,
    /// Estimator config (TOML, keys of the `[estimator]` table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input format; guessed from the extension when absent.
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    gn_iters: Option<usize>,
    /// Turn on the RANSAC prefilter and the truncated kernel.
    #[arg(long)]
    robust: bool,
    #[arg(long, default_value = "cecme")]
    solver: String,
    #[command(flatten)]
    pixel: PixelArgs,
}

#[derive(Debug, Args)]
struct CrbArgs {
    /// Scene config (TOML, keys of the `[sim]` table).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Run config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Overrides `output_path`; the report goes to stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    gn_iters: Option<usize>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn read_toml<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

fn sim_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimConfig> {
    let mut sim: SimConfig = read_toml(path)?;
    if let Some(seed) = seed {
        sim.seed = seed;
    }
    sim.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(sim)
}

/// Writes to `path`, or to stdout when absent.
fn write_output(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            write(&mut buf)?;
            std::fs::write(p, buf).map_err(|e| BenchError::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().map_err(|e| BenchError::io("<stdout>", e))
        }
    }
}

fn json_to(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| BenchError::Data(e.to_string()))?;
    writeln!(out).map_err(|e| BenchError::io("<output>", e))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let sim = sim_config(args.config.as_deref(), args.seed)?;
    let scene = generate_scene(&sim).map_err(|e| BenchError::Config(e.to_string()))?;
    let meas = make_correspondences(&scene, &sim.noise, sim.seed).map_err(|e| BenchError::Config(e.to_string()))?;
    let intr = args.pixel.intrinsics(sim.intrinsics)?;
    let format = args
        .format
        .or_else(|| args.out.as_deref().map(format_from_path))
        .unwrap_or_default();
    write_output(args.out.as_deref(), |out| {
        write_correspondences(out, &meas.set, format, intr.as_ref()).map_err(|e| BenchError::io("<output>", e))
    })?;
    if let Some(path) = &args.truth {
        write_output(Some(path), |out| json_to(out, &meas.truth))?;
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let mut cfg: EstimatorConfig = read_toml(args.config.as_deref())?;
    if args.robust {
        cfg.enable_prefilter = true;
        cfg.enable_robust_kernel = true;
    }
    if let Some(n) = args.gn_iters {
        cfg.gn_iterations = n;
    }
    cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let solver = SolverRegistry::with_builtins()
        .get(&args.solver)
        .ok_or_else(|| BenchError::Config(format!("unknown solver {:?}", args.solver)))?;
    let intr = args.pixel.intrinsics(CameraIntrinsics::default())?;
    let format = args.format.unwrap_or_else(|| format_from_path(&args.input));
    let set = ingest_correspondences(&args.input, format, intr.as_ref())?;
    let est = solver.estimate(&set, &cfg)?;
    write_output(args.out.as_deref(), |out| json_to(out, &est))
}

fn crb(args: CrbArgs) -> Result<()> {
    let sim = sim_config(args.config.as_deref(), args.seed)?;
    let scene = generate_scene(&sim).map_err(|e| BenchError::Config(e.to_string()))?;
    let meas = make_correspondences(&scene, &sim.noise, sim.seed).map_err(|e| BenchError::Config(e.to_string()))?;
    let report = constrained_crb(&meas.truth)?;
    write_output(args.out.as_deref(), |out| json_to(out, &report))
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(n) = args.gn_iters {
        cfg.estimator.gn_iterations = n;
    }
    if let Some(format) = args.format {
        cfg.output_format = format;
    }
    if let Some(out) = args.out {
        cfg.output_path = Some(out);
    }
    cfg.validate()?;
    let threads = args.threads.unwrap_or(0);
    let series = run_monte_carlo_with_threads(&cfg, threads)?;
    write_output(cfg.output_path.as_deref(), |out| write_report(out, &series, &cfg, cfg.output_format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Crb(a) => crb(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cecme: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
