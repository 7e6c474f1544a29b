use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use odscale::synthetic::SyntheticSpec;
use odscale::{discover_bundles, generate_synthetic, run_batch, BatchOptions, Mode};

/// Population OD demand estimation by uniform upscaling of a subsample OD.
#[derive(Parser)]
#[command(name = "odscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the scaling factor for every hour.
    Estimate(RunArgs),
    /// Exhaustive grid search over the scaling factor (benchmark).
    GridSearch(RunArgs),
    /// Baseline, grid benchmark and estimate side by side.
    Compare(RunArgs),
    /// Travel-time fit of a fixed scaling factor.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Scaling factor to evaluate.
        #[arg(long, default_value_t = 1.0)]
        x: f64,
    },
    /// Estimate, then compare predicted and observed segment counts.
    ValidateCounts(RunArgs),
    /// Write a synthetic scenario bundle with a known scaling factor.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Directory holding the bundle files, or one subdirectory per hour.
    #[arg(long)]
    network_dir: PathBuf,
    /// Config file; defaults to config.txt in the hour or network directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Hour label (subdirectory name); repeat for several hours.
    #[arg(long)]
    hour: Vec<String>,
    /// Output directory for reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of grid points, overriding the config.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    grid_points: Option<u64>,
    /// Process hours one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for the bundle.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    segments: usize,
    #[arg(long, default_value_t = 12)]
    ods: usize,
    #[arg(long, default_value_t = 3)]
    path_len_min: usize,
    #[arg(long, default_value_t = 12)]
    path_len_max: usize,
    #[arg(long, default_value_t = 5.0)]
    true_x: f64,
    /// Standard deviation of the multiplicative noise on observations.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Density ratio k / k_jam of the most loaded segment at the true factor.
    #[arg(long, default_value_t = 0.8)]
    peak_density_ratio: f64,
    #[arg(long, default_value_t = 0.1)]
    sensor_fraction: f64,
    /// Hour label recorded in the manifest.
    #[arg(long, default_value = "h0")]
    hour: String,
}

fn run(args: RunArgs, mode: Mode) -> ExitCode {
    let bundles = match discover_bundles(&args.network_dir, &args.hour, args.config.as_deref()) {
        Ok(b) => b,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(1);
        }
    };
    let opts = BatchOptions {
        out_dir: args.out,
        grid_points: args.grid_points.map(|n| n as usize),
        parallel: !args.sequential,
    };
    match run_batch(&bundles, mode, &opts) {
        Ok(report) if report.is_success() => {
            log::info!(
                "{} hour(s) written to {}",
                report.hours.len(),
                opts.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
    }
}

fn generate(a: GenerateArgs) -> ExitCode {
    let spec = SyntheticSpec {
        segment_count: a.segments,
        od_count: a.ods,
        path_len: (a.path_len_min, a.path_len_max),
        true_x: a.true_x,
        noise_std_fraction: a.noise,
        rng_seed: a.seed,
        peak_density_ratio: a.peak_density_ratio,
        sensor_fraction: a.sensor_fraction,
        hour: a.hour,
        ..SyntheticSpec::default()
    };
    match generate_synthetic(&spec, &a.out) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match cli.command {
        Command::Estimate(a) => run(a, Mode::Estimate),
        Command::GridSearch(a) => run(a, Mode::GridSearch),
        Command::Compare(a) => run(a, Mode::Compare),
        Command::Evaluate { run: a, x } => run(a, Mode::Evaluate { x }),
        Command::ValidateCounts(a) => run(a, Mode::ValidateCounts),
        Command::Generate(a) => generate(a),
    }
}
