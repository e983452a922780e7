use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Characterize passive linear-optical networks from intensity data.
#[derive(Parser, Debug)]
#[command(name = "netchar", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded ground-truth network.
    Generate(GenerateArgs),
    /// Run the virtual lab on a network and record the measurements.
    Simulate(SimulateArgs),
    /// Reconstruct the transfer matrix from one or more records.
    Characterize(CharacterizeArgs),
    /// Compare two-photon visibilities predicted by two matrices.
    Verify(VerifyArgs),
    /// Embed a lossy matrix into a larger unitary.
    Embed(EmbedArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LossArg {
    Lossless,
    Uniform,
    PerInput,
    PathDependent,
    Mixed,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Number of modes.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "lossless")]
    pub loss: LossArg,
    /// Transmissivity for `--loss uniform`.
    #[arg(long, default_value_t = 0.8)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Network JSON.
    #[arg(long)]
    pub network: PathBuf,
    /// Laser intensity per input arm.
    #[arg(long, default_value_t = 1.0)]
    pub intensity: f64,
    /// Relative Gaussian detector noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise_intensity: f64,
    /// Per-sample stage jitter in radians.
    #[arg(long, default_value_t = 0.0)]
    pub noise_phase: f64,
    #[arg(long, default_value_t = netchar_core::lab::DEFAULT_SWEEP_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = netchar_core::lab::DEFAULT_SWEEP_PERIODS)]
    pub sweep_periods: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent repetitions, seeded `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CharacterizeArgs {
    /// Record JSON files; several are combined into one estimate with
    /// standard errors.
    #[arg(required = true)]
    pub records: Vec<PathBuf>,
    /// Replace the sweep for input `J` (1-based) with a CSV trace.
    #[arg(long = "trace", value_name = "J=PATH")]
    pub traces: Vec<String>,
    /// Directory for per-trace fit data (`phi, measured, fitted`).
    #[arg(long)]
    pub plot_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Input pair, 1-based, e.g. `1,3`. Repeatable.
    #[arg(long = "pairs", value_name = "I,J")]
    pub pairs: Vec<String>,
    /// Fail with exit code 1 if any |ΔV| exceeds this.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Lossy transfer matrix (network or characterization JSON).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Record supplying the single-input intensities.
    #[arg(long)]
    pub record: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of |V V† − I|.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Characterize(a) => commands::characterize(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Embed(a) => commands::embed(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("netchar: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
