//! `qdecoh`: simulate decays, estimate jump rates, compute filter functions,
//! fit data and produce the reproduction report.
//!
//! Every command prints one JSON document on stdout; failures print an error
//! document on stderr and exit with 2 (configuration/parse) or 3 (numerical).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{pretty, CliError, Ctx};

/// Default seed for every stochastic step.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QDECOH_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "qdecoh",
    version,
    about = "Decoherence model for single-atom qubits in optical traps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Seed for all random draws.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files [env: QDECOH_OUTPUT_DIR, default: .].
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic, Monte-Carlo and optionally noisy coherence curves.
    Simulate(SimulateArgs),
    /// Least-squares fit of a data file.
    Fit(FitArgs),
    /// Welch PSD of a measured trap-power trace.
    Psd(PsdArgs),
    /// Filter function and zeros of a pulse sequence.
    Filter(FilterArgs),
    /// Phonon jumping rates from noise spectra.
    EstimateRates(RatesArgs),
    /// Reproduction table of the headline numbers.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Trap configuration JSON, or `preset:NAME` [default: preset:cs133].
    #[arg(long)]
    trap: Option<PathBuf>,
    /// Trap noise JSON used to compute the jump rate.
    #[arg(long)]
    spectra: Option<PathBuf>,
    /// Pulse sequence JSON; adds a simulated fringe at its duration.
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Phonon numbers `nx,ny,nz` (fixed occupation).
    #[arg(long, value_delimiter = ',', conflicts_with = "temperature")]
    phonons: Option<Vec<u32>>,
    /// Atom temperature in K (thermal occupation).
    #[arg(long)]
    temperature: Option<f64>,
    /// DLS spread override, 1/s.
    #[arg(long)]
    sigma_dls: Option<f64>,
    /// Jump rate override, 1/s.
    #[arg(long)]
    rate: Option<f64>,
    /// Last delay of the grid, s.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    points: Option<usize>,
    /// Monte-Carlo trajectories (0 skips the Monte-Carlo curve).
    #[arg(long)]
    trajectories: Option<usize>,
    /// Standard deviation of additive noise for a synthetic data set.
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Shots per phase for the simulated fringe.
    #[arg(long)]
    shots: Option<u64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    /// `t_s,coherence[,sigma]` → sigma_dls, rate.
    CoherenceDecay,
    /// `t_s,coherence[,sigma]` → t2star, temperature.
    Ramsey,
    /// `t_s,survival[,sigma]` → lifetime, amplitude.
    Exponential,
    /// `phase_rad,population[,sigma]` → amplitude, phase_offset, baseline.
    Fringe,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Data CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    model: Model,
    /// η for the Ramsey temperature; defaults to the trap's value.
    #[arg(long)]
    eta: Option<f64>,
    /// Trap configuration supplying η [default: preset:cs133].
    #[arg(long)]
    trap: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PsdArgs {
    #[command(flatten)]
    common: Common,
    /// `t_s,power_w` CSV with uniform sampling.
    #[arg(long)]
    input: PathBuf,
    /// Welch segment length in samples.
    #[arg(long, default_value_t = 4096)]
    segment: usize,
    /// Segment overlap in samples [default: segment/2].
    #[arg(long)]
    overlap: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    #[command(flatten)]
    common: Common,
    /// Pulse sequence JSON.
    #[arg(long, conflicts_with_all = ["cpmg", "ramsey"])]
    sequence: Option<PathBuf>,
    /// CPMG with this many π pulses over `--duration`.
    #[arg(long, requires = "duration", conflicts_with = "ramsey")]
    cpmg: Option<usize>,
    /// Ramsey sequence of length `--duration`.
    #[arg(long, requires = "duration")]
    ramsey: bool,
    /// Sequence duration, s.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    f_min: f64,
    #[arg(long, default_value_t = 100.0)]
    f_max: f64,
    /// Log-spaced evaluation points.
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Scan step for the zero search, Hz [default: 1/(50 T)].
    #[arg(long)]
    zero_step: Option<f64>,
    /// DLS noise spectrum JSON in (rad/s)²/Hz; adds the filtered spread.
    /// The spectrum's `kind` is ignored.
    #[arg(long)]
    dls_psd: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    #[command(flatten)]
    common: Common,
    /// Trap configuration JSON, or `preset:NAME` [default: preset:cs133].
    #[arg(long)]
    trap: Option<PathBuf>,
    /// Trap noise JSON, or `preset:NAME`.
    #[arg(long)]
    spectra: Option<PathBuf>,
    /// Phonon numbers for the fixed occupation [default: 0,0,0].
    #[arg(long, value_delimiter = ',')]
    phonons: Option<Vec<u32>>,
    /// Temperature for the thermal occupation, K [default: 14e-6].
    #[arg(long)]
    temperature: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Directory whose `*.json` files replace bundled presets of the same name.
    #[arg(long)]
    preset_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail(&CliError::Usage(e.to_string().trim().to_string())),
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Psd(a) => commands::psd(a),
        Command::Filter(a) => commands::filter(a),
        Command::EstimateRates(a) => commands::estimate_rates(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(out) => {
            print!("{}", pretty(&out.document));
            match out.failure {
                Some(e) => fail(&e),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprint!("{}", pretty(&e.to_json()));
    ExitCode::from(e.exit_code() as u8)
}

impl Common {
    fn ctx(&self, config_dir: Option<PathBuf>, config_seed: Option<u64>) -> Ctx {
        let out_dir = self
            .output_dir
            .clone()
            .or(config_dir)
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ctx::new(self.seed.or(config_seed).unwrap_or(DEFAULT_SEED), out_dir)
    }
}
