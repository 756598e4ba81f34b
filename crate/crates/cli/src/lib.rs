//! `purcell-cool`: runs the core models from a TOML experiment file and
//! writes CSV curves, JSON scalars and a run manifest into one directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::ExperimentConfig;
pub use error::CliError;
use output::{sha256_hex, Outputs, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "purcell-cool",
    version,
    about = "Radiative spin cooling: models, simulations and fits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file (TOML). Defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parameter sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Transition frequencies and matrix elements versus field, with resonances.
    Spectrum {
        #[arg(long, default_value_t = 0.0)]
        b0_min: f64,
        #[arg(long, default_value_t = 0.07)]
        b0_max: f64,
        #[arg(long, default_value_t = 1e-4)]
        b0_step: f64,
        /// Resonance frequency in Hz; the resonator's by default.
        #[arg(long)]
        omega0: Option<f64>,
    },
    /// Photon and spin temperatures, relaxation rates and cooling factor.
    Thermal,
    /// Exact and approximate echo population difference versus temperature.
    Polarization {
        /// Field in tesla; the config's `spins.b0_t` by default.
        #[arg(long)]
        b0: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        t_min: f64,
        #[arg(long, default_value_t = 10.0)]
        t_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Vacuum field map and coupling distribution.
    Coupling,
    /// Hahn echo over the full ensemble.
    Echo(SequenceArgs),
    /// Inversion recovery over `--dt-list-s`.
    Invrec(SequenceArgs),
    /// Echo area versus refocusing amplitude.
    Rabi(SequenceArgs),
    /// CPMG echo train.
    Cpmg(SequenceArgs),
    /// Fit A(∞) − B e^{−Γ₁Δt} to (Δt, A_e) data.
    FitInvrec(FitArgs),
    /// Fit A e^{−(2τ/T₂)²} to (2τ, A_e) data.
    FitT2(FitArgs),
    /// Fit a hot or cold noise spectrum.
    FitPsd {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum, default_value_t = PsdMode::Cold)]
        mode: PsdMode,
    },
    /// SNR versus repetition time, optimum and cooling factor versus phonon rate.
    Snr {
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Thermal => "thermal",
            Command::Polarization { .. } => "polarization",
            Command::Coupling => "coupling",
            Command::Echo(_) => "echo",
            Command::Invrec(_) => "invrec",
            Command::Rabi(_) => "rabi",
            Command::Cpmg(_) => "cpmg",
            Command::FitInvrec(_) => "fit-invrec",
            Command::FitT2(_) => "fit-t2",
            Command::FitPsd { .. } => "fit-psd",
            Command::Snr { .. } => "snr",
        }
    }
}

/// Flags that override the `[sequence]` section.
#[derive(Debug, Clone, Default, Args)]
pub struct SequenceArgs {
    #[arg(long)]
    pub tau_us: Option<f64>,
    #[arg(long)]
    pub pi_ns: Option<f64>,
    /// Drive amplitude √(photons/s).
    #[arg(long)]
    pub amp: Option<f64>,
    /// Comma-separated recovery delays in seconds.
    #[arg(long, value_delimiter = ',')]
    pub dt_list_s: Option<Vec<f64>>,
    #[arg(long)]
    pub n_cpmg: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Two-column CSV with a header row. Synthetic data from `[synthetic]` when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PsdMode {
    Hot,
    HotWithTwpa,
    Cold,
}

impl SequenceArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let q = &mut cfg.sequence;
        if let Some(v) = self.tau_us {
            q.tau_us = v;
        }
        if let Some(v) = self.pi_ns {
            q.pi_ns = v;
        }
        if let Some(v) = self.amp {
            q.amp = Some(v);
        }
        if let Some(v) = &self.dt_list_s {
            q.dt_list_s = v.clone();
        }
        if let Some(v) = self.n_cpmg {
            q.n_cpmg = v;
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Effective configuration: file, then seed and sequence flags.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Echo(a) | Command::Invrec(a) | Command::Rabi(a) | Command::Cpmg(a) =
        &cli.command
    {
        a.apply(&mut cfg);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli, arguments: Vec<String>) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    configure_threads(cli.threads)?;
    let cfg = effective_config(cli)?;
    let mut out = Outputs::create(&cli.out)?;
    commands::dispatch(&cli.command, &cfg, &mut out)?;
    out.finish(RunManifest {
        tool: "purcell-cool".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cli.command.name().to_string(),
        arguments,
        config_sha256: sha256_hex(cfg.to_toml().as_bytes()),
        seed: cfg.seed,
        parallel: purcell_core::par::is_parallel(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        outputs: Vec::new(),
    })
}
