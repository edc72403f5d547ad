use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use fda_cli::experiments;
use fda_cli::spec::{ConfigFile, ExperimentSpec};

/// Runs FDA-OFDM experiments and writes one CSV per experiment.
#[derive(Parser)]
#[command(name = "fda-ofdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-block array gain over receive angle.
    Beampattern(Common),
    /// Single-block and full-band SNR gain and capacity.
    Capacity(Common),
    /// Range resolution and maximum range against the antenna count.
    SensingTradeoff(Common),
    /// Integrated sidelobe level against the angle estimation error.
    IslSweep(Common),
    /// Range estimation error against the angle estimation error.
    RangeErrorSweep(Common),
    /// Range profiles of a two-target scene.
    TwoTarget(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file with an optional [system] table and [[scatterer]] entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $FDA_OUT_DIR, then `results`.
    #[arg(long, env = "FDA_OUT_DIR", default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated antenna counts.
    #[arg(long, value_delimiter = ',')]
    antennas: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta_err_deg: Option<Vec<f64>>,
    /// Receive angles (beampattern) or link angle (capacity), degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    angles: Option<Vec<f64>>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl Command {
    fn split(self) -> (&'static str, Common) {
        match self {
            Command::Beampattern(c) => ("beampattern", c),
            Command::Capacity(c) => ("capacity", c),
            Command::SensingTradeoff(c) => ("sensing-tradeoff", c),
            Command::IslSweep(c) => ("isl-sweep", c),
            Command::RangeErrorSweep(c) => ("range-error-sweep", c),
            Command::TwoTarget(c) => ("two-target", c),
        }
    }
}

fn build_spec(name: &str, c: &Common) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::defaults(name)?;
    if let Some(path) = &c.config {
        let file = ConfigFile::load(path)?;
        if let Some(system) = &file.system {
            spec.config = system.clone();
        }
        spec.scene = file.scene();
    }
    if let Some(v) = c.seed {
        spec.seed = v;
    }
    if let Some(v) = c.trials {
        spec.trials = v;
    }
    if let Some(v) = &c.antennas {
        spec.antennas = v.clone();
    }
    if let Some(v) = &c.snr_db {
        spec.snr_db = v.clone();
    }
    if let Some(v) = &c.theta_err_deg {
        spec.theta_err_deg = v.clone();
    }
    if let Some(v) = &c.angles {
        spec.angles_deg = v.clone();
    }
    spec.validate()?;
    Ok(spec)
}

fn main_inner() -> Result<()> {
    let (name, common) = Cli::parse().command.split();
    let spec = build_spec(name, &common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .context("starting worker pool")?;
    let mut result = pool.install(|| experiments::run(&spec))?;
    let path = result.write(&common.out)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
