//! cddclock: numerical toolkit for a trapped-ion frequency reference
//! under two-stage continuous dynamical decoupling.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, Preset, RawConfig, RunConfig};
use output::ArtifactWriter;

#[derive(Parser)]
#[command(
    name = "cddclock",
    version,
    about = "Dressed-state engineering, drive-waveform synthesis and clock simulation \
             for a trapped-ion frequency reference under cascaded dynamical decoupling"
)]
struct Cli {
    /// Configuration file (sectioned key = value text, or .json)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in parameter preset
    #[arg(long, global = true, default_value = "resonant")]
    preset: Preset,

    /// Output directory (default: $CDDCLOCK_OUTPUT_DIR or ./output)
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Random seed override
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for grid and Monte-Carlo parallelism
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form dressed-state report (splittings, angles, sensitivities)
    Analyze,
    /// Quasi-energy spectrum from the one-period propagator
    Spectrum,
    /// Adiabatic-preparation fidelity through the sweep program
    Prepare,
    /// Per-ion line scans with centre fits
    Scan,
    /// Ion-crystal positions, field gradients and quadrupole shifts
    Crystal,
    /// Synthesize and pre-compensate the drive waveforms
    Waveform {
        /// Also write raw little-endian f32 sample files
        #[arg(long)]
        raw: bool,
    },
    /// Run the two-point Rabi clock servo
    Clock,
    /// Overlapping Allan deviation of a clock record
    Allan {
        /// clock.csv produced by the clock subcommand
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut raw = match &cli.config {
        Some(path) => config::load(path)?,
        None => RawConfig::default(),
    };
    if let Some(seed) = cli.seed {
        raw.seed = Some(seed as f64);
    }
    if let Some(dir) = &cli.output_dir {
        raw.output_dir = Some(dir.display().to_string());
    }
    RunConfig::resolve(raw, cli.preset)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("warning: could not set worker count: {e}");
        }
    }

    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let name = match &cli.command {
        Command::Analyze => "analyze",
        Command::Spectrum => "spectrum",
        Command::Prepare => "prepare",
        Command::Scan => "scan",
        Command::Crystal => "crystal",
        Command::Waveform { .. } => "waveform",
        Command::Clock => "clock",
        Command::Allan { .. } => "allan",
    };

    let out = match ArtifactWriter::new(&cfg, name) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: cannot create output directory: {e}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = out.write_snapshot(name) {
        eprintln!("error: cannot write resolved config: {e}");
        return ExitCode::from(3);
    }

    let result = match &cli.command {
        Command::Analyze => commands::analyze(&cfg, &out),
        Command::Spectrum => commands::spectrum(&cfg, &out),
        Command::Prepare => commands::prepare(&cfg, &out),
        Command::Scan => commands::scan(&cfg, &out),
        Command::Crystal => commands::crystal(&cfg, &out),
        Command::Waveform { raw } => commands::waveform(&cfg, &out, *raw),
        Command::Clock => commands::clock(&cfg, &out),
        Command::Allan { input } => commands::allan(&cfg, &out, input),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            ExitCode::from(3)
        }
    }
}
