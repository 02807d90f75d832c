use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rovib_chaos::runner::{list_presets, preset, run, RunConfig, RunError};
use rovib_chaos::Error;

#[derive(Parser)]
#[command(
    name = "rovib-chaos",
    version,
    about = "Driven diatomic molecule: classical sections, chaos scans, quantum coefficient dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment from a config file or preset.
    Run(Source),
    /// Print preset names and descriptions.
    ListPresets,
    /// Poincaré sections (default preset fig1a).
    ClassicalPoincare(Source),
    /// Critical points of the classical flow (default preset critical-points).
    ClassicalCritical(Source),
    /// Largest Lyapunov exponent over a W grid (default preset chaos-scan-default).
    ChaosScan(Source),
    /// Coefficient evolution and populations (default preset fig2b).
    QuantumEvolve(Source),
    /// Expectation values along an evolution (default preset fig3).
    QuantumObservables(Source),
    /// Two-level reduction against direct evolution (default preset two-level).
    TwoLevelOracle(Source),
}

#[derive(Args)]
struct Source {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset; see list-presets.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for clarity; every run is deterministic and uses no RNG.
    #[arg(long)]
    seedless: bool,
}

fn load(
    src: &Source,
    default_preset: Option<&str>,
    kind: Option<&str>,
) -> Result<RunConfig, Error> {
    let mut config = match (&src.config, src.preset.as_deref().or(default_preset)) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => {
            let out = PathBuf::from("out").join(name);
            preset(name, &out).ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?
        }
        (None, None) => return Err(Error::Config("give --config or --preset".into())),
    };
    if let Some(out) = &src.out {
        config.output_dir = out.clone();
    }
    if let Some(kind) = kind {
        let actual = config.experiment.name();
        if actual != kind {
            return Err(Error::Config(format!(
                "configuration describes {actual}, not {kind}"
            )));
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (src, default, kind) = match &cli.command {
        Command::ListPresets => {
            for (name, description) in list_presets() {
                println!("{name:20} {description}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(s) => (s, None, None),
        Command::ClassicalPoincare(s) => (s, Some("fig1a"), Some("classical-poincare")),
        Command::ClassicalCritical(s) => (s, Some("critical-points"), Some("classical-critical")),
        Command::ChaosScan(s) => (s, Some("chaos-scan-default"), Some("chaos-scan")),
        Command::QuantumEvolve(s) => (s, Some("fig2b"), Some("quantum-evolve")),
        Command::QuantumObservables(s) => (s, Some("fig3"), Some("quantum-observables")),
        Command::TwoLevelOracle(s) => (s, Some("two-level"), Some("two-level-oracle")),
    };
    let outcome = load(src, default, kind)
        .map_err(RunError::Config)
        .and_then(|c| run(&c));
    match outcome {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} finished in {:.2} s, {} files in {}",
                manifest.experiment,
                manifest.wall_clock_seconds,
                manifest.outputs.len(),
                manifest.config.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                RunError::Config(inner) => eprintln!("{inner}"),
                RunError::Runtime(inner) => eprintln!("runtime error: {inner}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
