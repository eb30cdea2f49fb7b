//! thermogap: transfer-operator experiments for full-branch expanding circle
//! maps. See the repository README for the config schema and examples.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::RunContext;
use config::ExperimentConfig;
use output::OutputSink;

#[derive(Parser)]
#[command(name = "thermogap", version, about = "Transfer-operator numerics for expanding circle maps")]
struct Cli {
    /// Path to the TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides [output].dir).
    #[arg(long, global = true)]
    out: Option<String>,

    /// Also emit SVG plots of the main curves.
    #[arg(long, global = true)]
    plots: bool,

    /// Worker threads for sweep rows; defaults to THERMOGAP_THREADS or 1.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Replace the configured RNG seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every hypothesis on the configured pair; exit 2 on failure.
    Check,
    /// Leading eigenvalue, pressure, density, conformal and equilibrium weights.
    Spectrum,
    /// Convergence of the normalized iterates to the density, with its envelope.
    Density,
    /// Cone invariance and projective contraction measurements.
    Cones,
    /// Correlation decay and its geometric fit.
    Correlations,
    /// Green-Kubo variance and the empirical central limit check.
    Clt,
    /// Deterministic parameter sweep of pressure and density.
    Sweep,
    /// Spectral data of shrinking random perturbations.
    RandomStability,
    /// The operator-discontinuity demonstration table.
    DemoDiscontinuity,
    /// Report config diagnostics without running anything.
    Validate {
        /// Subcommand to validate for, or "all".
        #[arg(long = "for", default_value = "all")]
        target: String,
    },
}

fn threads_from(cli: &Cli) -> usize {
    cli.threads
        .or_else(|| {
            std::env::var("THERMOGAP_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1)
}

fn run(cli: Cli) -> Result<i32, String> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| "--config <file> is required".to_string())?;
    let bytes = std::fs::read(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| format!("config is not UTF-8: {e}"))?;
    let config = ExperimentConfig::from_str(&text)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
    let sink = OutputSink::new(&out_dir, &bytes, cli.plots).map_err(|e| e.to_string())?;
    let threads = threads_from(&cli);
    let ctx = RunContext { config, sink, threads, seed_override: cli.seed_override };

    let subcommand_name = match &cli.command {
        Command::Check => "check",
        Command::Spectrum => "spectrum",
        Command::Density => "density",
        Command::Cones => "cones",
        Command::Correlations => "correlations",
        Command::Clt => "clt",
        Command::Sweep => "sweep",
        Command::RandomStability => "random-stability",
        Command::DemoDiscontinuity => "demo-discontinuity",
        Command::Validate { .. } => "validate",
    };
    if !matches!(cli.command, Command::Validate { .. }) {
        let diagnostics = ctx.config.diagnostics(subcommand_name);
        if !diagnostics.is_empty() {
            for d in &diagnostics {
                eprintln!("config: {d}");
            }
            return Err(format!(
                "{} config diagnostics; run `thermogap validate`",
                diagnostics.len()
            ));
        }
    }

    match &cli.command {
        Command::Check => commands::run_check(&ctx),
        Command::Spectrum => commands::run_spectrum(&ctx),
        Command::Density => commands::run_density(&ctx),
        Command::Cones => commands::run_cones(&ctx),
        Command::Correlations => commands::run_correlations(&ctx),
        Command::Clt => commands::run_clt(&ctx),
        Command::Sweep => commands::run_sweep(&ctx),
        Command::RandomStability => commands::run_random_stability(&ctx),
        Command::DemoDiscontinuity => commands::run_demo_discontinuity(&ctx),
        Command::Validate { target } => commands::run_validate(&ctx, target),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
