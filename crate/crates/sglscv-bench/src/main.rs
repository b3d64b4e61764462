//! Experiment runner CLI: executes configured or preset optimization runs
//! and writes convergence traces as CSV.

use clap::{Parser, Subcommand};
use sglscv::bench::{
    preset_by_name, presets, run_experiment, write_csv, ExperimentConfig,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sglscv-bench", about = "Stochastic-optimization benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a named preset and write CSV traces.
    Run {
        /// TOML experiment configuration.
        config: Option<PathBuf>,
        /// Built-in preset name (fig1, fig2, fig4, fig5).
        #[arg(long)]
        preset: Option<String>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicate-count override.
        #[arg(long)]
        replicates: Option<usize>,
        /// Output file (single config) or directory (preset).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in presets.
    ListPresets,
    /// Run the invariant suite of one module.
    Check {
        /// polybasis, sampling, leastsq, fem, problems, or optim.
        module: String,
    },
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Run {
            config,
            preset,
            seed,
            replicates,
            out,
        } => match (config, preset) {
            (Some(_), Some(_)) => {
                Err("pass either a config file or --preset, not both".to_string())
            }
            (None, None) => Err("pass a config file or --preset NAME".to_string()),
            (Some(path), None) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                let mut config = ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?;
                if let Some(seed) = seed {
                    config.seed = seed;
                }
                if let Some(reps) = replicates {
                    config.replicates = reps;
                }
                let table = run_experiment(&config).map_err(|e| e.to_string())?;
                let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.csv", config.name)));
                write_csv(&out, &table, &config).map_err(|e| e.to_string())?;
                println!("wrote {}", out.display());
                Ok(())
            }
            (None, Some(name)) => {
                let preset = preset_by_name(&name)
                    .ok_or_else(|| format!("unknown preset '{name}'; see list-presets"))?;
                let out_dir = out.unwrap_or_else(|| PathBuf::from("results"));
                let written =
                    sglscv::bench::run_preset(&preset, &out_dir, seed, replicates)
                        .map_err(|e| e.to_string())?;
                for path in written {
                    println!("wrote {}", path.display());
                }
                Ok(())
            }
        },
        Command::ListPresets => {
            for preset in presets() {
                println!(
                    "{}: {}",
                    preset.name,
                    preset
                        .experiments
                        .iter()
                        .map(|e| e.name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
            }
            Ok(())
        }
        Command::Check { module } => {
            let results = sglscv::checks::module_checks(&module).ok_or_else(|| {
                format!(
                    "unknown module '{module}'; expected one of {}",
                    sglscv::checks::MODULES.join(", ")
                )
            })?;
            let mut all_ok = true;
            for r in &results {
                println!(
                    "[{}] {} - {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                all_ok &= r.passed;
            }
            if all_ok {
                Ok(())
            } else {
                Err(format!("{module}: some checks failed"))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
