//! Command-line front end: validate configs, run experiments, replay
//! presets. Exit codes: 0 success, 2 configuration problem, 3 runtime
//! failure (solver or I/O).

mod config;
mod experiments;
mod presets;
mod svg;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config_text, ExperimentConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pade-mor",
    version,
    about = "Rational surrogates for Helmholtz frequency-response maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config file (a manifest.json from an
    /// earlier run is accepted too and reproduces that run).
    Run {
        /// Path to the config or manifest file.
        config: PathBuf,
        /// Output directory; overrides the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the built-in experiment configurations.
    Preset {
        /// Preset name; see `pade-mor presets` for the list.
        name: String,
        /// Output directory; defaults to `out-<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the preset's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the preset's grid cell count.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Check a config file and print its resolved settings.
    Validate {
        /// Path to the config or manifest file.
        config: PathBuf,
    },
    /// List the built-in presets.
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => run_file(&config, out),
        Command::Preset {
            name,
            out,
            seed,
            grid,
        } => run_preset(&name, out, seed, grid),
        Command::Validate { config } => validate_file(&config),
        Command::Presets => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_config_text(&text)
}

fn config_failure(message: &str) -> ExitCode {
    eprintln!("config error: {message}");
    ExitCode::from(EXIT_CONFIG)
}

fn run_file(path: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg = match load_config(path) {
        Ok(cfg) => cfg,
        Err(e) => return config_failure(&e),
    };
    if let Err(e) = cfg.validate() {
        return config_failure(&e.to_string());
    }
    let out_dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("pade-mor-out"));
    execute(&cfg, &out_dir)
}

fn run_preset(
    name: &str,
    out: Option<PathBuf>,
    seed: Option<u64>,
    grid: Option<usize>,
) -> ExitCode {
    let mut cfg = match presets::preset(name) {
        Some(cfg) => cfg,
        None => {
            return config_failure(&format!(
                "unknown preset `{name}`; available: {}",
                presets::PRESET_NAMES.join(", ")
            ))
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(g) = grid {
        cfg.grid = g;
    }
    if let Err(e) = cfg.validate() {
        return config_failure(&e.to_string());
    }
    let out_dir = out
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("out-{name}")));
    execute(&cfg, &out_dir)
}

fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> ExitCode {
    match experiments::run(cfg, out_dir) {
        Ok(files) => {
            for file in &files {
                println!("wrote {}", file.display());
            }
            println!("ok: {} files in {}", files.len(), out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn validate_file(path: &Path) -> ExitCode {
    let cfg = match load_config(path) {
        Ok(cfg) => cfg,
        Err(e) => return config_failure(&e),
    };
    if let Err(e) = cfg.validate() {
        return config_failure(&e.to_string());
    }
    println!("ok");
    println!("hash: {}", cfg.content_hash());
    println!("radius: {}", cfg.resolved_radius());
    println!("norm_weight: {}", experiments::norm_weight(&cfg));
    for &[m, n] in &cfg.degrees {
        println!("degrees: ({m}, {n}) budget {}", cfg.budget_for(m, n));
    }
    ExitCode::SUCCESS
}
