use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use loopshape_core::experiments::{
    study_loopshaping_analysis, study_plan, study_simulation, study_smoothness_sweep,
    study_terrain_grid, study_velocity_ramp, write_outputs, ExperimentConfig, Table,
};

#[derive(Debug, Parser)]
#[command(
    name = "loopshape",
    version,
    about = "Frequency-shaped quadruped MPC studies"
)]
struct Cli {
    /// Scenario config (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving CSV tables, the config echo and the summary.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Seed of the initial-state perturbation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run planner and plant synchronously (bit-reproducible).
    #[arg(long, global = true)]
    deterministic: bool,
    /// Override one config key, e.g. `--set terrain.stiffness=1e4`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Open-loop solve of the scenario.
    Plan,
    /// One closed-loop episode.
    Simulate,
    /// Planned-force smoothness over shaping cutoffs.
    Sweep,
    /// Force tracking on terrain by cost.
    Grid,
    /// Forward-speed ramp until failure.
    Ramp,
    /// Shaping-function and loop-gain tables.
    Analyze,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Plan => "plan",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Grid => "grid",
            Command::Ramp => "ramp",
            Command::Analyze => "analyze",
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("runtime.seed={seed}"));
    }
    if cli.deterministic {
        overrides.push("runtime.deterministic=true".into());
    }
    Ok(match &cli.config {
        Some(path) => ExperimentConfig::load(path, &overrides)?,
        None => ExperimentConfig::from_toml("", &overrides)?,
    })
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    let (tables, summary): (Vec<Table>, String) = match cli.command {
        Command::Plan => {
            let r = study_plan(&config)?;
            (r.tables()?, r.summary())
        }
        Command::Simulate => {
            let r = study_simulation(&config)?;
            (r.tables()?, r.summary())
        }
        Command::Sweep => {
            let r = study_smoothness_sweep(&config)?;
            (r.tables(), r.summary())
        }
        Command::Grid => {
            let r = study_terrain_grid(&config)?;
            (r.tables(), r.summary())
        }
        Command::Ramp => {
            let r = study_velocity_ramp(&config)?;
            (r.tables(), r.summary())
        }
        Command::Analyze => {
            let r = study_loopshaping_analysis(&config)?;
            (r.tables(), r.summary())
        }
    };
    let files = write_outputs(&cli.out_dir, cli.command.name(), &config, &tables, &summary)?;
    print!("{summary}");
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": format!("{e:#}").trim(),
                "command": cli.command.name(),
            });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
