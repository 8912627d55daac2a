//! `modegraph`: controllability analysis of multi-mode acoustic particle
//! manipulation from the command line.

mod commands;
mod config;
mod output;

use std::io::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{Overrides, SweepMode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<modegraph::Error> for CliError {
    fn from(e: modegraph::Error) -> Self {
        match e {
            modegraph::Error::Unreachable { .. } => CliError::Unreachable(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Unreachable(_) => 3,
            CliError::Internal(_) | CliError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "modegraph", version, about = "Controllability graphs and local controllability sweeps for multi-mode acoustophoresis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a mode schedule or a mode mixture from an initial state.
    Simulate {
        #[command(flatten)]
        common: Overrides,
    },
    /// List the assignable stable equilibria.
    Equilibria {
        #[command(flatten)]
        common: Overrides,
    },
    /// Build a controllability graph and its strongly connected components.
    Graph {
        #[command(flatten)]
        common: Overrides,
        /// Add transit edges found by trajectory sampling.
        #[arg(long)]
        transit: bool,
        /// Run the refinement probe on R_2(1,..,1) to this depth.
        #[arg(long, value_name = "D")]
        probe_depth: Option<u32>,
    },
    /// Plan a mode schedule between two equilibria.
    Plan {
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        transit: bool,
        /// Source equilibrium, comma-separated rationals.
        #[arg(long, value_delimiter = ',')]
        from: Option<Vec<String>>,
        /// Target equilibrium, comma-separated rationals.
        #[arg(long, value_delimiter = ',')]
        to: Option<Vec<String>>,
    },
    /// Local controllability sweep over a grid or random samples.
    Localctrl {
        #[command(flatten)]
        common: Overrides,
        #[arg(long, value_enum)]
        sweep: Option<SweepMode>,
        /// Particle count for sampled sweeps.
        #[arg(long, value_name = "P")]
        count: Option<usize>,
    },
    /// Switching-versus-mixing convergence study.
    Relax {
        #[command(flatten)]
        common: Overrides,
        /// Base switching period.
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        halvings: Option<u32>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Simulate { common }
        | Command::Equilibria { common }
        | Command::Graph { common, .. }
        | Command::Plan { common, .. }
        | Command::Localctrl { common, .. }
        | Command::Relax { common, .. } => common.clone(),
    };
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let mut cfg = config::load(&common)?;
    let name = match cli.command {
        Command::Simulate { .. } => "simulate",
        Command::Equilibria { .. } => "equilibria",
        Command::Graph { transit, probe_depth, .. } => {
            cfg.transit |= transit;
            if let Some(depth) = probe_depth {
                let n = cfg.device.particle_count();
                let mut cell = vec![2];
                cell.extend(std::iter::repeat(1).take(n));
                let budget = modegraph::graph::ProbeBudget::default();
                cfg.probe = Some(config::ProbeConfig {
                    cell,
                    depth,
                    cell_modes: budget.cell_modes,
                    connector_modes: budget.connector_modes,
                });
            }
            "graph"
        }
        Command::Plan { transit, from, to, .. } => {
            cfg.transit |= transit;
            if let Some(f) = from {
                cfg.from = f;
            }
            if let Some(t) = to {
                cfg.to = t;
            }
            "plan"
        }
        Command::Localctrl { sweep, count, .. } => {
            if let Some(s) = sweep {
                cfg.sweep = s;
            }
            if let Some(p) = count {
                cfg.sample_particles = p;
            }
            "localctrl"
        }
        Command::Relax { period, halvings, .. } => {
            if let Some(p) = period {
                cfg.period = p;
            }
            if let Some(h) = halvings {
                cfg.halvings = h;
            }
            "relax"
        }
    };
    cfg.validate()?;
    let mut out = output::Outputs::new(&common.out, &common.format)?;
    let started = std::time::Instant::now();
    let summary = match name {
        "simulate" => commands::simulate(&cfg, &mut out)?,
        "equilibria" => commands::equilibria(&cfg, &mut out)?,
        "graph" => commands::graph(&cfg, &mut out)?,
        "plan" => commands::plan(&cfg, &mut out)?,
        "localctrl" => commands::localctrl(&cfg, &mut out)?,
        _ => commands::relax(&cfg, &mut out)?,
    };
    out.finish(name, &cfg, started.elapsed().as_secs_f64(), rayon::current_num_threads())?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    // A closed stdout (e.g. piped into `head`) is not a failure of the run.
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("modegraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
