//! Command-line front end: configuration loading, the analysis commands and
//! the reproduction pipeline. `crone --help` lists the commands.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Element, Grid, Outcome};
pub use config::ProjectConfig;
pub use error::{CliError, CliResult};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "CRONE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "crone",
    version,
    about = "CRONE reset-control synthesis, analysis and simulation"
)]
pub struct Cli {
    /// TOML project file; built-in defaults are used when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config file and CRONE_OUT_DIR).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub fmin: Option<f64>,
    #[arg(long, global = true)]
    pub fmax: Option<f64>,
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// linear, integrator, fof or lag.
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design the controller and write synthesis.json.
    Synthesize,
    /// Linear frequency response (reset law ignored) as bode.csv.
    Bode {
        #[arg(long, value_enum, default_value_t = Element::Controller)]
        element: Element,
    },
    /// Describing function as df.csv.
    Df {
        #[arg(long, value_enum, default_value_t = Element::Controller)]
        element: Element,
    },
    /// Open-loop describing function as openloop.csv.
    Openloop,
    /// Quadratic stability certificate as stability.json.
    Stability,
    /// Tracking simulation and the p-sweep table.
    Simulate,
    /// Swept-sine identification of S, T and T/S.
    Sweep,
    /// Sine-noise attenuation table.
    Noise,
    /// Run the whole pipeline into one directory.
    Reproduce,
    /// Print the effective configuration as TOML.
    Config,
}

/// Loads the config and applies command-line overrides, then validates.
pub fn effective_config(cli: &Cli) -> CliResult<ProjectConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ProjectConfig::load(path)?,
        None => ProjectConfig::default(),
    };
    if let Some(s) = &cli.strategy {
        cfg.strategy = s.parse()?;
    }
    if let Some(p) = cli.p {
        cfg.tuning.p = p;
    }
    if let Some(g) = cli.gamma {
        cfg.tuning.gamma = g;
    }
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid(cli: &Cli) -> Grid {
    let d = Grid::default();
    Grid {
        fmin: cli.fmin.unwrap_or(d.fmin),
        fmax: cli.fmax.unwrap_or(d.fmax),
        points: cli.points.unwrap_or(d.points),
    }
}

/// Runs a parsed command and writes its files. Returns the outcome and
/// the written paths.
pub fn run(cli: &Cli) -> CliResult<(Outcome, Vec<PathBuf>)> {
    let cfg = effective_config(cli)?;
    let g = grid(cli);
    let outcome = match &cli.command {
        Command::Synthesize => commands::cmd_synthesize(&cfg)?,
        Command::Bode { element } => commands::cmd_bode(&cfg, &g, *element)?,
        Command::Df { element } => commands::cmd_df(&cfg, &g, *element)?,
        Command::Openloop => commands::cmd_openloop(&cfg, &g)?,
        Command::Stability => commands::cmd_stability(&cfg)?,
        Command::Simulate => commands::cmd_simulate(&cfg)?,
        Command::Sweep => commands::cmd_sweep(&cfg)?,
        Command::Noise => commands::cmd_noise(&cfg)?,
        Command::Reproduce => commands::cmd_reproduce(&cfg)?,
        Command::Config => {
            return Ok((
                Outcome {
                    files: vec![],
                    passed: true,
                    summary: cfg.to_toml(),
                },
                vec![],
            ))
        }
    };
    let written = outcome.write(&cfg.output_dir)?;
    Ok((outcome, written))
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 analysis-negative, 2 invalid input.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok((outcome, written)) => {
            println!("{}", outcome.summary.trim_end());
            for p in written {
                println!("wrote {}", p.display());
            }
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
