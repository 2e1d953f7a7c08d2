//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentSpec, Registry};
use crate::output;
use crate::sim::RunState;

/// Exit status for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for invariant violations during a simulation.
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_OTHER: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "marketsim", version, about = "Agent-based stock market simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "MARKETSIM_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Overrides `simulation.master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for experiments.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one run and write run.csv and summary.json.
    Run {
        /// Run index, selecting the run's random streams.
        #[arg(long, default_value_t = 0)]
        run_index: u64,
        /// Also write every agent's preference tables to policies.csv.
        #[arg(long)]
        dump_policies: bool,
    },
    /// Tick-size study.
    Tick,
    /// Metaorder impact study.
    Metaorder,
    /// High-frequency trading study.
    Frequency,
    /// Check the configuration and print it with all defaults filled in.
    Validate,
    /// List registered experiments.
    List,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Parse(_) => EXIT_CONFIG,
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_OTHER,
    }
}

fn load_config(common: &CommonArgs) -> Result<ConfigFile> {
    let mut file = match &common.config {
        Some(path) => ConfigFile::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config {
                field: path.display().to_string(),
                message: io.to_string(),
            },
            other => other,
        })?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        file.simulation.master_seed = seed;
    }
    if common.jobs == Some(0) {
        return Err(Error::config("--jobs", "must be positive"));
    }
    file.validate()?;
    Ok(file)
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run_single(file: &ConfigFile, out: &Path, run_index: u64, dump_policies: bool) -> Result<()> {
    let config = &file.simulation;
    let mut state = RunState::new(config, run_index)?;
    let total = config.total_steps();
    let every = (total / 10).max(1);
    while !state.is_finished() {
        state.step()?;
        if state.step_index() % every == 0 {
            eprintln!("step {}/{total}", state.step_index());
        }
    }
    let policies = dump_policies.then(|| state.agents.clone());
    let result = state.finish();
    let mut written = vec![out.join("run.csv"), out.join("summary.json")];
    output::write_run_csv(&written[0], &result)?;
    output::write_summary_json(&written[1], &output::summarize(config, &result))?;
    if let Some(agents) = policies {
        let path = out.join("policies.csv");
        output::write_policies_csv(&path, &agents)?;
        written.push(path);
    }
    print_written(&written);
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let registry = Registry::with_builtins();
    if let Command::List = cli.command {
        for name in registry.names() {
            println!("{name}\t{}", registry.get(name)?.description());
        }
        return Ok(());
    }
    let file = load_config(&cli.common)?;
    let name = match cli.command {
        Command::Validate => {
            print!("{}", file.to_toml_string());
            let s = &file.simulation;
            println!(
                "# I={} T={} learning={} S={} S_metaorder={}",
                s.num_agents,
                s.horizon_steps,
                s.learning_steps,
                file.experiments.runs_per_point,
                file.experiments.metaorder_runs
            );
            return Ok(());
        }
        Command::Run { run_index, dump_policies } => {
            return run_single(&file, &cli.common.out, run_index, dump_policies);
        }
        Command::Tick => "tick",
        Command::Metaorder => "metaorder",
        Command::Frequency => "frequency",
        Command::List => unreachable!(),
    };
    let spec = ExperimentSpec {
        base: file.simulation,
        settings: file.experiments,
        jobs: cli.common.jobs,
    };
    let experiment = registry.get(name)?;
    eprintln!("running {name}: {}", experiment.description());
    let output = experiment.run(&spec)?;
    print_written(&output::write_experiment(&cli.common.out, name, &output)?);
    Ok(())
}

/// Parses the process arguments, runs, and returns the exit status.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
