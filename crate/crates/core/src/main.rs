use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use reachguard::experiment::{
    cmd_render, cmd_run, cmd_sweep_orders, cmd_sweep_steps, cmd_train, ExperimentConfig, WEIGHTS_FILE,
};
use reachguard::network::NetworkSpec;
use reachguard::supervisor::EpisodeStatus;
use reachguard::Error;

const EXIT_TIMEOUT: u8 = 1;
const EXIT_COLLISION: u8 = 2;
const EXIT_ENGINE: u8 = 3;
const EXIT_CONFIG: u8 = 4;

/// Reachability-verified supervision of a neural-network controlled robot.
///
/// Exit codes: 0 success, 1 episode timeout, 2 collision, 3 verification
/// or engine failure, 4 configuration or input error.
#[derive(Parser, Debug)]
#[command(name = "reachguard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Weight file (read by run and the sweeps, written by train).
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Verification steps; a comma-separated list for sweep-steps.
    #[arg(long, global = true, value_delimiter = ',')]
    steps: Vec<usize>,
    /// Taylor model degree; a comma-separated list for sweep-orders.
    #[arg(long, global = true, value_delimiter = ',')]
    tm_degree: Vec<u32>,
    /// Bernstein order; a comma-separated list for sweep-orders.
    #[arg(long, global = true, value_delimiter = ',')]
    bp_order: Vec<usize>,
    /// Verification wall-clock budget in seconds.
    #[arg(long, global = true)]
    deadline: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate expert demonstrations and train the network.
    Train,
    /// Run one supervised episode and render it.
    Run,
    /// Verification horizon against runtime and backup utilization.
    SweepSteps,
    /// Taylor model degree and Bernstein order against runtime.
    SweepOrders,
    /// Re-render the SVG from the files written by run.
    Render,
}

enum Failure {
    Error(Error),
    Exit(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Io { .. }
        | Error::InvalidNetwork(_)
        | Error::UnsupportedActivation(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidOrder(_) => EXIT_CONFIG,
        _ => EXIT_ENGINE,
    }
}

fn single<T: Copy>(values: &[T], flag: &str, command: &str) -> Result<Option<T>, Error> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(Error::Config(format!("{command} takes a single --{flag} value"))),
    }
}

fn load_config(common: &Common, command: &Command) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(d) = common.deadline {
        cfg.episode.deadline = d;
    }
    let name = match command {
        Command::SweepSteps => "sweep-steps",
        Command::SweepOrders => "sweep-orders",
        _ => "this command",
    };
    if matches!(command, Command::SweepSteps) {
        if !common.steps.is_empty() {
            cfg.sweep.steps = common.steps.clone();
        }
    } else if let Some(s) = single(&common.steps, "steps", name)? {
        cfg.verification.steps = s;
    }
    if matches!(command, Command::SweepOrders) {
        if !common.tm_degree.is_empty() {
            cfg.sweep.tm_degrees = common.tm_degree.clone();
        }
        if !common.bp_order.is_empty() {
            cfg.sweep.bp_orders = common.bp_order.clone();
        }
    } else {
        if let Some(d) = single(&common.tm_degree, "tm-degree", name)? {
            cfg.verification.tm_degree = d;
        }
        if let Some(b) = single(&common.bp_order, "bp-order", name)? {
            cfg.verification.bp_order = b;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn weights(common: &Common) -> Result<NetworkSpec, Error> {
    let path = common
        .weights
        .clone()
        .unwrap_or_else(|| common.out_dir.join(WEIGHTS_FILE));
    NetworkSpec::load(path)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let common = &cli.common;
    let cfg = load_config(common, &cli.command)?;
    let out: &Path = &common.out_dir;
    match cli.command {
        Command::Train => {
            let (net, report) = cmd_train(&cfg, cfg.seed, out)?;
            if let Some(path) = &common.weights {
                net.save(path)?;
            }
            println!(
                "trained {} parameters; best held-out MSE {:e} at epoch {}",
                net.num_parameters(),
                report.best_heldout,
                report.best_epoch
            );
        }
        Command::Run => {
            let net = weights(common)?;
            let log = cmd_run(&cfg, &net, cfg.seed, out)?;
            println!(
                "{} at t={:.1}s; {} NN-BACKUP-NN cycles; backup {:.1}s; mean verification {:.4}s; {} deadline misses",
                log.status,
                log.end_time,
                log.switch_cycles(),
                log.backup_time(),
                log.mean_runtime(),
                log.deadline_misses()
            );
            match log.status {
                EpisodeStatus::GoalReached => {}
                EpisodeStatus::Collision => return Err(Failure::Exit(EXIT_COLLISION)),
                EpisodeStatus::Timeout => return Err(Failure::Exit(EXIT_TIMEOUT)),
            }
        }
        Command::SweepSteps => {
            let net = weights(common)?;
            let table = cmd_sweep_steps(&cfg, &net, cfg.seed, out)?;
            print!("{}", table.to_csv());
            if table.points.iter().any(|p| p.collisions > 0) {
                return Err(Failure::Exit(EXIT_COLLISION));
            }
        }
        Command::SweepOrders => {
            let net = weights(common)?;
            let rows = cmd_sweep_orders(&cfg, &net, cfg.seed, out)?;
            print!("{}", reachguard::experiment::orders_csv(&rows));
        }
        Command::Render => {
            let path = cmd_render(&cfg, out)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap's own exit code 2 would read as a collision
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::Error(e)) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
