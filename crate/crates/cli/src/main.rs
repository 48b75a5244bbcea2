//! `ssm-smc`: simulate state-space data, compare likelihood estimators and
//! run particle Metropolis-Hastings.
//!
//! Exit codes: 0 on success, 2 for usage errors, 1 for runtime failures.

mod args;
mod loglik;
mod models;
mod output;
mod sample;
mod simulate;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

const THREADS_ENV: &str = "SSM_SMC_THREADS";

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    if threads == 0 {
        anyhow::bail!("{THREADS_ENV} must be a positive integer, got `{raw}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match cli.command {
        Command::Simulate(a) => simulate::run(&a, &argv),
        Command::Loglik(a) => loglik::run(&a, &argv),
        Command::Sample(a) => sample::run(&a, &argv),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
