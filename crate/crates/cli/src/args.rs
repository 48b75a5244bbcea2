use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssm_smc::Resampler;

#[derive(Parser, Debug)]
#[command(name = "ssm-smc", version, about = "Particle filtering and particle Metropolis-Hastings for state-space models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate observations (and true states) from a model.
    Simulate(SimulateArgs),
    /// Replicate a likelihood estimator at a fixed parameter value.
    Loglik(LoglikArgs),
    /// Sample the parameter posterior with particle Metropolis-Hastings.
    Sample(SampleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelName {
    Damper,
    Lgss,
    Clg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Vanilla,
    Pf,
    Apf,
    Rbpf,
    Kalman,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Posterior,
}

#[derive(Args, Debug)]
pub struct Shared {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModelName::Damper)]
    pub model: ModelName,
    /// JSON file with model configuration overrides.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = Resampler::Systematic, value_parser = parse_resampler)]
    pub resampler: Resampler,
    #[arg(short = 'o', long = "output-file")]
    pub output_file: PathBuf,
    /// Number of time steps (simulate) or observations to use (loglik, sample).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub end_time: Option<u64>,
}

fn parse_resampler(s: &str) -> Result<Resampler, String> {
    s.parse().map_err(|_| "expected one of multinomial, stratified, systematic".to_string())
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Args, Debug)]
pub struct LoglikArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long)]
    pub obs_file: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodName::Pf)]
    pub method: MethodName,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub nparticles: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Parameter values as `name=value,...`; unspecified ones keep their configured true value.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long, value_enum, default_value_t = Target::Posterior)]
    pub target: Target,
    #[arg(long)]
    pub obs_file: PathBuf,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub nsamples: u64,
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
    pub nparticles: u64,
    /// Proposal standard deviations as `name=stddev,...`.
    #[arg(long)]
    pub proposal: Option<String>,
    /// Starting point as `name=value,...`; defaults to a prior draw.
    #[arg(long)]
    pub theta0: Option<String>,
    /// Records excluded from the summary; defaults to 10% of `--nsamples`.
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// Store one state trajectory per accepted iteration.
    #[arg(long)]
    pub trajectories: bool,
}

/// Parses `name=value,name=value`.
pub fn parse_assignments(raw: &str) -> anyhow::Result<Vec<(String, f64)>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("expected `name=value`, got `{item}`"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("invalid number `{}` for `{}`", value.trim(), name.trim()))?;
            Ok((name.trim().to_owned(), value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments() {
        let parsed = parse_assignments("k=2.16, p=0.58").unwrap();
        assert_eq!(parsed, vec![("k".into(), 2.16), ("p".into(), 0.58)]);
        assert!(parse_assignments("k").is_err());
        assert!(parse_assignments("k=x").is_err());
    }
}
