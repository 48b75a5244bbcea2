//! Particle Metropolis-Hastings.
//!
//! The chain state is the pair `(θ, ln ẑ)`. A rejected proposal leaves both
//! untouched; the held estimate is never recomputed. Every iteration `m`
//! draws from `base.child(m)` with fixed sub-streams for the filter, the
//! proposal, the accept test and the trajectory draw.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::dataset::{fmt_f64, Dataset};
use crate::dist::{std_normal_log_mass, Distribution};
use crate::error::{Error, Result};
use crate::model::{ParamVector, SsmModel};
use crate::resampling::Resampler;
use crate::rng::RngStream;
use crate::smc::bootstrap_pf;

const FILTER_STREAM: u64 = 0;
const PROPOSE_STREAM: u64 = 1;
const ACCEPT_STREAM: u64 = 2;
const PRIOR_STREAM: u64 = 3;
const TRAJECTORY_STREAM: u64 = 4;

/// Prior draws tried when looking for a default starting point.
const MAX_INIT_ATTEMPTS: u64 = 10_000;

/// Gaussian random walk on one parameter, truncated to `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RandomWalk {
    pub stddev: f64,
    pub lo: f64,
    pub hi: f64,
}

impl RandomWalk {
    pub fn new(stddev: f64, lo: f64, hi: f64) -> Self {
        Self { stddev, lo, hi }
    }

    pub fn untruncated(stddev: f64) -> Self {
        Self::new(stddev, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `ln` of the Gaussian mass on `[lo, hi]` for a walk centred at `center`.
    fn log_mass(&self, center: f64) -> f64 {
        std_normal_log_mass((self.lo - center) / self.stddev, (self.hi - center) / self.stddev)
    }

    fn validate(&self) -> Result<()> {
        if !(self.stddev > 0.0 && self.stddev.is_finite()) {
            return Err(Error::ParameterDomain(format!("proposal stddev must be positive, got {}", self.stddev)));
        }
        if !(self.lo < self.hi) {
            return Err(Error::ParameterDomain(format!("proposal bounds must satisfy lo < hi, got ({}, {})", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// One random walk per model parameter, keyed by name.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalSpec {
    names: Arc<[String]>,
    walks: Vec<RandomWalk>,
}

impl ProposalSpec {
    pub fn new(names: Arc<[String]>, walks: Vec<RandomWalk>) -> Result<Self> {
        if names.len() != walks.len() {
            return Err(Error::Dimension(format!("{} parameters but {} proposal walks", names.len(), walks.len())));
        }
        for w in &walks {
            w.validate()?;
        }
        Ok(Self { names, walks })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn walks(&self) -> &[RandomWalk] {
        &self.walks
    }

    pub fn walk(&self, name: &str) -> Result<&RandomWalk> {
        let i = self.index(name)?;
        Ok(&self.walks[i])
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_owned()))
    }

    pub fn set_stddev(&mut self, name: &str, stddev: f64) -> Result<()> {
        let i = self.index(name)?;
        let walk = RandomWalk { stddev, ..self.walks[i] };
        walk.validate()?;
        self.walks[i] = walk;
        Ok(())
    }

    pub fn contains(&self, theta: &ParamVector) -> bool {
        self.walks.iter().zip(theta.values()).all(|(w, x)| w.contains(*x))
    }

    /// Draws `θ'` and returns `ln q(θ | θ') - ln q(θ' | θ)`. The Gaussian
    /// kernels cancel, leaving the ratio of truncation masses.
    pub fn propose(&self, theta: &ParamVector, rng: &RngStream) -> Result<(ParamVector, f64)> {
        if !theta.same_space(&self.names) {
            return Err(Error::Precondition(format!(
                "proposal is defined over {:?}, got parameters {:?}",
                self.names,
                theta.names()
            )));
        }
        let mut next = theta.clone();
        let mut log_q_ratio = 0.0;
        for (i, walk) in self.walks.iter().enumerate() {
            let current = theta[i];
            let kernel = Distribution::truncated_gaussian(current, walk.stddev, walk.lo, walk.hi)?;
            let proposed = kernel.sample(&mut rng.child(i as u64));
            next.set_index(i, proposed);
            log_q_ratio += if walk.contains(current) {
                walk.log_mass(current) - walk.log_mass(proposed)
            } else {
                f64::NEG_INFINITY
            };
        }
        Ok((next, log_q_ratio))
    }
}

/// Metropolis-Hastings test in the log domain. Returns `(accepted, α)`.
pub fn accept_step(
    log_z_new: f64,
    log_prior_new: f64,
    log_z: f64,
    log_prior: f64,
    log_q_ratio: f64,
    rng: &mut RngStream,
) -> (bool, f64) {
    let omega = rng.uniform();
    let alpha = acceptance_probability(log_z_new, log_prior_new, log_z, log_prior, log_q_ratio);
    (omega < alpha, alpha)
}

pub fn acceptance_probability(log_z_new: f64, log_prior_new: f64, log_z: f64, log_prior: f64, log_q_ratio: f64) -> f64 {
    let terms = [log_z_new, log_prior_new, log_q_ratio];
    if terms.iter().any(|v| *v == f64::NEG_INFINITY) {
        return 0.0;
    }
    let log_ratio = log_z_new + log_prior_new - log_z - log_prior + log_q_ratio;
    if log_ratio.is_nan() {
        return 0.0;
    }
    log_ratio.min(0.0).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRecord {
    pub m: usize,
    pub theta: ParamVector,
    pub log_z: f64,
    pub accepted: bool,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub records: Vec<ChainRecord>,
    /// `(m, x_{0:T})` drawn from the filter of every accepted iteration.
    pub trajectories: Vec<(usize, Vec<f64>)>,
    pub state_dim: usize,
    pub seed: u64,
    pub n_particles: usize,
    pub resampler: Resampler,
    pub model: String,
}

impl Chain {
    /// Number of MH iterations `M`; the chain holds `M + 1` records.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn param_names(&self) -> &[String] {
        self.records[0].theta.names()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations() == 0 {
            return 0.0;
        }
        let accepted = self.records[1..].iter().filter(|r| r.accepted).count();
        accepted as f64 / self.iterations() as f64
    }

    /// Values of parameter `i` for records `from..`.
    pub fn column(&self, i: usize, from: usize) -> Vec<f64> {
        self.records[from..].iter().map(|r| r.theta[i]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let names = self.param_names().join(",");
        writeln!(out, "m,{names},log_z,alpha,accepted")?;
        for r in &self.records {
            write!(out, "{}", r.m)?;
            for v in r.theta.values() {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out, ",{},{},{}", fmt_f64(r.log_z), fmt_f64(r.alpha), u8::from(r.accepted))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Long format: one row per `(m, t)`.
    pub fn write_trajectories_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let cols: Vec<String> = (0..self.state_dim).map(|i| format!("x{i}")).collect();
        writeln!(out, "m,t,{}", cols.join(","))?;
        for (m, path) in &self.trajectories {
            for (t, x) in path.chunks(self.state_dim).enumerate() {
                write!(out, "{m},{t}")?;
                for v in x {
                    write!(out, ",{}", fmt_f64(*v))?;
                }
                writeln!(out)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmhConfig {
    pub iterations: usize,
    pub n_particles: usize,
    pub resampler: Resampler,
    pub seed: u64,
    /// Starting point; a prior draw inside the proposal bounds when absent.
    pub theta0: Option<ParamVector>,
    pub keep_trajectories: bool,
    /// Selects a disjoint random stream so several chains can share a seed.
    pub chain_id: u64,
}

impl PmhConfig {
    pub fn new(iterations: usize, n_particles: usize, seed: u64) -> Self {
        Self {
            iterations,
            n_particles,
            resampler: Resampler::default(),
            seed,
            theta0: None,
            keep_trajectories: false,
            chain_id: 0,
        }
    }
}

fn initial_theta<M: SsmModel + ?Sized>(model: &M, spec: &ProposalSpec, config: &PmhConfig, stream: &RngStream) -> Result<ParamVector> {
    match &config.theta0 {
        Some(theta) => {
            model.check_params(theta).map_err(|e| Error::Initialization(e.to_string()))?;
            if model.log_prior(theta) == f64::NEG_INFINITY {
                return Err(Error::Initialization(format!("θ0 = {:?} lies outside the prior support", theta.values())));
            }
            if !spec.contains(theta) {
                return Err(Error::Initialization(format!("θ0 = {:?} lies outside the proposal bounds", theta.values())));
            }
            Ok(theta.clone())
        }
        None => (0..MAX_INIT_ATTEMPTS)
            .map(|attempt| model.sample_prior(&mut stream.child(attempt)))
            .find(|theta| spec.contains(theta) && model.log_prior(theta).is_finite())
            .ok_or_else(|| Error::Initialization(format!("no prior draw in {MAX_INIT_ATTEMPTS} fell inside the proposal bounds"))),
    }
}

/// Runs `config.iterations` PMH steps with a bootstrap filter of
/// `config.n_particles` particles as the likelihood estimator.
pub fn run_pmh<M: SsmModel + ?Sized>(model: &M, data: &Dataset, spec: &ProposalSpec, config: &PmhConfig) -> Result<Chain> {
    if config.iterations == 0 {
        return Err(Error::Precondition("at least one iteration is required".into()));
    }
    if !spec.names().iter().eq(model.param_names().iter()) {
        return Err(Error::Precondition(format!(
            "proposal parameters {:?} do not match model parameters {:?}",
            spec.names(),
            model.param_names()
        )));
    }
    let horizon = data.horizon();
    if config.n_particles < horizon / 4 {
        log::warn!(
            "{} particles for {} observations; the likelihood estimate may be too noisy to mix well (use at least T/4)",
            config.n_particles,
            horizon
        );
    }
    let base = RngStream::new(config.seed).child(config.chain_id);
    let n = config.n_particles;
    let at = |iteration: usize| move |e: Error| Error::AtIteration { iteration, source: Box::new(e) };

    let init = base.child(0);
    let theta0 = initial_theta(model, spec, config, &init.child(PRIOR_STREAM))?;
    let (est, history) = bootstrap_pf(model, &theta0, data, n, config.resampler, &init.child(FILTER_STREAM), config.keep_trajectories)
        .map_err(at(0))?;
    if est.log_z == f64::NEG_INFINITY {
        return Err(Error::Initialization("likelihood estimate at θ0 is zero".into()));
    }
    let mut chain = Chain {
        records: Vec::with_capacity(config.iterations + 1),
        trajectories: Vec::new(),
        state_dim: model.state_dim(),
        seed: config.seed,
        n_particles: n,
        resampler: config.resampler,
        model: model.name().to_owned(),
    };
    if let Some(h) = history {
        chain.trajectories.push((0, h.sample_trajectory(&mut init.child(TRAJECTORY_STREAM)).map_err(at(0))?));
    }
    let mut log_prior = model.log_prior(&theta0);
    chain.records.push(ChainRecord { m: 0, theta: theta0, log_z: est.log_z, accepted: true, alpha: 1.0 });

    for m in 1..=config.iterations {
        let stream = base.child(m as u64);
        let held = chain.records.last().expect("chain is never empty");
        let (proposal, log_q_ratio) = spec.propose(&held.theta, &stream.child(PROPOSE_STREAM)).map_err(at(m))?;
        let log_prior_new = model.log_prior(&proposal);
        let (log_z_new, history) = if log_prior_new == f64::NEG_INFINITY {
            (f64::NEG_INFINITY, None)
        } else {
            let (est, h) = bootstrap_pf(model, &proposal, data, n, config.resampler, &stream.child(FILTER_STREAM), config.keep_trajectories)
                .map_err(at(m))?;
            (est.log_z, h)
        };
        let (accepted, alpha) = accept_step(log_z_new, log_prior_new, held.log_z, log_prior, log_q_ratio, &mut stream.child(ACCEPT_STREAM));
        let record = if accepted {
            log_prior = log_prior_new;
            if let Some(h) = history {
                chain.trajectories.push((m, h.sample_trajectory(&mut stream.child(TRAJECTORY_STREAM)).map_err(at(m))?));
            }
            ChainRecord { m, theta: proposal, log_z: log_z_new, accepted, alpha }
        } else {
            ChainRecord { m, theta: held.theta.clone(), log_z: held.log_z, accepted, alpha }
        };
        chain.records.push(record);
    }
    Ok(chain)
}

/// Posterior mean of `phi` over records `burn_in..=M`.
pub fn expectation(chain: &Chain, phi: impl Fn(&ParamVector) -> f64, burn_in: usize) -> Result<f64> {
    if burn_in >= chain.records.len() {
        return Err(Error::Precondition(format!(
            "burn-in {burn_in} leaves no records in a chain of length {}",
            chain.records.len()
        )));
    }
    let kept = &chain.records[burn_in..];
    Ok(kept.iter().map(|r| phi(&r.theta)).sum::<f64>() / kept.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::std_normal_cdf;
    use crate::lgss::ScalarLgss;
    use crate::model::{param_names, simulate};

    fn one(walk: RandomWalk) -> ProposalSpec {
        ProposalSpec::new(param_names(&["a"]), vec![walk]).unwrap()
    }

    fn theta(a: f64) -> ParamVector {
        ParamVector::new(param_names(&["a"]), vec![a]).unwrap()
    }

    #[test]
    fn symmetric_walk_has_zero_correction() {
        let spec = one(RandomWalk::untruncated(0.3));
        for i in 0..50 {
            let (_, r) = spec.propose(&theta(0.2), &RngStream::new(i)).unwrap();
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn distant_truncation_is_negligible() {
        let spec = one(RandomWalk::new(0.01, -5.0, 5.0));
        for i in 0..50 {
            let (_, r) = spec.propose(&theta(0.0), &RngStream::new(i)).unwrap();
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn half_line_truncation_ratio() {
        let walk = RandomWalk::new(1.0, 0.0, f64::INFINITY);
        let r = walk.log_mass(0.5) - walk.log_mass(0.1);
        let expected = std_normal_cdf(0.5).ln() - std_normal_cdf(0.1).ln();
        assert!((r - expected).abs() < 1e-14);
    }

    #[test]
    fn acceptance_probability_cases() {
        let mut rng = RngStream::new(0);
        for _ in 0..100 {
            let (acc, alpha) = accept_step(1.0, 0.0, 1.0, 0.0, 0.0, &mut rng);
            assert!(acc && alpha == 1.0);
            let (acc, alpha) = accept_step(1.0, f64::NEG_INFINITY, 1.0, 0.0, 0.0, &mut rng);
            assert!(!acc && alpha == 0.0);
        }
        assert_eq!(acceptance_probability(f64::NEG_INFINITY, 0.0, -3.0, 0.0, 0.0), 0.0);
        let direct = (2f64.exp() * 0.3) / (3f64.exp() * 0.5) * 1.1;
        let logged = acceptance_probability(2.0, 0.3f64.ln(), 3.0, 0.5f64.ln(), 1.1f64.ln());
        assert!((direct - logged).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_starting_points() {
        let model = ScalarLgss::default();
        let data = simulate(&model, &model.true_theta(), 10, &RngStream::new(1)).unwrap();
        let spec = one(RandomWalk::new(0.1, -1.0, 1.0));
        let mut config = PmhConfig::new(5, 10, 3);
        config.theta0 = Some(model.theta(1.5));
        assert!(matches!(run_pmh(&model, &data, &spec, &config), Err(Error::Initialization(_))));
        config.theta0 = None;
        config.iterations = 0;
        assert!(matches!(run_pmh(&model, &data, &spec, &config), Err(Error::Precondition(_))));
    }

    #[test]
    fn chain_shape_and_csv() {
        let model = ScalarLgss::default();
        let data = simulate(&model, &model.true_theta(), 10, &RngStream::new(1)).unwrap();
        let spec = one(RandomWalk::new(0.1, -1.0, 1.0));
        let mut config = PmhConfig::new(20, 16, 3);
        config.keep_trajectories = true;
        let chain = run_pmh(&model, &data, &spec, &config).unwrap();
        assert_eq!(chain.records.len(), 21);
        assert!(chain.records[0].accepted);
        let accepted = chain.records.iter().filter(|r| r.accepted).count();
        assert_eq!(chain.trajectories.len(), accepted);
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,a,log_z,alpha,accepted\n0,"));
        assert_eq!(text.lines().count(), 22);
        assert_eq!(run_pmh(&model, &data, &spec, &config).unwrap(), chain);
    }

    #[test]
    fn expectation_of_constants() {
        let model = ScalarLgss::default();
        let data = simulate(&model, &model.true_theta(), 5, &RngStream::new(1)).unwrap();
        let chain = run_pmh(&model, &data, &one(RandomWalk::new(0.1, -1.0, 1.0)), &PmhConfig::new(10, 8, 0)).unwrap();
        assert_eq!(expectation(&chain, |_| 2.5, 3).unwrap(), 2.5);
        assert!(expectation(&chain, |_| 1.0, 11).is_err());
    }
}
