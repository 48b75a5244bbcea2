//! Likelihood estimators: vanilla Monte Carlo, the bootstrap particle filter
//! and the fully adapted auxiliary particle filter.
//!
//! Every estimator returns `ln ẑ`; weights never leave the log domain except
//! through [`crate::resampling::normalize_into`]. Random streams are laid
//! out as `rng.child(t).child(n)` for particle `n` at time `t` and
//! `rng.child(t).child(RESAMPLE_STREAM)` for the resampling step, so the
//! result does not depend on how particles are scheduled across threads.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{fault, AdaptedSsmModel, ParamVector, SsmModel};
use crate::resampling::{normalize_into, Resampler};
use crate::rng::RngStream;
use crate::stats::logsumexp;

/// Stream index reserved for resampling draws at each time step.
pub const RESAMPLE_STREAM: u64 = u64::MAX;

/// Particle counts below this run sequentially.
pub const PARALLEL_MIN_PARTICLES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Vanilla,
    Bootstrap,
    Apf,
    Rbpf,
    Kalman,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Bootstrap => "bootstrap",
            Method::Apf => "apf",
            Method::Rbpf => "rbpf",
            Method::Kalman => "kalman",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogLikEstimate {
    /// `ln ẑ`; `-inf` when every particle died.
    pub log_z: f64,
    pub method: Method,
    pub n_particles: usize,
    pub horizon: usize,
}

/// Particles, log-weights and ancestors of a bootstrap filter run.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    state_dim: usize,
    n_particles: usize,
    /// `states[t]` holds the `N` particles at time `t = 0..=T`, row-major.
    states: Vec<Vec<f64>>,
    /// `log_weights[t - 1]` for `t = 1..=T`.
    log_weights: Vec<Vec<f64>>,
    /// `ancestors[t - 1][n]` indexes the time `t - 1` parent of particle `n`.
    ancestors: Vec<Vec<usize>>,
}

impl ParticleSystem {
    pub fn horizon(&self) -> usize {
        self.log_weights.len()
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn particle(&self, t: usize, n: usize) -> &[f64] {
        &self.states[t][n * self.state_dim..(n + 1) * self.state_dim]
    }

    pub fn log_weights(&self, t: usize) -> &[f64] {
        &self.log_weights[t - 1]
    }

    pub fn ancestors(&self, t: usize) -> &[usize] {
        &self.ancestors[t - 1]
    }

    /// The path `x_{0:T}` ending in particle `n`, found by following ancestors.
    pub fn trajectory(&self, n: usize) -> Vec<f64> {
        let d = self.state_dim;
        let horizon = self.horizon();
        let mut out = vec![0.0; (horizon + 1) * d];
        let mut idx = n;
        for t in (0..=horizon).rev() {
            out[t * d..(t + 1) * d].copy_from_slice(self.particle(t, idx));
            if t > 0 {
                idx = self.ancestors[t - 1][idx];
            }
        }
        out
    }

    /// Draws one surviving path with probability proportional to its final weight.
    pub fn sample_trajectory(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let mut weights = vec![0.0; self.n_particles];
        normalize_into(self.log_weights(self.horizon()), &mut weights)?;
        let mut pick = [0usize];
        Resampler::Multinomial.resample(&weights, rng, &mut pick)?;
        Ok(self.trajectory(pick[0]))
    }
}

fn check_inputs<M: SsmModel + ?Sized>(model: &M, theta: &ParamVector, data: &Dataset, n: usize) -> Result<()> {
    model.check_params(theta)?;
    if n == 0 {
        return Err(Error::Precondition("at least one particle is required".into()));
    }
    if data.obs_dim() != model.obs_dim() {
        return Err(Error::Dimension(format!(
            "model `{}` observes {}-vectors but the data has dimension {}",
            model.name(),
            model.obs_dim(),
            data.obs_dim()
        )));
    }
    Ok(())
}

/// Runs `f(n, state_n, log_w_n)` over all particles, in parallel for large `N`.
fn per_particle<F>(states: &mut [f64], log_w: &mut [f64], dim: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut f64) + Sync + Send,
{
    if log_w.len() >= PARALLEL_MIN_PARTICLES {
        states
            .par_chunks_mut(dim)
            .zip(log_w.par_iter_mut())
            .enumerate()
            .for_each(|(n, (x, w))| f(n, x, w));
    } else {
        states
            .chunks_mut(dim)
            .zip(log_w.iter_mut())
            .enumerate()
            .for_each(|(n, (x, w))| f(n, x, w));
    }
}

pub(crate) fn check_log_weights(log_w: &[f64], capability: &'static str, t: usize) -> Result<()> {
    match log_w.iter().find(|w| w.is_nan() || **w == f64::INFINITY) {
        Some(w) => Err(fault(capability, t, &format!("returned {w}"))),
        None => Ok(()),
    }
}

fn sample_initial_all<M: SsmModel + ?Sized>(model: &M, theta: &ParamVector, n: usize, rng: &RngStream) -> Vec<f64> {
    let d = model.state_dim();
    let mut x = vec![0.0; n * d];
    let mut dummy = vec![0.0; n];
    let stream = rng.child(0);
    per_particle(&mut x, &mut dummy, d, |i, xi, _| {
        model.sample_initial(theta, &mut stream.child(i as u64), xi)
    });
    x
}

/// Averages the observation likelihood over `N` independent trajectories
/// simulated from the prior dynamics.
pub fn vanilla_mc_loglik<M: SsmModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    data: &Dataset,
    n: usize,
    rng: &RngStream,
) -> Result<LogLikEstimate> {
    check_inputs(model, theta, data, n)?;
    let d = model.state_dim();
    let horizon = data.horizon();
    let mut current = sample_initial_all(model, theta, n, rng);
    let mut next = vec![0.0; n * d];
    let mut total = vec![0.0; n];
    let mut log_w = vec![0.0; n];
    for t in 1..=horizon {
        let stream = rng.child(t as u64);
        let y = data.obs(t);
        let prev = &current;
        per_particle(&mut next, &mut log_w, d, |i, x, w| {
            model.sample_transition(theta, &prev[i * d..(i + 1) * d], t, &mut stream.child(i as u64), x);
            *w = model.log_obs_density(theta, x, y, t);
        });
        check_log_weights(&log_w, "log_obs_density", t)?;
        for (acc, w) in total.iter_mut().zip(&log_w) {
            *acc += w;
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(LogLikEstimate {
        log_z: logsumexp(&total) - (n as f64).ln(),
        method: Method::Vanilla,
        n_particles: n,
        horizon,
    })
}

/// Bootstrap particle filter: `x_0 ~ p(x_0)`, propagate to `x_1` and weight;
/// for `t >= 2` resample, propagate and weight. `ln ẑ` is the sum of the
/// per-step log mean weights.
pub fn bootstrap_pf<M: SsmModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    data: &Dataset,
    n: usize,
    resampler: Resampler,
    rng: &RngStream,
    keep_history: bool,
) -> Result<(LogLikEstimate, Option<ParticleSystem>)> {
    check_inputs(model, theta, data, n)?;
    let d = model.state_dim();
    let horizon = data.horizon();
    let mut estimate = LogLikEstimate { log_z: 0.0, method: Method::Bootstrap, n_particles: n, horizon };

    let mut current = sample_initial_all(model, theta, n, rng);
    let mut next = vec![0.0; n * d];
    let mut log_w = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut ancestors: Vec<usize> = (0..n).collect();
    let mut history = keep_history.then(|| ParticleSystem {
        state_dim: d,
        n_particles: n,
        states: vec![current.clone()],
        log_weights: Vec::with_capacity(horizon),
        ancestors: Vec::with_capacity(horizon),
    });

    for t in 1..=horizon {
        let stream = rng.child(t as u64);
        if t > 1 {
            resampler.resample(&weights, &mut stream.child(RESAMPLE_STREAM), &mut ancestors)?;
        }
        let y = data.obs(t);
        let (prev, anc) = (&current, &ancestors);
        per_particle(&mut next, &mut log_w, d, |i, x, w| {
            let a = anc[i];
            model.sample_transition(theta, &prev[a * d..(a + 1) * d], t, &mut stream.child(i as u64), x);
            *w = model.log_obs_density(theta, x, y, t);
        });
        check_log_weights(&log_w, "log_obs_density", t)?;
        if let Some(h) = history.as_mut() {
            h.states.push(next.clone());
            h.log_weights.push(log_w.clone());
            h.ancestors.push(ancestors.clone());
        }
        match normalize_into(&log_w, &mut weights) {
            Ok(log_mean) => estimate.log_z += log_mean,
            Err(Error::DegenerateWeights) => {
                estimate.log_z = f64::NEG_INFINITY;
                return Ok((estimate, None));
            }
            Err(e) => return Err(e),
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok((estimate, history))
}

/// Fully adapted auxiliary particle filter: resample on the predictive
/// likelihood `p(y_t | x_{t-1})`, then propagate from `p(x_t | x_{t-1}, y_t)`.
pub fn fully_adapted_apf<M: AdaptedSsmModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    data: &Dataset,
    n: usize,
    resampler: Resampler,
    rng: &RngStream,
) -> Result<LogLikEstimate> {
    check_inputs(model, theta, data, n)?;
    let d = model.state_dim();
    let horizon = data.horizon();
    let mut estimate = LogLikEstimate { log_z: 0.0, method: Method::Apf, n_particles: n, horizon };

    let mut current = sample_initial_all(model, theta, n, rng);
    let mut next = vec![0.0; n * d];
    let mut log_nu = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut ancestors = vec![0usize; n];

    for t in 1..=horizon {
        let stream = rng.child(t as u64);
        let y = data.obs(t);
        let prev = &current;
        per_particle(&mut next, &mut log_nu, d, |i, _, w| {
            *w = model.log_predictive(theta, &prev[i * d..(i + 1) * d], y, t);
        });
        check_log_weights(&log_nu, "log_predictive", t)?;
        match normalize_into(&log_nu, &mut weights) {
            Ok(log_mean) => estimate.log_z += log_mean,
            Err(Error::DegenerateWeights) => {
                estimate.log_z = f64::NEG_INFINITY;
                return Ok(estimate);
            }
            Err(e) => return Err(e),
        }
        resampler.resample(&weights, &mut stream.child(RESAMPLE_STREAM), &mut ancestors)?;
        let anc = &ancestors;
        per_particle(&mut next, &mut log_nu, d, |i, x, _| {
            let a = anc[i];
            model.sample_transition_cond(theta, &prev[a * d..(a + 1) * d], y, t, &mut stream.child(i as u64), x);
        });
        std::mem::swap(&mut current, &mut next);
    }
    Ok(estimate)
}
