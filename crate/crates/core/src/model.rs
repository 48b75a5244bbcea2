//! The state-space model contract consumed by every estimator.
//!
//! Time is explicit in every capability: `sample_transition(θ, x_{t-1}, t)`
//! draws `x_t`, and observations are indexed `t = 1..=T`. States and
//! observations are passed as flat `f64` slices of fixed dimension so the
//! filters can keep particles in contiguous buffers.

use std::ops::Index;
use std::sync::Arc;

use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Name-keyed parameter vector. The name set is shared with (and fixed by)
/// the model that declared it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    names: Arc<[String]>,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(names: Arc<[String]>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} parameter names but {} values",
                names.len(),
                values.len()
            )));
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn shared_names(&self) -> &Arc<[String]> {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_owned()))
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[self.position(name)?])
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.position(name)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn set_index(&mut self, i: usize, value: f64) {
        self.values[i] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.names.iter().map(String::as_str).zip(self.values.iter().copied())
    }

    /// True when both vectors declare the same names in the same order.
    pub fn same_space(&self, names: &[String]) -> bool {
        *self.names == *names
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

pub fn param_names(names: &[&str]) -> Arc<[String]> {
    names.iter().map(|s| s.to_string()).collect()
}

/// A probabilistic state-space model `p(θ) p(x_0|θ) Π p(x_t|x_{t-1},θ) p(y_t|x_t,θ)`.
///
/// The transition only needs to be simulable; no estimator evaluates its
/// density.
pub trait SsmModel: Sync {
    fn name(&self) -> &str;
    fn param_names(&self) -> &Arc<[String]>;
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn log_prior(&self, theta: &ParamVector) -> f64;
    fn sample_prior(&self, rng: &mut RngStream) -> ParamVector;

    fn sample_initial(&self, theta: &ParamVector, rng: &mut RngStream, x0: &mut [f64]);

    fn sample_transition(
        &self,
        theta: &ParamVector,
        prev: &[f64],
        t: usize,
        rng: &mut RngStream,
        next: &mut [f64],
    );

    /// `ln p(y_t | x_t, θ)`. Must be finite or `-inf`, never NaN, for finite inputs.
    fn log_obs_density(&self, theta: &ParamVector, x: &[f64], y: &[f64], t: usize) -> f64;

    /// Draws `y_t ~ p(y_t | x_t, θ)`; used by the simulators.
    fn sample_observation(
        &self,
        theta: &ParamVector,
        x: &[f64],
        t: usize,
        rng: &mut RngStream,
        y: &mut [f64],
    );

    /// Rejects parameter vectors that were built for another model.
    fn check_params(&self, theta: &ParamVector) -> Result<()> {
        if theta.same_space(self.param_names()) {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "model `{}` expects parameters {:?}, got {:?}",
                self.name(),
                self.param_names(),
                theta.names()
            )))
        }
    }
}

/// Models whose observation-conditioned transition `p(x_t | x_{t-1}, y_t, θ)`
/// and predictive `p(y_t | x_{t-1}, θ)` are available in closed form.
pub trait AdaptedSsmModel: SsmModel {
    fn sample_transition_cond(
        &self,
        theta: &ParamVector,
        prev: &[f64],
        y: &[f64],
        t: usize,
        rng: &mut RngStream,
        next: &mut [f64],
    );

    fn log_predictive(&self, theta: &ParamVector, prev: &[f64], y: &[f64], t: usize) -> f64;
}

/// Draws `x_{0:T}` and `y_{1:T}` from the model at `theta`.
///
/// Stream layout: `x_0` from `rng.child(0)`, `x_t` from `rng.child(t).child(0)`
/// and `y_t` from `rng.child(t).child(1)`.
pub fn simulate<M: SsmModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    horizon: usize,
    rng: &RngStream,
) -> Result<Dataset> {
    model.check_params(theta)?;
    if horizon == 0 {
        return Err(Error::Precondition("horizon must be at least 1".into()));
    }
    let (dx, dy) = (model.state_dim(), model.obs_dim());
    let mut states = vec![0.0; (horizon + 1) * dx];
    let mut obs = vec![0.0; horizon * dy];
    model.sample_initial(theta, &mut rng.child(0), &mut states[..dx]);
    for t in 1..=horizon {
        let step = rng.child(t as u64);
        let (done, rest) = states.split_at_mut(t * dx);
        let prev = &done[(t - 1) * dx..];
        let next = &mut rest[..dx];
        model.sample_transition(theta, prev, t, &mut step.child(0), next);
        model.sample_observation(theta, next, t, &mut step.child(1), &mut obs[(t - 1) * dy..t * dy]);
    }
    Dataset::new(dy, obs)?.with_states(dx, states)?.with_theta(theta.clone())
}

/// Number of time steps simulated per probe by [`validate`].
pub const PROBE_HORIZON: usize = 50;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub probes: usize,
    pub steps_per_probe: usize,
    pub state_dim: usize,
    pub obs_dim: usize,
    /// States with an infinite component.
    pub infinite_states: usize,
    /// Observation log-densities equal to `+inf`.
    pub infinite_log_densities: usize,
    pub prior_support_violation: bool,
}

impl ValidationReport {
    pub fn faults(&self) -> usize {
        self.infinite_states + self.infinite_log_densities + usize::from(self.prior_support_violation)
    }
}

/// Runs `probe_count` simulations of [`PROBE_HORIZON`] steps at `theta` and
/// checks every capability output. NaN anywhere is a contract breach and is
/// reported as a [`Error::ModelFault`] naming the capability.
pub fn validate<M: SsmModel + ?Sized>(
    model: &M,
    theta: &ParamVector,
    probe_count: usize,
    rng: &RngStream,
) -> Result<ValidationReport> {
    if probe_count == 0 {
        return Err(Error::Precondition("probe_count must be at least 1".into()));
    }
    model.check_params(theta)?;
    let (dx, dy) = (model.state_dim(), model.obs_dim());
    let mut report = ValidationReport {
        probes: probe_count,
        steps_per_probe: PROBE_HORIZON,
        state_dim: dx,
        obs_dim: dy,
        ..Default::default()
    };
    let lp = model.log_prior(theta);
    if lp.is_nan() {
        return Err(fault("log_prior", 0, "returned NaN"));
    }
    report.prior_support_violation = lp == f64::NEG_INFINITY;

    let mut prev = vec![0.0; dx];
    let mut next = vec![0.0; dx];
    let mut y = vec![0.0; dy];
    for probe in 0..probe_count {
        let stream = rng.child(probe as u64);
        model.sample_initial(theta, &mut stream.child(0), &mut prev);
        check_state(&prev, "sample_initial", 0, &mut report)?;
        for t in 1..=PROBE_HORIZON {
            let step = stream.child(t as u64);
            model.sample_transition(theta, &prev, t, &mut step.child(0), &mut next);
            check_state(&next, "sample_transition", t, &mut report)?;
            model.sample_observation(theta, &next, t, &mut step.child(1), &mut y);
            if y.iter().any(|v| v.is_nan()) {
                return Err(fault("sample_observation", t, "produced NaN"));
            }
            let ld = model.log_obs_density(theta, &next, &y, t);
            if ld.is_nan() {
                return Err(fault("log_obs_density", t, "returned NaN"));
            }
            if ld == f64::INFINITY {
                report.infinite_log_densities += 1;
            }
            std::mem::swap(&mut prev, &mut next);
        }
    }
    Ok(report)
}

fn check_state(x: &[f64], capability: &'static str, t: usize, report: &mut ValidationReport) -> Result<()> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(fault(capability, t, "produced NaN state"));
    }
    if x.iter().any(|v| v.is_infinite()) {
        report.infinite_states += 1;
    }
    Ok(())
}

pub(crate) fn fault(capability: &'static str, t: usize, detail: &str) -> Error {
    Error::ModelFault {
        capability,
        t,
        detail: detail.to_owned(),
    }
}
