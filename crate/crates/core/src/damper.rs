//! Nonlinear spring-damper benchmark.
//!
//! A mass on a spring with Coulomb and viscous friction, discretized by
//! forward Euler with sampling time `ts`:
//!
//! ```text
//! s'    = s + ts * v
//! v'    = v + (ts / m) * (-f_c * sign(v) - c_0 * v - k * sign(s) * |s|^p) + N(0, sigma_v²)
//! y     = s + N(0, sigma_e²)
//! ```
//!
//! with `sign(0) = 1`. Unknowns are `(k, p, f_c, c_0)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::dist::{gaussian_log_pdf, Distribution};
use crate::error::{Error, Result};
use crate::kalman::LgssStep;
use crate::model::{param_names, simulate, AdaptedSsmModel, ParamVector, SsmModel};
use crate::pmh::{ProposalSpec, RandomWalk};
use crate::rng::RngStream;

pub const PARAM_NAMES: [&str; 4] = ["k", "p", "f_c", "c_0"];
const K: usize = 0;
const P: usize = 1;
const FC: usize = 2;
const C0: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamperTheta {
    pub k: f64,
    pub p: f64,
    pub f_c: f64,
    pub c_0: f64,
}

impl Default for DamperTheta {
    fn default() -> Self {
        Self { k: 2.16, p: 0.58, f_c: 0.01, c_0: 0.71 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DamperConfig {
    pub ts: f64,
    pub mass: f64,
    pub horizon: usize,
    pub sigma_v: f64,
    pub sigma_e: f64,
    pub s0: f64,
    pub sdot0: f64,
    pub theta_true: DamperTheta,
}

impl Default for DamperConfig {
    fn default() -> Self {
        Self {
            ts: 0.1,
            mass: 8.0,
            horizon: 1000,
            sigma_v: 0.01,
            sigma_e: 0.1,
            s0: 0.5,
            sdot0: 0.0,
            theta_true: DamperTheta::default(),
        }
    }
}

impl DamperConfig {
    pub fn validate(&self) -> Result<()> {
        let th = &self.theta_true;
        let checks = [
            (self.ts > 0.0, "ts must be positive"),
            (self.mass > 0.0, "mass must be positive"),
            (self.sigma_v >= 0.0, "sigma_v must be non-negative"),
            (self.sigma_e >= 0.0, "sigma_e must be non-negative"),
            (self.s0.is_finite() && self.sdot0.is_finite(), "initial state must be finite"),
            ((0.0..=1.0).contains(&th.p), "p must lie in [0, 1]"),
            (th.k >= 0.0 && th.k.is_finite(), "k must be non-negative"),
            (th.f_c >= 0.0 && th.f_c.is_finite(), "f_c must be non-negative"),
            (th.c_0 >= 0.0 && th.c_0.is_finite(), "c_0 must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::ParameterDomain(format!("damper configuration: {msg}"))),
            None => Ok(()),
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Debug)]
pub struct Damper {
    config: DamperConfig,
    names: Arc<[String]>,
    priors: [Distribution; 4],
}

impl Default for Damper {
    fn default() -> Self {
        Self::new(DamperConfig::default()).expect("default configuration is valid")
    }
}

impl Damper {
    pub const NAME: &'static str = "damper";

    pub fn new(config: DamperConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            names: param_names(&PARAM_NAMES),
            priors: Self::priors(),
        })
    }

    /// Independent priors on `(k, p, f_c, c_0)`; Gamma is (shape, scale).
    pub fn priors() -> [Distribution; 4] {
        [
            Distribution::gamma(4.0, 0.3).expect("valid"),
            Distribution::uniform(0.0, 1.0).expect("valid"),
            Distribution::gamma(2.0, 0.01).expect("valid"),
            Distribution::gamma(2.0, 1.0).expect("valid"),
        ]
    }

    pub fn config(&self) -> &DamperConfig {
        &self.config
    }

    pub fn theta(&self, values: DamperTheta) -> ParamVector {
        ParamVector::new(self.names.clone(), vec![values.k, values.p, values.f_c, values.c_0]).expect("four values")
    }

    pub fn true_theta(&self) -> ParamVector {
        self.theta(self.config.theta_true)
    }

    /// Truncated Gaussian random walks with the benchmark's step sizes.
    pub fn default_proposal(&self) -> ProposalSpec {
        let inf = f64::INFINITY;
        ProposalSpec::new(
            self.names.clone(),
            vec![
                RandomWalk::new(1e-2, 0.0, inf),
                RandomWalk::new(1e-2, 0.0, 1.0),
                RandomWalk::new(1e-3, 0.0, inf),
                RandomWalk::new(1e-2, 0.0, 1.0),
            ],
        )
        .expect("valid walks")
    }

    /// Noise-free Euler step from `(s, v)`.
    pub fn drift(&self, theta: &ParamVector, s: f64, v: f64) -> (f64, f64) {
        let c = &self.config;
        let force = -theta[FC] * sign(v) - theta[C0] * v - theta[K] * sign(s) * s.abs().powf(theta[P]);
        (s + c.ts * v, v + c.ts / c.mass * force)
    }

    /// The transition as a linear-Gaussian step; exact only for `p = 1`, `f_c = 0`.
    pub fn linear_step(&self, theta: &ParamVector) -> LgssStep {
        let c = &self.config;
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[1.0, c.ts, -c.ts * theta[K] / c.mass, 1.0 - c.ts * theta[C0] / c.mass],
        );
        LgssStep {
            a,
            b: DVector::zeros(2),
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, c.sigma_v * c.sigma_v])),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            r: DMatrix::from_element(1, 1, c.sigma_e * c.sigma_e),
        }
    }

    /// Simulates `config.horizon` observations at the configured true parameters.
    pub fn simulate(&self, rng: &RngStream) -> Result<Dataset> {
        simulate(self, &self.true_theta(), self.config.horizon, rng)
    }
}

impl SsmModel for Damper {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn param_names(&self) -> &Arc<[String]> {
        &self.names
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        self.priors.iter().enumerate().map(|(i, d)| d.log_pdf(theta[i])).sum()
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamVector {
        let values = self
            .priors
            .iter()
            .enumerate()
            .map(|(i, d)| d.sample(&mut rng.child(i as u64)))
            .collect();
        ParamVector::new(self.names.clone(), values).expect("four values")
    }

    fn sample_initial(&self, _: &ParamVector, _: &mut RngStream, x0: &mut [f64]) {
        x0[0] = self.config.s0;
        x0[1] = self.config.sdot0;
    }

    fn sample_transition(&self, theta: &ParamVector, prev: &[f64], _: usize, rng: &mut RngStream, next: &mut [f64]) {
        let (s, v) = self.drift(theta, prev[0], prev[1]);
        next[0] = s;
        next[1] = v + self.config.sigma_v * rng.standard_normal();
    }

    fn log_obs_density(&self, _: &ParamVector, x: &[f64], y: &[f64], _: usize) -> f64 {
        gaussian_log_pdf(y[0], x[0], self.config.sigma_e)
    }

    fn sample_observation(&self, _: &ParamVector, x: &[f64], _: usize, rng: &mut RngStream, y: &mut [f64]) {
        y[0] = x[0] + self.config.sigma_e * rng.standard_normal();
    }
}

/// The observed position is a deterministic function of the previous state,
/// so the predictive is Gaussian and conditioning on `y_t` leaves the
/// velocity transition unchanged.
impl AdaptedSsmModel for Damper {
    fn sample_transition_cond(&self, theta: &ParamVector, prev: &[f64], _: &[f64], t: usize, rng: &mut RngStream, next: &mut [f64]) {
        self.sample_transition(theta, prev, t, rng, next)
    }

    fn log_predictive(&self, _: &ParamVector, prev: &[f64], y: &[f64], _: usize) -> f64 {
        gaussian_log_pdf(y[0], prev[0] + self.config.ts * prev[1], self.config.sigma_e)
    }
}
