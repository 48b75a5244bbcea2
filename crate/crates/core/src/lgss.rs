//! Scalar linear-Gaussian test model with one unknown parameter.
//!
//! `x_t = a x_{t-1} + v_t`, `y_t = c x_t + e_t`, with `a ~ U(a_lo, a_hi)`.
//! Its exact likelihood comes from [`crate::kalman`], which makes it the
//! reference model for checking the particle estimators.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::gaussian_log_pdf;
use crate::error::{Error, Result};
use crate::kalman::{LgssParams, LgssStep, LgssSteps};
use crate::model::{param_names, AdaptedSsmModel, ParamVector, SsmModel};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarLgssConfig {
    /// Value of `a` used for simulation.
    pub a: f64,
    pub c: f64,
    pub sigma_v: f64,
    pub sigma_e: f64,
    pub x0_mean: f64,
    pub x0_stddev: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub horizon: usize,
}

impl Default for ScalarLgssConfig {
    fn default() -> Self {
        Self {
            a: 0.8,
            c: 1.0,
            sigma_v: 1.0,
            sigma_e: 0.5,
            x0_mean: 0.0,
            x0_stddev: 1.0,
            a_lo: -1.0,
            a_hi: 1.0,
            horizon: 50,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalarLgss {
    config: ScalarLgssConfig,
    names: Arc<[String]>,
}

impl Default for ScalarLgss {
    fn default() -> Self {
        Self::new(ScalarLgssConfig::default()).expect("default configuration is valid")
    }
}

impl ScalarLgss {
    pub const NAME: &'static str = "lgss";

    pub fn new(config: ScalarLgssConfig) -> Result<Self> {
        let finite = [config.a, config.c, config.sigma_v, config.sigma_e, config.x0_mean, config.x0_stddev];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("lgss configuration values must be finite".into()));
        }
        if config.sigma_v < 0.0 || config.sigma_e < 0.0 || config.x0_stddev < 0.0 {
            return Err(Error::ParameterDomain("lgss standard deviations must be non-negative".into()));
        }
        if !(config.a_lo < config.a_hi) || !config.a_lo.is_finite() || !config.a_hi.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "prior bounds must satisfy a_lo < a_hi, got ({}, {})",
                config.a_lo, config.a_hi
            )));
        }
        Ok(Self { config, names: param_names(&["a"]) })
    }

    pub fn config(&self) -> &ScalarLgssConfig {
        &self.config
    }

    pub fn theta(&self, a: f64) -> ParamVector {
        ParamVector::new(self.names.clone(), vec![a]).expect("one name, one value")
    }

    pub fn true_theta(&self) -> ParamVector {
        self.theta(self.config.a)
    }

    /// The same model in the general linear-Gaussian form.
    pub fn lgss_params(&self, theta: &ParamVector) -> LgssParams {
        let c = &self.config;
        LgssParams {
            m0: DVector::from_element(1, c.x0_mean),
            p0: DMatrix::from_element(1, 1, c.x0_stddev * c.x0_stddev),
            steps: LgssSteps::Constant(LgssStep::scalar(theta[0], 0.0, c.sigma_v, c.c, c.sigma_e)),
        }
    }

    /// Moments of `x_t | x_{t-1}, y_t` and the predictive density of `y_t`.
    fn conditional(&self, a: f64, prev: f64, y: f64) -> (f64, f64, f64) {
        let c = &self.config;
        let mu = a * prev;
        let p = c.sigma_v * c.sigma_v;
        let s = c.c * c.c * p + c.sigma_e * c.sigma_e;
        let gain = p * c.c / s;
        let mean = mu + gain * (y - c.c * mu);
        let var = p * c.sigma_e * c.sigma_e / s;
        (mean, var.sqrt(), gaussian_log_pdf(y, c.c * mu, s.sqrt()))
    }
}

impl SsmModel for ScalarLgss {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn param_names(&self) -> &Arc<[String]> {
        &self.names
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        let (lo, hi) = (self.config.a_lo, self.config.a_hi);
        if (lo..hi).contains(&theta[0]) {
            -(hi - lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamVector {
        let (lo, hi) = (self.config.a_lo, self.config.a_hi);
        self.theta(lo + (hi - lo) * rng.uniform())
    }

    fn sample_initial(&self, _: &ParamVector, rng: &mut RngStream, x0: &mut [f64]) {
        x0[0] = self.config.x0_mean + self.config.x0_stddev * rng.standard_normal();
    }

    fn sample_transition(&self, theta: &ParamVector, prev: &[f64], _: usize, rng: &mut RngStream, next: &mut [f64]) {
        next[0] = theta[0] * prev[0] + self.config.sigma_v * rng.standard_normal();
    }

    fn log_obs_density(&self, _: &ParamVector, x: &[f64], y: &[f64], _: usize) -> f64 {
        gaussian_log_pdf(y[0], self.config.c * x[0], self.config.sigma_e)
    }

    fn sample_observation(&self, _: &ParamVector, x: &[f64], _: usize, rng: &mut RngStream, y: &mut [f64]) {
        y[0] = self.config.c * x[0] + self.config.sigma_e * rng.standard_normal();
    }
}

impl AdaptedSsmModel for ScalarLgss {
    fn sample_transition_cond(&self, theta: &ParamVector, prev: &[f64], y: &[f64], _: usize, rng: &mut RngStream, next: &mut [f64]) {
        let (mean, sd, _) = self.conditional(theta[0], prev[0], y[0]);
        next[0] = mean + sd * rng.standard_normal();
    }

    fn log_predictive(&self, theta: &ParamVector, prev: &[f64], y: &[f64], _: usize) -> f64 {
        self.conditional(theta[0], prev[0], y[0]).2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapted_capabilities_satisfy_bayes() {
        // p(x|x_prev) p(y|x) = p(y|x_prev) p(x|x_prev, y), checked pointwise.
        let model = ScalarLgss::default();
        let theta = model.theta(0.7);
        let c = model.config();
        for (prev, y, x) in [(0.3, -0.4, 0.1), (-1.5, 2.0, 0.8), (0.0, 0.0, 0.0)] {
            let lhs = gaussian_log_pdf(x, 0.7 * prev, c.sigma_v) + model.log_obs_density(&theta, &[x], &[y], 1);
            let (m, sd, lp) = model.conditional(0.7, prev, y);
            assert!((lp - model.log_predictive(&theta, &[prev], &[y], 1)).abs() < 1e-15);
            let rhs = lp + gaussian_log_pdf(x, m, sd);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn prior_support() {
        let model = ScalarLgss::default();
        assert_eq!(model.log_prior(&model.theta(0.0)), -(2f64.ln()));
        assert_eq!(model.log_prior(&model.theta(1.0)), f64::NEG_INFINITY);
        assert_eq!(model.log_prior(&model.theta(-1.5)), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = ScalarLgssConfig { sigma_e: -1.0, ..Default::default() };
        assert!(ScalarLgss::new(bad).is_err());
        let bad = ScalarLgssConfig { a_lo: 1.0, a_hi: 1.0, ..Default::default() };
        assert!(ScalarLgss::new(bad).is_err());
    }
}
