//! Rao-Blackwellized particle filter for conditionally linear-Gaussian models.
//!
//! ```text
//! x^n_t = f_n(x^n_{t-1}) + A_n(x^n_{t-1}) x^l_{t-1} + v^n_t
//! x^l_t = f_l(x^n_{t-1}) + A_l(x^n_{t-1}) x^l_{t-1} + v^l_t
//! y_t   = g(x^n_t) + C(x^n_t) x^l_t + e_t
//! ```
//!
//! `(v^n, v^l) ~ N(0, [[Q_n, Q_nl], [Q_nlᵀ, Q_l]])`, `e ~ N(0, R)`. Particles
//! carry `x^n` and a Gaussian belief over `x^l`.
//!
//! Per step: weight each particle by the Kalman predictive of `y_t` and
//! update its belief; resample; draw `x^n_{t+1}`; condition the belief on
//! the sampled `x^n_{t+1}`; predict `x^l_{t+1}`.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kalman::{self, checked_cholesky, gaussian_log_density, GaussianBelief};
use crate::model::{param_names, ParamVector, SsmModel};
use crate::resampling::{normalize_into, Resampler};
use crate::rng::RngStream;
use crate::smc::{check_log_weights, LogLikEstimate, Method, PARALLEL_MIN_PARTICLES, RESAMPLE_STREAM};

/// Transition terms evaluated at `x^n_{t-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClgDynamics {
    pub f_n: DVector<f64>,
    pub a_n: DMatrix<f64>,
    pub f_l: DVector<f64>,
    pub a_l: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClgNoise {
    pub q_n: DMatrix<f64>,
    pub q_l: DMatrix<f64>,
    /// Cross-covariance of `v^n` and `v^l`.
    pub q_nl: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl ClgNoise {
    pub fn joint_process(&self) -> DMatrix<f64> {
        let (dn, dl) = (self.q_n.nrows(), self.q_l.nrows());
        let mut q = DMatrix::zeros(dn + dl, dn + dl);
        q.view_mut((0, 0), (dn, dn)).copy_from(&self.q_n);
        q.view_mut((dn, dn), (dl, dl)).copy_from(&self.q_l);
        q.view_mut((0, dn), (dn, dl)).copy_from(&self.q_nl);
        q.view_mut((dn, 0), (dl, dn)).copy_from(&self.q_nl.transpose());
        q
    }
}

pub trait ClgModel: Sync {
    fn name(&self) -> &str;
    fn param_names(&self) -> &Arc<[String]>;
    fn nonlinear_dim(&self) -> usize;
    fn linear_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;

    fn log_prior(&self, theta: &ParamVector) -> f64;
    fn sample_prior(&self, rng: &mut RngStream) -> ParamVector;

    fn sample_initial_nonlinear(&self, theta: &ParamVector, rng: &mut RngStream, x_n: &mut [f64]);
    /// Belief over `x^l_0`, independent of `x^n_0`.
    fn initial_linear(&self, theta: &ParamVector) -> GaussianBelief;
    /// Terms of the transition into time `t`, evaluated at `x^n_{t-1}`.
    fn dynamics(&self, theta: &ParamVector, x_n: &[f64], t: usize) -> ClgDynamics;
    /// `(g(x^n_t), C(x^n_t))`.
    fn observation(&self, theta: &ParamVector, x_n: &[f64], t: usize) -> (DVector<f64>, DMatrix<f64>);
    fn noise(&self, theta: &ParamVector) -> ClgNoise;
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbParticle {
    pub x_n: DVector<f64>,
    pub belief: GaussianBelief,
}

/// Draws from `N(mean, cov)` for a PSD `cov`, falling back to an eigen
/// factor when `cov` is singular.
pub fn sample_mvn(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut RngStream) -> DVector<f64> {
    let d = mean.len();
    let z = DVector::from_fn(d, |_, _| rng.standard_normal());
    let factor = match Cholesky::new(cov.clone()) {
        Some(ch) => ch.l(),
        None => {
            let eig = SymmetricEigen::new(cov.clone());
            let scale = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            eig.eigenvectors * DMatrix::from_diagonal(&scale)
        }
    };
    mean + factor * z
}

/// Noise terms shared by every particle for one run.
struct Prepared {
    noise: ClgNoise,
    /// `Q_nlᵀ Q_n⁻¹`, absent when the noises are uncorrelated.
    gain: Option<DMatrix<f64>>,
    /// `Q_l - Q_nlᵀ Q_n⁻¹ Q_nl`.
    q_l_cond: DMatrix<f64>,
}

impl Prepared {
    fn new(noise: ClgNoise, dn: usize, dl: usize, dy: usize) -> Result<Self> {
        let shape = |m: &DMatrix<f64>, r: usize, c: usize| m.nrows() == r && m.ncols() == c;
        if !(shape(&noise.q_n, dn, dn) && shape(&noise.q_l, dl, dl) && shape(&noise.q_nl, dn, dl) && shape(&noise.r, dy, dy)) {
            return Err(Error::Dimension("noise covariances do not match the model dimensions".into()));
        }
        kalman::sanitize_cov(noise.joint_process())?;
        if noise.q_nl.iter().all(|v| *v == 0.0) {
            let q_l_cond = noise.q_l.clone();
            return Ok(Self { noise, gain: None, q_l_cond });
        }
        let chol = checked_cholesky(&noise.q_n)?;
        let gain = chol.solve(&noise.q_nl).transpose();
        let q_l_cond = kalman::sanitize_cov(&noise.q_l - &gain * &noise.q_nl)?;
        Ok(Self { noise, gain: Some(gain), q_l_cond })
    }
}

fn check_dims<C: ClgModel + ?Sized>(model: &C, dynamics: &ClgDynamics, dn: usize, dl: usize) -> Result<()> {
    let d = dynamics;
    let ok = d.f_n.len() == dn
        && d.a_n.shape() == (dn, dl)
        && d.f_l.len() == dl
        && d.a_l.shape() == (dl, dl);
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(format!("model `{}` returned dynamics of the wrong shape", model.name())))
    }
}

/// Draws `x^n_t` for one particle and moves its belief to `x^l_t`.
fn propagate<C: ClgModel + ?Sized>(
    model: &C,
    theta: &ParamVector,
    prep: &Prepared,
    particle: &RbParticle,
    t: usize,
    rng: &mut RngStream,
) -> Result<RbParticle> {
    let (dn, dl) = (model.nonlinear_dim(), model.linear_dim());
    let dyn_ = model.dynamics(theta, particle.x_n.as_slice(), t);
    check_dims(model, &dyn_, dn, dl)?;
    let belief = &particle.belief;

    let mean_n = &dyn_.f_n + &dyn_.a_n * &belief.mean;
    let cov_n = kalman::sanitize_cov(&dyn_.a_n * &belief.cov * dyn_.a_n.transpose() + &prep.noise.q_n)?;
    let x_n = sample_mvn(&mean_n, &cov_n, rng);

    // x^n_t - f_n = A_n x^l_{t-1} + v^n is a measurement of x^l_{t-1}.
    let innovation = &x_n - &dyn_.f_n;
    let conditioned = if dyn_.a_n.iter().all(|v| *v == 0.0) {
        belief.clone()
    } else {
        kalman::update(belief, &dyn_.a_n, &prep.noise.q_n, &innovation)?.0
    };

    let next = match &prep.gain {
        None => kalman::predict(&conditioned, &dyn_.a_l, &dyn_.f_l, &prep.q_l_cond)?,
        Some(g) => {
            let a = &dyn_.a_l - g * &dyn_.a_n;
            let b = &dyn_.f_l + g * &innovation;
            kalman::predict(&conditioned, &a, &b, &prep.q_l_cond)?
        }
    };
    Ok(RbParticle { x_n, belief: next })
}

/// Conditions the belief on `y_t` and returns the log predictive weight.
fn weigh<C: ClgModel + ?Sized>(model: &C, theta: &ParamVector, prep: &Prepared, particle: &mut RbParticle, y: &DVector<f64>, t: usize) -> Result<f64> {
    let (g, c) = model.observation(theta, particle.x_n.as_slice(), t);
    if g.len() != y.len() || c.shape() != (y.len(), model.linear_dim()) {
        return Err(Error::Dimension(format!("model `{}` returned an observation of the wrong shape", model.name())));
    }
    let (post, log_w) = kalman::update(&particle.belief, &c, &prep.noise.r, &(y - g))?;
    particle.belief = post;
    Ok(log_w)
}

/// Applies `f` to every particle, in parallel for large sets; the first
/// failing index determines the error.
fn map_particles<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = if n >= PARALLEL_MIN_PARTICLES {
        (0..n).into_par_iter().map(&f).collect()
    } else {
        (0..n).map(&f).collect()
    };
    results.into_iter().collect()
}

pub fn rbpf_loglik<C: ClgModel + ?Sized>(
    model: &C,
    theta: &ParamVector,
    data: &Dataset,
    n: usize,
    resampler: Resampler,
    rng: &RngStream,
) -> Result<(LogLikEstimate, Vec<RbParticle>)> {
    if !theta.same_space(model.param_names()) {
        return Err(Error::Precondition(format!("model `{}` expects parameters {:?}", model.name(), model.param_names())));
    }
    if n == 0 {
        return Err(Error::Precondition("at least one particle is required".into()));
    }
    if data.obs_dim() != model.obs_dim() {
        return Err(Error::Dimension(format!("model `{}` observes {}-vectors, data has {}", model.name(), model.obs_dim(), data.obs_dim())));
    }
    let (dn, dl) = (model.nonlinear_dim(), model.linear_dim());
    let prep = Prepared::new(model.noise(theta), dn, dl, model.obs_dim())?;
    let horizon = data.horizon();
    let mut estimate = LogLikEstimate { log_z: 0.0, method: Method::Rbpf, n_particles: n, horizon };

    let belief0 = model.initial_linear(theta);
    if belief0.dim() != dl {
        return Err(Error::Dimension("initial linear belief has the wrong dimension".into()));
    }
    let init = rng.child(0);
    let start: Vec<RbParticle> = (0..n)
        .map(|i| {
            let mut x_n = DVector::zeros(dn);
            model.sample_initial_nonlinear(theta, &mut init.child(i as u64), x_n.as_mut_slice());
            RbParticle { x_n, belief: belief0.clone() }
        })
        .collect();
    let first = rng.child(1);
    let mut particles = map_particles(n, |i| propagate(model, theta, &prep, &start[i], 1, &mut first.child(i as u64)))?;

    let mut weights = vec![0.0; n];
    let mut ancestors = vec![0usize; n];
    for t in 1..=horizon {
        let y = DVector::from_column_slice(data.obs(t));
        let updated = map_particles(n, |i| {
            let mut p = particles[i].clone();
            let w = weigh(model, theta, &prep, &mut p, &y, t)?;
            Ok((p, w))
        })?;
        let (next, log_w): (Vec<RbParticle>, Vec<f64>) = updated.into_iter().unzip();
        particles = next;
        check_log_weights(&log_w, "observation", t)?;
        match normalize_into(&log_w, &mut weights) {
            Ok(log_mean) => estimate.log_z += log_mean,
            Err(Error::DegenerateWeights) => {
                estimate.log_z = f64::NEG_INFINITY;
                return Ok((estimate, particles));
            }
            Err(e) => return Err(e),
        }
        if t == horizon {
            break;
        }
        let stream = rng.child(t as u64 + 1);
        resampler.resample(&weights, &mut stream.child(RESAMPLE_STREAM), &mut ancestors)?;
        let current = &particles;
        let anc = &ancestors;
        particles = map_particles(n, |i| propagate(model, theta, &prep, &current[anc[i]], t + 1, &mut stream.child(i as u64)))?;
    }
    Ok((estimate, particles))
}

/// Views a CLG model as a plain state-space model over `(x^n, x^l)`, so the
/// bootstrap filter can run on the same model.
pub struct ClgAsSsm<'a, C: ClgModel + ?Sized>(pub &'a C);

impl<C: ClgModel + ?Sized> SsmModel for ClgAsSsm<'_, C> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn param_names(&self) -> &Arc<[String]> {
        self.0.param_names()
    }

    fn state_dim(&self) -> usize {
        self.0.nonlinear_dim() + self.0.linear_dim()
    }

    fn obs_dim(&self) -> usize {
        self.0.obs_dim()
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        self.0.log_prior(theta)
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamVector {
        self.0.sample_prior(rng)
    }

    fn sample_initial(&self, theta: &ParamVector, rng: &mut RngStream, x0: &mut [f64]) {
        let dn = self.0.nonlinear_dim();
        self.0.sample_initial_nonlinear(theta, rng, &mut x0[..dn]);
        let b = self.0.initial_linear(theta);
        x0[dn..].copy_from_slice(sample_mvn(&b.mean, &b.cov, rng).as_slice());
    }

    fn sample_transition(&self, theta: &ParamVector, prev: &[f64], t: usize, rng: &mut RngStream, next: &mut [f64]) {
        let dn = self.0.nonlinear_dim();
        let d = self.0.dynamics(theta, &prev[..dn], t);
        let x_l = DVector::from_column_slice(&prev[dn..]);
        let noise = sample_mvn(&DVector::zeros(prev.len()), &self.0.noise(theta).joint_process(), rng);
        let x_n = &d.f_n + &d.a_n * &x_l + noise.rows(0, dn);
        let x_l = &d.f_l + &d.a_l * &x_l + noise.rows(dn, prev.len() - dn);
        next[..dn].copy_from_slice(x_n.as_slice());
        next[dn..].copy_from_slice(x_l.as_slice());
    }

    fn log_obs_density(&self, theta: &ParamVector, x: &[f64], y: &[f64], t: usize) -> f64 {
        let dn = self.0.nonlinear_dim();
        let (g, c) = self.0.observation(theta, &x[..dn], t);
        let residual = DVector::from_column_slice(y) - g - c * DVector::from_column_slice(&x[dn..]);
        match Cholesky::new(self.0.noise(theta).r) {
            Some(ch) => gaussian_log_density(&residual, &ch),
            None => f64::NEG_INFINITY,
        }
    }

    fn sample_observation(&self, theta: &ParamVector, x: &[f64], t: usize, rng: &mut RngStream, y: &mut [f64]) {
        let dn = self.0.nonlinear_dim();
        let (g, c) = self.0.observation(theta, &x[..dn], t);
        let mean = g + c * DVector::from_column_slice(&x[dn..]);
        y.copy_from_slice(sample_mvn(&mean, &self.0.noise(theta).r, rng).as_slice());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClgBenchmarkConfig {
    /// Value of `phi` used for simulation.
    pub phi: f64,
    pub alpha: f64,
    pub c_l: f64,
    pub sigma_n: f64,
    pub sigma_l: f64,
    /// Correlation of the two process noises.
    pub rho: f64,
    pub sigma_e: f64,
    pub x_n0_stddev: f64,
    pub x_l0_stddev: f64,
    pub horizon: usize,
}

impl Default for ClgBenchmarkConfig {
    fn default() -> Self {
        Self {
            phi: 0.8,
            alpha: 0.9,
            c_l: 1.0,
            sigma_n: 0.3,
            sigma_l: 0.5,
            rho: 0.0,
            sigma_e: 0.2,
            x_n0_stddev: 1.0,
            x_l0_stddev: 1.0,
            horizon: 100,
        }
    }
}

/// Scalar benchmark with a saturating nonlinear state driven by a linear
/// AR(1) state:
///
/// `x^n' = alpha * atan(x^n) + x^l + v^n`, `x^l' = phi * x^l + v^l`,
/// `y = x^n + c_l * x^l + e`, with `phi ~ U(-1, 1)` unknown.
#[derive(Clone, Debug)]
pub struct ClgBenchmark {
    config: ClgBenchmarkConfig,
    names: Arc<[String]>,
}

impl Default for ClgBenchmark {
    fn default() -> Self {
        Self::new(ClgBenchmarkConfig::default()).expect("default configuration is valid")
    }
}

impl ClgBenchmark {
    pub const NAME: &'static str = "clg";

    pub fn new(config: ClgBenchmarkConfig) -> Result<Self> {
        let c = &config;
        if [c.sigma_n, c.sigma_l, c.sigma_e, c.x_n0_stddev, c.x_l0_stddev].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::ParameterDomain("clg standard deviations must be finite and non-negative".into()));
        }
        if !(c.sigma_e > 0.0) {
            return Err(Error::ParameterDomain("clg measurement noise must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&c.rho) || (c.rho != 0.0 && !(c.sigma_n > 0.0)) {
            return Err(Error::ParameterDomain("clg noise correlation must lie in [-1, 1] and needs sigma_n > 0".into()));
        }
        if ![c.phi, c.alpha, c.c_l].iter().all(|v| v.is_finite()) {
            return Err(Error::ParameterDomain("clg coefficients must be finite".into()));
        }
        Ok(Self { config, names: param_names(&["phi"]) })
    }

    pub fn config(&self) -> &ClgBenchmarkConfig {
        &self.config
    }

    pub fn theta(&self, phi: f64) -> ParamVector {
        ParamVector::new(self.names.clone(), vec![phi]).expect("one value")
    }

    pub fn true_theta(&self) -> ParamVector {
        self.theta(self.config.phi)
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

impl ClgModel for ClgBenchmark {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn param_names(&self) -> &Arc<[String]> {
        &self.names
    }

    fn nonlinear_dim(&self) -> usize {
        1
    }

    fn linear_dim(&self) -> usize {
        1
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn log_prior(&self, theta: &ParamVector) -> f64 {
        if (-1.0..1.0).contains(&theta[0]) {
            -(2f64.ln())
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample_prior(&self, rng: &mut RngStream) -> ParamVector {
        self.theta(2.0 * rng.uniform() - 1.0)
    }

    fn sample_initial_nonlinear(&self, _: &ParamVector, rng: &mut RngStream, x_n: &mut [f64]) {
        x_n[0] = self.config.x_n0_stddev * rng.standard_normal();
    }

    fn initial_linear(&self, _: &ParamVector) -> GaussianBelief {
        let sd = self.config.x_l0_stddev;
        GaussianBelief { mean: DVector::zeros(1), cov: scalar(sd * sd) }
    }

    fn dynamics(&self, theta: &ParamVector, x_n: &[f64], _: usize) -> ClgDynamics {
        ClgDynamics {
            f_n: DVector::from_element(1, self.config.alpha * x_n[0].atan()),
            a_n: scalar(1.0),
            f_l: DVector::zeros(1),
            a_l: scalar(theta[0]),
        }
    }

    fn observation(&self, _: &ParamVector, x_n: &[f64], _: usize) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::from_element(1, x_n[0]), scalar(self.config.c_l))
    }

    fn noise(&self, _: &ParamVector) -> ClgNoise {
        let c = &self.config;
        ClgNoise {
            q_n: scalar(c.sigma_n * c.sigma_n),
            q_l: scalar(c.sigma_l * c.sigma_l),
            q_nl: scalar(c.rho * c.sigma_n * c.sigma_l),
            r: scalar(c.sigma_e * c.sigma_e),
        }
    }
}
