use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ssm_smc::kalman::{GaussianBelief, LgssParams, LgssStep, LgssSteps};
use ssm_smc::model::{param_names, simulate};
use ssm_smc::rbpf::{rbpf_loglik, ClgAsSsm, ClgDynamics, ClgModel, ClgNoise};
use ssm_smc::{Dataset, ParamVector, Resampler, RngStream};

/// A random CLG whose nonlinear state follows a fixed noise-free map and
/// does not depend on the linear state.
pub struct DeterministicClg {
    names: Arc<[String]>,
    x_n0: f64,
    m0: DVector<f64>,
    p0: DMatrix<f64>,
    coef: Vec<f64>,
    q_l: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn random_spd(d: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.standard_normal());
    &g * g.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1
}

impl DeterministicClg {
    pub fn random(seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        Self {
            names: param_names(&["phi"]),
            x_n0: rng.standard_normal(),
            m0: DVector::from_fn(2, |_, _| rng.standard_normal()),
            p0: random_spd(2, &mut rng),
            coef: (0..8).map(|_| rng.standard_normal()).collect(),
            q_l: random_spd(2, &mut rng) * 0.5,
            r: random_spd(2, &mut rng) * 0.5,
        }
    }

    fn next_nonlinear(&self, x: f64) -> f64 {
        self.coef[0] * x.sin() + self.coef[1]
    }

    /// The time-varying linear model seen by the linear state once the
    /// nonlinear path is known, plus the observations with `g` removed.
    pub fn induced(&self, theta: &ParamVector, data: &Dataset) -> (LgssParams, Dataset) {
        let mut x = self.x_n0;
        let mut steps = vec![];
        let mut y = vec![];
        for t in 1..=data.horizon() {
            let d = self.dynamics(theta, &[x], t);
            x = d.f_n[0];
            let (g, c) = self.observation(theta, &[x], t);
            steps.push(LgssStep { a: d.a_l, b: d.f_l, q: self.q_l.clone(), c, r: self.r.clone() });
            y.extend((DVector::from_column_slice(data.obs(t)) - g).iter());
        }
        let params = LgssParams { m0: self.m0.clone(), p0: self.p0.clone(), steps: LgssSteps::Varying(steps) };
        (params, Dataset::new(2, y).unwrap())
    }
}

impl ClgModel for DeterministicClg {
    fn name(&self) -> &str {
        "deterministic-clg"
    }
    fn param_names(&self) -> &Arc<[String]> {
        &self.names
    }
    fn nonlinear_dim(&self) -> usize {
        1
    }
    fn linear_dim(&self) -> usize {
        2
    }
    fn obs_dim(&self) -> usize {
        2
    }
    fn log_prior(&self, _: &ParamVector) -> f64 {
        0.0
    }
    fn sample_prior(&self, _: &mut RngStream) -> ParamVector {
        ParamVector::new(self.names.clone(), vec![0.5]).unwrap()
    }
    fn sample_initial_nonlinear(&self, _: &ParamVector, _: &mut RngStream, x_n: &mut [f64]) {
        x_n[0] = self.x_n0;
    }
    fn initial_linear(&self, _: &ParamVector) -> GaussianBelief {
        GaussianBelief::new(self.m0.clone(), self.p0.clone()).unwrap()
    }
    fn dynamics(&self, theta: &ParamVector, x_n: &[f64], _: usize) -> ClgDynamics {
        let x = x_n[0];
        let k = &self.coef;
        let rot = theta[0] * x.tanh();
        ClgDynamics {
            f_n: DVector::from_element(1, self.next_nonlinear(x)),
            a_n: DMatrix::zeros(1, 2),
            f_l: DVector::from_vec(vec![k[2] * x.cos(), k[3]]),
            a_l: DMatrix::from_row_slice(2, 2, &[0.8, rot, -rot, 0.6]),
        }
    }
    fn observation(&self, _: &ParamVector, x_n: &[f64], _: usize) -> (DVector<f64>, DMatrix<f64>) {
        let x = x_n[0];
        let k = &self.coef;
        (
            DVector::from_vec(vec![x * x, k[4] * x]),
            DMatrix::from_row_slice(2, 2, &[1.0 + k[5] * x.sin(), k[6], 0.0, 1.0 + k[7].abs()]),
        )
    }
    fn noise(&self, _: &ParamVector) -> ClgNoise {
        ClgNoise { q_n: DMatrix::zeros(1, 1), q_l: self.q_l.clone(), q_nl: DMatrix::zeros(1, 2), r: self.r.clone() }
    }
}

impl DeterministicClg {
    /// Single-particle filter estimate and exact likelihood on data simulated
    /// from the instance.
    pub fn rbpf_and_exact(&self, horizon: usize, seed: u64) -> (f64, f64) {
        let theta = ParamVector::new(self.names.clone(), vec![0.9]).unwrap();
        let data = simulate(&ClgAsSsm(self), &theta, horizon, &RngStream::new(seed + 1000)).unwrap();
        let (params, residuals) = self.induced(&theta, &data);
        let exact = params.log_likelihood(&residuals).unwrap();
        let (est, _) = rbpf_loglik(self, &theta, &data, 1, Resampler::Systematic, &RngStream::new(seed)).unwrap();
        (est.log_z, exact)
    }
}
