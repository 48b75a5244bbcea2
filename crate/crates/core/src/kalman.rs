//! Exact filtering for linear-Gaussian state-space models.
//!
//! `x_t = A x_{t-1} + b + v_t,  v_t ~ N(0, Q)`
//! `y_t = C x_t + e_t,          e_t ~ N(0, R)`
//!
//! Used directly as a likelihood oracle and per particle inside the
//! Rao-Blackwellized filter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::dataset::Dataset;
use crate::dist::LN_SQRT_2PI;
use crate::error::{Error, Result};

/// Innovation covariances with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Negative eigenvalues down to this size are rounding noise and get clipped.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Dimension(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(Self { mean, cov: sanitize_cov(cov)? })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn dim_check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Dimension(what.to_owned()))
    }
}

/// Symmetrizes `m` and clips tiny negative eigenvalues. Larger negative
/// eigenvalues are an error.
pub fn sanitize_cov(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut m = (&m + m.transpose()) * 0.5;
    let d = m.nrows();
    if d == 0 {
        return Ok(m);
    }
    if d == 1 {
        let v = m[(0, 0)];
        if v < -PSD_TOLERANCE || v.is_nan() {
            return Err(Error::NotPositiveSemidefinite(v));
        }
        m[(0, 0)] = v.max(0.0);
        return Ok(m);
    }
    if m.diagonal().iter().all(|v| *v > 0.0) && Cholesky::new(m.clone()).is_some() {
        return Ok(m);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min.is_nan() || min < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    if min >= 0.0 {
        return Ok(m);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

/// Cholesky factor of a symmetric positive definite matrix, rejecting
/// numerically singular ones.
pub fn checked_cholesky(s: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let cond = condition_number(s);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularInnovation(cond));
    }
    Cholesky::new(s.clone()).ok_or(Error::SingularInnovation(cond))
}

fn condition_number(s: &DMatrix<f64>) -> f64 {
    if s.nrows() == 1 {
        let v = s[(0, 0)];
        return if v > 0.0 && v.is_finite() { 1.0 } else { f64::INFINITY };
    }
    let eig = SymmetricEigen::new(s.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 || lo.is_nan() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `log N(residual; 0, S)` given the Cholesky factor of `S`.
pub fn gaussian_log_density(residual: &DVector<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let half_log_det: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
    let z = l
        .solve_lower_triangular(residual)
        .expect("Cholesky factor has a positive diagonal");
    -(residual.len() as f64) * LN_SQRT_2PI - half_log_det - 0.5 * z.norm_squared()
}

/// `mean' = A mean + b`, `cov' = A cov Aᵀ + Q`.
pub fn predict(belief: &GaussianBelief, a: &DMatrix<f64>, b: &DVector<f64>, q: &DMatrix<f64>) -> Result<GaussianBelief> {
    let d = belief.dim();
    dim_check(a.ncols() == d, "transition matrix columns must match the state dimension")?;
    let d_out = a.nrows();
    dim_check(b.len() == d_out, "drift length must match the transition rows")?;
    dim_check(q.nrows() == d_out && q.ncols() == d_out, "process covariance must be square in the new state dimension")?;
    let mean = a * &belief.mean + b;
    let cov = sanitize_cov(a * &belief.cov * a.transpose() + q)?;
    Ok(GaussianBelief { mean, cov })
}

/// Conditions on `y = C x + e`, `e ~ N(0, R)`, using the Joseph form.
/// Returns the posterior and `log N(y; C mean, C cov Cᵀ + R)`.
pub fn update(belief: &GaussianBelief, c: &DMatrix<f64>, r: &DMatrix<f64>, y: &DVector<f64>) -> Result<(GaussianBelief, f64)> {
    let d = belief.dim();
    let p = y.len();
    dim_check(c.nrows() == p && c.ncols() == d, "observation matrix must be obs_dim x state_dim")?;
    dim_check(r.nrows() == p && r.ncols() == p, "measurement covariance must be obs_dim x obs_dim")?;

    let pct = &belief.cov * c.transpose();
    let s = c * &pct + r;
    let s = (&s + s.transpose()) * 0.5;
    let chol = checked_cholesky(&s)?;
    let residual = y - c * &belief.mean;
    let log_lik = gaussian_log_density(&residual, &chol);

    // K = P Cᵀ S⁻¹, solved as S Kᵀ = C P.
    let gain = chol.solve(&pct.transpose()).transpose();
    let mean = &belief.mean + &gain * residual;
    let i_kc = DMatrix::identity(d, d) - &gain * c;
    let cov = &i_kc * &belief.cov * i_kc.transpose() + &gain * r * gain.transpose();
    Ok((GaussianBelief { mean, cov: sanitize_cov(cov)? }, log_lik))
}

/// One time step of a linear-Gaussian model.
#[derive(Clone, Debug, PartialEq)]
pub struct LgssStep {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub q: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LgssStep {
    /// Scalar model `x' = a x + b + N(0, q_std²)`, `y = c x + N(0, r_std²)`.
    pub fn scalar(a: f64, b: f64, q_std: f64, c: f64, r_std: f64) -> Self {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        Self {
            a: s(a),
            b: DVector::from_element(1, b),
            q: s(q_std * q_std),
            c: s(c),
            r: s(r_std * r_std),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LgssSteps {
    Constant(LgssStep),
    /// Entry `t - 1` governs the transition into `x_t` and observation `y_t`.
    Varying(Vec<LgssStep>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LgssParams {
    pub m0: DVector<f64>,
    pub p0: DMatrix<f64>,
    pub steps: LgssSteps,
}

impl LgssParams {
    pub fn step(&self, t: usize) -> &LgssStep {
        match &self.steps {
            LgssSteps::Constant(s) => s,
            LgssSteps::Varying(v) => &v[t - 1],
        }
    }

    pub fn horizon_limit(&self) -> Option<usize> {
        match &self.steps {
            LgssSteps::Constant(_) => None,
            LgssSteps::Varying(v) => Some(v.len()),
        }
    }

    /// Filtering beliefs `p(x_t | y_{1:t})` for `t = 1..=T` and the total
    /// log-likelihood.
    pub fn filter(&self, data: &Dataset) -> Result<(Vec<GaussianBelief>, f64)> {
        let horizon = data.horizon();
        if let Some(limit) = self.horizon_limit() {
            if limit < horizon {
                return Err(Error::Dimension(format!("{limit} model steps for {horizon} observations")));
            }
        }
        let mut belief = GaussianBelief::new(self.m0.clone(), self.p0.clone())?;
        let mut beliefs = Vec::with_capacity(horizon);
        let mut total = 0.0;
        for t in 1..=horizon {
            let step = self.step(t);
            belief = predict(&belief, &step.a, &step.b, &step.q)?;
            let y = DVector::from_column_slice(data.obs(t));
            let (post, inc) = update(&belief, &step.c, &step.r, &y)?;
            total += inc;
            belief = post;
            beliefs.push(belief.clone());
        }
        Ok((beliefs, total))
    }

    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        self.filter(data).map(|(_, ll)| ll)
    }
}
