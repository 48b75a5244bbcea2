//! The handful of distributions the models and proposals need.
//!
//! Gaussians are parameterized by standard deviation and Gammas by
//! (shape, scale). A [`Distribution`] can only be built through its
//! validating constructors, so sampling and density evaluation are
//! infallible.

use rand_distr::{Distribution as _, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::{erf, gamma::ln_gamma};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Below this Gaussian mass on the truncation interval, rejection sampling
/// is replaced by inverse-CDF sampling.
const MIN_REJECTION_MASS: f64 = 0.01;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistKind {
    Gaussian { mean: f64, stddev: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mean: f64, stddev: f64, lo: f64, hi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistKind", into = "DistKind")]
pub struct Distribution {
    kind: DistKind,
    /// ln of the Gaussian mass on [lo, hi] for truncated Gaussians, else 0.
    log_mass: f64,
}

impl TryFrom<DistKind> for Distribution {
    type Error = Error;

    fn try_from(kind: DistKind) -> Result<Self> {
        let bad = |msg: String| Err(Error::ParameterDomain(msg));
        let log_mass = match kind {
            DistKind::Gaussian { mean, stddev } => {
                if !(stddev > 0.0 && stddev.is_finite()) || !mean.is_finite() {
                    return bad(format!("gaussian needs finite mean and stddev > 0, got ({mean}, {stddev})"));
                }
                0.0
            }
            DistKind::Gamma { shape, scale } => {
                if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
                    return bad(format!("gamma needs shape > 0 and scale > 0, got ({shape}, {scale})"));
                }
                0.0
            }
            DistKind::Uniform { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return bad(format!("uniform needs finite lo < hi, got [{lo}, {hi})"));
                }
                0.0
            }
            DistKind::TruncatedGaussian { mean, stddev, lo, hi } => {
                if !(stddev > 0.0 && stddev.is_finite()) || !mean.is_finite() {
                    return bad(format!("truncated gaussian needs finite mean and stddev > 0, got ({mean}, {stddev})"));
                }
                if lo.is_nan() || hi.is_nan() || lo >= hi {
                    return bad(format!("truncated gaussian needs lo < hi, got [{lo}, {hi}]"));
                }
                let lm = std_normal_log_mass((lo - mean) / stddev, (hi - mean) / stddev);
                if lm == f64::NEG_INFINITY {
                    return bad(format!(
                        "truncation [{lo}, {hi}] carries no numerically representable mass for N({mean}, {stddev}^2)"
                    ));
                }
                lm
            }
        };
        Ok(Self { kind, log_mass })
    }
}

impl From<Distribution> for DistKind {
    fn from(d: Distribution) -> Self {
        d.kind
    }
}

impl Distribution {
    pub fn gaussian(mean: f64, stddev: f64) -> Result<Self> {
        DistKind::Gaussian { mean, stddev }.try_into()
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        DistKind::Gamma { shape, scale }.try_into()
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        DistKind::Uniform { lo, hi }.try_into()
    }

    /// Gaussian restricted to `[lo, hi]`; either bound may be infinite.
    pub fn truncated_gaussian(mean: f64, stddev: f64, lo: f64, hi: f64) -> Result<Self> {
        DistKind::TruncatedGaussian { mean, stddev, lo, hi }.try_into()
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            DistKind::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DistKind::Gamma { .. } => (0.0, f64::INFINITY),
            DistKind::Uniform { lo, hi } | DistKind::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            DistKind::Gaussian { mean, .. } => mean,
            DistKind::Gamma { shape, scale } => shape * scale,
            DistKind::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistKind::TruncatedGaussian { mean, stddev, lo, hi } => {
                let (a, b) = ((lo - mean) / stddev, (hi - mean) / stddev);
                mean + stddev * (std_normal_pdf(a) - std_normal_pdf(b)) / self.log_mass.exp()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            DistKind::Gaussian { stddev, .. } => stddev * stddev,
            DistKind::Gamma { shape, scale } => shape * scale * scale,
            DistKind::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            DistKind::TruncatedGaussian { mean, stddev, lo, hi } => {
                let (a, b) = ((lo - mean) / stddev, (hi - mean) / stddev);
                let z = self.log_mass.exp();
                let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
                let apa = if a.is_finite() { a * pa } else { 0.0 };
                let bpb = if b.is_finite() { b * pb } else { 0.0 };
                let r = (pa - pb) / z;
                stddev * stddev * (1.0 + (apa - bpb) / z - r * r)
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self.kind {
            DistKind::Gaussian { mean, stddev } => mean + stddev * rng.standard_normal(),
            DistKind::Gamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated at construction")
                .sample(rng),
            DistKind::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform(),
            DistKind::TruncatedGaussian { mean, stddev, lo, hi } => {
                if self.log_mass.exp() >= MIN_REJECTION_MASS {
                    loop {
                        let x = mean + stddev * rng.standard_normal();
                        if x >= lo && x <= hi {
                            return x;
                        }
                    }
                }
                let z = std_normal_truncated_inverse_cdf(
                    (lo - mean) / stddev,
                    (hi - mean) / stddev,
                    rng.uniform_open(),
                );
                (mean + stddev * z).clamp(lo, hi)
            }
        }
    }

    /// Natural-log density; `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match self.kind {
            DistKind::Gaussian { mean, stddev } => gaussian_log_pdf(x, mean, stddev),
            DistKind::Gamma { shape, scale } => {
                if x < 0.0 || x.is_nan() {
                    return f64::NEG_INFINITY;
                }
                if x == 0.0 {
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Equal) => -scale.ln(),
                        Some(std::cmp::Ordering::Greater) => f64::NEG_INFINITY,
                        _ => f64::INFINITY,
                    };
                }
                (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
            }
            DistKind::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            DistKind::TruncatedGaussian { mean, stddev, lo, hi } => {
                if x >= lo && x <= hi {
                    gaussian_log_pdf(x, mean, stddev) - self.log_mass
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

#[inline]
pub fn gaussian_log_pdf(x: f64, mean: f64, stddev: f64) -> f64 {
    let z = (x - mean) / stddev;
    -LN_SQRT_2PI - stddev.ln() - 0.5 * z * z
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

/// Upper tail `1 - Φ(z)`, accurate for large positive `z`.
fn upper_tail(z: f64) -> f64 {
    0.5 * erf::erfc(z / SQRT_2)
}

/// `ln(Φ(b) - Φ(a))` for standardized bounds `a < b`, evaluated in the tail
/// that keeps the subtraction well conditioned. Exactly 0 when both bounds
/// are infinite.
pub fn std_normal_log_mass(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return 0.0;
    }
    if a >= 0.0 {
        (upper_tail(a) - upper_tail(b)).ln()
    } else if b <= 0.0 {
        (upper_tail(-b) - upper_tail(-a)).ln()
    } else {
        (-(upper_tail(b) + upper_tail(-a))).ln_1p()
    }
}

/// Inverse CDF of the standard normal truncated to `[a, b]` at probability `u`.
fn std_normal_truncated_inverse_cdf(a: f64, b: f64, u: f64) -> f64 {
    // Work in whichever tail the interval lies in so the CDF differences do
    // not cancel.
    if a >= 0.0 {
        let (qa, qb) = (upper_tail(a), upper_tail(b));
        let q = qa - u * (qa - qb);
        SQRT_2 * erf::erfc_inv(2.0 * q)
    } else if b <= 0.0 {
        -std_normal_truncated_inverse_cdf(-b, -a, 1.0 - u)
    } else {
        let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
        let p = pa + u * (pb - pa);
        -SQRT_2 * erf::erfc_inv(2.0 * p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature, independent of the density code paths.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    fn integrate_density(d: &Distribution, lo: f64, hi: f64) -> f64 {
        // Split into unit-ish pieces so the adaptive rule sees the peaks.
        let pieces = 200;
        let h = (hi - lo) / pieces as f64;
        (0..pieces)
            .map(|i| {
                let a = lo + i as f64 * h;
                adaptive_simpson(&|x| d.log_pdf(x).exp(), a, a + h, 1e-12)
            })
            .sum()
    }

    #[test]
    fn densities_integrate_to_one() {
        let cases = [
            (Distribution::gaussian(0.3, 1.7).unwrap(), -20.0, 20.0),
            (Distribution::gamma(2.0, 0.01).unwrap(), 1e-300, 1.0),
            (Distribution::gamma(4.0, 0.3).unwrap(), 1e-300, 20.0),
            (Distribution::gamma(2.0, 1.0).unwrap(), 1e-300, 60.0),
            (Distribution::uniform(0.0, 1.0).unwrap(), 0.0, 1.0),
            (Distribution::truncated_gaussian(0.5, 1e-2, 0.0, 1.0).unwrap(), 0.4, 0.6),
            (Distribution::truncated_gaussian(0.0, 1.0, 0.0, f64::INFINITY).unwrap(), 0.0, 40.0),
            (Distribution::truncated_gaussian(0.002, 1e-3, 0.0, f64::INFINITY).unwrap(), 0.0, 0.02),
            (Distribution::truncated_gaussian(0.0, 1.0, 3.0, 3.5).unwrap(), 3.0, 3.5),
        ];
        for (d, lo, hi) in cases {
            let total = integrate_density(&d, lo, hi);
            assert!((total - 1.0).abs() < 1e-6, "{:?} integrates to {total}", d.kind());
        }
    }

    #[test]
    fn standard_normal_mode() {
        let d = Distribution::gaussian(0.0, 1.0).unwrap();
        assert!((d.log_pdf(0.0) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_outside_support() {
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(d.log_pdf(1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn half_normal_normalization() {
        let half = Distribution::truncated_gaussian(0.0, 1.0, 0.0, f64::INFINITY).unwrap();
        let full = Distribution::gaussian(0.0, 1.0).unwrap();
        assert!((half.log_pdf(0.3) - (full.log_pdf(0.3) + std::f64::consts::LN_2)).abs() < 1e-14);
        // Quadrature confirms the mass of the half line is one half.
        let mass = adaptive_simpson(&|x| full.log_pdf(x).exp(), 0.0, 40.0, 1e-13);
        assert!((mass - 0.5).abs() < 1e-10);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(matches!(Distribution::gaussian(0.0, 0.0), Err(Error::ParameterDomain(_))));
        assert!(Distribution::gamma(-1.0, 1.0).is_err());
        assert!(Distribution::gamma(1.0, 0.0).is_err());
        assert!(Distribution::uniform(1.0, 1.0).is_err());
        assert!(Distribution::truncated_gaussian(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(Distribution::truncated_gaussian(0.0, 1.0, 100.0, f64::INFINITY).is_err());
    }

    #[test]
    fn serde_validates() {
        let ok: Distribution = serde_json::from_str(r#"{"kind":"gamma","shape":2.0,"scale":0.01}"#).unwrap();
        assert_eq!(ok, Distribution::gamma(2.0, 0.01).unwrap());
        assert!(serde_json::from_str::<Distribution>(r#"{"kind":"gamma","shape":2.0,"scale":-1}"#).is_err());
    }

    #[test]
    fn truncated_draws_respect_bounds() {
        let mut rng = RngStream::new(3);
        let d = Distribution::truncated_gaussian(0.5, 1e-2, 0.0, 1.0).unwrap();
        for _ in 0..10_000 {
            let x = d.sample(&mut rng);
            assert!(x > 0.0 && x < 1.0);
        }
        // Tight truncation goes through the inverse-CDF path.
        let tight = Distribution::truncated_gaussian(0.0, 1.0, 4.0, 4.01).unwrap();
        for _ in 0..10_000 {
            let x = tight.sample(&mut rng);
            assert!((4.0..=4.01).contains(&x), "{x}");
        }
        let left = Distribution::truncated_gaussian(0.0, 1.0, -6.0, -5.0).unwrap();
        for _ in 0..1_000 {
            let x = left.sample(&mut rng);
            assert!((-6.0..=-5.0).contains(&x), "{x}");
        }
    }

    #[test]
    fn uniform_draws_in_half_open_unit() {
        let d = Distribution::uniform(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(11);
        for _ in 0..10_000 {
            let x = d.sample(&mut rng);
            assert!((0.0..1.0).contains(&x));
        }
    }

    /// Empirical mean and variance of 10^6 draws within 4 standard errors of
    /// the analytic moments. The SE of the sample variance uses the sample
    /// fourth central moment.
    #[test]
    fn empirical_moments_match() {
        let cases = [
            Distribution::gaussian(-1.0, 2.0).unwrap(),
            Distribution::gamma(2.0, 0.01).unwrap(),
            Distribution::gamma(4.0, 0.3).unwrap(),
            Distribution::uniform(-2.0, 5.0).unwrap(),
            Distribution::truncated_gaussian(0.5, 1e-2, 0.0, 1.0).unwrap(),
            Distribution::truncated_gaussian(0.0, 1.0, 0.0, f64::INFINITY).unwrap(),
            Distribution::truncated_gaussian(0.0, 1.0, 3.0, 3.5).unwrap(),
        ];
        const DRAWS: usize = 1_000_000;
        for (i, d) in cases.iter().enumerate() {
            let mut rng = RngStream::new(77).child(i as u64);
            let xs: Vec<f64> = (0..DRAWS).map(|_| d.sample(&mut rng)).collect();
            let n = DRAWS as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            let se_mean = (m2 / n).sqrt();
            let se_var = ((m4 - m2 * m2) / n).sqrt();
            assert!((mean - d.mean()).abs() < 4.0 * se_mean, "{:?}: mean {mean} vs {}", d.kind(), d.mean());
            assert!((m2 - d.variance()).abs() < 4.0 * se_var, "{:?}: var {m2} vs {}", d.kind(), d.variance());
        }
    }

    #[test]
    fn gamma_prior_mean_oracle() {
        // mean = shape * scale = 0.02
        let d = Distribution::gamma(2.0, 0.01).unwrap();
        let mut rng = RngStream::new(123);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 0.02).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn log_mass_far_from_bounds_is_zero() {
        assert_eq!(std_normal_log_mass(f64::NEG_INFINITY, f64::INFINITY), 0.0);
        assert!(std_normal_log_mass(-12.0, 15.0).abs() < 1e-10);
        let expect = (std_normal_cdf(0.5)).ln();
        assert!((std_normal_log_mass(-0.5, f64::INFINITY) - expect).abs() < 1e-15);
    }
}
