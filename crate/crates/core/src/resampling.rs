//! Weight normalization and unbiased resampling.
//!
//! Ancestor indices are 0-based. Stratified and systematic resampling emit
//! them in ascending order; multinomial keeps draw order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::logsumexp;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resampler {
    Multinomial,
    Stratified,
    #[default]
    Systematic,
}

impl Resampler {
    pub const ALL: [Resampler; 3] = [Resampler::Multinomial, Resampler::Stratified, Resampler::Systematic];

    pub fn as_str(self) -> &'static str {
        match self {
            Resampler::Multinomial => "multinomial",
            Resampler::Stratified => "stratified",
            Resampler::Systematic => "systematic",
        }
    }

    /// Fills `ancestors` with indices into `weights`, which must sum to one.
    pub fn resample(self, weights: &[f64], rng: &mut RngStream, ancestors: &mut [usize]) -> Result<()> {
        check_probabilities(weights)?;
        match self {
            Resampler::Multinomial => multinomial(weights, rng, ancestors),
            Resampler::Stratified => {
                let n = ancestors.len() as f64;
                sweep(weights, ancestors, |k| (k as f64 + rng.uniform()) / n)
            }
            Resampler::Systematic => {
                let n = ancestors.len() as f64;
                let offset = rng.uniform();
                sweep(weights, ancestors, |k| (k as f64 + offset) / n)
            }
        }
        Ok(())
    }
}

impl fmt::Display for Resampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Resampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Resampler::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown resampler `{s}`")))
    }
}

/// Normalizes log-weights into `weights` and returns
/// `ln((1/N) Σ exp(log_w))`. All entries `-inf` is reported as
/// [`Error::DegenerateWeights`].
pub fn normalize_into(log_w: &[f64], weights: &mut [f64]) -> Result<f64> {
    if log_w.is_empty() {
        return Err(Error::Precondition("empty weight vector".into()));
    }
    if log_w.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::Precondition("log-weights must be finite or -inf".into()));
    }
    let lse = logsumexp(log_w);
    if lse == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    for (w, lw) in weights.iter_mut().zip(log_w) {
        *w = (lw - lse).exp();
    }
    Ok(lse - (log_w.len() as f64).ln())
}

pub fn normalize(log_w: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut weights = vec![0.0; log_w.len()];
    let log_mean = normalize_into(log_w, &mut weights)?;
    Ok((weights, log_mean))
}

fn check_probabilities(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Precondition("empty weight vector".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Precondition("weights must be non-negative numbers".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

fn last_positive(weights: &[f64]) -> usize {
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Index of the first cumulative weight strictly above `u`.
fn multinomial(weights: &[f64], rng: &mut RngStream, ancestors: &mut [usize]) {
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let cap = last_positive(weights);
    for a in ancestors.iter_mut() {
        let u = rng.uniform() * total;
        *a = cumulative.partition_point(|c| *c <= u).min(cap);
    }
}

/// Walks the cumulative weights once for increasing points `point(k)`.
fn sweep(weights: &[f64], ancestors: &mut [usize], mut point: impl FnMut(usize) -> f64) {
    let total: f64 = weights.iter().sum();
    let cap = last_positive(weights);
    let mut i = 0;
    let mut cumulative = weights[0];
    for (k, a) in ancestors.iter_mut().enumerate() {
        let u = point(k) * total;
        while i < cap && !(u < cumulative) {
            i += 1;
            cumulative += weights[i];
        }
        *a = i;
    }
}
