//! Posterior summaries of a PMH chain.

use std::io::Write;

use serde::Serialize;

use crate::dataset::fmt_f64;
use crate::error::{Error, Result};
use crate::pmh::Chain;
use crate::stats::{self, Histogram};

pub const DEFAULT_BINS: usize = 50;
pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

impl Quantiles {
    pub fn of_sorted(sorted: &[f64]) -> Self {
        let q = |p| stats::quantile_sorted(sorted, p);
        Self { q025: q(0.025), q25: q(0.25), q50: q(0.5), q75: q(0.75), q975: q(0.975) }
    }

    /// Whether `x` lies inside the central 95% interval.
    pub fn covers_95(&self, x: f64) -> bool {
        self.q025 <= x && x <= self.q975
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub stddev: f64,
    pub quantiles: Quantiles,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSummary {
    pub model: String,
    pub iterations: usize,
    pub burn_in: usize,
    pub n_particles: usize,
    pub acceptance_rate: f64,
    pub params: Vec<ParamSummary>,
}

impl ChainSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Rows `param,bin,lo,hi,count`.
    pub fn write_histograms_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "param,bin,lo,hi,count")?;
        for p in &self.params {
            let h = &p.histogram;
            for (i, count) in h.counts.iter().enumerate() {
                writeln!(out, "{},{i},{},{},{count}", p.name, fmt_f64(h.edges[i]), fmt_f64(h.edges[i + 1]))?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Summarizes records `burn_in..=M`. The acceptance rate always covers the
/// whole chain.
pub fn diagnostics(chain: &Chain, burn_in: usize, bins: usize) -> Result<ChainSummary> {
    if chain.records.is_empty() {
        return Err(Error::Precondition("empty chain".into()));
    }
    if burn_in >= chain.records.len() {
        return Err(Error::Precondition(format!(
            "burn-in {burn_in} leaves no records in a chain of length {}",
            chain.records.len()
        )));
    }
    let params = chain
        .param_names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let values = chain.column(i, burn_in);
            let sorted = stats::sorted(&values);
            ParamSummary {
                name: name.clone(),
                mean: stats::mean(&values),
                stddev: stats::variance(&values).sqrt(),
                quantiles: Quantiles::of_sorted(&sorted),
                histogram: stats::histogram(&values, bins),
            }
        })
        .collect();
    Ok(ChainSummary {
        model: chain.model.clone(),
        iterations: chain.iterations(),
        burn_in,
        n_particles: chain.n_particles,
        acceptance_rate: chain.acceptance_rate(),
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{param_names, ParamVector};
    use crate::pmh::ChainRecord;
    use crate::resampling::Resampler;

    fn chain(accepts: &[bool], values: &[f64]) -> Chain {
        let names = param_names(&["a"]);
        let records = accepts
            .iter()
            .zip(values)
            .enumerate()
            .map(|(m, (acc, v))| ChainRecord {
                m,
                theta: ParamVector::new(names.clone(), vec![*v]).unwrap(),
                log_z: -1.0,
                accepted: *acc,
                alpha: 0.5,
            })
            .collect();
        Chain {
            records,
            trajectories: Vec::new(),
            state_dim: 1,
            seed: 0,
            n_particles: 1,
            resampler: Resampler::Systematic,
            model: "test".into(),
        }
    }

    #[test]
    fn all_rejected() {
        let c = chain(&[true, false, false, false], &[0.3; 4]);
        let s = diagnostics(&c, 0, DEFAULT_BINS).unwrap();
        assert_eq!(s.acceptance_rate, 0.0);
        let p = s.param("a").unwrap();
        assert_eq!(p.mean, 0.3);
        assert_eq!(p.stddev, 0.0);
        assert_eq!(p.quantiles.q025, 0.3);
        assert_eq!(p.quantiles.q975, 0.3);
        assert_eq!(p.histogram.counts, vec![4]);
    }

    #[test]
    fn alternating() {
        let c = chain(&[true, true, false, true, false], &[0.0, 1.0, 1.0, 2.0, 2.0]);
        let s = diagnostics(&c, 1, 4).unwrap();
        assert_eq!(s.acceptance_rate, 0.5);
        assert_eq!(s.param("a").unwrap().histogram.counts.iter().sum::<u64>(), 4);
        assert!(diagnostics(&c, 5, 4).is_err());
        let mut buf = Vec::new();
        s.write_histograms_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("param,bin,lo,hi,count\na,0,"));
    }
}
