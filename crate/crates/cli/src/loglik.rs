use std::io::Write;

use anyhow::bail;
use rayon::prelude::*;
use serde::Serialize;
use ssm_smc::diagnostics::Quantiles;
use ssm_smc::rbpf::rbpf_loglik;
use ssm_smc::smc::{bootstrap_pf, fully_adapted_apf, vanilla_mc_loglik};
use ssm_smc::stats::{self, histogram};
use ssm_smc::{Method, RngStream};

use crate::args::{LoglikArgs, MethodName};
use crate::models::Model;
use crate::output::{create, sidecar, write_json, Manifest};

#[derive(Serialize)]
struct NamedValue {
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct LoglikSummary {
    model: &'static str,
    method: Method,
    n_particles: usize,
    reps: usize,
    horizon: usize,
    seed: u64,
    resampler: String,
    theta: Vec<NamedValue>,
    /// Replicates whose estimate is not zero.
    finite_reps: usize,
    /// `ln` of the replicate mean of ẑ.
    log_mean_z_hat: f64,
    /// `ln` of the replicate variance of ẑ.
    log_var_z_hat: f64,
    /// Variance of ẑ divided by its squared mean.
    relative_variance: f64,
    mean_log_z: f64,
    var_log_z: f64,
    log_z_quantiles: Quantiles,
    /// ẑ histograms are of `exp(log_z - log_z_max)`.
    log_z_max: f64,
}

fn mismatch(method: &str, contract: &str, model: &str) -> anyhow::Error {
    anyhow::anyhow!("method `{method}` requires a model implementing the {contract} contract; `{model}` does not")
}

pub fn run(args: &LoglikArgs, argv: &[String]) -> anyhow::Result<()> {
    let shared = &args.shared;
    let model = Model::load(shared.model, shared.config.as_deref())?;
    let data = model.load_observations(&args.obs_file, shared.end_time)?;
    let theta = match &args.theta {
        Some(s) => model.theta_with(s)?,
        None => model.true_theta(),
    };
    let n = args.nparticles as usize;
    let reps = args.reps as usize;
    let resampler = shared.resampler;
    let base = RngStream::new(shared.seed);
    let ssm = model.ssm();

    let method = match args.method {
        MethodName::Vanilla => Method::Vanilla,
        MethodName::Pf => Method::Bootstrap,
        MethodName::Apf => Method::Apf,
        MethodName::Rbpf => Method::Rbpf,
        MethodName::Kalman => Method::Kalman,
    };
    let replicate = |rng: &RngStream| -> ssm_smc::Result<f64> {
        Ok(match method {
            Method::Vanilla => vanilla_mc_loglik(ssm.as_ref(), &theta, &data, n, rng)?.log_z,
            Method::Bootstrap => bootstrap_pf(ssm.as_ref(), &theta, &data, n, resampler, rng, false)?.0.log_z,
            Method::Apf => fully_adapted_apf(model.adapted().expect("checked"), &theta, &data, n, resampler, rng)?.log_z,
            Method::Rbpf => match &model {
                Model::Clg(m) => rbpf_loglik(m, &theta, &data, n, resampler, rng)?.0.log_z,
                _ => unreachable!("checked"),
            },
            Method::Kalman => unreachable!("handled separately"),
        })
    };

    let log_z: Vec<f64> = match method {
        Method::Kalman => {
            let Model::Lgss(m) = &model else {
                return Err(mismatch("kalman", "linear-Gaussian", model.name()));
            };
            ssm.check_params(&theta)?;
            vec![m.lgss_params(&theta).log_likelihood(&data)?; reps]
        }
        Method::Rbpf if !matches!(model, Model::Clg(_)) => return Err(mismatch("rbpf", "conditionally linear-Gaussian", model.name())),
        Method::Apf if model.adapted().is_none() => return Err(mismatch("apf", "adapted (closed-form predictive)", model.name())),
        _ => {
            let results: Vec<ssm_smc::Result<f64>> = (0..reps).into_par_iter().map(|r| replicate(&base.child(r as u64))).collect();
            results.into_iter().collect::<ssm_smc::Result<_>>()?
        }
    };
    if log_z.iter().any(|v| v.is_nan()) {
        bail!("an estimator returned NaN");
    }

    let mut manifest = Manifest::new("loglik", argv, shared.seed);
    if let Some(cfg) = &shared.config {
        manifest.input(cfg)?;
    }
    manifest.input(&args.obs_file)?;

    let mut out = create(&shared.output_file)?;
    writeln!(out, "rep,log_z")?;
    for (r, v) in log_z.iter().enumerate() {
        writeln!(out, "{r},{v:.16e}")?;
    }
    out.flush()?;
    manifest.output(&shared.output_file);

    let finite: Vec<f64> = log_z.iter().copied().filter(|v| v.is_finite()).collect();
    let log_z_max = log_z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_z.iter().map(|v| (v - log_z_max).exp()).collect();
    let (scaled_mean, scaled_var) = if finite.is_empty() { (0.0, 0.0) } else { (stats::mean(&scaled), stats::variance(&scaled)) };
    let summary = LoglikSummary {
        model: model.name(),
        method,
        n_particles: n,
        reps,
        horizon: data.horizon(),
        seed: shared.seed,
        resampler: resampler.to_string(),
        theta: theta.iter().map(|(name, value)| NamedValue { name: name.to_owned(), value }).collect(),
        finite_reps: finite.len(),
        log_mean_z_hat: scaled_mean.ln() + log_z_max,
        log_var_z_hat: scaled_var.ln() + 2.0 * log_z_max,
        relative_variance: scaled_var / (scaled_mean * scaled_mean),
        mean_log_z: stats::mean(&finite),
        var_log_z: stats::variance(&finite),
        log_z_quantiles: Quantiles::of_sorted(&stats::sorted(&log_z)),
        log_z_max,
    };
    let summary_path = sidecar(&shared.output_file, "summary.json");
    write_json(&summary_path, &summary)?;
    manifest.output(&summary_path);

    let hist_path = sidecar(&shared.output_file, "hist.csv");
    let mut out = create(&hist_path)?;
    writeln!(out, "quantity,bin,lo,hi,count")?;
    let bins = args.bins as usize;
    for (quantity, values) in [("log_z", &finite), ("z_scaled", &scaled)] {
        let h = histogram(values, bins);
        for (i, count) in h.counts.iter().enumerate() {
            writeln!(out, "{quantity},{i},{:.16e},{:.16e},{count}", h.edges[i], h.edges[i + 1])?;
        }
    }
    out.flush()?;
    manifest.output(&hist_path);
    manifest.write(&shared.output_file)?;
    Ok(())
}
