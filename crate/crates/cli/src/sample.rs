use anyhow::bail;
use serde::Serialize;
use ssm_smc::diagnostics::{diagnostics, ChainSummary};
use ssm_smc::pmh::{run_pmh, PmhConfig};

use crate::args::{parse_assignments, SampleArgs};
use crate::models::Model;
use crate::output::{create, sidecar, write_json, Manifest};

#[derive(Serialize)]
struct WalkSummary {
    name: String,
    stddev: f64,
    /// `null` when unbounded.
    lo: Option<f64>,
    hi: Option<f64>,
}

#[derive(Serialize)]
struct SampleSummary {
    #[serde(flatten)]
    chain: ChainSummary,
    seed: u64,
    resampler: String,
    horizon: usize,
    theta0: Vec<(String, f64)>,
    proposal: Vec<WalkSummary>,
}

pub fn run(args: &SampleArgs, argv: &[String]) -> anyhow::Result<()> {
    let shared = &args.shared;
    let model = Model::load(shared.model, shared.config.as_deref())?;
    let data = model.load_observations(&args.obs_file, shared.end_time)?;

    let mut spec = model.default_proposal();
    if let Some(raw) = &args.proposal {
        for (name, stddev) in parse_assignments(raw)? {
            spec.set_stddev(&name, stddev)?;
        }
    }
    let iterations = args.nsamples as usize;
    let burn_in = args.burn_in.map_or(iterations / 10, |b| b as usize);
    if burn_in > iterations {
        bail!("--burn-in {burn_in} exceeds --nsamples {iterations}");
    }
    let config = PmhConfig {
        iterations,
        n_particles: args.nparticles as usize,
        resampler: shared.resampler,
        seed: shared.seed,
        theta0: args.theta0.as_deref().map(|s| model.theta_exact(s)).transpose()?,
        keep_trajectories: args.trajectories,
        chain_id: 0,
    };
    let chain = run_pmh(model.ssm().as_ref(), &data, &spec, &config)?;
    let summary = diagnostics(&chain, burn_in, args.bins as usize)?;

    let mut manifest = Manifest::new("sample", argv, shared.seed);
    if let Some(cfg) = &shared.config {
        manifest.input(cfg)?;
    }
    manifest.input(&args.obs_file)?;

    chain.write_csv(create(&shared.output_file)?)?;
    manifest.output(&shared.output_file);

    let hist_path = sidecar(&shared.output_file, "hist.csv");
    summary.write_histograms_csv(create(&hist_path)?)?;
    manifest.output(&hist_path);

    if args.trajectories {
        let path = sidecar(&shared.output_file, "trajectories.csv");
        chain.write_trajectories_csv(create(&path)?)?;
        manifest.output(&path);
    }

    let bound = |v: f64| v.is_finite().then_some(v);
    let full = SampleSummary {
        chain: summary,
        seed: shared.seed,
        resampler: shared.resampler.to_string(),
        horizon: data.horizon(),
        theta0: chain.records[0].theta.iter().map(|(n, v)| (n.to_owned(), v)).collect(),
        proposal: spec
            .names()
            .iter()
            .zip(spec.walks())
            .map(|(name, w)| WalkSummary { name: name.clone(), stddev: w.stddev, lo: bound(w.lo), hi: bound(w.hi) })
            .collect(),
    };
    let summary_path = sidecar(&shared.output_file, "summary.json");
    write_json(&summary_path, &full)?;
    manifest.output(&summary_path);
    manifest.write(&shared.output_file)?;
    log::info!("acceptance rate {:.3}", full.chain.acceptance_rate);
    Ok(())
}
