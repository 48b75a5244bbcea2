use std::io::Write;

use ssm_smc::model::simulate;
use ssm_smc::RngStream;

use crate::args::SimulateArgs;
use crate::models::Model;
use crate::output::{create, sidecar, Manifest};

pub fn run(args: &SimulateArgs, argv: &[String]) -> anyhow::Result<()> {
    let shared = &args.shared;
    let model = Model::load(shared.model, shared.config.as_deref())?;
    let horizon = shared.end_time.map_or(model.horizon(), |t| t as usize);
    let theta = model.true_theta();
    let data = simulate(model.ssm().as_ref(), &theta, horizon, &RngStream::new(shared.seed))?;

    let mut manifest = Manifest::new("simulate", argv, shared.seed);
    if let Some(cfg) = &shared.config {
        manifest.input(cfg)?;
    }
    let mut out = create(&shared.output_file)?;
    data.write_obs_csv(&mut out)?;
    out.flush()?;
    manifest.output(&shared.output_file);

    let truth = sidecar(&shared.output_file, "truth.csv");
    let mut out = create(&truth)?;
    data.write_truth_csv(&mut out)?;
    out.flush()?;
    manifest.output(&truth);
    manifest.write(&shared.output_file)?;
    log::info!("simulated {horizon} observations from `{}`", model.name());
    Ok(())
}
