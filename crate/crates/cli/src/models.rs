use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use ssm_smc::damper::{Damper, DamperConfig};
use ssm_smc::lgss::{ScalarLgss, ScalarLgssConfig};
use ssm_smc::pmh::{ProposalSpec, RandomWalk};
use ssm_smc::rbpf::{ClgAsSsm, ClgBenchmark, ClgBenchmarkConfig};
use ssm_smc::{AdaptedSsmModel, Dataset, ParamVector, SsmModel};

use crate::args::{parse_assignments, ModelName};

pub enum Model {
    Damper(Damper),
    Lgss(ScalarLgss),
    Clg(ClgBenchmark),
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

impl Model {
    pub fn load(name: ModelName, config: Option<&Path>) -> anyhow::Result<Self> {
        Ok(match name {
            ModelName::Damper => Model::Damper(Damper::new(read_config::<DamperConfig>(config)?)?),
            ModelName::Lgss => Model::Lgss(ScalarLgss::new(read_config::<ScalarLgssConfig>(config)?)?),
            ModelName::Clg => Model::Clg(ClgBenchmark::new(read_config::<ClgBenchmarkConfig>(config)?)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Model::Damper(_) => Damper::NAME,
            Model::Lgss(_) => ScalarLgss::NAME,
            Model::Clg(_) => ClgBenchmark::NAME,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Model::Damper(m) => m.config().horizon,
            Model::Lgss(m) => m.config().horizon,
            Model::Clg(m) => m.config().horizon,
        }
    }

    pub fn true_theta(&self) -> ParamVector {
        match self {
            Model::Damper(m) => m.true_theta(),
            Model::Lgss(m) => m.true_theta(),
            Model::Clg(m) => m.true_theta(),
        }
    }

    pub fn ssm(&self) -> Box<dyn SsmModel + '_> {
        match self {
            Model::Damper(m) => Box::new(m.clone()),
            Model::Lgss(m) => Box::new(m.clone()),
            Model::Clg(m) => Box::new(ClgAsSsm(m)),
        }
    }

    pub fn adapted(&self) -> Option<&dyn AdaptedSsmModel> {
        match self {
            Model::Damper(m) => Some(m),
            Model::Lgss(m) => Some(m),
            Model::Clg(_) => None,
        }
    }

    pub fn default_proposal(&self) -> ProposalSpec {
        match self {
            Model::Damper(m) => m.default_proposal(),
            Model::Lgss(m) => {
                let c = m.config();
                ProposalSpec::new(m.true_theta().shared_names().clone(), vec![RandomWalk::new(0.1, c.a_lo, c.a_hi)])
                    .expect("prior bounds are ordered")
            }
            Model::Clg(m) => ProposalSpec::new(m.true_theta().shared_names().clone(), vec![RandomWalk::new(0.1, -1.0, 1.0)])
                .expect("valid walk"),
        }
    }

    /// The configured true parameters with `name=value` overrides applied.
    pub fn theta_with(&self, overrides: &str) -> anyhow::Result<ParamVector> {
        let mut theta = self.true_theta();
        for (name, value) in parse_assignments(overrides)? {
            theta.set(&name, value)?;
        }
        Ok(theta)
    }
}

impl Model {
    /// A parameter vector where every name must be assigned.
    pub fn theta_exact(&self, assignments: &str) -> anyhow::Result<ParamVector> {
        let parsed = parse_assignments(assignments)?;
        let mut theta = self.true_theta();
        for name in theta.names().to_vec() {
            let value = parsed
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| anyhow::anyhow!("missing value for parameter `{name}`"))?;
            theta.set(&name, value)?;
        }
        for (name, _) in &parsed {
            theta.position(name)?;
        }
        Ok(theta)
    }

    pub fn load_observations(&self, path: &Path, end_time: Option<u64>) -> anyhow::Result<Dataset> {
        let data = Dataset::read_obs_file(path)?;
        if data.obs_dim() != self.ssm().obs_dim() {
            anyhow::bail!(
                "{} holds {}-dimensional observations but model `{}` expects {}",
                path.display(),
                data.obs_dim(),
                self.name(),
                self.ssm().obs_dim()
            );
        }
        match end_time {
            None => Ok(data),
            Some(t) => Ok(data.truncated(t as usize)?),
        }
    }
}
