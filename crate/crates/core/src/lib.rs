//! Sequential Monte Carlo likelihood estimation and particle
//! Metropolis-Hastings for nonlinear state-space models.
//!
//! The crate is organised bottom-up: [`rng`] and [`dist`] provide
//! reproducible randomness, [`model`] the state-space contract, [`smc`],
//! [`rbpf`] and [`kalman`] the likelihood estimators, and [`pmh`] the
//! parameter sampler built on top of them. [`damper`], [`lgss`] and
//! `rbpf::ClgBenchmark` are ready-made models.

pub mod damper;
pub mod dataset;
pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod kalman;
pub mod lgss;
pub mod model;
pub mod pmh;
pub mod rbpf;
pub mod resampling;
pub mod rng;
pub mod smc;
pub mod stats;

pub use dataset::Dataset;
pub use dist::{DistKind, Distribution};
pub use error::{Error, Result};
pub use model::{AdaptedSsmModel, ParamVector, SsmModel};
pub use resampling::Resampler;
pub use rng::RngStream;
pub use smc::{LogLikEstimate, Method};
