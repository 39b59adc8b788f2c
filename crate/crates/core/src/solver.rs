//! One entry point over both sampling strategies.

use std::fmt;
use std::str::FromStr;

use crate::density::DensityParams;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Domain;
use crate::samplers::{adaptive_run, uniform_run, AdaptiveConfig, AdaptiveState, RunOutcome, UniformConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    Uniform,
    #[default]
    Adaptive,
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(Error::InvalidConfig(format!("unknown sampler `{other}`"))),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Adaptive => "adaptive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub sampler: SamplerKind,
    pub density: DensityParams,
    pub adaptive: AdaptiveConfig,
    /// Only `checkpoint_every` is read for uniform runs; the window and
    /// tolerance come from `adaptive`.
    pub uniform: UniformConfig,
    pub budget: usize,
    pub workers: usize,
}

impl SolverConfig {
    /// Adaptive sampling with the default settings for dimension `n`.
    pub fn adaptive(n: usize) -> Self {
        Self {
            sampler: SamplerKind::Adaptive,
            density: DensityParams::for_dimension(n, 1e-8).expect("valid defaults"),
            adaptive: AdaptiveConfig::default(),
            uniform: UniformConfig::default(),
            budget: 10_000,
            workers: 1,
        }
    }

    /// Uniform sampling with `eta = 0` for dimension `n`.
    pub fn uniform(n: usize) -> Self {
        Self {
            sampler: SamplerKind::Uniform,
            density: DensityParams::for_dimension(n, 0.0).expect("valid defaults"),
            ..Self::adaptive(n)
        }
    }
}

/// Runs the configured sampler on `field` over `domain`.
pub fn solve<F: ScalarField + ?Sized>(field: &F, domain: &Domain, cfg: &SolverConfig, seed: u64) -> Result<RunOutcome> {
    match cfg.sampler {
        SamplerKind::Adaptive => {
            let state = AdaptiveState::flat(domain, &cfg.adaptive)?;
            adaptive_run(field, domain, cfg.density, state, &cfg.adaptive, cfg.budget, seed, cfg.workers)
        }
        SamplerKind::Uniform => {
            let ucfg = UniformConfig {
                checkpoint_every: cfg.uniform.checkpoint_every,
                window: cfg.adaptive.window_for(domain.dim()),
                tol: cfg.adaptive.tol,
            };
            uniform_run(field, domain, cfg.density, &ucfg, cfg.budget, seed, cfg.workers)
        }
    }
}
