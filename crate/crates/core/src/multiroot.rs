//! Finding several roots by repeated adaptive runs, carving an exclusion
//! ball around each root found.

use crate::density::DensityParams;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{Domain, ExclusionBall};
use crate::samplers::{adaptive_run, derive_seed, AdaptiveConfig, AdaptiveState};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRootConfig {
    pub max_roots: usize,
    /// `None` means 5% of the box diagonal.
    pub exclusion_radius: Option<f64>,
    /// Largest `|f|` at which an estimate counts as a root.
    pub residual_accept: f64,
    pub adaptive: AdaptiveConfig,
    /// Sample budget of each round.
    pub budget: usize,
    pub workers: usize,
}

impl Default for MultiRootConfig {
    fn default() -> Self {
        Self {
            max_roots: 8,
            exclusion_radius: None,
            residual_accept: 1e-6,
            adaptive: AdaptiveConfig::default(),
            budget: 10_000,
            workers: 1,
        }
    }
}

impl MultiRootConfig {
    pub fn radius_for(&self, domain: &Domain) -> f64 {
        self.exclusion_radius.unwrap_or(0.05 * domain.diagonal())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootRecord {
    pub location: Vec<f64>,
    /// `|f(location)|`.
    pub residual: f64,
    pub samples_used: usize,
    pub final_sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundVerdict {
    Accepted,
    /// Residual above the acceptance threshold.
    Rejected,
    /// The estimate fell inside an earlier exclusion ball.
    Repeated,
    /// The proposal narrowed onto an excluded region and could no longer
    /// place samples.
    Saturated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub seed: u64,
    pub verdict: RoundVerdict,
    /// Absent for a saturated round.
    pub run: Option<RoundRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRun {
    pub estimate: Vec<f64>,
    pub residual: f64,
    pub samples_used: usize,
    /// `false` when the round used its whole budget without meeting the tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRootOutcome {
    pub roots: Vec<RootRecord>,
    pub rounds: Vec<RoundReport>,
    /// Domain with every exclusion ball added during the search.
    pub domain: Domain,
}

/// Runs adaptive rounds on `domain` until a round finds nothing new or
/// `max_roots` roots are recorded. Round `r` uses seed `derive_seed(seed, r)`.
pub fn find_all<F: ScalarField + ?Sized>(
    field: &F,
    domain: &Domain,
    params: DensityParams,
    cfg: &MultiRootConfig,
    seed: u64,
) -> Result<MultiRootOutcome> {
    let radius = cfg.radius_for(domain);
    if cfg.max_roots == 0 {
        return Err(Error::InvalidConfig("max_roots must be at least 1".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig(format!("exclusion radius must be positive, got {radius}")));
    }
    if !(cfg.residual_accept > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "residual threshold must be positive, got {}",
            cfg.residual_accept
        )));
    }

    let mut domain = domain.clone();
    let mut roots = Vec::new();
    let mut rounds = Vec::new();
    for round in 0..cfg.max_roots as u64 {
        let round_seed = derive_seed(seed, round);
        let state = AdaptiveState::flat(&domain, &cfg.adaptive)?;
        let run = match adaptive_run(field, &domain, params, state, &cfg.adaptive, cfg.budget, round_seed, cfg.workers) {
            Ok(run) => run,
            Err(Error::ExclusionSaturated { .. }) => {
                rounds.push(RoundReport { seed: round_seed, verdict: RoundVerdict::Saturated, run: None });
                break;
            }
            Err(e) => return Err(e),
        };
        let residual = field.value(&run.estimate).abs();
        let verdict = if domain.is_excluded(&run.estimate) {
            RoundVerdict::Repeated
        } else if residual <= cfg.residual_accept {
            RoundVerdict::Accepted
        } else {
            RoundVerdict::Rejected
        };
        rounds.push(RoundReport {
            seed: round_seed,
            verdict,
            run: Some(RoundRun {
                estimate: run.estimate.clone(),
                residual,
                samples_used: run.samples_used,
                converged: run.converged,
            }),
        });
        if verdict != RoundVerdict::Accepted {
            break;
        }
        roots.push(RootRecord {
            location: run.estimate.clone(),
            residual,
            samples_used: run.samples_used,
            final_sigma: run.sigma,
        });
        let ball = ExclusionBall::new(run.estimate, radius)?;
        match domain.add_exclusion(ball) {
            Ok(()) => {}
            // nothing left to search
            Err(Error::InvalidDomain(_)) => break,
            Err(e) => return Err(e),
        }
    }
    Ok(MultiRootOutcome { roots, rounds, domain })
}
