use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{accumulate_batch, check_budget, mean_abs_successive_diff, Draw, RunOutcome, SampleStream, TraceRow, MAX_REJECTIONS};
use crate::density::DensityParams;
use crate::error::{Error, Result};
use crate::estimator::RatioAccumulator;
use crate::field::ScalarField;
use crate::geometry::Domain;

/// Uniform proposal over the domain with the unnormalized density `P = 1`.
#[derive(Debug, Clone)]
pub struct UniformStrategy {
    domain: Domain,
    stream: SampleStream,
    next_index: u64,
}

impl UniformStrategy {
    pub fn new(domain: Domain, seed: u64) -> Self {
        Self { domain, stream: SampleStream::new(seed), next_index: 0 }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// The next point of the stream, with `log_density = 0`.
    pub fn next_draw(&mut self) -> Result<Draw> {
        let d = self.draw_at(self.next_index)?;
        self.next_index += 1;
        Ok(d)
    }

    /// Point `index` of the stream, independent of any other draw.
    pub fn draw_at(&self, index: u64) -> Result<Draw> {
        let point = sample_uniform(&self.domain, &mut self.stream.rng(index))?;
        Ok(Draw { point, log_density: 0.0 })
    }
}

pub(crate) fn sample_uniform(domain: &Domain, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut x = vec![0.0; domain.dim()];
    for _ in 0..MAX_REJECTIONS {
        for (v, (lo, hi)) in x.iter_mut().zip(domain.lower().iter().zip(domain.upper())) {
            *v = lo + rng.random::<f64>() * (hi - lo);
        }
        if !domain.is_excluded(&x) {
            return Ok(x);
        }
    }
    Err(Error::ExclusionSaturated { rejections: MAX_REJECTIONS })
}

/// Settings of a uniform-proposal run.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformConfig {
    /// Samples between trace rows; `None` gives about 200 rows per run.
    pub checkpoint_every: Option<usize>,
    /// Number of checkpoint-to-checkpoint moves averaged into the reported spread.
    pub window: usize,
    pub tol: f64,
}

impl Default for UniformConfig {
    fn default() -> Self {
        Self { checkpoint_every: None, window: 10, tol: 1e-9 }
    }
}

/// Runs the ratio estimator on uniform draws for the whole `budget`.
///
/// The spread reported per row is the mean absolute move of the estimate over
/// the last `window` checkpoints; the run never stops early, and counts as
/// converged when that spread ends below `tol`.
pub fn uniform_run<F: ScalarField + ?Sized>(
    field: &F,
    domain: &Domain,
    params: DensityParams,
    cfg: &UniformConfig,
    budget: usize,
    seed: u64,
    workers: usize,
) -> Result<RunOutcome> {
    check_budget(budget)?;
    if field.arity() != domain.dim() {
        return Err(Error::ArityMismatch { expected: domain.dim(), found: field.arity() });
    }
    let every = cfg.checkpoint_every.unwrap_or_else(|| budget.div_ceil(200)).max(1);
    let stream = SampleStream::new(seed);
    let mut acc = RatioAccumulator::new(domain.dim());
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut trace = Vec::new();
    let mut sigma = domain.widths();
    let mut used = 0usize;

    while used < budget {
        let count = every.min(budget - used);
        let batch = accumulate_batch(field, domain, params, &stream, used as u64, count as u64, workers, |rng| {
            Ok((sample_uniform(domain, rng)?, 0.0))
        })?;
        acc.merge(&batch)?;
        used += count;
        let estimate = match acc.estimate() {
            Ok(e) => e,
            Err(Error::EmptyEstimator) => continue,
            Err(e) => return Err(e),
        };
        history.push(estimate.clone());
        if history.len() > cfg.window + 1 {
            history.remove(0);
        }
        if history.len() >= 2 {
            sigma = mean_abs_successive_diff(&history);
        }
        trace.push(TraceRow { samples: used, estimate, sigma: sigma.clone() });
    }

    let estimate = acc.estimate()?;
    let converged = history.len() >= 2 && sigma.iter().all(|s| *s < cfg.tol);
    Ok(RunOutcome { estimate, sigma, samples_used: used, converged, seed, trace })
}
