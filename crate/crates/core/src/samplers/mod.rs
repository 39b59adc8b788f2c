//! Proposal distributions and the sampling loops that feed the ratio estimator.
//!
//! Two strategies are provided: a uniform proposal over the domain, and an
//! adaptive product Gaussian that recenters on the running estimate and
//! narrows as the estimate settles. Both reject points that fall outside the
//! box or inside an exclusion ball.

mod adaptive;
mod stream;
mod uniform;

pub use adaptive::{
    adaptive_run, mean_abs_successive_diff, AdaptiveConfig, AdaptiveState, HistorySource,
    ProposalWeighting,
};
pub use stream::{derive_seed, SampleStream};
pub use uniform::{uniform_run, UniformConfig, UniformStrategy};

use rand_chacha::ChaCha8Rng;

use crate::density::{log_density_at, DensityParams};
use crate::error::{Error, Result};
use crate::estimator::RatioAccumulator;
use crate::field::ScalarField;
use crate::geometry::Domain;

/// Consecutive rejections after which a sampler gives up.
pub const MAX_REJECTIONS: u64 = 1_000_000;

/// A proposal draw and the log of the proposal density at that point.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub point: Vec<f64>,
    pub log_density: f64,
}

/// One checkpoint of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub samples: usize,
    pub estimate: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Result of a single solver run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub estimate: Vec<f64>,
    pub sigma: Vec<f64>,
    pub samples_used: usize,
    /// `true` when the run stopped because `max(sigma) < tol`.
    pub converged: bool,
    pub seed: u64,
    pub trace: Vec<TraceRow>,
}

/// Draws samples `start..start + count` and accumulates their weights.
///
/// `draw` maps a per-sample generator to a point and the log-density the
/// weight is divided by. With `workers > 1` the index range is cut into
/// contiguous chunks whose accumulators are merged in index order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate_batch<F, D>(
    field: &F,
    domain: &Domain,
    params: DensityParams,
    stream: &SampleStream,
    start: u64,
    count: u64,
    workers: usize,
    draw: D,
) -> Result<RatioAccumulator>
where
    F: ScalarField + ?Sized,
    D: Fn(&mut ChaCha8Rng) -> Result<(Vec<f64>, f64)> + Sync,
{
    let chunk = |from: u64, to: u64| -> Result<RatioAccumulator> {
        let mut acc = RatioAccumulator::new(domain.dim());
        for i in from..to {
            let mut rng = stream.rng(i);
            let (x, log_p) = draw(&mut rng)?;
            let lw = log_density_at(field, domain, &x, params)? - log_p;
            acc.consume(&x, lw)?;
        }
        Ok(acc)
    };

    let workers = workers.max(1) as u64;
    if workers == 1 || count < 2 * workers {
        return chunk(start, start + count);
    }
    let per = count.div_ceil(workers);
    let parts: Vec<Result<RatioAccumulator>> = std::thread::scope(|scope| {
        let chunk = &chunk;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let from = start + (w * per).min(count);
                let to = start + ((w + 1) * per).min(count);
                scope.spawn(move || chunk(from, to))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
    });
    let mut acc = RatioAccumulator::new(domain.dim());
    for part in parts {
        acc.merge(&part?)?;
    }
    Ok(acc)
}

pub(crate) fn check_budget(budget: usize) -> Result<()> {
    if budget == 0 {
        return Err(Error::InvalidConfig("sample budget must be positive".into()));
    }
    Ok(())
}
