use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{accumulate_batch, check_budget, Draw, RunOutcome, SampleStream, TraceRow, MAX_REJECTIONS};
use crate::density::DensityParams;
use crate::error::{Error, Result};
use crate::estimator::RatioAccumulator;
use crate::field::ScalarField;
use crate::geometry::Domain;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// What the importance weight divides `g` by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProposalWeighting {
    /// The bare Gaussian kernel `exp(-sum (x - mean)^2 / sigma^2)`, with no
    /// normalization constant. Narrow late-stage proposals then keep weights
    /// comparable to the wide early ones.
    #[default]
    Kernel,
    /// The normalized density, kernel divided by `prod(sigma_j sqrt(pi))`.
    Normalized,
}

/// Which estimate is pushed into the sigma window after each batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistorySource {
    /// The ratio estimate of the latest batch alone.
    #[default]
    Batch,
    /// The running estimate over every sample so far.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// Samples drawn between proposal updates.
    pub update_every: usize,
    /// Length of the sigma window; `None` means `10 * n`.
    pub window: Option<usize>,
    /// The run stops once every component of sigma is below this.
    pub tol: f64,
    /// Sigma floor as a fraction of each box width.
    pub sigma_floor: f64,
    /// Initial sigma as a multiple of each box width; large values make the
    /// first proposal flat over the box.
    pub initial_sigma: f64,
    /// Batches drawn from the initial flat proposal before sigma first
    /// adapts; `None` means half the window, rounded up.
    pub warmup: Option<usize>,
    pub weighting: ProposalWeighting,
    pub history: HistorySource,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            update_every: 5,
            window: None,
            tol: 1e-9,
            sigma_floor: 1e-12,
            initial_sigma: 10.0,
            warmup: None,
            weighting: ProposalWeighting::default(),
            history: HistorySource::default(),
        }
    }
}

impl AdaptiveConfig {
    pub fn window_for(&self, n: usize) -> usize {
        self.window.unwrap_or(10 * n.max(1))
    }

    pub fn warmup_for(&self, n: usize) -> usize {
        self.warmup.unwrap_or_else(|| self.window_for(n).div_ceil(2))
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_every == 0 {
            return Err(Error::InvalidConfig("update interval must be positive".into()));
        }
        if self.window == Some(0) {
            return Err(Error::InvalidConfig("sigma window must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.sigma_floor > 0.0) || !(self.initial_sigma > 0.0) {
            return Err(Error::InvalidConfig("sigma floor and initial sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Mean absolute successive difference, per component, of a run of estimates.
pub fn mean_abs_successive_diff(history: &[Vec<f64>]) -> Vec<f64> {
    let n = history.first().map_or(0, Vec::len);
    let pairs = history.len().saturating_sub(1);
    let mut out = vec![0.0; n];
    if pairs == 0 {
        return out;
    }
    for w in history.windows(2) {
        for (o, (a, b)) in out.iter_mut().zip(w[1].iter().zip(&w[0])) {
            *o += (a - b).abs();
        }
    }
    out.iter_mut().for_each(|o| *o /= pairs as f64);
    out
}

/// The adaptive product-Gaussian proposal
/// `P(x) ∝ exp(-sum_j (x_j - mean_j)^2 / sigma_j^2)`.
///
/// Note there is no factor 2 in the exponent: `sigma` is a width, and the
/// per-coordinate standard deviation is `sigma / sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    mean: Vec<f64>,
    sigma: Vec<f64>,
    sigma_floor: Vec<f64>,
    history: VecDeque<Vec<f64>>,
    window: usize,
    update_every: usize,
}

impl AdaptiveState {
    pub fn new(
        mean: Vec<f64>,
        sigma: Vec<f64>,
        sigma_floor: Vec<f64>,
        window: usize,
        update_every: usize,
    ) -> Result<Self> {
        let n = mean.len();
        if sigma.len() != n || sigma_floor.len() != n {
            return Err(Error::ArityMismatch { expected: n, found: sigma.len().min(sigma_floor.len()) });
        }
        if window == 0 || update_every == 0 {
            return Err(Error::InvalidConfig("window and update interval must be positive".into()));
        }
        if sigma_floor.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::InvalidConfig("sigma floor must be positive".into()));
        }
        if sigma.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("sigma must be finite".into()));
        }
        let sigma = sigma.iter().zip(&sigma_floor).map(|(s, f)| s.max(*f)).collect();
        Ok(Self { mean, sigma, sigma_floor, history: VecDeque::with_capacity(window + 1), window, update_every })
    }

    /// The initial state: centered on the box, flat over it.
    pub fn flat(domain: &Domain, cfg: &AdaptiveConfig) -> Result<Self> {
        cfg.validate()?;
        let widths = domain.widths();
        // degenerate dimensions still need a positive width
        let scale: Vec<f64> = widths.iter().map(|w| if *w > 0.0 { *w } else { 1.0 }).collect();
        Self::new(
            domain.center(),
            scale.iter().map(|w| cfg.initial_sigma * w).collect(),
            scale.iter().map(|w| cfg.sigma_floor * w).collect(),
            cfg.window_for(domain.dim()),
            cfg.update_every,
        )
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_floor(&self) -> &[f64] {
        &self.sigma_floor
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn update_every(&self) -> usize {
        self.update_every
    }

    pub fn history(&self) -> impl Iterator<Item = &[f64]> {
        self.history.iter().map(Vec::as_slice)
    }

    /// Number of successive-difference pairs currently in the window.
    pub fn pairs(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    /// Appends an estimate, keeping the last `window + 1`.
    pub fn push_estimate(&mut self, estimate: Vec<f64>) {
        self.history.push_back(estimate);
        while self.history.len() > self.window + 1 {
            self.history.pop_front();
        }
    }

    /// Sets sigma to the mean absolute successive difference over the
    /// window, averaging over the available pairs while fewer than `window`
    /// exist, and clamps it below by the floor. A no-op with fewer than two
    /// estimates.
    pub fn update_sigma(&mut self) {
        if self.history.len() < 2 {
            return;
        }
        let h: Vec<Vec<f64>> = self.history.iter().cloned().collect();
        self.sigma = mean_abs_successive_diff(&h)
            .into_iter()
            .zip(&self.sigma_floor)
            .map(|(s, f)| s.max(*f))
            .collect();
    }

    pub fn recenter(&mut self, mean: &[f64]) {
        self.mean.copy_from_slice(mean);
    }

    /// Log of the normalized, untruncated Gaussian density.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_kernel(x) - self.log_normalizer()
    }

    /// Log of the bare kernel, `-sum (x - mean)^2 / sigma^2`.
    pub fn log_kernel(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.mean.iter().zip(&self.sigma))
            .map(|(v, (m, s))| -((v - m) / s).powi(2))
            .sum()
    }

    fn log_normalizer(&self) -> f64 {
        self.sigma.iter().map(|s| (s * SQRT_PI).ln()).sum()
    }

    pub fn log_weighting_density(&self, x: &[f64], weighting: ProposalWeighting) -> f64 {
        match weighting {
            ProposalWeighting::Kernel => self.log_kernel(x),
            ProposalWeighting::Normalized => self.log_density(x),
        }
    }

    /// A draw from the Gaussian restricted to the domain by rejection.
    ///
    /// Box truncation factorizes over coordinates, so each coordinate is
    /// rejected against its own interval; only exclusion balls need whole-point
    /// rejection. The reported density is the untruncated one.
    pub fn gaussian_next<R: Rng + ?Sized>(&self, domain: &Domain, rng: &mut R) -> Result<Draw> {
        let point = self.sample_point(domain, rng)?;
        let log_density = self.log_density(&point);
        Ok(Draw { point, log_density })
    }

    fn sample_point<R: Rng + ?Sized>(&self, domain: &Domain, rng: &mut R) -> Result<Vec<f64>> {
        if domain.dim() != self.mean.len() {
            return Err(Error::ArityMismatch { expected: self.mean.len(), found: domain.dim() });
        }
        let mut x = vec![0.0; self.mean.len()];
        let mut rejections = 0u64;
        loop {
            for (j, v) in x.iter_mut().enumerate() {
                let (lo, hi) = (domain.lower()[j], domain.upper()[j]);
                if lo == hi {
                    *v = lo;
                    continue;
                }
                let sd = self.sigma[j] * std::f64::consts::FRAC_1_SQRT_2;
                loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let c = self.mean[j] + sd * z;
                    if lo <= c && c <= hi {
                        *v = c;
                        break;
                    }
                    rejections += 1;
                    if rejections >= MAX_REJECTIONS {
                        return Err(Error::ExclusionSaturated { rejections });
                    }
                }
            }
            if !domain.is_excluded(&x) {
                return Ok(x);
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(Error::ExclusionSaturated { rejections });
            }
        }
    }
}

/// Adaptive sampling loop.
///
/// Draws `update_every` samples from the current proposal, folds them into
/// the running estimator with log-weight `ln g - ln P`, pushes the tracked
/// estimate into the sigma window, recenters the proposal on the running
/// estimate and, once the warmup is over, updates sigma. One trace row is
/// emitted per batch. Stops at `budget` or when `max(sigma) < tol`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_run<F: ScalarField + ?Sized>(
    field: &F,
    domain: &Domain,
    params: DensityParams,
    mut state: AdaptiveState,
    cfg: &AdaptiveConfig,
    budget: usize,
    seed: u64,
    workers: usize,
) -> Result<RunOutcome> {
    cfg.validate()?;
    check_budget(budget)?;
    if budget < state.update_every {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} is smaller than the update interval {}",
            state.update_every
        )));
    }
    if field.arity() != domain.dim() {
        return Err(Error::ArityMismatch { expected: domain.dim(), found: field.arity() });
    }
    if params.eta() == 0.0 {
        return Err(Error::InvalidConfig("adaptive sampling needs eta > 0".into()));
    }

    let stream = SampleStream::new(seed);
    let warmup = cfg.warmup_for(domain.dim());
    let batch_len = state.update_every;
    let mut acc = RatioAccumulator::new(domain.dim());
    let mut trace = Vec::new();
    let mut used = 0usize;
    let mut batches = 0usize;
    let mut converged = false;

    while used + batch_len <= budget {
        let proposal = &state;
        let batch = accumulate_batch(field, domain, params, &stream, used as u64, batch_len as u64, workers, |rng: &mut ChaCha8Rng| {
            let x = proposal.sample_point(domain, rng)?;
            let lp = proposal.log_weighting_density(&x, cfg.weighting);
            Ok((x, lp))
        })?;
        acc.merge(&batch)?;
        used += batch_len;
        batches += 1;

        let estimate = match acc.estimate() {
            Ok(e) => e,
            Err(Error::EmptyEstimator) => continue,
            Err(e) => return Err(e),
        };
        let tracked = match cfg.history {
            HistorySource::Cumulative => estimate.clone(),
            HistorySource::Batch => batch.estimate().unwrap_or_else(|_| estimate.clone()),
        };
        state.push_estimate(tracked);
        state.recenter(&estimate);
        let adapting = batches > warmup;
        if adapting {
            state.update_sigma();
        }
        trace.push(TraceRow { samples: used, estimate, sigma: state.sigma().to_vec() });
        if adapting && state.sigma().iter().all(|s| *s < cfg.tol) {
            converged = true;
            break;
        }
    }

    Ok(RunOutcome {
        estimate: acc.estimate()?,
        sigma: state.sigma().to_vec(),
        samples_used: used,
        converged,
        seed,
        trace,
    })
}
