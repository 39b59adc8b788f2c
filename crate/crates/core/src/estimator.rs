//! Streaming ratio estimator `sum(w_i x_i) / sum(w_i)`.
//!
//! Numerator and denominator are fed the same point with the same weight.
//! Weights arrive as logarithms and both sums are kept relative to the
//! largest log-weight seen so far, so the largest term always has scale 1 and
//! nothing overflows however sharp the density is. The shift cancels in the
//! ratio, which is also why adding a constant to every log-weight (that is,
//! rescaling the proposal density) leaves the estimate unchanged.

use crate::error::{Error, Result};

/// A sample point and the logarithm of its importance weight `g(x) / P(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub x: Vec<f64>,
    pub log_weight: f64,
}

impl WeightedSample {
    pub fn new(x: Vec<f64>, log_weight: f64) -> Self {
        Self { x, log_weight }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioAccumulator {
    n: usize,
    count: u64,
    log_scale: f64,
    scaled_denominator: f64,
    scaled_numerator: Vec<f64>,
    saturated_at: Option<Vec<f64>>,
    // bounding box of the points that carry weight
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RatioAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            count: 0,
            log_scale: f64::NEG_INFINITY,
            scaled_denominator: 0.0,
            scaled_numerator: vec![0.0; n],
            saturated_at: None,
            lo: vec![f64::INFINITY; n],
            hi: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of samples consumed, whatever their weight.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// The point at which an infinite weight was consumed, if any.
    pub fn saturated_at(&self) -> Option<&[f64]> {
        self.saturated_at.as_deref()
    }

    /// `ln sum(w_i)`, `-inf` when nothing with finite weight was consumed.
    pub fn log_denominator(&self) -> f64 {
        if self.scaled_denominator > 0.0 {
            self.log_scale + self.scaled_denominator.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn consume_sample(&mut self, s: &WeightedSample) -> Result<()> {
        self.consume(&s.x, s.log_weight)
    }

    pub fn consume(&mut self, x: &[f64], log_weight: f64) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::ArityMismatch { expected: self.n, found: x.len() });
        }
        if log_weight.is_nan() {
            return Err(Error::InvalidWeight);
        }
        self.count += 1;
        if self.saturated_at.is_some() {
            return Ok(());
        }
        if log_weight == f64::INFINITY {
            // exact hit of a root: the ratio degenerates to this point
            self.saturated_at = Some(x.to_vec());
            return Ok(());
        }
        if log_weight == f64::NEG_INFINITY {
            return Ok(());
        }
        if log_weight > self.log_scale {
            self.rescale(log_weight);
        }
        let w = (log_weight - self.log_scale).exp();
        self.scaled_denominator += w;
        for (j, (acc, v)) in self.scaled_numerator.iter_mut().zip(x).enumerate() {
            *acc += w * v;
            self.lo[j] = self.lo[j].min(*v);
            self.hi[j] = self.hi[j].max(*v);
        }
        Ok(())
    }

    fn rescale(&mut self, new_scale: f64) {
        let factor = (self.log_scale - new_scale).exp();
        self.scaled_denominator *= factor;
        for v in &mut self.scaled_numerator {
            *v *= factor;
        }
        self.log_scale = new_scale;
    }

    /// The current ratio estimate.
    pub fn estimate(&self) -> Result<Vec<f64>> {
        if let Some(x) = &self.saturated_at {
            return Ok(x.clone());
        }
        if !(self.scaled_denominator > 0.0) {
            return Err(Error::EmptyEstimator);
        }
        // rounding can push the quotient an ulp past the convex hull
        Ok(self
            .scaled_numerator
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(num, (lo, hi))| (num / self.scaled_denominator).clamp(*lo, *hi))
            .collect())
    }

    /// Folds in an accumulator built from a disjoint sample stream.
    ///
    /// If both are saturated, `self`'s saturation point wins, matching the
    /// order a single stream `self ++ other` would have produced.
    pub fn merge(&mut self, other: &RatioAccumulator) -> Result<()> {
        if other.n != self.n {
            return Err(Error::ArityMismatch { expected: self.n, found: other.n });
        }
        self.count += other.count;
        if self.saturated_at.is_some() {
            return Ok(());
        }
        if let Some(x) = &other.saturated_at {
            self.saturated_at = Some(x.clone());
            return Ok(());
        }
        if !(other.scaled_denominator > 0.0) {
            return Ok(());
        }
        if other.log_scale > self.log_scale {
            self.rescale(other.log_scale);
        }
        let factor = (other.log_scale - self.log_scale).exp();
        self.scaled_denominator += factor * other.scaled_denominator;
        for j in 0..self.n {
            self.scaled_numerator[j] += factor * other.scaled_numerator[j];
            self.lo[j] = self.lo[j].min(other.lo[j]);
            self.hi[j] = self.hi[j].max(other.hi[j]);
        }
        Ok(())
    }
}
