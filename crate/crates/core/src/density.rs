//! The singular density `g(x) = 1 / (f(x)^2 + eta^2)^k`, carried in the log domain.
//!
//! At `eta = 1e-8, k = 5` the density peaks at `1e80`, and larger exponents
//! overflow `f64` outright, so everything downstream works with `ln g`.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::Domain;

/// Exponent `k >= 1` and regularizer `eta >= 0` of the density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    k: u32,
    eta: f64,
}

impl DensityParams {
    pub fn new(k: u32, eta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("density exponent k must be at least 1".into()));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::InvalidConfig(format!("eta must be finite and non-negative, got {eta}")));
        }
        Ok(Self { k, eta })
    }

    /// `k = default_k(n, 1)` and the given `eta`.
    pub fn for_dimension(n: usize, eta: f64) -> Result<Self> {
        Self::new(default_k(n, 1), eta)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(self.k, eta)
    }
}

/// `ln g = -k ln(f^2 + eta^2)`.
///
/// Returns `+inf` exactly when `f_val == 0` and `eta == 0`. The squared sum is
/// formed with `hypot`, so tiny `f` does not underflow to a spurious infinity.
pub fn log_g(f_val: f64, p: DensityParams) -> f64 {
    let r = f_val.hypot(p.eta);
    if r == 0.0 {
        return f64::INFINITY;
    }
    -2.0 * f64::from(p.k) * r.ln()
}

/// `ln g` at a point of the domain, `-inf` inside an exclusion ball.
pub fn log_density_at<F: ScalarField + ?Sized>(
    field: &F,
    domain: &Domain,
    x: &[f64],
    p: DensityParams,
) -> Result<f64> {
    if domain.is_excluded(x) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_g(field.eval(x)?, p))
}

/// Default exponent for dimension `n` and root multiplicity `m`:
/// the smallest `k` with `2 k m >= n + m`, but never below `n`.
pub fn default_k(n: usize, multiplicity: u32) -> u32 {
    let n = n.max(1) as u32;
    let m = multiplicity.max(1);
    let divergent = (n + m).div_ceil(2 * m);
    n.max(divergent)
}
