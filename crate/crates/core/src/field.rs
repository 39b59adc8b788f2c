//! Scalar functions on `R^n` and the built-in catalog of test problems.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Domain;

/// A deterministic real-valued function of `arity` real arguments.
///
/// Implementors provide [`value`](ScalarField::value); callers normally go
/// through [`eval`](ScalarField::eval), which checks the argument length and
/// turns NaN or infinite results into [`Error::NonFiniteValue`].
pub trait ScalarField: Send + Sync {
    fn arity(&self) -> usize;

    /// Raw evaluation. `x.len() == self.arity()` is assumed.
    fn value(&self, x: &[f64]) -> f64;

    fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity() {
            return Err(Error::ArityMismatch { expected: self.arity(), found: x.len() });
        }
        let v = self.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteValue { point: x.to_vec(), value: v })
        }
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn arity(&self) -> usize {
        (**self).arity()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// Wraps a closure as a [`ScalarField`].
#[derive(Clone)]
pub struct FnField<F> {
    arity: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(arity: usize, f: F) -> Self {
        assert!(arity > 0, "a field needs at least one argument");
        Self { arity, f }
    }
}

impl<F> ScalarField for FnField<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn arity(&self) -> usize {
        self.arity
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("arity", &self.arity).finish_non_exhaustive()
    }
}

/// A function with known roots on a known domain.
#[derive(Clone)]
pub struct TestProblem {
    pub name: String,
    pub field: Arc<dyn ScalarField>,
    pub domain: Domain,
    pub known_roots: Vec<Vec<f64>>,
    /// Order of vanishing of `f` at each root, parallel to `known_roots`.
    pub multiplicity: Vec<u32>,
    /// Exponent of the density to use instead of the dimension-based default.
    ///
    /// Set for problems whose roots vanish slower than linearly (so that the
    /// integer multiplicity cannot express them) or that carry several roots
    /// competing for the same estimate.
    pub suggested_k: Option<u32>,
}

impl TestProblem {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// The density exponent these experiments should use by default.
    pub fn k(&self) -> u32 {
        self.suggested_k.unwrap_or_else(|| {
            let m = self.multiplicity.iter().copied().max().unwrap_or(1);
            crate::density::default_k(self.dim(), m)
        })
    }

    /// Distance from `x` to the nearest known root, if any root is known.
    pub fn root_error(&self, x: &[f64]) -> Option<f64> {
        self.known_roots
            .iter()
            .map(|r| crate::geometry::distance(r, x))
            .min_by(f64::total_cmp)
    }
}

impl fmt::Debug for TestProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("known_roots", &self.known_roots)
            .field("multiplicity", &self.multiplicity)
            .field("suggested_k", &self.suggested_k)
            .finish_non_exhaustive()
    }
}

const ROOT: f64 = 0.6;

fn sphere(n: usize) -> TestProblem {
    TestProblem {
        name: format!("sphere_{n}d"),
        field: Arc::new(FnField::new(n, |x: &[f64]| {
            x.iter().map(|v| (v - ROOT) * (v - ROOT)).sum::<f64>().sqrt()
        })),
        domain: Domain::unit(n).expect("unit cube"),
        known_roots: vec![vec![ROOT; n]],
        multiplicity: vec![1],
        suggested_k: None,
    }
}

fn one_dim(
    name: &str,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    roots: &[f64],
    multiplicity: u32,
    suggested_k: Option<u32>,
) -> TestProblem {
    TestProblem {
        name: name.to_string(),
        field: Arc::new(FnField::new(1, move |x: &[f64]| f(x[0]))),
        domain: Domain::unit(1).expect("unit interval"),
        known_roots: roots.iter().map(|r| vec![*r]).collect(),
        multiplicity: vec![multiplicity; roots.len()],
        suggested_k,
    }
}

/// All built-in problems, in a fixed order.
pub fn builtin_catalog() -> Vec<TestProblem> {
    let mut out = vec![
        one_dim("abs_1d", |x| (x - ROOT).abs(), &[ROOT], 1, None),
        one_dim("osc_1d", |x| (x - ROOT).abs() * (2.0 + (40.0 * x).sin()), &[ROOT], 1, None),
        // f^2 vanishes only linearly here; k = 2 restores the growth of the
        // importance weights as the proposal narrows
        one_dim("kink_1d", |x| (x - ROOT).abs().sqrt(), &[ROOT], 1, Some(2)),
        one_dim(
            "two_roots_1d",
            |x| (x - 0.3).abs() * (x - 0.8).abs(),
            &[0.3, 0.8],
            1,
            Some(2),
        ),
    ];
    out.extend([1, 2, 3, 5].into_iter().map(sphere));
    out
}

/// Looks a builtin up by name, accepting an optional `builtin:` prefix.
pub fn builtin(name: &str) -> Result<TestProblem> {
    let name = name.strip_prefix("builtin:").unwrap_or(name);
    builtin_catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| Error::UnknownBuiltin(name.to_string()))
}
