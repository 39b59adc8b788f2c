//! Global root finding by the center of mass of a singular density.
//!
//! A root of `f` on a box is located as the center of mass of
//! `g = 1/(f^2 + eta^2)^k`, estimated by Monte Carlo importance sampling. The
//! adaptive sampler narrows a Gaussian proposal around the running estimate,
//! which gives roughly exponential convergence; uniform sampling is provided
//! as a baseline.
//!
//! ```
//! use massroot::field::builtin;
//! use massroot::solver::{solve, SolverConfig};
//!
//! let p = builtin("osc_1d")?;
//! let run = solve(p.field.as_ref(), &p.domain, &SolverConfig::adaptive(1), 42)?;
//! assert!(p.root_error(&run.estimate).unwrap() < 1e-6);
//! # Ok::<(), massroot::Error>(())
//! ```
//!
//! The guide in `book/` covers each part in more detail.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod error;
pub mod estimator;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod multiroot;
pub mod samplers;
pub mod solver;

pub use error::{Error, Result};

// Runs the guide's code blocks as doc tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/center-of-mass.md")]
    mod center_of_mass {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/multiple-roots.md")]
    mod multiple_roots {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
