//! Integration domains: an axis-aligned box with optional exclusion balls.
//!
//! Exclusions are honored by rejection in the samplers and by a vanishing
//! density inside the balls. The box volume is never corrected for them,
//! since the ratio estimator does not depend on the proposal normalization.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// An open ball removed from the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionBall {
    center: Vec<f64>,
    radius: f64,
}

impl ExclusionBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "exclusion radius must be positive and finite, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDomain("exclusion center must be finite".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Strictly inside: the boundary sphere belongs to the domain.
    pub fn covers(&self, x: &[f64]) -> bool {
        distance_sq(&self.center, x) < self.radius * self.radius
    }
}

/// Axis-aligned box `[lower, upper]` minus a set of exclusion balls.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    exclusions: Vec<ExclusionBall>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("domain needs at least one dimension".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidDomain(format!("bounds of dimension {} are not finite", j + 1)));
            }
            if lo > hi {
                return Err(Error::InvalidDomain(format!(
                    "dimension {}: lower bound {lo} exceeds upper bound {hi}",
                    j + 1
                )));
            }
        }
        Ok(Self { lower, upper, exclusions: Vec::new() })
    }

    /// The unit cube `[0,1]^n`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn exclusions(&self) -> &[ExclusionBall] {
        &self.exclusions
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn diagonal(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Box volume. Exclusions are ignored.
    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn add_exclusion(&mut self, ball: ExclusionBall) -> Result<()> {
        if ball.center.len() != self.dim() {
            return Err(Error::ArityMismatch { expected: self.dim(), found: ball.center.len() });
        }
        if ball.covers_box(self) {
            return Err(Error::InvalidDomain(
                "exclusion ball covers the whole box; nothing left to sample".into(),
            ));
        }
        self.exclusions.push(ball);
        Ok(())
    }

    pub fn with_exclusion(mut self, ball: ExclusionBall) -> Result<Self> {
        self.add_exclusion(ball)?;
        Ok(self)
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn is_excluded(&self, x: &[f64]) -> bool {
        self.exclusions.iter().any(|b| b.covers(x))
    }

    /// Membership: closed box, open exclusion balls.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::ArityMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self.in_box(x) && !self.is_excluded(x))
    }

    /// The same domain shifted by `offset`, exclusions included.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(Error::ArityMismatch { expected: self.dim(), found: offset.len() });
        }
        let shift = |v: &[f64]| v.iter().zip(offset).map(|(a, b)| a + b).collect::<Vec<_>>();
        Ok(Self {
            lower: shift(&self.lower),
            upper: shift(&self.upper),
            exclusions: self
                .exclusions
                .iter()
                .map(|b| ExclusionBall { center: shift(&b.center), radius: b.radius })
                .collect(),
        })
    }
}

impl ExclusionBall {
    fn covers_box(&self, d: &Domain) -> bool {
        // farthest corner inside the ball means every corner, hence the box, is covered
        let far: f64 = self
            .center
            .iter()
            .zip(d.lower.iter().zip(&d.upper))
            .map(|(c, (lo, hi))| {
                let e = (c - lo).abs().max((hi - c).abs());
                e * e
            })
            .sum();
        far < self.radius * self.radius
    }
}

pub(crate) fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    distance_sq(a, b).sqrt()
}

/// Parses `"lo,hi;lo,hi;..."`, one pair per dimension.
impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (j, part) in s.split(';').enumerate() {
            let mut it = part.split(',');
            let (lo, hi) = match (it.next(), it.next(), it.next()) {
                (Some(lo), Some(hi), None) => (lo, hi),
                _ => {
                    return Err(Error::InvalidDomain(format!(
                        "dimension {}: expected `lo,hi`, got `{}`",
                        j + 1,
                        part.trim()
                    )))
                }
            };
            let num = |t: &str| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidDomain(format!("dimension {}: `{}` is not a number", j + 1, t.trim()))
                })
            };
            lower.push(num(lo)?);
            upper.push(num(hi)?);
        }
        Domain::new(lower, upper)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            write!(f, "{lo},{hi}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contains_examples() {
        let d = Domain::unit(1).unwrap();
        assert!(d.contains(&[0.5]).unwrap());
        assert!(d.contains(&[1.0]).unwrap());
        assert!(d.contains(&[0.0]).unwrap());
        assert!(!d.contains(&[1.0 + 1e-12]).unwrap());

        let d = d.with_exclusion(ExclusionBall::new(vec![0.3], 0.1).unwrap()).unwrap();
        assert!(!d.contains(&[0.35]).unwrap());
        // open ball: the sphere itself stays in the domain
        assert!(d.contains(&[0.5]).unwrap());
        assert!(d.contains(&[0.3 + 0.125]).unwrap());
    }

    #[test]
    fn contains_rejects_wrong_arity() {
        let d = Domain::unit(2).unwrap();
        assert_eq!(d.contains(&[0.5]), Err(Error::ArityMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn volumes() {
        assert_eq!(Domain::unit(3).unwrap().volume(), 1.0);
        assert_eq!(Domain::new(vec![0.0, 0.0], vec![2.0, 0.5]).unwrap().volume(), 1.0);
        assert_eq!(Domain::unit(5).unwrap().volume(), 1.0);
        // exclusions do not change the volume
        let d = Domain::unit(2)
            .unwrap()
            .with_exclusion(ExclusionBall::new(vec![0.5, 0.5], 0.2).unwrap())
            .unwrap();
        assert_eq!(d.volume(), 1.0);
    }

    #[test]
    fn parse_domain_strings() {
        let d: Domain = "0,1;0,1".parse().unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.upper(), &[1.0, 1.0]);
        let d: Domain = " -2 , 3.5 ".parse().unwrap();
        assert_eq!(d.lower(), &[-2.0]);
        assert!(matches!("0,1;1,0".parse::<Domain>(), Err(Error::InvalidDomain(_))));
        assert!(matches!("0;1".parse::<Domain>(), Err(Error::InvalidDomain(_))));
        assert!(matches!("0,a".parse::<Domain>(), Err(Error::InvalidDomain(_))));
        assert!(matches!("0,1,2".parse::<Domain>(), Err(Error::InvalidDomain(_))));
        assert_eq!("0,1;0.25,0.5".parse::<Domain>().unwrap().to_string(), "0,1;0.25,0.5");
    }

    #[test]
    fn degenerate_box_is_allowed() {
        let d = Domain::new(vec![0.0, 0.3], vec![1.0, 0.3]).unwrap();
        assert_eq!(d.volume(), 0.0);
        assert!(d.contains(&[0.2, 0.3]).unwrap());
    }

    #[test]
    fn ball_covering_the_box_is_refused() {
        let d = Domain::unit(2).unwrap();
        let r = d.with_exclusion(ExclusionBall::new(vec![0.5, 0.5], 0.8).unwrap());
        assert!(matches!(r, Err(Error::InvalidDomain(_))));
        assert!(ExclusionBall::new(vec![0.5], 0.0).is_err());
        assert!(ExclusionBall::new(vec![0.5], -1.0).is_err());
    }

    #[test]
    fn translation_moves_exclusions() {
        let d = Domain::unit(1)
            .unwrap()
            .with_exclusion(ExclusionBall::new(vec![0.3], 0.1).unwrap())
            .unwrap();
        let t = d.translated(&[2.0]).unwrap();
        assert_eq!(t.lower(), &[2.0]);
        assert!(!t.contains(&[2.3]).unwrap());
        assert!(t.contains(&[2.5]).unwrap());
    }
}
