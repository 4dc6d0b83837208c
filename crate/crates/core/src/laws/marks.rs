use std::ops::Bound;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{integrate, normal_cdf, normal_pdf};

/// Law of the jump marks of a finite-activity Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkDist {
    Point { at: f64 },
    Uniform { a: f64, b: f64 },
    Normal { mean: f64, sd: f64 },
    /// `a` with probability `p`, `b` otherwise.
    TwoPoint { a: f64, b: f64, p: f64 },
}

impl MarkDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarkDist::Point { at } if at == 0.0 || !at.is_finite() => {
                Err(invalid("nu.marks.at", "point mass must sit at a finite nonzero value"))
            }
            MarkDist::Uniform { a, b } if !(a < b && a.is_finite() && b.is_finite()) => {
                Err(invalid("nu.marks.b", format!("need finite a < b, got a={a}, b={b}")))
            }
            MarkDist::Normal { sd, .. } if !(sd > 0.0 && sd.is_finite()) => {
                Err(invalid("nu.marks.sd", format!("must be > 0, got {sd}")))
            }
            MarkDist::TwoPoint { a, b, p }
                if !((0.0..=1.0).contains(&p) && a != 0.0 && b != 0.0) =>
            {
                Err(invalid("nu.marks.p", "need p in [0, 1] and nonzero atoms"))
            }
            _ => Ok(()),
        }
    }

    /// Characteristic function `σ̂(z) = E[e^{izX}]`.
    pub fn char_fn(&self, z: f64) -> Complex64 {
        let unit = |x: f64| Complex64::from_polar(1.0, z * x);
        match *self {
            MarkDist::Point { at } => unit(at),
            MarkDist::Uniform { a, b } => {
                let half = 0.5 * z * (b - a);
                let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
                unit(0.5 * (a + b)) * sinc
            }
            MarkDist::Normal { mean, sd } => Complex64::from_polar((-0.5 * sd * sd * z * z).exp(), z * mean),
            MarkDist::TwoPoint { a, b, p } => unit(a) * p + unit(b) * (1.0 - p),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarkDist::Point { at } => at,
            MarkDist::Uniform { a, b } => 0.5 * (a + b),
            MarkDist::Normal { mean, .. } => mean,
            MarkDist::TwoPoint { a, b, p } => p * a + (1.0 - p) * b,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            MarkDist::Point { at } => at * at,
            MarkDist::Uniform { a, b } => (a * a + a * b + b * b) / 3.0,
            MarkDist::Normal { mean, sd } => mean * mean + sd * sd,
            MarkDist::TwoPoint { a, b, p } => p * a * a + (1.0 - p) * b * b,
        }
    }

    /// `E[X·1_{|X|≤1}]`.
    pub fn truncated_mean(&self) -> f64 {
        let inside = |x: f64| if x.abs() <= 1.0 { x } else { 0.0 };
        match *self {
            MarkDist::Point { at } => inside(at),
            MarkDist::Uniform { a, b } => {
                let lo = a.max(-1.0);
                let hi = b.min(1.0);
                if hi > lo {
                    (hi * hi - lo * lo) / (2.0 * (b - a))
                } else {
                    0.0
                }
            }
            MarkDist::Normal { mean, sd } => {
                let lo = (-1.0 - mean) / sd;
                let hi = (1.0 - mean) / sd;
                mean * (normal_cdf(hi) - normal_cdf(lo)) + sd * (normal_pdf(lo) - normal_pdf(hi))
            }
            MarkDist::TwoPoint { a, b, p } => p * inside(a) + (1.0 - p) * inside(b),
        }
    }

    pub fn max_abs(&self) -> Option<f64> {
        match *self {
            MarkDist::Point { at } => Some(at.abs()),
            MarkDist::Uniform { a, b } => Some(a.abs().max(b.abs())),
            MarkDist::Normal { .. } => None,
            MarkDist::TwoPoint { a, b, .. } => Some(a.abs().max(b.abs())),
        }
    }

    /// `P(X ∈ B)`.
    pub fn probability(&self, set: &MarkSet) -> f64 {
        match *self {
            MarkDist::Point { at } => f64::from(u8::from(set.contains(at))),
            MarkDist::Uniform { a, b } => set
                .intervals
                .iter()
                .filter_map(|iv| iv.clip(a, b))
                .map(|(lo, hi)| (hi - lo) / (b - a))
                .sum(),
            MarkDist::Normal { mean, sd } => set
                .intervals
                .iter()
                .map(|iv| {
                    let (lo, hi) = iv.endpoints();
                    normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd)
                })
                .sum(),
            MarkDist::TwoPoint { a, b, p } => {
                p * f64::from(u8::from(set.contains(a)))
                    + (1.0 - p) * f64::from(u8::from(set.contains(b)))
            }
        }
    }

    /// `E[f(X)·1_B(X)]`.
    pub fn integral<F>(&self, set: &MarkSet, f: &F) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        let atom = |x: f64| if set.contains(x) { f(x) } else { Complex64::new(0.0, 0.0) };
        let density_part = |dens: &dyn Fn(f64) -> f64, lo: f64, hi: f64| -> Result<Complex64> {
            let mut total = Complex64::new(0.0, 0.0);
            for iv in &set.intervals {
                let Some((a, b)) = iv.clip(lo, hi) else { continue };
                let breaks: Vec<f64> = (0..=64).map(|i| a + (b - a) * i as f64 / 64.0).collect();
                let re = integrate(|x| f(x).re * dens(x), &breaks, 1e-12)?;
                let im = integrate(|x| f(x).im * dens(x), &breaks, 1e-12)?;
                total += Complex64::new(re, im);
            }
            Ok(total)
        };
        match *self {
            MarkDist::Point { at } => Ok(atom(at)),
            MarkDist::TwoPoint { a, b, p } => Ok(atom(a) * p + atom(b) * (1.0 - p)),
            MarkDist::Uniform { a, b } => density_part(&|_| 1.0 / (b - a), a, b),
            MarkDist::Normal { mean, sd } => density_part(
                &|x| normal_pdf((x - mean) / sd) / sd,
                mean - 40.0 * sd,
                mean + 40.0 * sd,
            ),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkDist::Point { at } => at,
            MarkDist::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            MarkDist::Normal { mean, sd } => Normal::new(mean, sd)
                .expect("validated normal marks")
                .sample(rng),
            MarkDist::TwoPoint { a, b, p } => {
                if rng.random::<f64>() < p {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// One interval of jump sizes, with explicit open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkInterval {
    pub lo: Bound<f64>,
    pub hi: Bound<f64>,
}

impl MarkInterval {
    pub fn contains(&self, x: f64) -> bool {
        let above = match self.lo {
            Bound::Included(a) => x >= a,
            Bound::Excluded(a) => x > a,
            Bound::Unbounded => true,
        };
        let below = match self.hi {
            Bound::Included(b) => x <= b,
            Bound::Excluded(b) => x < b,
            Bound::Unbounded => true,
        };
        above && below
    }

    /// Numeric endpoints, with infinities for unbounded ends.
    pub fn endpoints(&self) -> (f64, f64) {
        let v = |b: Bound<f64>, inf: f64| match b {
            Bound::Included(x) | Bound::Excluded(x) => x,
            Bound::Unbounded => inf,
        };
        (v(self.lo, f64::NEG_INFINITY), v(self.hi, f64::INFINITY))
    }

    /// Intersection with `[a, b]` as a nonempty numeric range.
    pub fn clip(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.endpoints();
        let lo = lo.max(a);
        let hi = hi.min(b);
        (hi > lo).then_some((lo, hi))
    }

    /// The reflected interval `-I`, for symmetric densities.
    pub fn mirrored(&self) -> MarkInterval {
        let neg = |b: Bound<f64>| match b {
            Bound::Included(x) => Bound::Included(-x),
            Bound::Excluded(x) => Bound::Excluded(-x),
            Bound::Unbounded => Bound::Unbounded,
        };
        MarkInterval {
            lo: neg(self.hi),
            hi: neg(self.lo),
        }
    }

    fn closure_contains_zero(&self) -> bool {
        let (lo, hi) = self.endpoints();
        lo <= 0.0 && 0.0 <= hi
    }
}

/// A finite union of intervals of jump sizes, bounded away from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSet {
    pub intervals: Vec<MarkInterval>,
}

impl MarkSet {
    pub fn new(intervals: Vec<MarkInterval>) -> Result<Self> {
        if let Some(bad) = intervals.iter().find(|iv| iv.closure_contains_zero()) {
            return Err(Error::UnsupportedSet(format!("{:?}..{:?}", bad.lo, bad.hi)));
        }
        Ok(Self { intervals })
    }

    /// `{|x| > threshold}`.
    pub fn abs_greater(threshold: f64) -> Result<Self> {
        Self::new(vec![
            MarkInterval {
                lo: Bound::Excluded(threshold),
                hi: Bound::Unbounded,
            },
            MarkInterval {
                lo: Bound::Unbounded,
                hi: Bound::Excluded(-threshold),
            },
        ])
    }

    /// `{lo < |x| ≤ hi}`.
    pub fn abs_between(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![
            MarkInterval {
                lo: Bound::Excluded(lo),
                hi: Bound::Included(hi),
            },
            MarkInterval {
                lo: Bound::Included(-hi),
                hi: Bound::Excluded(-lo),
            },
        ])
    }

    /// `(lo, hi)` or `(lo, ∞)` when `hi` is infinite.
    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        let b = |x: f64| if x.is_infinite() { Bound::Unbounded } else { Bound::Excluded(x) };
        Self::new(vec![MarkInterval { lo: b(lo), hi: b(hi) }])
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_touching_zero_are_rejected() {
        assert!(matches!(MarkSet::open(-1.0, 1.0), Err(Error::UnsupportedSet(_))));
        assert!(MarkSet::open(0.0, 1.0).is_err());
        assert!(MarkSet::abs_greater(0.0).is_err());
        assert!(MarkSet::abs_between(0.1, 1.0).is_ok());
    }

    #[test]
    fn bounds_are_respected() {
        let small = MarkSet::abs_between(0.5, 1.0).unwrap();
        assert!(small.contains(1.0) && small.contains(-1.0));
        assert!(!small.contains(0.5));
        let big = MarkSet::abs_greater(1.0).unwrap();
        assert!(!big.contains(1.0) && big.contains(1.0001) && big.contains(-3.0));
    }

    #[test]
    fn truncated_means() {
        assert_eq!(MarkDist::Point { at: 1.0 }.truncated_mean(), 1.0);
        assert_eq!(MarkDist::Point { at: 1.5 }.truncated_mean(), 0.0);
        assert_eq!(MarkDist::Uniform { a: 0.0, b: 2.0 }.truncated_mean(), 0.25);
        let n = MarkDist::Normal { mean: 0.7, sd: 1.1 };
        let quad = n
            .integral(&MarkSet { intervals: vec![MarkInterval { lo: Bound::Included(-1.0), hi: Bound::Included(1.0) }] }, &|x| Complex64::new(x, 0.0))
            .unwrap();
        assert!((quad.re - n.truncated_mean()).abs() < 1e-12);
    }

    #[test]
    fn probabilities() {
        let n = MarkDist::Normal { mean: 0.0, sd: 1.0 };
        let p = n.probability(&MarkSet::open(1.0, f64::INFINITY).unwrap());
        assert!((p - 0.158_655_253_931_457).abs() < 1e-12);
        let u = MarkDist::Uniform { a: 1.0, b: 3.0 };
        assert_eq!(u.probability(&MarkSet::abs_greater(2.0).unwrap()), 0.5);
    }

    #[test]
    fn uniform_char_fn_small_argument() {
        let u = MarkDist::Uniform { a: -1.0, b: 1.0 };
        assert_eq!(u.char_fn(0.0), Complex64::new(1.0, 0.0));
        assert!((u.char_fn(1.0).re - 1f64.sin()).abs() < 1e-15);
    }
}
