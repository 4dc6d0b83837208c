//! Infinitely divisible laws given by a Lévy triplet `(σ, γ, ν)`, their
//! characteristic exponent, and numerical convolution powers on a grid.
//!
//! The truncation convention is `1_{|x| ≤ 1}`:
//!
//! ```text
//! ψ(z) = -σ²z²/2 + iγz + ∫ (e^{izx} - 1 - izx·1_{|x|≤1}) ν(dx)
//! ```
//!
//! and a region of measure `v` carries the law `μ^v` with characteristic
//! function `exp(v·ψ(z))`.

mod grid;
mod marks;
mod power;

pub use grid::{convolve, GridLaw, GridSpec};
pub use marks::{MarkDist, MarkInterval, MarkSet};
pub use power::{mu_power_t, PowerFamily};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::integrate;

/// Absolute accuracy requested from quadrature in the exponent.
pub const EXPONENT_QUAD_TOL: f64 = 1e-10;

/// The Lévy measure `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSpec {
    None,
    /// `ν = rate · (law of the marks)`.
    Compound { rate: f64, marks: MarkDist },
    /// Symmetric density `k·|x|^{-1-α}` on `ε ≤ |x| ≤ r`: a stable-like
    /// measure with the small jumps below `ε` discarded and the large ones
    /// above `r` cut off.
    TruncatedStable {
        k: f64,
        alpha: f64,
        epsilon: f64,
        r: f64,
    },
}

/// Lévy triplet: Gaussian scale, drift and Lévy measure of the law per unit
/// measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyTriplet {
    pub sigma: f64,
    pub gamma: f64,
    pub nu: JumpSpec,
}

impl LevyTriplet {
    pub fn gaussian(sigma: f64, gamma: f64) -> Self {
        Self {
            sigma,
            gamma,
            nu: JumpSpec::None,
        }
    }

    /// Uncompensated compound Poisson process with jump rate `rate` and mark
    /// law `marks`: the drift is set to `rate·E[X·1_{|X|≤1}]` so the
    /// truncation term cancels and `ψ(z) = rate·(σ̂(z) - 1)`.
    pub fn compound_poisson(rate: f64, marks: MarkDist) -> Self {
        let gamma = rate * marks.truncated_mean();
        Self {
            sigma: 0.0,
            gamma,
            nu: JumpSpec::Compound { rate, marks },
        }
    }

    /// Symmetric truncated stable-like jumps with no Gaussian part or drift.
    pub fn truncated_stable(k: f64, alpha: f64, epsilon: f64, r: f64) -> Self {
        Self {
            sigma: 0.0,
            gamma: 0.0,
            nu: JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid("sigma", format!("must be finite and >= 0, got {}", self.sigma)));
        }
        if !self.gamma.is_finite() {
            return Err(invalid("gamma", "must be finite"));
        }
        match &self.nu {
            JumpSpec::None => Ok(()),
            JumpSpec::Compound { rate, marks } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(invalid("nu.rate", format!("must be > 0, got {rate}")));
                }
                marks.validate()
            }
            JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(invalid("nu.k", format!("must be > 0, got {k}")));
                }
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(invalid("nu.alpha", format!("must lie in (0, 2), got {alpha}")));
                }
                if !(*epsilon > 0.0 && epsilon < r && r.is_finite()) {
                    return Err(invalid(
                        "nu.epsilon",
                        format!("need 0 < epsilon < r < inf, got epsilon={epsilon}, r={r}"),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn has_jumps(&self) -> bool {
        !matches!(self.nu, JumpSpec::None)
    }

    /// Total mass `ν(ℝ)`.
    pub fn jump_rate(&self) -> f64 {
        match &self.nu {
            JumpSpec::None => 0.0,
            JumpSpec::Compound { rate, .. } => *rate,
            JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            } => 2.0 * k / alpha * (epsilon.powf(-alpha) - r.powf(-alpha)),
        }
    }

    /// `∫ x·1_{|x|≤1} ν(dx)`: the compensation rate subtracted per unit
    /// measure when jumps are summed without compensation.
    pub fn compensation_rate(&self) -> f64 {
        match &self.nu {
            JumpSpec::None => 0.0,
            JumpSpec::Compound { rate, marks } => rate * marks.truncated_mean(),
            JumpSpec::TruncatedStable { .. } => 0.0,
        }
    }

    /// `∫ x² ν(dx)`.
    pub fn jump_second_moment(&self) -> f64 {
        match &self.nu {
            JumpSpec::None => 0.0,
            JumpSpec::Compound { rate, marks } => rate * marks.second_moment(),
            JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            } => 2.0 * k * (r.powf(2.0 - alpha) - epsilon.powf(2.0 - alpha)) / (2.0 - alpha),
        }
    }

    /// Mean of `μ^1`: `γ + ∫_{|x|>1} x ν(dx)`.
    pub fn mean(&self) -> f64 {
        let large = match &self.nu {
            JumpSpec::None | JumpSpec::TruncatedStable { .. } => 0.0,
            JumpSpec::Compound { rate, marks } => rate * (marks.mean() - marks.truncated_mean()),
        };
        self.gamma + large
    }

    /// Variance of `μ^1`: `σ² + ∫ x² ν(dx)`.
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma + self.jump_second_moment()
    }

    /// Largest possible jump magnitude, if bounded.
    pub fn max_jump(&self) -> Option<f64> {
        match &self.nu {
            JumpSpec::None => Some(0.0),
            JumpSpec::Compound { marks, .. } => marks.max_abs(),
            JumpSpec::TruncatedStable { r, .. } => Some(*r),
        }
    }

    /// Smallest jump magnitude kept by the truncation, for the truncated
    /// variant.
    pub fn truncation(&self) -> Option<f64> {
        match &self.nu {
            JumpSpec::TruncatedStable { epsilon, .. } => Some(*epsilon),
            _ => None,
        }
    }

    /// Variance per unit measure of the small jumps discarded by the
    /// truncation, `∫_{|x|<ε} x² ν_target(dx)` for the untruncated target.
    pub fn discarded_small_jump_variance(&self) -> f64 {
        match &self.nu {
            JumpSpec::TruncatedStable {
                k, alpha, epsilon, ..
            } => 2.0 * k * epsilon.powf(2.0 - alpha) / (2.0 - alpha),
            _ => 0.0,
        }
    }

    /// `ν(B)`.
    pub fn nu_mass(&self, set: &MarkSet) -> f64 {
        match &self.nu {
            JumpSpec::None => 0.0,
            JumpSpec::Compound { rate, marks } => rate * marks.probability(set),
            JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            } => {
                let antiderivative = |x: f64| -k * x.powf(-alpha) / alpha;
                set.intervals
                    .iter()
                    .map(|iv| {
                        let pos = iv.clip(*epsilon, *r);
                        let neg = iv.mirrored().clip(*epsilon, *r);
                        [pos, neg]
                            .into_iter()
                            .flatten()
                            .map(|(a, b)| antiderivative(b) - antiderivative(a))
                            .sum::<f64>()
                    })
                    .sum()
            }
        }
    }

    /// `∫_B f(x) ν(dx)` for a complex integrand, with atoms summed exactly
    /// and densities integrated numerically.
    pub fn nu_integral<F>(&self, set: &MarkSet, f: F) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        match &self.nu {
            JumpSpec::None => Ok(Complex64::new(0.0, 0.0)),
            JumpSpec::Compound { rate, marks } => Ok(marks.integral(set, &f)? * rate),
            JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            } => {
                let mut total = Complex64::new(0.0, 0.0);
                for iv in &set.intervals {
                    for (sign, piece) in [(1.0, iv.clip(*epsilon, *r)), (-1.0, iv.mirrored().clip(*epsilon, *r))] {
                        let Some((a, b)) = piece else { continue };
                        let dens = |x: f64| k * x.powf(-1.0 - alpha);
                        let breaks = log_breaks(a, b);
                        let re = integrate(|x| f(sign * x).re * dens(x), &breaks, EXPONENT_QUAD_TOL)?;
                        let im = integrate(|x| f(sign * x).im * dens(x), &breaks, EXPONENT_QUAD_TOL)?;
                        total += Complex64::new(re, im);
                    }
                }
                Ok(total)
            }
        }
    }

    /// Draw one jump mark from the normalised Lévy measure.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.nu {
            JumpSpec::None => 0.0,
            JumpSpec::Compound { marks, .. } => marks.sample(rng),
            JumpSpec::TruncatedStable {
                alpha, epsilon, r, ..
            } => {
                let u: f64 = rng.random();
                let lo = epsilon.powf(-alpha);
                let hi = r.powf(-alpha);
                let magnitude = (lo - u * (lo - hi)).powf(-1.0 / alpha);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    /// Lévy–Khintchine exponent `ψ(z)` per unit measure.
    pub fn char_exponent(&self, z: f64) -> Result<Complex64> {
        let gauss = Complex64::new(-0.5 * self.sigma * self.sigma * z * z, self.gamma * z);
        let jumps = match &self.nu {
            JumpSpec::None => Complex64::new(0.0, 0.0),
            JumpSpec::Compound { rate, marks } => {
                (marks.char_fn(z) - 1.0 - Complex64::new(0.0, z * marks.truncated_mean())) * rate
            }
            JumpSpec::TruncatedStable {
                k,
                alpha,
                epsilon,
                r,
            } => Complex64::new(stable_exponent(*k, *alpha, *epsilon, *r, z)?, 0.0),
        };
        Ok(gauss + jumps)
    }

    /// `m·ψ(z)`: the exponent of a region of measure `m`.
    pub fn region_exponent(&self, measure: f64, z: f64) -> Result<Complex64> {
        Ok(self.char_exponent(z)? * measure)
    }
}

/// Breakpoints that are geometric near the lower end, so quadrature panels
/// follow the `|x|^{-1-α}` singularity.
fn log_breaks(a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![a];
    let mut x = a * 2.0;
    while x < b {
        out.push(x);
        x *= 2.0;
    }
    out.push(b);
    out
}

/// `2k ∫_ε^r (cos(zx) - 1) x^{-1-α} dx`. The truncation and sine parts
/// cancel by symmetry.
fn stable_exponent(k: f64, alpha: f64, epsilon: f64, r: f64, z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut breaks = log_breaks(epsilon, r);
    // Resolve oscillations: at least one panel per half period.
    let half_period = std::f64::consts::PI / z.abs();
    if half_period < r - epsilon {
        let mut extra = Vec::new();
        let mut x = epsilon + half_period;
        while x < r {
            extra.push(x);
            x += half_period;
        }
        breaks.extend(extra);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }
    let integrand = |x: f64| {
        let s = (0.5 * z * x).sin();
        -2.0 * s * s * (-(1.0 + alpha) * x.ln()).exp()
    };
    Ok(2.0 * k * integrate(integrand, &breaks, EXPONENT_QUAD_TOL / (2.0 * k))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn gaussian_exponent() {
        let t = LevyTriplet::gaussian(1.0, 0.0);
        assert_eq!(t.char_exponent(2.0).unwrap(), Complex64::new(-2.0, 0.0));
    }

    #[test]
    fn single_atom_exponent_keeps_truncation_term() {
        let t = LevyTriplet {
            sigma: 0.0,
            gamma: 0.0,
            nu: JumpSpec::Compound {
                rate: 1.0,
                marks: MarkDist::Point { at: 1.0 },
            },
        };
        let psi = t.char_exponent(PI).unwrap();
        assert!(close(psi, Complex64::new(-2.0, -PI), 1e-14));
    }

    #[test]
    fn uniform_marks_match_quadrature() {
        let t = LevyTriplet {
            sigma: 0.0,
            gamma: 0.0,
            nu: JumpSpec::Compound {
                rate: 1.0,
                marks: MarkDist::Uniform { a: -1.0, b: 1.0 },
            },
        };
        let psi = t.char_exponent(1.0).unwrap();
        // Independent route: quadrature of the Lévy–Khintchine integrand.
        let re = integrate(|x| 0.5 * (x.cos() - 1.0), &[-1.0, 0.0, 1.0], 1e-13).unwrap();
        let im = integrate(|x| 0.5 * (x.sin() - x), &[-1.0, 0.0, 1.0], 1e-13).unwrap();
        assert!(close(psi, Complex64::new(re, im), 1e-12));
        assert!((psi.re - (1f64.sin() - 1.0)).abs() < 1e-12);
        assert!((psi.re + 0.158_529).abs() < 1e-6);
    }

    #[test]
    fn stable_exponent_matches_direct_quadrature() {
        let (k, alpha, eps, r) = (1.0, 1.5, 0.05, 5.0);
        let t = LevyTriplet::truncated_stable(k, alpha, eps, r);
        for z in [0.3, 1.0, 7.0, 40.0] {
            let psi = t.char_exponent(z).unwrap();
            let direct = 2.0
                * k
                * integrate(
                    |x: f64| (x * z).cos().mul_add(1.0, -1.0) * x.powf(-1.0 - alpha),
                    &(0..=4000).map(|i| eps + (r - eps) * i as f64 / 4000.0).collect::<Vec<_>>(),
                    1e-11,
                )
                .unwrap();
            assert!((psi.re - direct).abs() < 1e-9, "z={z}: {} vs {direct}", psi.re);
            assert_eq!(psi.im, 0.0);
        }
    }

    #[test]
    fn exponent_is_hermitian_and_vanishes_at_zero() {
        let triplets = [
            LevyTriplet::gaussian(0.7, 0.3),
            LevyTriplet::compound_poisson(2.0, MarkDist::Normal { mean: 0.4, sd: 1.3 }),
            LevyTriplet::compound_poisson(1.0, MarkDist::TwoPoint { a: -2.0, b: 0.5, p: 0.3 }),
            LevyTriplet::truncated_stable(0.5, 1.2, 0.01, 3.0),
        ];
        for t in &triplets {
            assert_eq!(t.char_exponent(0.0).unwrap(), Complex64::new(0.0, 0.0));
            for z in [0.1, 0.9, 3.3, 12.0] {
                let a = t.char_exponent(z).unwrap();
                let b = t.char_exponent(-z).unwrap();
                assert!(close(a, b.conj(), 1e-12));
            }
        }
    }

    #[test]
    fn compensated_compound_poisson_matches_compound_form() {
        let marks = MarkDist::Normal { mean: 0.3, sd: 0.8 };
        let t = LevyTriplet::compound_poisson(1.7, marks.clone());
        for j in 0..32 {
            let z = -6.0 + 12.0 * j as f64 / 31.0;
            let lhs = (t.char_exponent(z).unwrap() * 0.6).exp();
            let rhs = ((marks.char_fn(z) - 1.0) * (0.6 * 1.7)).exp();
            assert!(close(lhs, rhs, 1e-10));
        }
    }

    #[test]
    fn validation_names_fields() {
        let bad = LevyTriplet::gaussian(-1.0, 0.0);
        match bad.validate() {
            Err(crate::Error::InvalidParameter { field, .. }) => assert_eq!(field, "sigma"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(LevyTriplet::truncated_stable(1.0, 2.5, 0.1, 1.0).validate().is_err());
    }

    #[test]
    fn json_literal() {
        let t: LevyTriplet = serde_json::from_str(
            r#"{"sigma":1.0,"gamma":0.0,"nu":{"type":"compound","rate":1.0,"marks":{"type":"normal","mean":0,"sd":1}}}"#,
        )
        .unwrap();
        assert_eq!(t.jump_rate(), 1.0);
        assert!(serde_json::from_str::<LevyTriplet>(r#"{"sigma":1.0,"gamma":0.0,"nu":{"type":"none"},"x":1}"#).is_err());
    }

    #[test]
    fn stable_masses_and_rates() {
        let t = LevyTriplet::truncated_stable(1.0, 1.5, 0.01, 2.0);
        let all = MarkSet::abs_greater(0.001).unwrap();
        assert!((t.nu_mass(&all) - t.jump_rate()).abs() < 1e-9 * t.jump_rate());
        let second = t
            .nu_integral(&all, |x| Complex64::new(x * x, 0.0))
            .unwrap();
        assert!((second.re - t.jump_second_moment()).abs() < 1e-8);
    }
}
