use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::LevyTriplet;
use crate::error::{Error, Result};

/// Default number of grid nodes.
pub const DEFAULT_NODES: usize = 1 << 14;

/// Uniform symmetric grid: `nodes` points `x_j = (j - nodes/2)·step`.
///
/// The step is always a power of two, so laws living on a dyadic lattice
/// (integer-valued Poisson counts, for instance) sit exactly on grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nodes: usize,
    pub step: f64,
}

impl GridSpec {
    /// Grid wide enough for `μ^t` with `t <= t_max`: half-width at least
    /// `|mean|·t + 10·sd·√t + 4 + max jump`, rounded so the step is a power
    /// of two.
    pub fn for_triplet(triplet: &LevyTriplet, t_max: f64, nodes: usize) -> Self {
        let t = t_max.max(1e-12);
        let sd = (triplet.variance() * t).sqrt();
        let jump = triplet.max_jump().unwrap_or(0.0);
        let half = triplet.mean().abs() * t + 10.0 * sd + 4.0 + jump;
        Self::with_half_width(half, nodes)
    }

    /// Grid with at least the given half-width.
    pub fn with_half_width(half_width: f64, nodes: usize) -> Self {
        let nodes = nodes.next_power_of_two().max(2);
        let raw = 2.0 * half_width / nodes as f64;
        let step = 2f64.powi(raw.log2().ceil() as i32);
        Self { nodes, step }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.nodes as f64 * self.step
    }

    /// Index of the first node in units of the step.
    pub fn start(&self) -> i64 {
        -((self.nodes / 2) as i64)
    }
}

/// A probability law carried by the lattice `{(start + j)·step}`.
///
/// Each node mass stands for the cell `[x_j - step/2, x_j + step/2)`;
/// interval probabilities spread a node's mass uniformly over its cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLaw {
    pub step: f64,
    pub start: i64,
    pub masses: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Masses below this are treated as inversion noise; anything more negative
/// is a failure.
pub const NEGATIVE_MASS_TOL: f64 = 1e-8;

impl GridLaw {
    pub fn new(step: f64, start: i64, masses: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        Self {
            step,
            start,
            masses,
            cumulative,
        }
    }

    /// Checked constructor: rejects masses below `-NEGATIVE_MASS_TOL`.
    pub fn from_masses(step: f64, start: i64, masses: Vec<f64>) -> Result<Self> {
        if let Some((j, &m)) = masses
            .iter()
            .enumerate()
            .find(|(_, &m)| m < -NEGATIVE_MASS_TOL)
        {
            return Err(Error::Inversion {
                node: start + j as i64,
                mass: m,
            });
        }
        Ok(Self::new(step, start, masses))
    }

    /// Point mass at `k·step`.
    pub fn point(step: f64, k: i64) -> Self {
        Self::new(step, k, vec![1.0])
    }

    pub fn delta(step: f64) -> Self {
        Self::point(step, 0)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn node(&self, j: usize) -> f64 {
        (self.start + j as i64) as f64 * self.step
    }

    /// Mass at lattice index `k` (absolute, in units of the step).
    pub fn mass_at(&self, k: i64) -> f64 {
        let j = k - self.start;
        if j < 0 || j as usize >= self.masses.len() {
            0.0
        } else {
            self.masses[j as usize]
        }
    }

    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(j, m)| m * self.node(j))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.masses
            .iter()
            .enumerate()
            .map(|(j, m)| m * (self.node(j) - mean).powi(2))
            .sum()
    }

    /// Mass to the left of `x`, with node masses spread over their cells.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return self.total_mass();
        }
        if x == f64::NEG_INFINITY || self.masses.is_empty() {
            return 0.0;
        }
        let u = x / self.step - self.start as f64 + 0.5;
        if u <= 0.0 {
            return 0.0;
        }
        let j = u.floor();
        if j as usize >= self.masses.len() {
            return self.total_mass();
        }
        let j = j as usize;
        self.cumulative[j] + self.masses[j] * (u - j as f64)
    }

    /// Probability of the interval `[lo, hi]`.
    pub fn prob_interval(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.cdf(hi) - self.cdf(lo)
    }

    /// Total-variation distance; both laws must share the step.
    pub fn tv_distance(&self, other: &GridLaw) -> Result<f64> {
        check_steps(self.step, other.step)?;
        let lo = self.start.min(other.start);
        let hi = (self.start + self.len() as i64).max(other.start + other.len() as i64);
        Ok(0.5 * (lo..hi).map(|k| (self.mass_at(k) - other.mass_at(k)).abs()).sum::<f64>())
    }

    /// Sum of the masses in lattice-index window `[k_lo, k_hi]`.
    pub fn window_mass(&self, k_lo: i64, k_hi: i64) -> f64 {
        (k_lo..=k_hi).map(|k| self.mass_at(k)).sum()
    }
}

fn check_steps(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-15 * a.abs().max(b.abs()) {
        return Err(Error::GridMismatch { left: a, right: b });
    }
    Ok(())
}

/// Exact discrete convolution (direct for small supports, FFT otherwise).
pub fn convolve(a: &GridLaw, b: &GridLaw) -> Result<GridLaw> {
    check_steps(a.step, b.step)?;
    let start = a.start + b.start;
    if a.is_empty() || b.is_empty() {
        return Ok(GridLaw::new(a.step, start, Vec::new()));
    }
    let n = a.len() + b.len() - 1;
    let masses = if a.len().min(b.len()) <= 64 {
        let mut out = vec![0.0; n];
        for (i, x) in a.masses.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            for (j, y) in b.masses.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    } else {
        let size = n.next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let pad = |m: &[f64]| {
            let mut v: Vec<Complex64> = m.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            v.resize(size, Complex64::new(0.0, 0.0));
            v
        };
        let mut fa = pad(&a.masses);
        let mut fb = pad(&b.masses);
        forward.process(&mut fa);
        forward.process(&mut fb);
        let mut prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        inverse.process(&mut prod);
        prod.truncate(n);
        prod.iter().map(|c| c.re / size as f64).collect()
    };
    Ok(GridLaw::new(a.step, start, masses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_is_the_identity() {
        let b = GridLaw::new(0.5, -3, vec![0.1, 0.2, 0.3, 0.4]);
        let c = convolve(&GridLaw::delta(0.5), &b).unwrap();
        assert_eq!(c.masses, b.masses);
        assert_eq!(c.start, b.start);
    }

    #[test]
    fn point_laws_add() {
        let c = convolve(&GridLaw::point(1.0, 1), &GridLaw::point(1.0, 2)).unwrap();
        assert_eq!(c.mass_at(3), 1.0);
        assert_eq!(c.total_mass(), 1.0);
    }

    #[test]
    fn fft_path_matches_direct_sum() {
        let a: Vec<f64> = (0..300).map(|i| ((i * 7 % 13) as f64 + 1.0) / 2000.0).collect();
        let b: Vec<f64> = (0..200).map(|i| ((i * 5 % 11) as f64 + 1.0) / 1500.0).collect();
        let la = GridLaw::new(0.25, -150, a.clone());
        let lb = GridLaw::new(0.25, -40, b.clone());
        let c = convolve(&la, &lb).unwrap();
        for k in [-190i64, -100, 0, 50, 300] {
            let direct: f64 = (0..a.len())
                .filter_map(|i| {
                    let j = k - (-150 + i as i64) - (-40);
                    (0..b.len() as i64).contains(&j).then(|| a[i] * b[j as usize])
                })
                .sum();
            assert!((c.mass_at(k) - direct).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn mismatched_steps_are_rejected() {
        let err = convolve(&GridLaw::delta(0.5), &GridLaw::delta(0.25)).unwrap_err();
        assert!(matches!(err, Error::GridMismatch { .. }));
    }

    #[test]
    fn cdf_spreads_node_mass() {
        let law = GridLaw::new(1.0, -1, vec![0.25, 0.5, 0.25]);
        assert_eq!(law.cdf(0.0), 0.5);
        assert_eq!(law.prob_interval(-0.5, 0.5), 0.5);
        assert_eq!(law.cdf(10.0), 1.0);
        assert_eq!(law.cdf(-10.0), 0.0);
    }

    #[test]
    fn negative_masses_fail() {
        assert!(matches!(
            GridLaw::from_masses(1.0, 0, vec![0.5, -1e-6, 0.5]),
            Err(Error::Inversion { node: 1, .. })
        ));
    }

    #[test]
    fn grid_step_is_dyadic() {
        let g = GridSpec::with_half_width(14.0, 1 << 14);
        assert_eq!(g.step.log2().fract(), 0.0);
        assert!(g.half_width() >= 14.0);
    }
}
