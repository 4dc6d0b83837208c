//! Statistical primitives for the verification suites: empirical
//! characteristic functions, two-sample Kolmogorov–Smirnov, independence
//! factorisation and simple moment summaries. Everything here is a pure
//! function of its inputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{Error, Result};

/// Default constant `c` in the confidence radius `c/√n`.
pub const DEFAULT_RADIUS_CONSTANT: f64 = 5.0;
pub const MIN_ECF_SAMPLES: usize = 100;
pub const MIN_KS_SAMPLES: usize = 500;

/// Empirical characteristic function on a grid of arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct EcfEstimate {
    pub z: Vec<f64>,
    pub values: Vec<Complex64>,
    pub n: usize,
    pub radius: f64,
}

impl EcfEstimate {
    /// Largest `|φ̂(z) − φ(z)|` over the grid.
    pub fn max_deviation<F: Fn(f64) -> Complex64>(&self, target: F) -> f64 {
        self.z
            .iter()
            .zip(&self.values)
            .map(|(&z, v)| (v - target(z)).norm())
            .fold(0.0, f64::max)
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.radius = c / (self.n as f64).sqrt();
        self
    }
}

/// `(1/n) Σ e^{i z x_k}` for each `z`, radius `5/√n`.
pub fn ecf(samples: &[f64], zgrid: &[f64]) -> Result<EcfEstimate> {
    if samples.len() < MIN_ECF_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_ECF_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len();
    let values = batch::map_slice(zgrid, |&z| {
        let (mut re, mut im) = (0.0, 0.0);
        for &x in samples {
            let (s, c) = (z * x).sin_cos();
            re += c;
            im += s;
        }
        Complex64::new(re / n as f64, im / n as f64)
    });
    Ok(EcfEstimate {
        z: zgrid.to_vec(),
        values,
        n,
        radius: DEFAULT_RADIUS_CONSTANT / (n as f64).sqrt(),
    })
}

/// Empirical joint characteristic function `(1/n) Σ_k exp(i Σ_j λ_j x_{kj})`
/// of rows `x_k`.
pub fn joint_ecf(rows: &[Vec<f64>], lambdas: &[f64]) -> Result<Complex64> {
    if rows.len() < MIN_ECF_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_ECF_SAMPLES,
            got: rows.len(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for row in rows {
        let phase: f64 = row.iter().zip(lambdas).map(|(x, l)| x * l).sum();
        let (s, c) = phase.sin_cos();
        acc += Complex64::new(c, s);
    }
    Ok(acc / rows.len() as f64)
}

/// Two-sample Kolmogorov–Smirnov statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sided two-sample KS test. Both samples need at least 500 points
/// since only the asymptotic distribution is used.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    for s in [a, b] {
        if s.len() < MIN_KS_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_KS_SAMPLES,
                got: s.len(),
            });
        }
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// `P(K > λ)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // The alternating series converges slowly here and the value is 1
        // to double precision.
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Result of an independence factorisation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationGap {
    pub gap: f64,
    pub radius: f64,
}

impl FactorizationGap {
    pub fn pass(&self) -> bool {
        self.gap <= self.radius
    }
}

/// `max |φ̂₁₂(z₁,z₂) − φ̂₁(z₁)φ̂₂(z₂)|` over the pairs, with radius
/// `3c/√n`.
pub fn factorization_gap(joint: &[(f64, f64)], zpairs: &[(f64, f64)]) -> Result<FactorizationGap> {
    factorization_gap_with(joint, zpairs, DEFAULT_RADIUS_CONSTANT)
}

pub fn factorization_gap_with(
    joint: &[(f64, f64)],
    zpairs: &[(f64, f64)],
    c: f64,
) -> Result<FactorizationGap> {
    if joint.len() < MIN_ECF_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_ECF_SAMPLES,
            got: joint.len(),
        });
    }
    let n = joint.len() as f64;
    let gaps = batch::map_slice(zpairs, |&(z1, z2)| {
        let mut j = Complex64::new(0.0, 0.0);
        let mut a = Complex64::new(0.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for &(x, y) in joint {
            j += Complex64::from_polar(1.0, z1 * x + z2 * y);
            a += Complex64::from_polar(1.0, z1 * x);
            b += Complex64::from_polar(1.0, z2 * y);
        }
        (j / n - (a / n) * (b / n)).norm()
    });
    Ok(FactorizationGap {
        gap: gaps.into_iter().fold(0.0, f64::max),
        radius: 3.0 * c / n.sqrt(),
    })
}

/// Per-test outcome written into suite reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl TestReport {
    /// Passes when `statistic <= threshold`.
    pub fn at_most(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
        }
    }

    /// Passes when `statistic >= threshold`.
    pub fn at_least(test: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic >= threshold,
        }
    }
}

/// Per-test level for `count` tests at family-wise level `alpha`.
pub fn bonferroni(alpha: f64, count: usize) -> f64 {
    alpha / count.max(1) as f64
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance and the standard error of that estimate
/// (from the fourth central moment).
pub fn variance_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0).max(1.0);
    (var, ((m4 - m2 * m2) / n).max(0.0).sqrt())
}

/// Pearson correlation; 0 when either column is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Median (of a copy).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
