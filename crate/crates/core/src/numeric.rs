//! Small numerical kernels: monotone root-finding, adaptive Gauss–Kronrod
//! quadrature and the normal distribution function.

use crate::error::{Error, Result};

/// Smallest `t` in `[lo, hi]` with `f(t) >= target`, for nondecreasing `f`.
///
/// Bisects until the bracket is narrower than `tol` and returns the right end
/// of the final bracket, so flat stretches resolve to their leftmost point.
/// Targets at or below `f(lo)` return `lo`.
pub fn bisect_leftmost<F>(f: F, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if f(lo) >= target {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel; returns (estimate, |K15 - G7|).
fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod integration of `f` over the panels delimited by
/// `breaks` (sorted), to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    const MAX_PANELS: usize = 50_000;
    let mut panels: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = kronrod_panel(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            return Ok(panels.iter().map(|p| p.2).sum());
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature {
                residual: total_err,
            });
        }
        // Split every panel carrying more than its share of the budget.
        let share = tol / panels.len() as f64;
        let mut next = Vec::with_capacity(panels.len() * 2);
        let mut split_any = false;
        for (a, b, v, e) in panels {
            if e > share {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    next.push((a, b, v, e));
                    continue;
                }
                split_any = true;
                let (v1, e1) = kronrod_panel(&f, a, mid);
                let (v2, e2) = kronrod_panel(&f, mid, b);
                next.push((a, mid, v1, e1));
                next.push((mid, b, v2, e2));
            } else {
                next.push((a, b, v, e));
            }
        }
        panels = next;
        if !split_any {
            let residual: f64 = panels.iter().map(|p| p.3).sum();
            return Err(Error::Quadrature { residual });
        }
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper quantile: the `z` with `P(Z > z) = tail`, for `tail` in (0, 0.5].
pub fn normal_upper_quantile(tail: f64) -> f64 {
    let upper = |z: f64| -normal_cdf(-z);
    bisect_leftmost(upper, -tail, 0.0, 40.0, 1e-13)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_square_root() {
        let t = bisect_leftmost(|t| t * t, 0.5, 0.0, 1.0, 1e-14);
        assert!((t - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bisect_prefers_leftmost_on_flat_stretch() {
        // f is 0 on [0, 0.5], then rises linearly.
        let f = |t: f64| (t - 0.5).max(0.0);
        assert_eq!(bisect_leftmost(f, 0.0, 0.0, 1.0, 1e-14), 0.0);
        let t = bisect_leftmost(f, 1e-300, 0.0, 1.0, 1e-14);
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let v = integrate(|x| x.sin(), &[0.0, std::f64::consts::PI], 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        // Oscillatory integrand over many periods.
        let v = integrate(|x| (40.0 * x).cos(), &[0.0, 3.0], 1e-11).unwrap();
        assert!((v - (120.0f64).sin() / 40.0).abs() < 1e-11);
        // Integrable singularity at the left end, resolved by adaptivity.
        let v = integrate(|x| x.powf(-0.5), &[1e-8, 1.0], 1e-9).unwrap();
        assert!((v - 2.0 * (1.0 - 1e-4)).abs() < 1e-9);
    }

    #[test]
    fn normal_helpers() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-14);
        assert!((normal_upper_quantile(0.025) - 1.959_963_984_540_054).abs() < 1e-9);
    }
}
