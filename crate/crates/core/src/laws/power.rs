use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{GridLaw, GridSpec, JumpSpec, LevyTriplet};
use crate::error::{Error, Result};

/// The convolution semigroup `t ↦ μ^t` of one triplet on one grid.
///
/// `ψ` is tabulated once on the dual frequency grid `z_k = 2πk/(nodes·step)`;
/// each power is then one inverse FFT of `exp(t·ψ)`. For laws supported on
/// the node lattice this inversion is exact up to wrap-around of the tails.
/// Computed powers are memoised behind a read-write lock.
#[derive(Debug)]
pub struct PowerFamily {
    pub triplet: LevyTriplet,
    pub grid: GridSpec,
    psi: Vec<Complex64>,
    cache: RwLock<HashMap<u64, Arc<GridLaw>>>,
}

impl PowerFamily {
    pub fn new(triplet: &LevyTriplet, grid: GridSpec) -> Result<Self> {
        triplet.validate()?;
        let m = grid.nodes;
        let dz = 2.0 * std::f64::consts::PI / (m as f64 * grid.step);
        let mut psi = vec![Complex64::new(0.0, 0.0); m];
        // Hermitian symmetry: tabulate k = 0..=m/2 and mirror.
        for k in 0..=m / 2 {
            let value = triplet.char_exponent(k as f64 * dz)?;
            psi[k] = value;
            if k > 0 && k < m / 2 {
                psi[m - k] = value.conj();
            }
        }
        // The Nyquist frequency is shared by ±m/2; keep it real.
        psi[m / 2] = Complex64::new(psi[m / 2].re, 0.0);
        Ok(Self {
            triplet: triplet.clone(),
            grid,
            psi,
            cache: RwLock::new(HashMap::new()),
        })
    }

    /// Family on the default grid sized for powers up to `t_max`.
    pub fn with_default_grid(triplet: &LevyTriplet, t_max: f64) -> Result<Self> {
        Self::new(
            triplet,
            GridSpec::for_triplet(triplet, t_max, super::grid::DEFAULT_NODES),
        )
    }

    /// `μ^t` on the grid.
    pub fn power(&self, t: f64) -> Result<Arc<GridLaw>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Range(format!("convolution power t = {t}")));
        }
        let key = t.to_bits();
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let law = Arc::new(self.compute(t)?);
        self.cache
            .write()
            .expect("cache lock")
            .insert(key, Arc::clone(&law));
        Ok(law)
    }

    fn compute(&self, t: f64) -> Result<GridLaw> {
        let step = self.grid.step;
        if t == 0.0 {
            return Ok(GridLaw::delta(step));
        }
        // A pure drift is a single atom; it is representable only on a node.
        if self.triplet.sigma == 0.0 && matches!(self.triplet.nu, JumpSpec::None) {
            let shift = self.triplet.gamma * t / step;
            let k = shift.round();
            if (shift - k).abs() > 1e-9 {
                return Err(Error::Inversion {
                    node: k as i64,
                    mass: f64::NAN,
                });
            }
            return Ok(GridLaw::point(step, k as i64));
        }
        let m = self.grid.nodes;
        // x_j = (j - m/2)·step, so e^{-i z_k x_j} = (-1)^k e^{-2πi kj/m}.
        let mut buf: Vec<Complex64> = self
            .psi
            .iter()
            .enumerate()
            .map(|(k, psi)| {
                let v = (psi * t).exp();
                if k % 2 == 1 {
                    -v
                } else {
                    v
                }
            })
            .collect();
        FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
        let masses: Vec<f64> = buf.iter().map(|c| c.re / m as f64).collect();
        GridLaw::from_masses(step, self.grid.start(), masses)
    }
}

/// `μ^t` for one triplet and grid (no memoisation across calls).
pub fn mu_power_t(triplet: &LevyTriplet, t: f64, grid: GridSpec) -> Result<GridLaw> {
    let family = PowerFamily::new(triplet, grid)?;
    Ok((*family.power(t)?).clone())
}
