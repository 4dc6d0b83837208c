//! Point-mass jumps of a path: the cell-limit estimator, the jump counting
//! measure `N_U(B)` and partial sums `X^B_U`, thresholded extraction, the
//! Lévy–Itô split into continuous and compensated-jump parts, and the
//! Gaussian sup diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::indexing::{DissectionLevel, IncrementRegion, RectSet};
use crate::laws::{LevyTriplet, MarkSet};
use crate::simulate::{RegionPlan, SamplePath};

/// A jump found by scanning cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    /// Centre of the detecting cell.
    pub location: Vec<f64>,
    pub mark: f64,
    pub detection_level: u32,
}

/// `ΔX` over the level-`nmax` cell containing `t`. Below the stored level
/// the Gaussian part is refined by conditional splitting.
pub fn point_mass_jump(path: &SamplePath, t: &[f64], nmax: u32) -> Result<f64> {
    if t.len() != path.dim() {
        return Err(Error::Dimension {
            expected: path.dim(),
            got: t.len(),
        });
    }
    let level = DissectionLevel::new(path.dim(), nmax)?;
    let cell = level.cell_of(t);
    let gauss = path.gaussian_cell_containing(t, nmax)?;
    let jumps: f64 = path
        .jumps
        .iter()
        .filter(|j| level.cell_of(&j.location) == cell)
        .map(|j| j.mark)
        .sum();
    Ok(gauss + jumps + (path.drift - path.compensation) * level.cell_measure())
}

/// `N_U(B)`: number of atoms in `U` with mark in `B`.
pub fn count_jumps(path: &SamplePath, u: &RectSet, b: &MarkSet) -> usize {
    path.jumps
        .iter()
        .filter(|j| u.contains_point(&j.location) && b.contains(j.mark))
        .count()
}

/// `X^B_U = Σ` of the marks in `B` of the atoms in `U`.
pub fn partial_sum(path: &SamplePath, u: &RectSet, b: &MarkSet) -> f64 {
    path.jumps
        .iter()
        .filter(|j| u.contains_point(&j.location) && b.contains(j.mark))
        .map(|j| j.mark)
        .sum()
}

/// Cell-scan estimates of `(N_U(B), X^B_U)` at `level`: every level cell in
/// `U` whose increment, after removing the analytic drift, falls in `B`
/// counts as one jump of that size. Exact once cells separate the atoms and
/// the Gaussian noise per cell is below the gap between `B` and zero.
pub fn scan_jumps(path: &SamplePath, u: &RectSet, b: &MarkSet, level: u32) -> Result<(usize, f64)> {
    let d = DissectionLevel::new(path.dim(), level)?;
    scan_jumps_plan(path, &RegionPlan::new(d, &IncrementRegion::rect(u.clone()))?, b)
}

/// [`scan_jumps`] with the region already resolved, for batches.
pub fn scan_jumps_plan(path: &SamplePath, plan: &RegionPlan, b: &MarkSet) -> Result<(usize, f64)> {
    let increments = detrended_cells(path, plan.level.level)?;
    let mut count = 0;
    let mut sum = 0.0;
    for &k in &plan.cells {
        if b.contains(increments[k]) {
            count += 1;
            sum += increments[k];
        }
    }
    Ok((count, sum))
}

/// Cell increments with the analytic drift `(γ − compensation)·m(cell)`
/// removed.
fn detrended_cells(path: &SamplePath, level: u32) -> Result<Vec<f64>> {
    let mut out = path.gaussian_cells_at(level)?;
    let d = DissectionLevel::new(path.dim(), level)?;
    for j in &path.jumps {
        out[d.cell_of(&j.location)] += j.mark;
    }
    Ok(out)
}

/// The per-cell Gaussian threshold `k·σ·2^{-nN/2}`.
pub fn gaussian_threshold(sigma: f64, dim: usize, level: u32, k: f64) -> f64 {
    k * sigma * 2f64.powf(-(level as f64) * dim as f64 / 2.0)
}

/// Threshold `z·σ·2^{-nN/2}` with `z` the two-sided normal quantile at
/// `alpha / cells`, so a pure Gaussian path exceeds it anywhere with
/// probability at most `alpha`.
pub fn uniform_gaussian_threshold(sigma: f64, dim: usize, level: u32, alpha: f64) -> f64 {
    let cells = 2f64.powi((level as usize * dim) as i32);
    let z = crate::numeric::normal_upper_quantile(alpha / (2.0 * cells));
    gaussian_threshold(sigma, dim, level, z)
}

/// Every level cell whose detrended increment exceeds `threshold` in
/// absolute value, reported as a jump at the cell centre.
pub fn extract_jumps(path: &SamplePath, level: u32, threshold: f64) -> Result<Vec<JumpRecord>> {
    let d = DissectionLevel::new(path.dim(), level)?;
    let increments = detrended_cells(path, level)?;
    Ok(increments
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > threshold)
        .map(|(k, &v)| {
            let (lo, hi) = d.cell_bounds(k);
            JumpRecord {
                location: lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(),
                mark: v,
                detection_level: level,
            }
        })
        .collect())
}

/// Whether every atom lies in its own level cell.
pub fn atoms_separated(path: &SamplePath, level: u32) -> Result<bool> {
    let d = DissectionLevel::new(path.dim(), level)?;
    let mut cells: Vec<usize> = path.jumps.iter().map(|j| d.cell_of(&j.location)).collect();
    cells.sort_unstable();
    Ok(cells.windows(2).all(|w| w[0] != w[1]))
}

/// A pure-jump path with no drift is a step function: every atom-free
/// level cell has increment exactly zero.
pub fn is_piecewise_constant(path: &SamplePath, level: u32) -> Result<bool> {
    if path.sigma != 0.0 || path.drift != path.compensation {
        return Ok(false);
    }
    let d = DissectionLevel::new(path.dim(), level)?;
    let mut occupied = vec![false; d.cell_count()];
    for j in &path.jumps {
        occupied[d.cell_of(&j.location)] = true;
    }
    let inc = path.cell_increments(level)?;
    Ok(inc.iter().zip(&occupied).all(|(v, &o)| o || *v == 0.0))
}

/// Result of a Lévy–Itô decomposition of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyItoReport {
    pub epsilons: Vec<f64>,
    /// Smallest jump size present in the simulated measure (0 for finite
    /// activity).
    pub truncation: f64,
    /// `max_U |X⁽⁰⁾_U + X⁽¹⁾_U(ε₀) − X_U|` over the dyadic family.
    pub reconstruction_error: f64,
    /// Per `ε`: `max_U |X⁽¹⁾_U(ε) − X⁽¹⁾_U(ε₀)|`.
    pub tail_curve: Vec<f64>,
    /// Per `ε`: standard deviation bound
    /// `√(m(U_max)·∫_{ε₀<|x|≤ε} x² ν(dx))` of the same discrepancy.
    pub tail_sd_bound: Vec<f64>,
    pub jump_count: usize,
}

/// Continuous and compensated-jump parts of a path, evaluated on aligned
/// regions.
pub struct LevyIto<'a> {
    path: &'a SamplePath,
    triplet: &'a LevyTriplet,
    truncation: f64,
}

impl<'a> LevyIto<'a> {
    pub fn new(path: &'a SamplePath, triplet: &'a LevyTriplet) -> Self {
        Self {
            path,
            triplet,
            truncation: triplet.truncation().unwrap_or(0.0),
        }
    }

    fn check_epsilon(&self, eps: f64) -> Result<()> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid("epsilons", format!("{eps} must be finite and >= 0")));
        }
        if eps < self.truncation {
            return Err(Error::UnsupportedRefinement {
                requested: eps,
                truncation: self.truncation,
            });
        }
        Ok(())
    }

    /// `∫_{ε<|x|≤1} x ν(dx)`.
    pub fn compensator(&self, eps: f64) -> Result<f64> {
        self.check_epsilon(eps)?;
        if eps <= self.truncation {
            return Ok(self.triplet.compensation_rate());
        }
        if eps >= 1.0 {
            return Ok(0.0);
        }
        let set = MarkSet::abs_between(eps, 1.0)?;
        Ok(self.triplet.nu_integral(&set, |x| num_complex::Complex64::new(x, 0.0))?.re)
    }

    /// `X⁽⁰⁾_C = γ·m(C) + Gaussian part`.
    pub fn gaussian_part(&self, plan: &RegionPlan) -> Result<f64> {
        self.path.gaussian_part(plan)
    }

    /// `X⁽¹⁾_C(ε) = Σ_{|x|>1} x + Σ_{ε<|x|≤1} x − m(C)·∫_{ε<|x|≤1} x ν(dx)`
    /// over atoms in `C`.
    pub fn jump_part(&self, region: &IncrementRegion, eps: f64) -> Result<f64> {
        let comp = self.compensator(eps)?;
        Ok(self.jump_sum(region, eps) - region.measure() * comp)
    }

    fn jump_sum(&self, region: &IncrementRegion, eps: f64) -> f64 {
        self.path
            .jumps_in(region)
            .filter(|j| j.mark.abs() > eps)
            .map(|j| j.mark)
            .sum()
    }

    /// Run the decomposition over the rectangles `[0, (i_1, …, i_N)·2^-L]`
    /// with `L` the smaller of 3 and the path level.
    pub fn decompose(&self, epsilons: &[f64]) -> Result<LevyItoReport> {
        if epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("epsilons", "must be strictly decreasing"));
        }
        for &e in epsilons {
            self.check_epsilon(e)?;
        }
        let eps0 = self.truncation;
        let family_level = DissectionLevel::new(self.path.dim(), self.path.level.level.min(3))?;
        let side = family_level.side();
        let family: Vec<RectSet> = (0..family_level.cell_count())
            .map(|k| {
                RectSet::Rect(
                    family_level
                        .coords_of(k)
                        .iter()
                        .map(|&c| (c + 1) as f64 / side as f64)
                        .collect(),
                )
            })
            .collect();
        let comp0 = self.compensator(eps0)?;
        let comps: Vec<f64> = epsilons.iter().map(|&e| self.compensator(e)).collect::<Result<_>>()?;
        let mut reconstruction: f64 = 0.0;
        let mut tail = vec![0.0f64; epsilons.len()];
        for u in &family {
            let region = IncrementRegion::rect(u.clone());
            let plan = RegionPlan::new(self.path.level, &region)?;
            let m = plan.measure;
            let full = self.jump_sum(&region, eps0) - m * comp0;
            let x = self.path.evaluate_plan(&plan)?;
            reconstruction = reconstruction.max((self.gaussian_part(&plan)? + full - x).abs());
            for (i, (&e, &c)) in epsilons.iter().zip(&comps).enumerate() {
                let part = self.jump_sum(&region, e) - m * c;
                tail[i] = tail[i].max((part - full).abs());
            }
        }
        let sd_bound = epsilons
            .iter()
            .map(|&e| self.small_jump_variance(eps0, e).map(f64::sqrt))
            .collect::<Result<_>>()?;
        Ok(LevyItoReport {
            epsilons: epsilons.to_vec(),
            truncation: eps0,
            reconstruction_error: reconstruction,
            tail_curve: tail,
            tail_sd_bound: sd_bound,
            jump_count: self.path.jumps.len(),
        })
    }

    /// `∫_{lo<|x|≤hi} x² ν(dx)`.
    fn small_jump_variance(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        if lo == 0.0 {
            // The set would touch zero; integrate from the smallest mark
            // instead, which is all the mass there is for finite activity.
            let total = self.triplet.jump_second_moment();
            if hi == f64::INFINITY {
                return Ok(total);
            }
            let above = self.triplet.nu_integral(&MarkSet::abs_greater(hi)?, |x| (x * x).into())?.re;
            return Ok((total - above).max(0.0));
        }
        Ok(self
            .triplet
            .nu_integral(&MarkSet::abs_between(lo, hi)?, |x| (x * x).into())?
            .re)
    }
}

/// `levy_ito_decompose(path, epsilons)`.
pub fn levy_ito_decompose(path: &SamplePath, triplet: &LevyTriplet, epsilons: &[f64]) -> Result<LevyItoReport> {
    LevyIto::new(path, triplet).decompose(epsilons)
}

/// `S_n = max_cells |ΔX_cell|` for each level, from the continuous part.
pub fn gaussian_sup_diagnostic(path: &SamplePath, levels: &[u32]) -> Result<Vec<f64>> {
    if !path.jumps.is_empty() {
        return Err(invalid("path", "the sup diagnostic needs a path without jumps"));
    }
    levels
        .iter()
        .map(|&n| {
            let d = DissectionLevel::new(path.dim(), n)?;
            let drift = path.drift * d.cell_measure();
            Ok(path
                .gaussian_cells_at(n)?
                .iter()
                .map(|g| (g + drift).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{JumpSpec, MarkDist};
    use crate::simulate::{sample_path, sample_path_at, JumpAtom, ProcessSpec};

    fn planted(atoms: &[([f64; 2], f64)]) -> SamplePath {
        let spec = ProcessSpec::new(LevyTriplet::gaussian(0.0, 0.0), 2, 4, 1).unwrap();
        let mut path = sample_path(&spec).unwrap();
        path.jumps = atoms
            .iter()
            .map(|(p, m)| JumpAtom {
                location: p.to_vec(),
                mark: *m,
            })
            .collect();
        path
    }

    #[test]
    fn planted_atom_is_found_exactly() {
        let path = planted(&[([0.25, 0.25], 2.0), ([0.7, 0.9], -0.5)]);
        for n in [3, 6, 10] {
            assert_eq!(point_mass_jump(&path, &[0.25, 0.25], n).unwrap(), 2.0);
            assert_eq!(point_mass_jump(&path, &[0.6, 0.1], n).unwrap(), 0.0);
        }
    }

    #[test]
    fn compensation_only_away_from_atoms() {
        let spec = ProcessSpec::new(
            LevyTriplet {
                sigma: 0.0,
                gamma: 0.0,
                nu: JumpSpec::Compound {
                    rate: 3.0,
                    marks: MarkDist::Uniform { a: -1.0, b: 0.5 },
                },
            },
            2,
            4,
            2,
        )
        .unwrap();
        let path = sample_path(&spec).unwrap();
        let rate = spec.triplet.compensation_rate().abs();
        let empty = [0.999, 0.999];
        if path.jumps.iter().all(|j| j.location[0] < 0.99 || j.location[1] < 0.99) {
            let v = point_mass_jump(&path, &empty, 8).unwrap();
            assert!(v.abs() <= rate * 4f64.powi(-8) + 1e-18);
        }
    }

    #[test]
    fn gaussian_estimator_shrinks() {
        let spec = ProcessSpec::new(LevyTriplet::gaussian(1.0, 0.0), 2, 4, 3).unwrap();
        let t = [0.3, 0.6];
        let mut sq = 0.0;
        let n = 400;
        for r in 0..n {
            let p = sample_path_at(&spec, r).unwrap();
            sq += point_mass_jump(&p, &t, 8).unwrap().powi(2);
        }
        let rms = (sq / n as f64).sqrt();
        // RMS is 1/256; allow sampling error of the 400-path estimate.
        assert!((rms * 256.0 - 1.0).abs() < 0.15, "{rms}");
    }

    #[test]
    fn counting_and_sums() {
        let path = planted(&[([0.2, 0.3], 2.0), ([0.7, 0.9], -0.5)]);
        let u = RectSet::Rect(vec![0.5, 0.5]);
        let b = MarkSet::abs_greater(1.0).unwrap();
        assert_eq!(count_jumps(&path, &u, &b), 1);
        assert_eq!(partial_sum(&path, &u, &b), 2.0);
        assert_eq!(scan_jumps(&path, &u, &b, 6).unwrap(), (1, 2.0));
        let empty = planted(&[]);
        assert_eq!(count_jumps(&empty, &u, &b), 0);
        assert_eq!(partial_sum(&empty, &u, &b), 0.0);
    }

    #[test]
    fn mark_sets_touching_zero_are_rejected() {
        assert!(matches!(MarkSet::abs_greater(0.0), Err(Error::UnsupportedSet(_))));
    }

    #[test]
    fn extraction_recovers_planted_atoms() {
        let path = planted(&[([0.2, 0.3], 2.0), ([0.7, 0.9], -1.5)]);
        let found = extract_jumps(&path, 8, 0.5).unwrap();
        assert_eq!(found.len(), 2);
        let mut marks: Vec<f64> = found.iter().map(|j| j.mark).collect();
        marks.sort_by(f64::total_cmp);
        assert_eq!(marks, vec![-1.5, 2.0]);
        assert!(atoms_separated(&path, 8).unwrap());
        assert!(is_piecewise_constant(&path, 6).unwrap());
    }

    #[test]
    fn decomposition_without_jumps_is_trivial() {
        let spec = ProcessSpec::new(LevyTriplet::gaussian(1.0, 0.2), 2, 3, 4).unwrap();
        let path = sample_path(&spec).unwrap();
        let rep = levy_ito_decompose(&path, &spec.triplet, &[0.1, 0.01]).unwrap();
        assert!(rep.reconstruction_error <= 1e-12);
        assert_eq!(rep.tail_curve, vec![0.0, 0.0]);
        assert_eq!(rep.jump_count, 0);
    }

    #[test]
    fn large_marks_need_no_compensation() {
        let triplet = LevyTriplet::compound_poisson(5.0, MarkDist::Uniform { a: 1.5, b: 3.0 });
        assert_eq!(triplet.gamma, 0.0);
        let spec = ProcessSpec::new(triplet, 2, 3, 8).unwrap();
        let path = sample_path(&spec).unwrap();
        let li = LevyIto::new(&path, &spec.triplet);
        let u = RectSet::Rect(vec![0.5, 0.75]);
        let b = MarkSet::abs_greater(1.0).unwrap();
        let x1 = li.jump_part(&IncrementRegion::rect(u.clone()), 0.1).unwrap();
        assert_eq!(x1, partial_sum(&path, &u, &b));
    }

    #[test]
    fn refinement_below_truncation_is_rejected() {
        let spec = ProcessSpec::new(LevyTriplet::truncated_stable(1.0, 1.5, 0.01, 5.0), 2, 3, 1).unwrap();
        let path = sample_path(&spec).unwrap();
        assert!(matches!(
            levy_ito_decompose(&path, &spec.triplet, &[0.1, 0.001]),
            Err(Error::UnsupportedRefinement { .. })
        ));
        let rep = levy_ito_decompose(&path, &spec.triplet, &[0.1, 0.01]).unwrap();
        assert!(rep.reconstruction_error <= 1e-12);
        assert_eq!(rep.tail_curve[1], 0.0);
    }

    #[test]
    fn sup_diagnostic_of_degenerate_paths() {
        let null = sample_path(&ProcessSpec::new(LevyTriplet::gaussian(0.0, 0.0), 2, 3, 1).unwrap()).unwrap();
        assert_eq!(gaussian_sup_diagnostic(&null, &[3, 5]).unwrap(), vec![0.0, 0.0]);
        let drift = sample_path(&ProcessSpec::new(LevyTriplet::gaussian(0.0, 1.0), 2, 3, 1).unwrap()).unwrap();
        let s = gaussian_sup_diagnostic(&drift, &[1, 2, 6]).unwrap();
        assert_eq!(s, vec![0.25, 1.0 / 16.0, 4f64.powi(-6)]);
    }

    #[test]
    fn thresholds() {
        assert_eq!(gaussian_threshold(1.0, 2, 8, 4.0), 4.0 / 256.0);
        let u = uniform_gaussian_threshold(1.0, 2, 8, 0.01);
        assert!(u > 5.0 / 256.0 && u < 6.0 / 256.0);
    }
}
