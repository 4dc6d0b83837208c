//! Path sampling and evaluation.
//!
//! A path is an independently scattered random measure on `[0,1]^N`: Gaussian
//! white noise on the cells of one dyadic level plus a finite list of jump
//! atoms. Drift and compensation stay analytic and are added per unit
//! measure at evaluation time.

use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{invalid, Error, Result};
use crate::indexing::{atoms, DissectionLevel, IncrementRegion, RectSet};
use crate::laws::LevyTriplet;
use crate::rng::{keyed_stream, stream, Domain};

/// Everything needed to sample a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    pub triplet: LevyTriplet,
    pub dim: usize,
    pub level: u32,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn new(triplet: LevyTriplet, dim: usize, level: u32, seed: u64) -> Result<Self> {
        let spec = Self {
            triplet,
            dim,
            level,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.level == 0 {
            return Err(invalid("level", "must be >= 1"));
        }
        DissectionLevel::new(self.dim, self.level)?;
        self.triplet.validate()
    }

    pub fn dissection(&self) -> DissectionLevel {
        DissectionLevel {
            dim: self.dim,
            level: self.level,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_level(&self, level: u32) -> Self {
        Self {
            level,
            ..self.clone()
        }
    }
}

/// A jump of the path: location in `[0,1]^N` and its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpAtom {
    pub location: Vec<f64>,
    pub mark: f64,
}

/// One realisation of the process.
#[derive(Debug, Clone)]
pub struct SamplePath {
    /// Position of the path in its batch; selects the random stream.
    pub index: u64,
    pub seed: u64,
    pub level: DissectionLevel,
    pub sigma: f64,
    /// Drift `γ` per unit measure.
    pub drift: f64,
    /// `∫_{|x|≤1} x ν(dx)` per unit measure, subtracted from the jump sum.
    pub compensation: f64,
    /// Cell increments of the Gaussian part; empty when `σ = 0`.
    gaussian: Vec<f64>,
    /// `prefix[c]` = Gaussian mass of `[0, c·2^-n)` for grid corners `c`.
    prefix: Vec<f64>,
    pub jumps: Vec<JumpAtom>,
}

/// A region with its cells resolved once, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct RegionPlan {
    pub region: IncrementRegion,
    pub cells: Vec<usize>,
    pub measure: f64,
    pub level: DissectionLevel,
}

impl RegionPlan {
    pub fn new(level: DissectionLevel, region: &IncrementRegion) -> Result<Self> {
        if let Some(d) = region.dim() {
            if d != level.dim {
                return Err(Error::Dimension {
                    expected: level.dim,
                    got: d,
                });
            }
        }
        level.check_region(region)?;
        let cells = region
            .cell_membership(&level)
            .into_iter()
            .enumerate()
            .filter_map(|(k, inside)| inside.then_some(k))
            .collect();
        Ok(Self {
            region: region.clone(),
            cells,
            measure: region.measure(),
            level,
        })
    }
}

/// Path `0` of the spec.
pub fn sample_path(spec: &ProcessSpec) -> Result<SamplePath> {
    sample_path_at(spec, 0)
}

/// Path `index` of the batch defined by the spec's seed.
pub fn sample_path_at(spec: &ProcessSpec, index: u64) -> Result<SamplePath> {
    spec.validate()?;
    let level = spec.dissection();
    let triplet = &spec.triplet;
    let mut rng = stream(spec.seed, Domain::Path, index);

    let gaussian: Vec<f64> = if triplet.sigma > 0.0 {
        let scale = triplet.sigma * level.cell_measure().sqrt();
        (0..level.cell_count())
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    } else {
        Vec::new()
    };

    let mut jumps = Vec::new();
    if triplet.has_jumps() {
        let rate = triplet.jump_rate();
        let count = Poisson::new(rate)
            .map_err(|e| invalid("nu", e.to_string()))?
            .sample(&mut rng) as usize;
        jumps.reserve(count);
        for _ in 0..count {
            let location: Vec<f64> = (0..spec.dim).map(|_| rng.random::<f64>()).collect();
            let mark = triplet.sample_mark(&mut rng);
            jumps.push(JumpAtom { location, mark });
        }
    }

    let prefix = prefix_table(&level, &gaussian);
    Ok(SamplePath {
        index,
        seed: spec.seed,
        level,
        sigma: triplet.sigma,
        drift: triplet.gamma,
        compensation: triplet.compensation_rate(),
        gaussian,
        prefix,
        jumps,
    })
}

/// Paths `range` of the batch, in index order.
pub fn sample_batch(spec: &ProcessSpec, range: Range<u64>) -> Result<Vec<SamplePath>> {
    spec.validate()?;
    batch::map_indexed(range, |r| sample_path_at(spec, r))
        .into_iter()
        .collect()
}

/// `ΔX` over each region for paths `0..paths`; row `r` holds path `r`.
/// Paths are sampled and dropped one at a time.
pub fn evaluate_batch(
    spec: &ProcessSpec,
    paths: u64,
    regions: &[IncrementRegion],
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let plans: Vec<RegionPlan> = regions
        .iter()
        .map(|r| RegionPlan::new(spec.dissection(), r))
        .collect::<Result<_>>()?;
    batch::map_indexed(0..paths, |r| {
        let path = sample_path_at(spec, r)?;
        plans.iter().map(|p| path.evaluate_plan(p)).collect()
    })
    .into_iter()
    .collect()
}

/// Gaussian prefix sums over the `(side+1)^dim` grid corners.
fn prefix_table(level: &DissectionLevel, gaussian: &[f64]) -> Vec<f64> {
    if gaussian.is_empty() {
        return Vec::new();
    }
    let side = level.side() as usize;
    let stride = side + 1;
    let dim = level.dim;
    let mut table = vec![0.0; stride.pow(dim as u32)];
    for (k, g) in gaussian.iter().enumerate() {
        let idx = level
            .coords_of(k)
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * stride + c as usize + 1);
        table[idx] = *g;
    }
    for axis in 0..dim {
        let step = stride.pow(axis as u32);
        for idx in 0..table.len() {
            if (idx / step) % stride > 0 {
                table[idx] += table[idx - step];
            }
        }
    }
    table
}

impl SamplePath {
    pub fn dim(&self) -> usize {
        self.level.dim
    }

    /// Stored Gaussian cell increments (all zero when `σ = 0`).
    pub fn gaussian_cells(&self) -> Vec<f64> {
        if self.gaussian.is_empty() {
            vec![0.0; self.level.cell_count()]
        } else {
            self.gaussian.clone()
        }
    }

    fn net_drift(&self) -> f64 {
        self.drift - self.compensation
    }

    fn jump_sum_in(&self, region: &IncrementRegion) -> f64 {
        self.jumps
            .iter()
            .filter(|j| region.contains_point(&j.location))
            .map(|j| j.mark)
            .sum()
    }

    /// `ΔX` over a region aligned at the path's level, by scanning cells.
    pub fn evaluate(&self, region: &IncrementRegion) -> Result<f64> {
        self.evaluate_plan(&RegionPlan::new(self.level, region)?)
    }

    pub fn evaluate_plan(&self, plan: &RegionPlan) -> Result<f64> {
        if plan.level != self.level {
            return Err(invalid(
                "plan",
                format!(
                    "compiled for level {} but the path is at level {}",
                    plan.level.level, self.level.level
                ),
            ));
        }
        let gauss: f64 = if self.gaussian.is_empty() {
            0.0
        } else {
            plan.cells.iter().map(|&k| self.gaussian[k]).sum()
        };
        Ok(gauss + self.jump_sum_in(&plan.region) + self.net_drift() * plan.measure)
    }

    /// `γ·m(C) + Σ_{cells ⊆ C} g_cell`: the continuous part of `ΔX_C`
    /// without any jump or compensation contribution.
    pub fn gaussian_part(&self, plan: &RegionPlan) -> Result<f64> {
        if plan.level != self.level {
            return Err(invalid("plan", "compiled for a different level"));
        }
        let gauss: f64 = if self.gaussian.is_empty() {
            0.0
        } else {
            plan.cells.iter().map(|&k| self.gaussian[k]).sum()
        };
        Ok(gauss + self.drift * plan.measure)
    }

    /// Jump atoms located in a region.
    pub fn jumps_in<'a>(&'a self, region: &'a IncrementRegion) -> impl Iterator<Item = &'a JumpAtom> + 'a {
        self.jumps.iter().filter(move |j| region.contains_point(&j.location))
    }

    /// `X_U` for a rectangle aligned at the path's level.
    pub fn evaluate_rect(&self, u: &RectSet) -> Result<f64> {
        self.evaluate(&IncrementRegion::rect(u.clone()))
    }

    /// `X` at the aligned corner `c` (grid units), from the prefix table.
    fn corner_value(&self, c: &[u64]) -> f64 {
        let stride = self.level.side() as usize + 1;
        let gauss = if self.prefix.is_empty() {
            0.0
        } else {
            let idx = c.iter().rev().fold(0usize, |acc, &k| acc * stride + k as usize);
            self.prefix[idx]
        };
        let w = self.level.cell_width();
        let corner: Vec<f64> = c.iter().map(|&k| k as f64 * w).collect();
        let measure: f64 = corner.iter().product();
        let jumps: f64 = self
            .jumps
            .iter()
            .filter(|j| j.location.iter().zip(&corner).all(|(p, q)| p < q))
            .map(|j| j.mark)
            .sum();
        gauss + jumps + self.net_drift() * measure
    }

    /// `ΔX` over an aligned region by inclusion-exclusion of corner values
    /// `X_{[0,c]}`. Agrees with [`SamplePath::evaluate`] up to rounding.
    pub fn evaluate_inclusion_exclusion(&self, region: &IncrementRegion) -> Result<f64> {
        if let Some(d) = region.dim() {
            if d != self.dim() {
                return Err(Error::Dimension {
                    expected: self.dim(),
                    got: d,
                });
            }
        }
        self.level.check_region(region)?;
        let mut total = 0.0;
        for (sign, rect) in crate::indexing::inclusion_exclusion_terms(region) {
            if let Some(c) = self.level.aligned_corner(&rect, "term")? {
                total += sign * self.corner_value(&c);
            }
        }
        Ok(total)
    }

    /// `ΔX` over the level-grid approximation of an arbitrary region, with
    /// the measure gap of the approximation.
    pub fn evaluate_approx(&self, region: &IncrementRegion) -> Result<(f64, f64)> {
        let (approx, gap) = self.level.approximate(region);
        Ok((self.evaluate(&approx)?, gap))
    }

    /// Gaussian cell increments at any level. Coarser levels aggregate the
    /// stored cells; finer levels split them by conditional refinement,
    /// which is deterministic per `(seed, path, level, cell)`.
    pub fn gaussian_cells_at(&self, level: u32) -> Result<Vec<f64>> {
        let target = DissectionLevel::new(self.dim(), level)?;
        if self.gaussian.is_empty() {
            return Ok(vec![0.0; target.cell_count()]);
        }
        if level <= self.level.level {
            let mut out = vec![0.0; target.cell_count()];
            let shift = self.level.level - level;
            for (k, g) in self.gaussian.iter().enumerate() {
                let coords: Vec<u64> = self.level.coords_of(k).iter().map(|c| c >> shift).collect();
                out[target.linear_index(&coords)] += g;
            }
            return Ok(out);
        }
        let mut current = self.gaussian.clone();
        for n in self.level.level..level {
            let parent = DissectionLevel::new(self.dim(), n)?;
            let child = DissectionLevel::new(self.dim(), n + 1)?;
            let mut next = vec![0.0; child.cell_count()];
            for (k, g) in current.iter().enumerate() {
                for (idx, value) in self.split(&parent, &child, k, *g) {
                    next[idx] = value;
                }
            }
            current = next;
        }
        Ok(current)
    }

    /// Gaussian increment of the level-`level` cell containing `p`.
    pub fn gaussian_cell_containing(&self, p: &[f64], level: u32) -> Result<f64> {
        let target = DissectionLevel::new(self.dim(), level)?;
        if self.gaussian.is_empty() {
            return Ok(0.0);
        }
        if level <= self.level.level {
            let cells = self.gaussian_cells_at(level)?;
            return Ok(cells[target.cell_of(p)]);
        }
        let mut n = self.level.level;
        let mut k = self.level.cell_of(p);
        let mut value = self.gaussian[k];
        while n < level {
            let parent = DissectionLevel::new(self.dim(), n)?;
            let child = DissectionLevel::new(self.dim(), n + 1)?;
            let want = child.cell_of(p);
            let (idx, v) = self
                .split(&parent, &child, k, value)
                .into_iter()
                .find(|(idx, _)| *idx == want)
                .expect("p lies in one child of its parent cell");
            k = idx;
            value = v;
            n += 1;
        }
        Ok(value)
    }

    /// Split one Gaussian cell increment `g` into its `K = 2^dim` children:
    /// `g/K + σ·√v·(Z_i − Z̄)` with `v` the child measure. The children sum
    /// to `g` and are unconditionally independent `N(0, σ²v)`.
    fn split(
        &self,
        parent: &DissectionLevel,
        child: &DissectionLevel,
        cell: usize,
        g: f64,
    ) -> Vec<(usize, f64)> {
        let k = 1usize << self.dim();
        let index = ((parent.level as u64) << 40) | cell as u64;
        let mut rng = keyed_stream(self.seed, Domain::Refine, self.index, index);
        let z: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let zbar = z.iter().sum::<f64>() / k as f64;
        let scale = self.sigma * child.cell_measure().sqrt();
        let base = parent.coords_of(cell);
        (0..k)
            .map(|offset| {
                let coords: Vec<u64> = base
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| 2 * c + ((offset >> a) & 1) as u64)
                    .collect();
                (
                    child.linear_index(&coords),
                    g / k as f64 + scale * (z[offset] - zbar),
                )
            })
            .collect()
    }

    /// Full increments `ΔX` of every level cell (Gaussian, jumps, drift).
    pub fn cell_increments(&self, level: u32) -> Result<Vec<f64>> {
        let d = DissectionLevel::new(self.dim(), level)?;
        let mut out = self.gaussian_cells_at(level)?;
        for j in &self.jumps {
            out[d.cell_of(&j.location)] += j.mark;
        }
        let drift = self.net_drift() * d.cell_measure();
        for v in &mut out {
            *v += drift;
        }
        Ok(out)
    }
}

/// Analytic joint characteristic function `E[exp(i Σ λ_j ΔX_{C_j})]`
/// computed from the overlap atoms of the regions.
pub fn fdd_char(spec: &ProcessSpec, regions: &[IncrementRegion], lambdas: &[f64]) -> Result<Complex64> {
    Ok(fdd_exponent(spec, regions, lambdas)?.exp())
}

/// Logarithm of [`fdd_char`]: `Σ_atoms m(atom)·ψ(Σ_{j ∋ atom} λ_j)`.
pub fn fdd_exponent(spec: &ProcessSpec, regions: &[IncrementRegion], lambdas: &[f64]) -> Result<Complex64> {
    if regions.len() != lambdas.len() {
        return Err(invalid(
            "lambdas",
            format!("{} values for {} regions", lambdas.len(), regions.len()),
        ));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for atom in atoms(regions, &spec.dissection())? {
        let z: f64 = atom.members.iter().map(|&j| lambdas[j]).sum();
        total += spec.triplet.region_exponent(atom.measure, z)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::MarkDist;

    fn rect(c: &[f64]) -> RectSet {
        RectSet::Rect(c.to_vec())
    }

    fn brownian(level: u32) -> ProcessSpec {
        ProcessSpec::new(LevyTriplet::gaussian(1.0, 0.0), 2, level, 7).unwrap()
    }

    #[test]
    fn deterministic_process_is_drift_times_measure() {
        let spec = ProcessSpec::new(LevyTriplet::gaussian(0.0, 1.5), 2, 3, 1).unwrap();
        let path = sample_path(&spec).unwrap();
        let u = IncrementRegion::difference(rect(&[0.75, 1.0]), rect(&[0.5, 0.5]));
        assert!((path.evaluate(&u).unwrap() - 1.5 * u.measure()).abs() < 1e-15);
    }

    #[test]
    fn empty_region_and_origin_are_zero() {
        let spec = ProcessSpec::new(
            LevyTriplet::compound_poisson(3.0, MarkDist::Normal { mean: 0.0, sd: 1.0 }),
            2,
            3,
            5,
        )
        .unwrap();
        let path = sample_path(&spec).unwrap();
        assert_eq!(path.evaluate(&IncrementRegion::empty()).unwrap(), 0.0);
        assert_eq!(path.evaluate_rect(&RectSet::origin(2)).unwrap(), 0.0);
    }

    #[test]
    fn simple_difference_is_difference_of_rectangles() {
        let path = sample_path(&brownian(3)).unwrap();
        let u = rect(&[0.75, 0.5]);
        let v = rect(&[0.5, 1.0]);
        let c = IncrementRegion::difference(u.clone(), v.clone());
        let expected = path.evaluate_rect(&u).unwrap() - path.evaluate_rect(&u.intersect(&v)).unwrap();
        assert!((path.evaluate(&c).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn routes_agree() {
        let spec = ProcessSpec::new(
            LevyTriplet {
                sigma: 0.7,
                gamma: 0.3,
                nu: crate::laws::JumpSpec::Compound {
                    rate: 20.0,
                    marks: MarkDist::Uniform { a: -2.0, b: 0.5 },
                },
            },
            2,
            3,
            11,
        )
        .unwrap();
        for r in 0..10 {
            let path = sample_path_at(&spec, r).unwrap();
            let region = IncrementRegion::new(
                rect(&[1.0, 0.875]),
                vec![rect(&[0.5, 0.875]), rect(&[1.0, 0.25]), rect(&[0.75, 0.5])],
            );
            let a = path.evaluate(&region).unwrap();
            let b = path.evaluate_inclusion_exclusion(&region).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn unaligned_regions_are_rejected() {
        let path = sample_path(&brownian(2)).unwrap();
        let r = IncrementRegion::rect(rect(&[0.3, 1.0]));
        assert!(matches!(path.evaluate(&r), Err(Error::Alignment { axis: 0, .. })));
        let (_, gap) = path.evaluate_approx(&r).unwrap();
        assert!((gap - 0.2).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = brownian(3);
        let a = sample_path_at(&spec, 4).unwrap();
        let b = sample_path_at(&spec, 4).unwrap();
        assert_eq!(a.gaussian_cells(), b.gaussian_cells());
        let c = sample_path_at(&spec, 5).unwrap();
        assert_ne!(a.gaussian_cells(), c.gaussian_cells());
    }

    #[test]
    fn refinement_is_consistent_and_additive() {
        let path = sample_path(&brownian(2)).unwrap();
        let fine = path.gaussian_cells_at(5).unwrap();
        let back = DissectionLevel::new(2, 5).unwrap();
        let stored = path.gaussian_cells();
        let mut agg = vec![0.0; stored.len()];
        for (k, v) in fine.iter().enumerate() {
            let c: Vec<u64> = back.coords_of(k).iter().map(|c| c >> 3).collect();
            agg[path.level.linear_index(&c)] += v;
        }
        for (a, b) in agg.iter().zip(&stored) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = [0.3, 0.8];
        let direct = path.gaussian_cell_containing(&p, 5).unwrap();
        assert_eq!(direct, fine[back.cell_of(&p)]);
        let coarse: f64 = path.gaussian_cells_at(1).unwrap().iter().sum();
        assert!((coarse - stored.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn fdd_of_single_and_disjoint_regions() {
        let spec = brownian(2);
        let c = IncrementRegion::rect(rect(&[0.5, 1.0]));
        let phi = fdd_char(&spec, &[c.clone()], &[1.3]).unwrap();
        assert!((phi.re - (-0.5 * 1.69 * 0.5f64).exp()).abs() < 1e-14);
        let d = IncrementRegion::difference(rect(&[1.0, 1.0]), rect(&[0.5, 1.0]));
        let joint = fdd_char(&spec, &[c.clone(), d.clone()], &[0.4, -0.9]).unwrap();
        let product = fdd_char(&spec, &[c], &[0.4]).unwrap() * fdd_char(&spec, &[d], &[-0.9]).unwrap();
        assert!((joint - product).norm() < 1e-12);
    }

    #[test]
    fn fdd_of_nested_pair() {
        let spec = brownian(2);
        let c0 = IncrementRegion::rect(rect(&[1.0, 1.0]));
        let c1 = IncrementRegion::rect(rect(&[0.5, 0.5]));
        let phi = fdd_char(&spec, &[c0, c1], &[1.0, 1.0]).unwrap();
        let expected = (-0.5 * (0.75 + 4.0 * 0.25f64)).exp();
        assert!((phi.re - expected).abs() < 1e-14 && phi.im.abs() < 1e-14);
    }

    #[test]
    fn prefix_table_matches_cell_sums() {
        let path = sample_path(&ProcessSpec::new(LevyTriplet::gaussian(1.0, 0.0), 3, 2, 3).unwrap()).unwrap();
        let u = IncrementRegion::rect(rect(&[0.75, 0.5, 1.0]));
        let a = path.evaluate(&u).unwrap();
        let b = path.evaluate_inclusion_exclusion(&u).unwrap();
        assert!((a - b).abs() < 1e-13);
    }
}
