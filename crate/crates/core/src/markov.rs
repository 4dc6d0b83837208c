//! Volume-parameterised transition kernels `Q_v(x, B) = μ^v(B − x)`, their
//! Chapman–Kolmogorov composition, and the joint law of left-neighbourhood
//! increments of a semilattice assembled through the kernel chain.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::indexing::{atoms, snap_coordinate, DissectionLevel, IncrementRegion, RectSet};
use crate::laws::{convolve, GridLaw, GridSpec, LevyTriplet, PowerFamily};

/// Finest level probed when looking for a grid on which a semilattice is
/// aligned.
const MAX_ALIGN_LEVEL: u32 = 20;

/// Masses below this are dropped from the support of joint-law axes.
const SUPPORT_CUTOFF: f64 = 1e-14;

/// `Q_v(x, B) = μ^v(B − x)` for all volumes `v`, backed by one memoised
/// convolution-power family.
#[derive(Debug)]
pub struct TransitionKernel {
    family: PowerFamily,
}

/// A finite union of closed intervals.
pub type IntervalSet = [(f64, f64)];

impl TransitionKernel {
    /// Kernel on the default grid, valid for volumes up to `max_volume`.
    pub fn new(triplet: &LevyTriplet, max_volume: f64) -> Result<Self> {
        Ok(Self {
            family: PowerFamily::with_default_grid(triplet, max_volume)?,
        })
    }

    pub fn with_grid(triplet: &LevyTriplet, grid: GridSpec) -> Result<Self> {
        Ok(Self {
            family: PowerFamily::new(triplet, grid)?,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.family.grid
    }

    pub fn triplet(&self) -> &LevyTriplet {
        &self.family.triplet
    }

    /// `μ^v` on the kernel grid.
    pub fn law(&self, v: f64) -> Result<Arc<GridLaw>> {
        self.family.power(v)
    }
}

/// `Q_v(x, B)`. Volume zero is the exact indicator `1_B(x)`.
pub fn kernel_eval(kernel: &TransitionKernel, v: f64, x: f64, b: &IntervalSet) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::Range(format!("volume v = {v}")));
    }
    if v == 0.0 {
        let inside = b.iter().any(|&(lo, hi)| lo <= x && x <= hi);
        return Ok(if inside { 1.0 } else { 0.0 });
    }
    let law = kernel.law(v)?;
    Ok(b.iter().map(|&(lo, hi)| law.prob_interval(lo - x, hi - x)).sum())
}

/// Compose `Q_{v1}` and `Q_{v2}` by discrete convolution and return the
/// largest difference to `Q_{v1+v2}` over the half-lines `(−∞, b]` with `b`
/// running through every cell edge of the composed law.
pub fn chapman_kolmogorov_check(kernel: &TransitionKernel, v1: f64, v2: f64) -> Result<f64> {
    let a = kernel.law(v1)?;
    let b = kernel.law(v2)?;
    let composed = convolve(&a, &b)?;
    let direct = kernel.law(v1 + v2)?;
    let h = composed.step;
    let mut worst: f64 = 0.0;
    for j in 0..=composed.len() {
        let edge = (composed.start + j as i64) as f64 * h - 0.5 * h;
        worst = worst.max((composed.cdf(edge) - direct.cdf(edge)).abs());
    }
    Ok(worst)
}

/// Joint law on a product lattice `step·Z^k`. Axis 0 varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGridLaw {
    pub step: f64,
    pub starts: Vec<i64>,
    pub shape: Vec<usize>,
    pub masses: Vec<f64>,
}

impl JointGridLaw {
    pub fn axes(&self) -> usize {
        self.shape.len()
    }

    fn offsets(&self, mut flat: usize) -> Vec<usize> {
        self.shape
            .iter()
            .map(|&n| {
                let k = flat % n;
                flat /= n;
                k
            })
            .collect()
    }

    fn flat(&self, offsets: &[usize]) -> usize {
        offsets
            .iter()
            .zip(&self.shape)
            .rev()
            .fold(0, |acc, (&k, &n)| acc * n + k)
    }

    /// Mass at absolute lattice indices (one per axis).
    pub fn mass_at(&self, k: &[i64]) -> f64 {
        let mut offsets = Vec::with_capacity(k.len());
        for ((&ki, &s), &n) in k.iter().zip(&self.starts).zip(&self.shape) {
            let o = ki - s;
            if o < 0 || o as usize >= n {
                return 0.0;
            }
            offsets.push(o as usize);
        }
        self.masses[self.flat(&offsets)]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn marginal(&self, axis: usize) -> GridLaw {
        let mut m = vec![0.0; self.shape[axis]];
        for (flat, &p) in self.masses.iter().enumerate() {
            m[self.offsets(flat)[axis]] += p;
        }
        GridLaw::new(self.step, self.starts[axis], m)
    }

    /// Total-variation distance over the union of both supports.
    pub fn tv_distance(&self, other: &JointGridLaw) -> Result<f64> {
        if self.axes() != other.axes() {
            return Err(Error::Dimension {
                expected: self.axes(),
                got: other.axes(),
            });
        }
        if self.step != other.step {
            return Err(Error::GridMismatch {
                left: self.step,
                right: other.step,
            });
        }
        let mut total = 0.0;
        for (flat, &p) in self.masses.iter().enumerate() {
            let k = self.absolute(flat);
            total += (p - other.mass_at(&k)).abs();
        }
        for (flat, &q) in other.masses.iter().enumerate() {
            let k = other.absolute(flat);
            if self.mass_at(&k) == 0.0 && !self.covers(&k) {
                total += q.abs();
            }
        }
        Ok(0.5 * total)
    }

    fn absolute(&self, flat: usize) -> Vec<i64> {
        self.offsets(flat)
            .iter()
            .zip(&self.starts)
            .map(|(&o, &s)| s + o as i64)
            .collect()
    }

    fn covers(&self, k: &[i64]) -> bool {
        k.iter()
            .zip(&self.starts)
            .zip(&self.shape)
            .all(|((&ki, &s), &n)| ki >= s && ki < s + n as i64)
    }

    /// Reorder axes: axis `i` of the result is axis `perm[i]` of `self`.
    pub fn permute_axes(&self, perm: &[usize]) -> JointGridLaw {
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let starts: Vec<i64> = perm.iter().map(|&p| self.starts[p]).collect();
        let mut out = JointGridLaw {
            step: self.step,
            starts,
            shape,
            masses: vec![0.0; self.masses.len()],
        };
        for (flat, &p) in self.masses.iter().enumerate() {
            let old = self.offsets(flat);
            let new: Vec<usize> = perm.iter().map(|&a| old[a]).collect();
            let idx = out.flat(&new);
            out.masses[idx] = p;
        }
        out
    }
}

/// A semilattice after validation, with its left neighbourhoods.
#[derive(Debug, Clone)]
pub struct Semilattice {
    pub members: Vec<RectSet>,
    pub left_neighbourhoods: Vec<IncrementRegion>,
    /// `m(L_i)`.
    pub volumes: Vec<f64>,
}

fn same_set(a: &RectSet, b: &RectSet) -> bool {
    match (a.corner(), b.corner()) {
        (Some(x), Some(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| (p - q).abs() <= 1e-12),
        (None, None) => true,
        _ => false,
    }
}

fn finest_alignment(members: &[RectSet], dim: usize) -> Option<DissectionLevel> {
    (0..=MAX_ALIGN_LEVEL).find_map(|n| {
        let aligned = members
            .iter()
            .filter_map(RectSet::corner)
            .all(|c| c.iter().all(|&x| snap_coordinate(x, n).is_some()));
        aligned.then(|| DissectionLevel::new(dim, n).ok()).flatten()
    })
}

impl Semilattice {
    /// Check that `members` starts with `{0}`, is closed under intersection
    /// and consistently ordered, then form the left neighbourhoods
    /// `L_i = A_i \ (A_0 ∪ … ∪ A_{i-1})`.
    pub fn new(members: Vec<RectSet>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(invalid("semilattice", "must not be empty"));
        };
        let dim = first
            .dim()
            .ok_or_else(|| invalid("semilattice[0]", "must be the minimal set {0}"))?;
        if !same_set(first, &RectSet::origin(dim)) {
            return Err(invalid("semilattice[0]", "must be the minimal set {0}"));
        }
        for (i, a) in members.iter().enumerate() {
            if a.dim() != Some(dim) {
                return Err(Error::Dimension {
                    expected: dim,
                    got: a.dim().unwrap_or(0),
                });
            }
            for (j, b) in members.iter().enumerate().skip(i + 1) {
                if b.is_subset_of(a) && !a.is_subset_of(b) {
                    return Err(Error::Ordering { earlier: i, later: j });
                }
                let meet = a.intersect(b);
                if !members.iter().any(|c| same_set(c, &meet)) {
                    return Err(Error::NotIntersectionClosed(i, j));
                }
            }
        }
        let left_neighbourhoods: Vec<IncrementRegion> = members
            .iter()
            .enumerate()
            .map(|(i, a)| IncrementRegion::new(a.clone(), members[..i].to_vec()))
            .collect();
        let volumes = match finest_alignment(&members, dim) {
            Some(level) => {
                let mut v = vec![0.0; members.len()];
                for atom in atoms(&left_neighbourhoods, &level)? {
                    if atom.members.len() > 1 {
                        return Err(invalid("semilattice", "left neighbourhoods overlap"));
                    }
                    v[atom.members[0]] += atom.measure;
                }
                v
            }
            None => left_neighbourhoods.iter().map(IncrementRegion::measure).collect(),
        };
        Ok(Self {
            members,
            left_neighbourhoods,
            volumes,
        })
    }
}

/// Marginal of one left-neighbourhood increment binned onto the coarse
/// lattice `step·Z`: node `d` receives `μ^v([d·step − step/2, d·step + step/2))`.
fn binned(kernel: &TransitionKernel, v: f64, step: f64) -> Result<GridLaw> {
    if v == 0.0 {
        return Ok(GridLaw::delta(step));
    }
    let law = kernel.law(v)?;
    let (lo, hi) = support(&law);
    let k_lo = (lo / step).floor() as i64 - 1;
    let k_hi = (hi / step).ceil() as i64 + 1;
    let masses = (k_lo..=k_hi)
        .map(|d| {
            let c = d as f64 * step;
            law.prob_interval(c - 0.5 * step, c + 0.5 * step)
        })
        .collect();
    Ok(GridLaw::new(step, k_lo, masses))
}

fn support(law: &GridLaw) -> (f64, f64) {
    let first = law.masses.iter().position(|&m| m > SUPPORT_CUTOFF).unwrap_or(0);
    let last = law
        .masses
        .iter()
        .rposition(|&m| m > SUPPORT_CUTOFF)
        .unwrap_or(law.len().saturating_sub(1));
    (law.node(first) - 0.5 * law.step, law.node(last) + 0.5 * law.step)
}

/// Coarse joint step: the smallest power of two, no finer than the kernel
/// grid, for which every axis has at most `nodes_per_axis` nodes.
fn joint_step(kernel: &TransitionKernel, volumes: &[f64], nodes_per_axis: usize) -> Result<f64> {
    let mut width: f64 = 0.0;
    for &v in volumes {
        if v > 0.0 {
            let law = kernel.law(v)?;
            let (lo, hi) = support(&law);
            width = width.max(hi - lo);
        }
    }
    let fine = kernel.grid().step;
    let raw = (width / nodes_per_axis.max(1) as f64).max(fine);
    Ok(2f64.powi(raw.log2().ceil() as i32))
}

/// Joint law of `(ΔX_{L_0}, …, ΔX_{L_m})` computed by the kernel chain:
/// the state after `i` steps is `x_i = Σ_{j≤i} ΔX_{L_j}`, and each step
/// weighs `Q_{m(L_i)}(x_{i-1}, [x_i ± step/2])` evaluated at the actual
/// state `x_{i-1}`.
pub fn semilattice_fdd(
    kernel: &TransitionKernel,
    semilattice: &[RectSet],
    nodes_per_axis: usize,
) -> Result<JointGridLaw> {
    let lattice = Semilattice::new(semilattice.to_vec())?;
    let step = joint_step(kernel, &lattice.volumes, nodes_per_axis)?;
    let marginals: Vec<GridLaw> = lattice
        .volumes
        .iter()
        .map(|&v| binned(kernel, v, step))
        .collect::<Result<_>>()?;
    let starts: Vec<i64> = marginals.iter().map(|m| m.start).collect();
    let shape: Vec<usize> = marginals.iter().map(GridLaw::len).collect();
    let total: usize = shape.iter().product();
    let mut masses = vec![0.0; total];
    // X_{{0}} = 0: the chain starts from the point mass at the origin.
    for (flat, slot) in masses.iter_mut().enumerate() {
        let mut rest = flat;
        let mut p = 1.0;
        let mut state = 0.0;
        for (i, (&s, &n)) in starts.iter().zip(&shape).enumerate() {
            let d = (s + (rest % n) as i64) as f64 * step;
            rest /= n;
            let next = state + d;
            let cell = [(next - 0.5 * step, next + 0.5 * step)];
            let q = if lattice.volumes[i] == 0.0 {
                if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                kernel_eval(kernel, lattice.volumes[i], state, &cell)?
            };
            p *= q;
            if p == 0.0 {
                break;
            }
            state = next;
        }
        *slot = p;
    }
    Ok(JointGridLaw {
        step,
        starts,
        shape,
        masses,
    })
}

/// The product of the independent marginals `μ^{m(L_i)}` on the same coarse
/// lattice as [`semilattice_fdd`].
pub fn semilattice_product(
    kernel: &TransitionKernel,
    semilattice: &[RectSet],
    nodes_per_axis: usize,
) -> Result<JointGridLaw> {
    let lattice = Semilattice::new(semilattice.to_vec())?;
    let step = joint_step(kernel, &lattice.volumes, nodes_per_axis)?;
    let marginals: Vec<GridLaw> = lattice
        .volumes
        .iter()
        .map(|&v| binned(kernel, v, step))
        .collect::<Result<_>>()?;
    let starts: Vec<i64> = marginals.iter().map(|m| m.start).collect();
    let shape: Vec<usize> = marginals.iter().map(GridLaw::len).collect();
    let total: usize = shape.iter().product();
    let masses = (0..total)
        .map(|mut flat| {
            marginals
                .iter()
                .map(|m| {
                    let k = flat % m.len();
                    flat /= m.len();
                    m.masses[k]
                })
                .product()
        })
        .collect();
    Ok(JointGridLaw {
        step,
        starts,
        shape,
        masses,
    })
}

/// Outcome of comparing simulated conditional laws with the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCheck {
    /// Largest `|empirical − predicted| · √(bin count)` over bins.
    pub worst_scaled_gap: f64,
    pub bins_used: usize,
}

/// Compare the empirical law of `y` given `x` in each x-bin with the kernel
/// prediction `mean_k Q_v(x_k, B)` over the samples `x_k` in the bin, for
/// each y-interval `B`. Bins with fewer than `min_count` samples are
/// skipped.
pub fn conditional_check(
    kernel: &TransitionKernel,
    v: f64,
    pairs: &[(f64, f64)],
    x_edges: &[f64],
    y_sets: &[(f64, f64)],
    min_count: usize,
) -> Result<ConditionalCheck> {
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for w in x_edges.windows(2) {
        let in_bin: Vec<&(f64, f64)> = pairs.iter().filter(|(x, _)| *x >= w[0] && *x < w[1]).collect();
        if in_bin.len() < min_count {
            continue;
        }
        used += 1;
        let n = in_bin.len() as f64;
        for &(lo, hi) in y_sets {
            let empirical = in_bin.iter().filter(|(_, y)| *y >= lo && *y <= hi).count() as f64 / n;
            let mut predicted = 0.0;
            for (x, _) in &in_bin {
                predicted += kernel_eval(kernel, v, *x, &[(lo, hi)])?;
            }
            predicted /= n;
            worst = worst.max((empirical - predicted).abs() * n.sqrt());
        }
    }
    Ok(ConditionalCheck {
        worst_scaled_gap: worst,
        bins_used: used,
    })
}
