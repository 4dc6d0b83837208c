use serde::{Deserialize, Serialize};

use super::{DissectionLevel, RectSet};
use crate::error::{Error, Result};

/// Subtracted lists longer than this fall back from inclusion-exclusion to
/// the breakpoint arrangement when computing measures.
const MAX_INCLUSION_EXCLUSION: usize = 16;

/// `u0 \ (sub_1 ∪ … ∪ sub_k)`, with every subtracted set stored already
/// intersected with `u0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RegionLiteral", into = "RegionLiteral")]
pub struct IncrementRegion {
    pub u0: RectSet,
    pub subtracted: Vec<RectSet>,
}

/// JSON form: `{"u0": [1.0, 1.0], "sub": [[0.5, 1.0]]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionLiteral {
    u0: RectSet,
    #[serde(default)]
    sub: Vec<RectSet>,
}

impl From<RegionLiteral> for IncrementRegion {
    fn from(lit: RegionLiteral) -> Self {
        IncrementRegion::new(lit.u0, lit.sub)
    }
}

impl From<IncrementRegion> for RegionLiteral {
    fn from(r: IncrementRegion) -> Self {
        RegionLiteral {
            u0: r.u0,
            sub: r.subtracted,
        }
    }
}

/// Result of canonicalisation: `U \ (V_1 ∪ … ∪ V_k)` with `U` minimal, or the
/// empty set.
#[derive(Debug, Clone, PartialEq)]
pub enum Canonical {
    Empty,
    Difference { u: RectSet, v: Vec<RectSet> },
}

impl Canonical {
    pub fn to_region(&self) -> IncrementRegion {
        match self {
            Canonical::Empty => IncrementRegion::empty(),
            Canonical::Difference { u, v } => IncrementRegion::new(u.clone(), v.clone()),
        }
    }
}

impl IncrementRegion {
    pub fn new(u0: RectSet, subtracted: Vec<RectSet>) -> Self {
        let subtracted = subtracted.iter().map(|s| s.intersect(&u0)).collect();
        Self { u0, subtracted }
    }

    pub fn rect(u: RectSet) -> Self {
        Self::new(u, Vec::new())
    }

    /// `U \ V` for a single subtracted rectangle.
    pub fn difference(u: RectSet, v: RectSet) -> Self {
        Self::new(u, vec![v])
    }

    pub fn empty() -> Self {
        Self {
            u0: RectSet::Empty,
            subtracted: Vec::new(),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.u0.dim()
    }

    /// Every rectangle mentioned by the region, `u0` first.
    pub fn rectangles(&self) -> impl Iterator<Item = &RectSet> {
        std::iter::once(&self.u0).chain(self.subtracted.iter())
    }

    /// Point membership, half-open convention (see [`RectSet::contains_point`]).
    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.u0.contains_point(p) && !self.subtracted.iter().any(|s| s.contains_point(p))
    }

    /// Subtracted sets with the null and dominated ones removed, sorted.
    fn pruned_subtracted(&self) -> Vec<RectSet> {
        let live: Vec<&RectSet> = self
            .subtracted
            .iter()
            .filter(|s| s.measure() > 0.0)
            .collect();
        let mut kept: Vec<RectSet> = Vec::new();
        for (i, s) in live.iter().enumerate() {
            let dominated = live.iter().enumerate().any(|(j, t)| {
                j != i && s.is_subset_of(t) && (!t.is_subset_of(s) || j < i)
            });
            if !dominated {
                kept.push((*s).clone());
            }
        }
        kept.sort_by(|a, b| {
            a.corner()
                .unwrap_or(&[])
                .partial_cmp(b.corner().unwrap_or(&[]))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        kept
    }

    /// Lebesgue measure, exact by inclusion-exclusion over the subtracted
    /// rectangles.
    pub fn measure(&self) -> f64 {
        let base = self.u0.measure();
        if base == 0.0 {
            return 0.0;
        }
        let subs = self.pruned_subtracted();
        if subs.len() > MAX_INCLUSION_EXCLUSION {
            return Arrangement::new(self.rectangles()).region_measure(self);
        }
        let removed: f64 = inclusion_exclusion(&subs, |r| r.measure());
        (base - removed).max(0.0)
    }

    /// Indicator of the level cells contained in the region. Exact for
    /// regions aligned at `level`.
    pub fn cell_membership(&self, level: &DissectionLevel) -> Vec<bool> {
        let inside = |hi: &[f64], r: &RectSet| {
            r.corner()
                .is_some_and(|c| hi.iter().zip(c).all(|(h, ci)| *h <= *ci + 1e-12))
        };
        (0..level.cell_count())
            .map(|k| {
                let (_, hi) = level.cell_bounds(k);
                inside(&hi, &self.u0) && !self.subtracted.iter().any(|s| inside(&hi, s))
            })
            .collect()
    }

    /// Minimal representation `U \ V`: `U` is the smallest rectangle
    /// containing the (essential) region, `V` the subtracted rectangles
    /// clipped to `U` with null and redundant members dropped.
    pub fn canonical_form(&self) -> Canonical {
        if self.u0.is_empty() {
            return Canonical::Empty;
        }
        let arrangement = Arrangement::new(self.rectangles());
        let mut upper: Option<Vec<f64>> = None;
        for cell in arrangement.cells() {
            if cell.measure > 0.0 && arrangement.cell_in_region(&cell, self) {
                let hi = arrangement.upper(&cell);
                upper = Some(match upper {
                    None => hi,
                    Some(u) => u.iter().zip(&hi).map(|(a, b)| a.max(*b)).collect(),
                });
            }
        }
        let Some(corner) = upper else {
            return Canonical::Empty;
        };
        let u = RectSet::Rect(corner);
        let clipped = IncrementRegion::new(u.clone(), self.subtracted.clone());
        Canonical::Difference {
            v: clipped.pruned_subtracted(),
            u,
        }
    }
}

/// `Σ_{∅≠S⊆sets} (-1)^{|S|+1} f(∩S)`: the measure-like value of the union.
fn inclusion_exclusion<F>(sets: &[RectSet], f: F) -> f64
where
    F: Fn(&RectSet) -> f64,
{
    fn recurse<F: Fn(&RectSet) -> f64>(
        sets: &[RectSet],
        start: usize,
        acc: &RectSet,
        depth: usize,
        f: &F,
        total: &mut f64,
    ) {
        for i in start..sets.len() {
            let next = if depth == 0 {
                sets[i].clone()
            } else {
                acc.intersect(&sets[i])
            };
            let sign = if depth % 2 == 0 { 1.0 } else { -1.0 };
            *total += sign * f(&next);
            recurse(sets, i + 1, &next, depth + 1, f, total);
        }
    }
    let mut total = 0.0;
    recurse(sets, 0, &RectSet::Empty, 0, &f, &mut total);
    total
}

/// Signed expansion of a region into corner rectangles:
/// `1_region = Σ sign · 1_rect` with `rect` ranging over `u0 ∩ (∩S)`.
pub(crate) fn inclusion_exclusion_terms(region: &IncrementRegion) -> Vec<(f64, RectSet)> {
    let mut terms = vec![(1.0, region.u0.clone())];
    fn recurse(
        sets: &[RectSet],
        start: usize,
        acc: &RectSet,
        sign: f64,
        terms: &mut Vec<(f64, RectSet)>,
    ) {
        for i in start..sets.len() {
            let next = acc.intersect(&sets[i]);
            terms.push((-sign, next.clone()));
            recurse(sets, i + 1, &next, -sign, terms);
        }
    }
    if !region.u0.is_empty() {
        recurse(&region.subtracted, 0, &region.u0, 1.0, &mut terms);
    }
    terms
}

/// The grid generated by every corner coordinate of a family of rectangles.
/// Each elementary box lies entirely inside or outside every member.
struct Arrangement {
    breaks: Vec<Vec<f64>>,
}

struct ArrangementCell {
    index: Vec<usize>,
    measure: f64,
}

impl Arrangement {
    fn new<'a>(rects: impl IntoIterator<Item = &'a RectSet>) -> Self {
        let mut breaks: Vec<Vec<f64>> = Vec::new();
        for r in rects {
            if let Some(c) = r.corner() {
                if breaks.is_empty() {
                    breaks = vec![vec![0.0]; c.len()];
                }
                for (axis, &x) in c.iter().enumerate() {
                    breaks[axis].push(x);
                }
            }
        }
        for b in &mut breaks {
            b.sort_by(f64::total_cmp);
            b.dedup();
        }
        Self { breaks }
    }

    fn cells(&self) -> impl Iterator<Item = ArrangementCell> + '_ {
        let counts: Vec<usize> = self.breaks.iter().map(|b| b.len().saturating_sub(1)).collect();
        let total: usize = if counts.is_empty() {
            0
        } else {
            counts.iter().product()
        };
        (0..total).map(move |mut flat| {
            let index: Vec<usize> = counts
                .iter()
                .map(|&c| {
                    let k = flat % c;
                    flat /= c;
                    k
                })
                .collect();
            let measure = index
                .iter()
                .enumerate()
                .map(|(a, &k)| self.breaks[a][k + 1] - self.breaks[a][k])
                .product();
            ArrangementCell { index, measure }
        })
    }

    fn upper(&self, cell: &ArrangementCell) -> Vec<f64> {
        cell.index
            .iter()
            .enumerate()
            .map(|(a, &k)| self.breaks[a][k + 1])
            .collect()
    }

    fn cell_in_rect(&self, cell: &ArrangementCell, r: &RectSet) -> bool {
        r.corner().is_some_and(|c| {
            cell.index
                .iter()
                .enumerate()
                .all(|(a, &k)| self.breaks[a][k + 1] <= c[a])
        })
    }

    fn cell_in_region(&self, cell: &ArrangementCell, region: &IncrementRegion) -> bool {
        self.cell_in_rect(cell, &region.u0)
            && !region.subtracted.iter().any(|s| self.cell_in_rect(cell, s))
    }

    fn region_measure(&self, region: &IncrementRegion) -> f64 {
        self.cells()
            .filter(|c| self.cell_in_region(c, region))
            .map(|c| c.measure)
            .sum()
    }
}

/// A maximal piece of the overlap structure of a family of regions: the
/// points lying in exactly the regions listed in `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Sorted indices of the input regions containing the atom.
    pub members: Vec<usize>,
    /// Disjoint boxes `(lower, upper)` whose union is the atom.
    pub boxes: Vec<(Vec<f64>, Vec<f64>)>,
    pub measure: f64,
}

impl Atom {
    /// Linear indices of the level cells making up the atom.
    pub fn cells(&self, level: &DissectionLevel) -> Vec<usize> {
        let side = level.side() as f64;
        let mut out = Vec::new();
        for (lo, hi) in &self.boxes {
            let ranges: Vec<(u64, u64)> = lo
                .iter()
                .zip(hi)
                .map(|(l, h)| ((l * side).round() as u64, (h * side).round() as u64))
                .collect();
            let mut coords: Vec<u64> = ranges.iter().map(|r| r.0).collect();
            'outer: loop {
                out.push(level.linear_index(&coords));
                for a in 0..coords.len() {
                    coords[a] += 1;
                    if coords[a] < ranges[a].1 {
                        continue 'outer;
                    }
                    coords[a] = ranges[a].0;
                }
                break;
            }
        }
        out.sort_unstable();
        out
    }
}

/// Disjoint overlap atoms of a family of regions aligned at `level`, each
/// tagged with the exact set of regions containing it. Atoms partition the
/// union of the regions; only atoms of positive measure are returned, ordered
/// by their member lists.
pub fn atoms(regions: &[IncrementRegion], level: &DissectionLevel) -> Result<Vec<Atom>> {
    if regions.len() > 64 {
        return Err(Error::InvalidParameter {
            field: "regions".into(),
            reason: "at most 64 regions per atom decomposition".into(),
        });
    }
    for (i, r) in regions.iter().enumerate() {
        level.aligned_corner(&r.u0, &format!("regions[{i}].u0"))?;
        for (j, s) in r.subtracted.iter().enumerate() {
            level.aligned_corner(s, &format!("regions[{i}].sub[{j}]"))?;
        }
    }
    let arrangement = Arrangement::new(regions.iter().flat_map(IncrementRegion::rectangles));
    let mut grouped: std::collections::BTreeMap<u64, Atom> = std::collections::BTreeMap::new();
    for cell in arrangement.cells() {
        if cell.measure <= 0.0 {
            continue;
        }
        let mask = regions
            .iter()
            .enumerate()
            .filter(|(_, r)| arrangement.cell_in_region(&cell, r))
            .fold(0u64, |m, (i, _)| m | (1 << i));
        if mask == 0 {
            continue;
        }
        let lo: Vec<f64> = cell
            .index
            .iter()
            .enumerate()
            .map(|(a, &k)| arrangement.breaks[a][k])
            .collect();
        let hi = arrangement.upper(&cell);
        let atom = grouped.entry(mask).or_insert_with(|| Atom {
            members: (0..regions.len()).filter(|i| mask >> i & 1 == 1).collect(),
            boxes: Vec::new(),
            measure: 0.0,
        });
        atom.boxes.push((lo, hi));
        atom.measure += cell.measure;
    }
    let mut out: Vec<Atom> = grouped.into_values().collect();
    out.sort_by(|a, b| a.members.cmp(&b.members));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(c: &[f64]) -> RectSet {
        RectSet::Rect(c.to_vec())
    }

    fn region(u0: &[f64], sub: &[&[f64]]) -> IncrementRegion {
        IncrementRegion::new(r(u0), sub.iter().map(|s| r(s)).collect())
    }

    #[test]
    fn measure_examples() {
        assert_eq!(region(&[1.0, 1.0], &[]).measure(), 1.0);
        assert_eq!(region(&[1.0, 1.0], &[&[0.5, 1.0]]).measure(), 0.5);
        let quad = region(&[1.0, 1.0], &[&[0.5, 1.0], &[1.0, 0.5]]);
        assert_eq!(quad.measure(), 0.25);
        // Cell count at level 4 agrees.
        let lvl = DissectionLevel::new(2, 4).unwrap();
        let count = quad.cell_membership(&lvl).iter().filter(|&&b| b).count();
        assert_eq!(count as f64 * lvl.cell_measure(), 0.25);
    }

    #[test]
    fn empty_region_has_zero_measure() {
        assert_eq!(IncrementRegion::empty().measure(), 0.0);
        assert_eq!(region(&[0.5, 0.5], &[&[1.0, 1.0]]).measure(), 0.0);
    }

    #[test]
    fn long_subtracted_lists_use_the_arrangement() {
        let subs: Vec<Vec<f64>> = (1..=20)
            .map(|k| vec![k as f64 / 21.0, 1.0 - k as f64 / 21.0])
            .collect();
        let reg = IncrementRegion::new(r(&[1.0, 1.0]), subs.iter().map(|s| r(s)).collect());
        // Strip ((k-1)/21, k/21] keeps height k/21.
        let staircase: f64 = (1..=21).map(|k| k as f64 / 441.0).sum::<f64>();
        assert!((reg.measure() - staircase).abs() < 1e-12);
    }

    #[test]
    fn canonical_form_examples() {
        let c = region(&[1.0, 1.0], &[&[1.0, 0.5]]).canonical_form();
        let clipped = IncrementRegion::new(r(&[1.0, 1.0]), vec![r(&[2.0, 0.5])]);
        assert_eq!(clipped.canonical_form(), c);
        assert_eq!(
            c,
            Canonical::Difference {
                u: r(&[1.0, 1.0]),
                v: vec![r(&[1.0, 0.5])]
            }
        );
        assert_eq!(
            region(&[1.0, 1.0], &[&[1.0, 1.0]]).canonical_form(),
            Canonical::Empty
        );
        let pruned = region(&[0.5, 0.5], &[&[0.25, 0.25], &[0.1, 0.1]]).canonical_form();
        assert_eq!(
            pruned,
            Canonical::Difference {
                u: r(&[0.5, 0.5]),
                v: vec![r(&[0.25, 0.25])]
            }
        );
    }

    #[test]
    fn canonical_form_of_null_regions() {
        // A degenerate u0 is a null set; so is u0 minus a set covering it.
        assert_eq!(region(&[0.0, 1.0], &[]).canonical_form(), Canonical::Empty);
        // Subtracting a segment changes nothing measure-wise.
        assert_eq!(
            region(&[1.0, 1.0], &[&[1.0, 0.0]]).canonical_form(),
            Canonical::Difference {
                u: r(&[1.0, 1.0]),
                v: vec![]
            }
        );
    }

    #[test]
    fn atoms_of_nested_pair() {
        let lvl = DissectionLevel::new(2, 1).unwrap();
        let c0 = region(&[1.0, 1.0], &[]);
        let c1 = region(&[0.5, 1.0], &[]);
        let a = atoms(&[c0, c1], &lvl).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].members, vec![0]);
        assert_eq!(a[0].measure, 0.5);
        assert_eq!(a[1].members, vec![0, 1]);
        assert_eq!(a[1].cells(&lvl), vec![0, 2]);
    }

    #[test]
    fn atoms_reject_unaligned_regions() {
        let lvl = DissectionLevel::new(2, 2).unwrap();
        let err = atoms(&[region(&[1.0, 0.3], &[])], &lvl).unwrap_err();
        assert!(matches!(err, Error::Alignment { axis: 1, .. }));
    }

    #[test]
    fn inclusion_exclusion_terms_reproduce_measure() {
        let reg = region(&[1.0, 1.0], &[&[0.5, 1.0], &[1.0, 0.5], &[0.75, 0.75]]);
        let total: f64 = inclusion_exclusion_terms(&reg)
            .iter()
            .map(|(s, r)| s * r.measure())
            .sum();
        assert!((total - reg.measure()).abs() < 1e-15);
    }

    #[test]
    fn json_literal() {
        let reg: IncrementRegion =
            serde_json::from_str(r#"{"u0":[1.0,1.0],"sub":[[0.5,1.0]]}"#).unwrap();
        assert_eq!(reg.measure(), 0.5);
        assert!(serde_json::from_str::<IncrementRegion>(r#"{"u0":[1.0],"bogus":1}"#).is_err());
    }
}
