use super::{IncrementRegion, RectSet};
use crate::error::{Error, Result};

/// Coordinates within this many grid units of a grid line count as aligned.
const ALIGN_TOL: f64 = 1e-9;

/// Dyadic dissection level `n` of `[0,1]^dim`: `2^(n·dim)` half-open cells
/// of side `2^-n`.
///
/// Cells are indexed linearly with axis 0 varying fastest. Cell `k` is the
/// left-neighbourhood of `[0, (k+1)·2^-n]` with respect to all rectangles of
/// smaller linear index, which is a consistent ordering of the level-`n`
/// rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DissectionLevel {
    pub dim: usize,
    pub level: u32,
}

/// Snap `x` to the level grid; `Some(k)` when `x` is within tolerance of
/// `k·2^-level`.
pub fn snap_coordinate(x: f64, level: u32) -> Option<u64> {
    let scaled = x * (1u64 << level) as f64;
    let k = scaled.round();
    ((scaled - k).abs() <= ALIGN_TOL && k >= 0.0).then_some(k as u64)
}

impl DissectionLevel {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if dim == 0 || dim > super::MAX_DIM {
            return Err(Error::Dimension {
                expected: super::MAX_DIM,
                got: dim,
            });
        }
        if level as usize * dim > 30 {
            return Err(Error::InvalidParameter {
                field: "level".into(),
                reason: format!("level {level} in dimension {dim} exceeds 2^30 cells"),
            });
        }
        Ok(Self { dim, level })
    }

    /// Cells per axis.
    pub fn side(&self) -> u64 {
        1u64 << self.level
    }

    pub fn cell_count(&self) -> usize {
        1usize << (self.level as usize * self.dim)
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.side() as f64
    }

    pub fn cell_measure(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    /// Multi-index of the cell containing `p`. Points on the upper face of
    /// `[0,1]^dim` go to the last cell.
    pub fn cell_coords(&self, p: &[f64]) -> Vec<u64> {
        let side = self.side();
        p.iter()
            .map(|&x| ((x * side as f64).floor().max(0.0) as u64).min(side - 1))
            .collect()
    }

    pub fn linear_index(&self, coords: &[u64]) -> usize {
        let side = self.side() as usize;
        coords
            .iter()
            .rev()
            .fold(0usize, |acc, &k| acc * side + k as usize)
    }

    pub fn coords_of(&self, mut index: usize) -> Vec<u64> {
        let side = self.side() as usize;
        (0..self.dim)
            .map(|_| {
                let k = index % side;
                index /= side;
                k as u64
            })
            .collect()
    }

    pub fn cell_of(&self, p: &[f64]) -> usize {
        self.linear_index(&self.cell_coords(p))
    }

    /// Lower and upper corners of a cell.
    pub fn cell_bounds(&self, index: usize) -> (Vec<f64>, Vec<f64>) {
        let w = self.cell_width();
        let coords = self.coords_of(index);
        let lo = coords.iter().map(|&k| k as f64 * w).collect();
        let hi = coords.iter().map(|&k| (k + 1) as f64 * w).collect();
        (lo, hi)
    }

    /// The rectangle whose left-neighbourhood is the given cell.
    pub fn cell_rectangle(&self, index: usize) -> RectSet {
        RectSet::Rect(self.cell_bounds(index).1)
    }

    /// The cell as an increment region `A_k \ (∪ of the rectangles just
    /// below it along each axis)`.
    pub fn cell_region(&self, index: usize) -> IncrementRegion {
        let (lo, hi) = self.cell_bounds(index);
        let sub = (0..self.dim)
            .filter(|&a| lo[a] > 0.0)
            .map(|a| {
                let mut c = hi.clone();
                c[a] = lo[a];
                RectSet::Rect(c)
            })
            .collect();
        IncrementRegion::new(RectSet::Rect(hi), sub)
    }

    /// Grid multi-index of a rectangle corner, or an alignment error naming
    /// the first offending axis.
    pub fn aligned_corner(&self, rect: &RectSet, what: &str) -> Result<Option<Vec<u64>>> {
        let Some(c) = rect.corner() else {
            return Ok(None);
        };
        if c.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: c.len(),
            });
        }
        c.iter()
            .enumerate()
            .map(|(axis, &x)| {
                snap_coordinate(x, self.level).ok_or_else(|| Error::Alignment {
                    what: what.to_string(),
                    axis,
                    value: x,
                    level: self.level,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn check_region(&self, region: &IncrementRegion) -> Result<()> {
        self.aligned_corner(&region.u0, "u0")?;
        for (i, s) in region.subtracted.iter().enumerate() {
            self.aligned_corner(s, &format!("sub[{i}]"))?;
        }
        Ok(())
    }

    /// Smallest level rectangle whose interior (relative to `[0,1]^dim`)
    /// contains `rect`: every coordinate is rounded strictly up to the next
    /// grid line, capped at 1.
    pub fn enclosing(&self, rect: &RectSet) -> RectSet {
        match rect {
            RectSet::Empty => RectSet::Empty,
            RectSet::Rect(c) => {
                let side = self.side() as f64;
                RectSet::Rect(
                    c.iter()
                        .map(|&x| (((x * side).floor() + 1.0) / side).min(1.0))
                        .collect(),
                )
            }
        }
    }

    /// Grid rectangle containing `rect`: aligned coordinates are kept (after
    /// snapping), the rest are rounded up.
    pub fn align_up(&self, rect: &RectSet) -> RectSet {
        match rect {
            RectSet::Empty => RectSet::Empty,
            RectSet::Rect(c) => {
                let side = self.side() as f64;
                RectSet::Rect(
                    c.iter()
                        .map(|&x| match snap_coordinate(x, self.level) {
                            Some(k) => k as f64 / side,
                            None => ((x * side).ceil() / side).min(1.0),
                        })
                        .collect(),
                )
            }
        }
    }

    /// Grid approximation of a region (every member aligned up) and the
    /// absolute measure gap it introduces.
    pub fn approximate(&self, region: &IncrementRegion) -> (IncrementRegion, f64) {
        let approx = IncrementRegion::new(
            self.align_up(&region.u0),
            region.subtracted.iter().map(|s| self.align_up(s)).collect(),
        );
        let gap = (approx.measure() - region.measure()).abs();
        (approx, gap)
    }
}
