//! The indexing collection of rectangles `[0, t]` in `[0,1]^N`, with
//! Lebesgue measure, increment regions `U0 \ (U1 ∪ … ∪ Uk)`, dyadic
//! dissections and equal-measure partitions.

mod dissection;
mod partition;
mod region;

pub use dissection::{snap_coordinate, DissectionLevel};
pub use partition::{m_partition, PARTITION_TOL};
pub use region::{atoms, Atom, Canonical, IncrementRegion};
pub(crate) use region::inclusion_exclusion_terms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// An element of the indexing collection: the rectangle `[0, corner]`, or the
/// empty set.
///
/// `[0, 0]` is the single point `{0}`, the minimal nonempty set; it has
/// measure zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<Vec<f64>>", into = "Option<Vec<f64>>")]
pub enum RectSet {
    Rect(Vec<f64>),
    Empty,
}

impl From<Option<Vec<f64>>> for RectSet {
    fn from(v: Option<Vec<f64>>) -> Self {
        v.map_or(RectSet::Empty, RectSet::Rect)
    }
}

impl From<RectSet> for Option<Vec<f64>> {
    fn from(r: RectSet) -> Self {
        match r {
            RectSet::Rect(c) => Some(c),
            RectSet::Empty => None,
        }
    }
}

impl RectSet {
    /// `[0, corner]` after checking every coordinate lies in `[0, 1]`.
    pub fn new(corner: Vec<f64>) -> Result<Self> {
        if corner.is_empty() || corner.len() > MAX_DIM {
            return Err(Error::Dimension {
                expected: MAX_DIM,
                got: corner.len(),
            });
        }
        for (axis, &c) in corner.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidParameter {
                    field: format!("corner[{axis}]"),
                    reason: format!("{c} is outside [0, 1]"),
                });
            }
        }
        Ok(RectSet::Rect(corner))
    }

    /// The whole space `[0,1]^dim`.
    pub fn unit(dim: usize) -> Self {
        RectSet::Rect(vec![1.0; dim])
    }

    /// The minimal nonempty set `{0}`.
    pub fn origin(dim: usize) -> Self {
        RectSet::Rect(vec![0.0; dim])
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, RectSet::Empty)
    }

    pub fn corner(&self) -> Option<&[f64]> {
        match self {
            RectSet::Rect(c) => Some(c),
            RectSet::Empty => None,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.corner().map(<[f64]>::len)
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.corner().map_or(0.0, |c| c.iter().product())
    }

    /// Coordinatewise minimum of the corners.
    pub fn intersect(&self, other: &RectSet) -> RectSet {
        match (self, other) {
            (RectSet::Rect(a), RectSet::Rect(b)) => {
                RectSet::Rect(a.iter().zip(b).map(|(x, y)| x.min(*y)).collect())
            }
            _ => RectSet::Empty,
        }
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &RectSet) -> bool {
        match (self, other) {
            (RectSet::Empty, _) => true,
            (_, RectSet::Empty) => false,
            (RectSet::Rect(a), RectSet::Rect(b)) => a.iter().zip(b).all(|(x, y)| x <= y),
        }
    }

    /// Point membership with the half-open convention `0 <= p < corner`,
    /// matching the half-open dyadic cells. Boundaries have measure zero, so
    /// this only fixes which side a boundary point is counted on.
    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.corner()
            .is_some_and(|c| c.iter().zip(p).all(|(ci, pi)| *pi < *ci))
    }
}

/// A finite union of rectangles (an element of the class of finite unions).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RectUnion {
    pub members: Vec<RectSet>,
}

impl RectUnion {
    pub fn new(members: Vec<RectSet>) -> Self {
        Self {
            members: members.into_iter().filter(|m| !m.is_empty()).collect(),
        }
    }

    pub fn single(rect: RectSet) -> Self {
        Self::new(vec![rect])
    }

    /// Disjoint decomposition `U_i \ (U_1 ∪ … ∪ U_{i-1})`.
    pub fn disjoint_pieces(&self) -> Vec<IncrementRegion> {
        self.members
            .iter()
            .enumerate()
            .map(|(i, u)| IncrementRegion::new(u.clone(), self.members[..i].to_vec()))
            .collect()
    }

    pub fn measure(&self) -> f64 {
        self.disjoint_pieces().iter().map(IncrementRegion::measure).sum()
    }
}
