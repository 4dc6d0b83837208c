//! Elementary and simple flows, `θ(t) = m[f(t)]` and its inverse, and the
//! m-standard projection `s ↦ X_{f(θ⁻¹(s))}` of a sample path.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::indexing::{DissectionLevel, IncrementRegion, RectSet, RectUnion};
use crate::numeric::bisect_leftmost;
use crate::simulate::{RegionPlan, SamplePath};

/// Bracket width at which `θ⁻¹` stops bisecting.
pub const THETA_INVERSE_TOL: f64 = 1e-12;

/// Slack allowed when checking that `s` lies in `[θ(a), θ(b)]`.
const RANGE_SLACK: f64 = 1e-12;

/// A continuous increasing map from a parameter interval into finite unions
/// of rectangles.
pub trait Flow: Send + Sync {
    fn domain(&self) -> (f64, f64);

    fn value(&self, t: f64) -> Result<RectUnion>;

    fn theta(&self, t: f64) -> Result<f64> {
        Ok(self.value(t)?.measure())
    }

    /// Leftmost `t` with `θ(t) = s`.
    fn theta_inverse(&self, s: f64) -> Result<f64> {
        let (a, b) = self.domain();
        let (lo, hi) = (self.theta(a)?, self.theta(b)?);
        if !(s >= lo - RANGE_SLACK && s <= hi + RANGE_SLACK) {
            return Err(Error::Range(format!("s = {s} (theta range [{lo}, {hi}])")));
        }
        let theta = |t: f64| self.theta(t).unwrap_or(f64::NAN);
        Ok(bisect_leftmost(theta, s.min(hi), a, b, THETA_INVERSE_TOL))
    }
}

/// Elementary flow `f(t) = [0, p(t)]` with `p` the polyline through
/// `vertices`, reaching vertex `i` at parameter `knots[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolylineLiteral", into = "PolylineLiteral")]
pub struct ElementaryFlow {
    vertices: Vec<Vec<f64>>,
    knots: Vec<f64>,
}

/// JSON form: `{"vertices": [[0,0],[0,1],[1,1]], "knots": [0, 0.5, 1]}`;
/// knots default to an even spacing of `[0, 1]`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolylineLiteral {
    vertices: Vec<Vec<f64>>,
    #[serde(default)]
    knots: Option<Vec<f64>>,
}

impl TryFrom<PolylineLiteral> for ElementaryFlow {
    type Error = Error;

    fn try_from(lit: PolylineLiteral) -> Result<Self> {
        match lit.knots {
            Some(k) => ElementaryFlow::new(lit.vertices, k),
            None => ElementaryFlow::evenly(lit.vertices),
        }
    }
}

impl From<ElementaryFlow> for PolylineLiteral {
    fn from(f: ElementaryFlow) -> Self {
        PolylineLiteral {
            vertices: f.vertices,
            knots: Some(f.knots),
        }
    }
}

impl ElementaryFlow {
    pub fn new(vertices: Vec<Vec<f64>>, knots: Vec<f64>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(invalid("vertices", "need at least one vertex"));
        }
        if knots.len() != vertices.len() {
            return Err(invalid(
                "knots",
                format!("{} knots for {} vertices", knots.len(), vertices.len()),
            ));
        }
        if vertices.len() == 1 && knots.len() == 1 {
            return Err(invalid("knots", "a single vertex gives an empty parameter interval"));
        }
        let dim = vertices[0].len();
        for (i, v) in vertices.iter().enumerate() {
            RectSet::new(v.clone()).map_err(|e| invalid(&format!("vertices[{i}]"), e.to_string()))?;
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            if i > 0 && v.iter().zip(&vertices[i - 1]).any(|(x, y)| x < y) {
                return Err(invalid(
                    &format!("vertices[{i}]"),
                    "polyline must be coordinatewise nondecreasing",
                ));
            }
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(invalid("knots", "must be finite and strictly increasing"));
        }
        Ok(Self { vertices, knots })
    }

    /// Polyline parametrised over `[0, 1]` with evenly spaced knots.
    pub fn evenly(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices.len().max(2) - 1;
        let knots = (0..vertices.len()).map(|i| i as f64 / n as f64).collect();
        Self::new(vertices, knots)
    }

    /// `f(t) = [0, (t, …, t)]` on `[0, 1]`.
    pub fn diagonal(dim: usize) -> Self {
        Self::evenly(vec![vec![0.0; dim], vec![1.0; dim]]).expect("valid diagonal")
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Polyline point at parameter `t`.
    pub fn corner(&self, t: f64) -> Result<Vec<f64>> {
        let (a, b) = self.domain();
        if !(t >= a && t <= b) {
            return Err(Error::Range(format!("t = {t} (domain [{a}, {b}])")));
        }
        let i = self.knots.partition_point(|&k| k <= t).clamp(1, self.knots.len() - 1);
        let (k0, k1) = (self.knots[i - 1], self.knots[i]);
        let w = ((t - k0) / (k1 - k0)).clamp(0.0, 1.0);
        Ok(self.vertices[i - 1]
            .iter()
            .zip(&self.vertices[i])
            .map(|(p, q)| (p + w * (q - p)).clamp(0.0, 1.0))
            .collect())
    }

    pub fn rect(&self, t: f64) -> Result<RectSet> {
        Ok(RectSet::Rect(self.corner(t)?))
    }

    /// Largest backward step of `θ` on an evenly spaced mesh of `points`
    /// parameters; zero for a genuine flow.
    pub fn monotonicity_defect(&self, points: usize) -> Result<f64> {
        let (a, b) = self.domain();
        let mut worst: f64 = 0.0;
        let mut prev = self.theta(a)?;
        for k in 1..points {
            let t = a + (b - a) * k as f64 / (points - 1) as f64;
            let cur = self.theta(t)?;
            worst = worst.max(prev - cur);
            prev = cur;
        }
        Ok(worst)
    }
}

impl Flow for ElementaryFlow {
    fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn value(&self, t: f64) -> Result<RectUnion> {
        Ok(RectUnion::single(self.rect(t)?))
    }

    fn theta(&self, t: f64) -> Result<f64> {
        Ok(self.corner(t)?.iter().product())
    }
}

/// A flow run on a new clock: `g(u) = f(φ(u))` with
/// `φ(u) = a + (b − a)·((u − c)/(d − c))^power`, an increasing bijection of
/// `[c, d]` onto the domain `[a, b]` of `f`.
#[derive(Debug, Clone)]
pub struct TimeChanged<F> {
    pub inner: F,
    pub domain: (f64, f64),
    pub power: f64,
}

impl<F: Flow> TimeChanged<F> {
    pub fn new(inner: F, domain: (f64, f64), power: f64) -> Result<Self> {
        if !(domain.1 > domain.0 && power > 0.0) {
            return Err(invalid("time change", "need c < d and power > 0"));
        }
        Ok(Self {
            inner,
            domain,
            power,
        })
    }

    fn phi(&self, u: f64) -> f64 {
        let (a, b) = self.inner.domain();
        let (c, d) = self.domain;
        let w = ((u - c) / (d - c)).clamp(0.0, 1.0);
        if u >= d {
            b
        } else {
            a + (b - a) * w.powf(self.power)
        }
    }
}

impl<F: Flow> Flow for TimeChanged<F> {
    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn value(&self, u: f64) -> Result<RectUnion> {
        let (c, d) = self.domain;
        if !(u >= c && u <= d) {
            return Err(Error::Range(format!("u = {u} (domain [{c}, {d}])")));
        }
        self.inner.value(self.phi(u))
    }
}

/// Composition of elementary flows over consecutive parameter intervals:
/// on the `i`-th interval `f(s) = f_i(s) ∪ f_1(t_1) ∪ … ∪ f_{i-1}(t_{i-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimpleLiteral", into = "SimpleLiteral")]
pub struct SimpleFlow {
    segments: Vec<ElementaryFlow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimpleLiteral {
    segments: Vec<ElementaryFlow>,
}

impl TryFrom<SimpleLiteral> for SimpleFlow {
    type Error = Error;

    fn try_from(lit: SimpleLiteral) -> Result<Self> {
        SimpleFlow::new(lit.segments)
    }
}

impl From<SimpleFlow> for SimpleLiteral {
    fn from(f: SimpleFlow) -> Self {
        SimpleLiteral {
            segments: f.segments,
        }
    }
}

impl SimpleFlow {
    /// Segments must have abutting domains, and each segment must start
    /// inside the union already reached, so the composed map is continuous.
    pub fn new(segments: Vec<ElementaryFlow>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("segments", "need at least one segment"));
        }
        let dim = segments[0].dim();
        for i in 1..segments.len() {
            let (prev, cur) = (&segments[i - 1], &segments[i]);
            if cur.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: cur.dim(),
                });
            }
            if (cur.domain().0 - prev.domain().1).abs() > 1e-12 {
                return Err(invalid(
                    &format!("segments[{i}]"),
                    "parameter interval must start where the previous one ends",
                ));
            }
            let start = cur.rect(cur.domain().0)?;
            let covered = segments[..i]
                .iter()
                .any(|s| start.is_subset_of(&s.rect(s.domain().1).expect("endpoint in domain")));
            if !covered {
                return Err(invalid(
                    &format!("segments[{i}]"),
                    "must start inside the union reached by the earlier segments",
                ));
            }
        }
        Ok(Self { segments })
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(self.segments[0].domain().0)
            .chain(self.segments.iter().map(|s| s.domain().1))
            .collect()
    }
}

impl Flow for SimpleFlow {
    fn domain(&self) -> (f64, f64) {
        (self.segments[0].domain().0, self.segments.last().unwrap().domain().1)
    }

    fn value(&self, t: f64) -> Result<RectUnion> {
        let (a, b) = self.domain();
        if !(t >= a && t <= b) {
            return Err(Error::Range(format!("t = {t} (domain [{a}, {b}])")));
        }
        let i = self
            .segments
            .iter()
            .position(|s| t <= s.domain().1)
            .unwrap_or(self.segments.len() - 1);
        let mut members: Vec<RectSet> = self.segments[..i]
            .iter()
            .map(|s| s.rect(s.domain().1))
            .collect::<Result<_>>()?;
        members.push(self.segments[i].rect(t)?);
        Ok(RectUnion::new(members))
    }
}

/// Named elementary flows in the unit square whose values at
/// `s = k·2^-n` are level-`n` grid rectangles, so projections on such a mesh
/// need no approximation.
pub fn shipped_flows() -> Vec<(&'static str, ElementaryFlow)> {
    let f = |v: &[[f64; 2]]| ElementaryFlow::evenly(v.iter().map(|p| p.to_vec()).collect()).expect("valid flow");
    vec![
        ("sweep-x", f(&[[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]])),
        ("sweep-y", f(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])),
        (
            "staircase",
            f(&[[0.0, 0.0], [0.0, 0.5], [0.5, 0.5], [0.5, 1.0], [1.0, 1.0]]),
        ),
    ]
}

/// Evenly spaced mesh `s_k = θ(b)·k/count`, `k = 0..=count`.
pub fn even_mesh<F: Flow + ?Sized>(flow: &F, count: usize) -> Result<Vec<f64>> {
    let (a, b) = flow.domain();
    let (lo, hi) = (flow.theta(a)?, flow.theta(b)?);
    Ok((0..=count)
        .map(|k| lo + (hi - lo) * k as f64 / count.max(1) as f64)
        .collect())
}

/// The sets `f(θ⁻¹(s))` of a mesh, resolved at one dissection level.
#[derive(Debug, Clone)]
pub struct ProjectionPlan {
    pub mesh: Vec<f64>,
    /// Per mesh point, the grid pieces of the (approximated) set.
    pieces: Vec<Vec<RegionPlan>>,
    /// Largest measure gap introduced by grid approximation.
    pub gap: f64,
}

impl ProjectionPlan {
    pub fn new<F: Flow + ?Sized>(flow: &F, mesh: &[f64], level: DissectionLevel) -> Result<Self> {
        let mut pieces = Vec::with_capacity(mesh.len());
        let mut gap: f64 = 0.0;
        for &s in mesh {
            let t = flow.theta_inverse(s)?;
            let union = flow.value(t)?;
            let approx = RectUnion::new(
                union
                    .members
                    .iter()
                    .map(|m| level.align_up(m))
                    .collect(),
            );
            gap = gap.max((approx.measure() - union.measure()).abs());
            let plans = approx
                .disjoint_pieces()
                .iter()
                .filter(|p: &&IncrementRegion| p.measure() > 0.0)
                .map(|p| RegionPlan::new(level, p))
                .collect::<Result<Vec<_>>>()?;
            pieces.push(plans);
        }
        Ok(Self {
            mesh: mesh.to_vec(),
            pieces,
            gap,
        })
    }

    /// The projected trajectory of one path.
    pub fn apply(&self, path: &SamplePath) -> Result<Vec<f64>> {
        self.pieces
            .iter()
            .map(|plans| {
                plans
                    .iter()
                    .map(|p| path.evaluate_plan(p))
                    .sum::<Result<f64>>()
            })
            .collect()
    }
}

/// A projected trajectory `s ↦ X_{f(θ⁻¹(s))}` on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mesh: Vec<f64>,
    pub values: Vec<f64>,
    /// Measure gap of the grid approximation (zero when exact).
    pub gap: f64,
}

/// m-standard projection of a path on a flow.
pub fn project<F: Flow + ?Sized>(path: &SamplePath, flow: &F, mesh: &[f64]) -> Result<Projection> {
    let plan = ProjectionPlan::new(flow, mesh, path.level)?;
    Ok(Projection {
        mesh: mesh.to_vec(),
        values: plan.apply(path)?,
        gap: plan.gap,
    })
}
