//! Named Monte Carlo verification suites. Each suite draws its own seeded
//! paths, runs a fixed list of statistical or exact checks and returns a
//! [`SuiteReport`]; the report is a pure function of the options, so reruns
//! serialise to identical bytes.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{invalid, Result};
use crate::flows::{even_mesh, shipped_flows, ProjectionPlan};
use crate::indexing::{DissectionLevel, IncrementRegion, RectSet};
use crate::jumps::{
    atoms_separated, count_jumps, extract_jumps, gaussian_sup_diagnostic, gaussian_threshold, levy_ito_decompose,
    partial_sum, scan_jumps_plan, uniform_gaussian_threshold,
};
use crate::laws::{LevyTriplet, MarkDist, MarkSet, PowerFamily};
use crate::markov::{chapman_kolmogorov_check, conditional_check, semilattice_fdd, semilattice_product, TransitionKernel};
use crate::rng::{keyed_stream, Domain};
use crate::simulate::{evaluate_batch, fdd_char, sample_path_at, ProcessSpec, RegionPlan};
use crate::stats::{
    bonferroni, correlation, ecf, factorization_gap_with, joint_ecf, ks_two_sample, mean_and_se, median, TestReport,
};

/// Every suite name accepted by [`run_suite`].
pub const SUITES: &[&str] = &[
    "brownian-core",
    "canonical",
    "fdd",
    "stationarity",
    "representation",
    "flows",
    "markov",
    "semigroup",
    "jumps",
    "levy-ito",
    "continuity",
];

/// Knobs shared by all suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Monte Carlo paths for the distributional checks.
    pub paths: u64,
    /// Constant `c` of the confidence radius `c/√n`.
    pub radius_constant: f64,
    /// Family-wise level of the KS checks.
    pub alpha: f64,
    /// Tolerance of the numerical kernel checks.
    pub kernel_tol: f64,
    /// Tolerance of the exact (pathwise) identities.
    pub exact_tol: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            paths: 10_000,
            radius_constant: 5.0,
            alpha: 0.01,
            kernel_tol: 1e-5,
            exact_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub paths: u64,
    pub pass: bool,
    pub tests: Vec<TestReport>,
    /// Context numbers that do not decide the outcome.
    pub diagnostics: Vec<TestReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> usize {
        self.tests.iter().filter(|t| t.pass).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

struct Suite {
    name: &'static str,
    opts: SuiteOptions,
    tests: Vec<TestReport>,
    diagnostics: Vec<TestReport>,
}

impl Suite {
    fn new(name: &'static str, opts: &SuiteOptions) -> Self {
        Self {
            name,
            opts: opts.clone(),
            tests: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn check(&mut self, report: TestReport) {
        self.tests.push(report);
    }

    fn note(&mut self, report: TestReport) {
        self.diagnostics.push(report);
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite: self.name.to_string(),
            seed: self.opts.seed,
            paths: self.opts.paths,
            pass: !self.tests.is_empty() && self.tests.iter().all(|t| t.pass),
            tests: self.tests,
            diagnostics: self.diagnostics,
        }
    }

    fn radius(&self, n: usize) -> f64 {
        self.opts.radius_constant / (n as f64).sqrt()
    }
}

/// Run one suite by name.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteReport> {
    if opts.paths < 1000 {
        return Err(invalid("paths", format!("suites need at least 1000 paths, got {}", opts.paths)));
    }
    match name {
        "brownian-core" => brownian_core(opts),
        "canonical" => canonical(opts),
        "fdd" => fdd(opts),
        "stationarity" => stationarity(opts),
        "representation" => representation(opts),
        "flows" => flows(opts),
        "markov" => markov(opts),
        "semigroup" => semigroup(opts),
        "jumps" => jumps(opts),
        "levy-ito" => levy_ito(opts),
        "continuity" => continuity(opts),
        other => Err(invalid("suite", format!("unknown suite `{other}`; known: {}", SUITES.join(", ")))),
    }
}

/// The four reference triplets exercised by the suites.
pub fn shipped_triplets() -> Vec<(&'static str, LevyTriplet)> {
    vec![
        ("brownian", LevyTriplet::gaussian(1.0, 0.0)),
        ("poisson", LevyTriplet::compound_poisson(2.0, MarkDist::Point { at: 1.0 })),
        (
            "compound-normal",
            LevyTriplet::compound_poisson(1.0, MarkDist::Normal { mean: 0.0, sd: 1.0 }),
        ),
        ("truncated-stable", LevyTriplet::truncated_stable(1.0, 1.5, 0.05, 5.0)),
    ]
}

/// `z_j = 0.25·(j+1)`, `j = 0..16`.
pub fn z_grid() -> Vec<f64> {
    (0..16).map(|j| 0.25 * (j + 1) as f64).collect()
}

// Sub-keys separating the auxiliary streams of different suites.
const KEY_REGIONS: u64 = 1;
const KEY_PAIRS: u64 = 2;
const KEY_REPRESENTATION: u64 = 3;

fn rect(c: &[f64]) -> RectSet {
    RectSet::Rect(c.to_vec())
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Random level-`level` aligned region `U_0 \ ∪ U_i` with up to `max_subs`
/// subtracted sets and measure at least `min_measure`.
fn random_region<R: Rng>(rng: &mut R, dim: usize, level: u32, max_subs: usize, min_measure: f64) -> IncrementRegion {
    let side = 1u64 << level;
    loop {
        let corner = |rng: &mut R, lo: u64| -> RectSet {
            RectSet::Rect(
                (0..dim)
                    .map(|_| rng.random_range(lo..=side) as f64 / side as f64)
                    .collect(),
            )
        };
        let u0 = corner(rng, 1);
        let k = rng.random_range(0..=max_subs);
        let subs = (0..k).map(|_| corner(rng, 0)).collect();
        let region = IncrementRegion::new(u0, subs);
        if region.measure() >= min_measure {
            return region;
        }
    }
}

/// `max_z |φ̂(z) − exp(t·ψ(z))|` for samples of an increment over measure `t`.
fn cf_deviation(samples: &[f64], triplet: &LevyTriplet, t: f64, zs: &[f64]) -> Result<f64> {
    let est = ecf(samples, zs)?;
    let target: Vec<Complex64> = zs
        .iter()
        .map(|&z| triplet.region_exponent(t, z).map(Complex64::exp))
        .collect::<Result<_>>()?;
    Ok(est
        .values
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

fn spec(triplet: &LevyTriplet, dim: usize, level: u32, seed: u64) -> Result<ProcessSpec> {
    ProcessSpec::new(triplet.clone(), dim, level, seed)
}

fn canonical_checks(s: &mut Suite, tag: &str, triplet: &LevyTriplet) -> Result<()> {
    let n = s.opts.paths;
    let sp = spec(triplet, 2, 3, s.opts.seed)?;
    let mut rng = keyed_stream(s.opts.seed, Domain::Auxiliary, KEY_REGIONS, 0);
    let regions: Vec<IncrementRegion> = (0..5).map(|_| random_region(&mut rng, 2, 3, 3, 1.0 / 16.0)).collect();
    let rows = evaluate_batch(&sp, n, &regions)?;
    let zs = z_grid();
    for (i, r) in regions.iter().enumerate() {
        let dev = cf_deviation(&column(&rows, i), triplet, r.measure(), &zs)?;
        s.check(TestReport::at_most(
            format!("cf/{tag}/region-{i}"),
            dev,
            s.radius(n as usize),
        ));
    }
    Ok(())
}

fn canonical(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("canonical", opts);
    for (tag, triplet) in shipped_triplets() {
        canonical_checks(&mut s, tag, &triplet)?;
    }
    Ok(s.finish())
}

/// Eight fixed λ-tuples of length `k`.
fn lambda_tuples(k: usize) -> Vec<Vec<f64>> {
    (0..8)
        .map(|t| {
            (0..k)
                .map(|j| 0.4 * (t + 1) as f64 * ((t + 2 * j) as f64).cos())
                .collect()
        })
        .collect()
}

fn fdd_families() -> Vec<(&'static str, Vec<IncrementRegion>)> {
    let r = |c: &[f64]| IncrementRegion::rect(rect(c));
    vec![
        ("nested", vec![r(&[1.0, 1.0]), r(&[0.5, 0.5])]),
        ("crossing", vec![r(&[1.0, 0.5]), r(&[0.5, 1.0])]),
        (
            "triple",
            vec![
                r(&[0.75, 0.75]),
                IncrementRegion::difference(rect(&[1.0, 0.5]), rect(&[0.25, 0.25])),
                r(&[0.5, 1.0]),
            ],
        ),
    ]
}

fn fdd(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("fdd", opts);
    let n = opts.paths;
    let triplets = shipped_triplets();
    for (tag, triplet) in triplets.iter().filter(|(t, _)| *t == "brownian" || *t == "compound-normal") {
        let sp = spec(triplet, 2, 2, opts.seed)?;
        for (family, regions) in fdd_families() {
            let rows = evaluate_batch(&sp, n, &regions)?;
            let mut worst: f64 = 0.0;
            for lambdas in lambda_tuples(regions.len()) {
                let emp = joint_ecf(&rows, &lambdas)?;
                worst = worst.max((emp - fdd_char(&sp, &regions, &lambdas)?).norm());
            }
            s.check(TestReport::at_most(
                format!("joint-cf/{tag}/{family}"),
                worst,
                s.radius(n as usize),
            ));
        }
    }
    // Disjoint regions: the joint exponent is the sum of the marginal ones.
    let disjoint = vec![
        IncrementRegion::rect(rect(&[0.5, 0.5])),
        IncrementRegion::difference(rect(&[1.0, 1.0]), rect(&[0.5, 1.0])),
        IncrementRegion::new(rect(&[0.5, 1.0]), vec![rect(&[0.5, 0.5])]),
    ];
    for (tag, triplet) in &triplets {
        let sp = spec(triplet, 2, 2, opts.seed)?;
        let mut worst: f64 = 0.0;
        for lambdas in lambda_tuples(disjoint.len()) {
            let joint = fdd_char(&sp, &disjoint, &lambdas)?;
            let mut product = Complex64::new(1.0, 0.0);
            for (r, &l) in disjoint.iter().zip(&lambdas) {
                product *= fdd_char(&sp, std::slice::from_ref(r), &[l])?;
            }
            worst = worst.max((joint - product).norm());
        }
        s.check(TestReport::at_most(format!("disjoint-product/{tag}"), worst, opts.exact_tol));
    }
    Ok(s.finish())
}

/// `count` pairs of distinct level-3 regions with equal measure.
fn equal_measure_pairs(seed: u64, count: usize) -> Vec<(IncrementRegion, IncrementRegion)> {
    let mut rng = keyed_stream(seed, Domain::Auxiliary, KEY_PAIRS, 0);
    let level = DissectionLevel::new(2, 3).expect("valid level");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = random_region(&mut rng, 2, 3, 2, 1.0 / 16.0);
        for _ in 0..10_000 {
            let b = random_region(&mut rng, 2, 3, 2, 1.0 / 16.0);
            if (a.measure() - b.measure()).abs() < 1e-12 && a.cell_membership(&level) != b.cell_membership(&level) {
                out.push((a, b));
                break;
            }
        }
    }
    out
}

/// Two-sample KS on the first half of `a` against the second half of `b`,
/// so the samples come from disjoint sets of paths.
fn split_ks(a: &[f64], b: &[f64]) -> Result<f64> {
    let half = a.len() / 2;
    Ok(ks_two_sample(&a[..half], &b[half..])?.p_value)
}

/// Records each p-value as a diagnostic and checks that fewer than two
/// fall below the Bonferroni level.
fn ks_family(s: &mut Suite, tag: &str, p_values: &[(String, f64)]) {
    let level = bonferroni(s.opts.alpha, p_values.len());
    let mut rejections = 0;
    for (name, p) in p_values {
        if *p < level {
            rejections += 1;
        }
        s.note(TestReport::at_least(format!("ks-p/{tag}/{name}"), *p, level));
    }
    s.check(TestReport::at_most(format!("ks-rejections/{tag}"), rejections as f64, 1.0));
}

fn stationarity_checks(s: &mut Suite, tag: &str, triplet: &LevyTriplet) -> Result<()> {
    let sp = spec(triplet, 2, 3, s.opts.seed)?;
    let pairs = equal_measure_pairs(s.opts.seed, 10);
    let regions: Vec<IncrementRegion> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let rows = evaluate_batch(&sp, s.opts.paths, &regions)?;
    let p_values = (0..pairs.len())
        .map(|i| Ok((format!("pair-{i}"), split_ks(&column(&rows, 2 * i), &column(&rows, 2 * i + 1))?)))
        .collect::<Result<Vec<_>>>()?;
    ks_family(s, tag, &p_values);
    Ok(())
}

fn stationarity(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("stationarity", opts);
    for (tag, triplet) in shipped_triplets() {
        stationarity_checks(&mut s, tag, &triplet)?;
    }
    Ok(s.finish())
}

/// Splits `region` by a rectangle `w` into `(region ∩ w, region \ w)`.
fn split(region: &IncrementRegion, w: &RectSet) -> (IncrementRegion, IncrementRegion) {
    let inside = IncrementRegion::new(region.u0.intersect(w), region.subtracted.clone());
    let mut subs = region.subtracted.clone();
    subs.push(w.clone());
    (inside, IncrementRegion::new(region.u0.clone(), subs))
}

fn representation_checks(s: &mut Suite, tag: &str, triplet: &LevyTriplet, paths: u64) -> Result<()> {
    let sp = spec(triplet, 2, 4, s.opts.seed)?;
    let mut rng = keyed_stream(s.opts.seed, Domain::Auxiliary, KEY_REPRESENTATION, 0);
    let regions: Vec<IncrementRegion> = (0..50).map(|_| random_region(&mut rng, 2, 4, 4, 0.0)).collect();
    let cuts: Vec<RectSet> = (0..50)
        .map(|_| rect(&[rng.random_range(0..=16) as f64 / 16.0, rng.random_range(0..=16) as f64 / 16.0]))
        .collect();
    let worst = batch::map_indexed(0..paths, |r| -> Result<(f64, f64, f64)> {
        let path = sample_path_at(&sp, r)?;
        let (mut canon, mut routes, mut additivity) = (0.0f64, 0.0f64, 0.0f64);
        for (region, cut) in regions.iter().zip(&cuts) {
            let raw = path.evaluate(region)?;
            canon = canon.max((raw - path.evaluate(&region.canonical_form().to_region())?).abs());
            routes = routes.max((raw - path.evaluate_inclusion_exclusion(region)?).abs());
            let (a, b) = split(region, cut);
            additivity = additivity.max((raw - path.evaluate(&a)? - path.evaluate(&b)?).abs());
        }
        Ok((canon, routes, additivity))
    })
    .into_iter()
    .try_fold((0.0f64, 0.0f64, 0.0f64), |acc, w| {
        w.map(|(a, b, c)| (acc.0.max(a), acc.1.max(b), acc.2.max(c)))
    })?;
    let tol = s.opts.exact_tol;
    s.check(TestReport::at_most(format!("raw-vs-canonical/{tag}"), worst.0, tol));
    s.check(TestReport::at_most(format!("scan-vs-inclusion-exclusion/{tag}"), worst.1, tol));
    s.check(TestReport::at_most(format!("additivity/{tag}"), worst.2, tol));
    Ok(())
}

fn representation(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("representation", opts);
    for (tag, triplet) in shipped_triplets() {
        representation_checks(&mut s, tag, &triplet, 100)?;
    }
    Ok(s.finish())
}

fn flows(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("flows", opts);
    let n = opts.paths as usize;
    let zs = z_grid();
    let zpairs: Vec<(f64, f64)> = (0..8).map(|j| (0.5 * (j + 1) as f64, 0.5 * (8 - j) as f64)).collect();
    for (tag, triplet) in shipped_triplets() {
        let sp = spec(&triplet, 2, 4, opts.seed)?;
        for (name, flow) in shipped_flows() {
            let mesh = even_mesh(&flow, 16)?;
            let plan = ProjectionPlan::new(&flow, &mesh, sp.dissection())?;
            s.check(TestReport::at_most(format!("grid-gap/{tag}/{name}"), plan.gap, opts.exact_tol));
            let trajectories = batch::map_indexed(0..opts.paths, |r| plan.apply(&sample_path_at(&sp, r)?))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let steps = mesh.len() - 1;
            let increments: Vec<Vec<f64>> = (0..steps)
                .map(|k| trajectories.iter().map(|t| t[k + 1] - t[k]).collect())
                .collect();
            let mut worst: f64 = 0.0;
            for (k, inc) in increments.iter().enumerate() {
                worst = worst.max(cf_deviation(inc, &triplet, mesh[k + 1] - mesh[k], &zs)?);
            }
            let terminal = trajectories.iter().map(|t| t[steps]).collect::<Vec<_>>();
            worst = worst.max(cf_deviation(&terminal, &triplet, mesh[steps], &zs)?);
            s.check(TestReport::at_most(format!("cf/{tag}/{name}"), worst, s.radius(n)));

            let half = steps / 2;
            let p_values = (0..half)
                .map(|k| Ok((format!("{name}/step-{k}"), split_ks(&increments[k], &increments[k + half])?)))
                .collect::<Result<Vec<_>>>()?;
            ks_family(&mut s, &format!("{tag}/{name}"), &p_values);

            let mut gap: f64 = 0.0;
            let mut radius = 0.0;
            for k in 0..steps - 1 {
                let joint: Vec<(f64, f64)> = increments[k].iter().copied().zip(increments[k + 1].iter().copied()).collect();
                let g = factorization_gap_with(&joint, &zpairs, opts.radius_constant)?;
                gap = gap.max(g.gap);
                radius = g.radius;
            }
            s.check(TestReport::at_most(format!("independence/{tag}/{name}"), gap, radius));
        }
    }
    Ok(s.finish())
}

/// Members of the semilattices checked for product collapse.
pub fn reference_semilattices() -> Vec<(&'static str, Vec<RectSet>)> {
    let o = RectSet::origin(2);
    vec![
        ("chain", vec![o.clone(), rect(&[0.5, 0.5]), rect(&[1.0, 1.0])]),
        (
            "crossing",
            vec![o.clone(), rect(&[0.5, 0.5]), rect(&[1.0, 0.5]), rect(&[0.5, 1.0])],
        ),
        (
            "grid",
            vec![
                o,
                rect(&[0.5, 0.5]),
                rect(&[1.0, 0.5]),
                rect(&[0.5, 1.0]),
                rect(&[1.0, 1.0]),
            ],
        ),
    ]
}

fn markov(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("markov", opts);
    let tol = opts.kernel_tol;
    let kernels = [
        ("gaussian", LevyTriplet::gaussian(1.0, 0.0)),
        ("compound-poisson", LevyTriplet::compound_poisson(1.0, MarkDist::Point { at: 1.0 })),
    ];
    for (tag, triplet) in &kernels {
        let kernel = TransitionKernel::new(triplet, 1.0)?;
        for (v1, v2) in [(0.0, 1.0), (0.5, 0.5), (0.3, 0.7)] {
            let err = chapman_kolmogorov_check(&kernel, v1, v2)?;
            s.check(TestReport::at_most(format!("chapman-kolmogorov/{tag}/{v1}+{v2}"), err, tol));
        }
        for (name, members) in reference_semilattices() {
            let chain = semilattice_fdd(&kernel, &members, 64)?;
            let product = semilattice_product(&kernel, &members, 64)?;
            s.check(TestReport::at_most(
                format!("product-collapse/{tag}/{name}"),
                chain.tv_distance(&product)?,
                tol,
            ));
        }
    }
    // Conditional law of X_V given X_U for U ⊂ V, against the kernel.
    let u = IncrementRegion::rect(rect(&[0.5, 1.0]));
    let v = IncrementRegion::rect(rect(&[1.0, 1.0]));
    let bins: [(&str, Vec<f64>, Vec<(f64, f64)>); 2] = [
        (
            "gaussian",
            vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
            vec![
                (f64::NEG_INFINITY, -1.0),
                (-1.0, -0.5),
                (-0.5, 0.0),
                (0.0, 0.5),
                (0.5, 1.0),
                (1.0, f64::INFINITY),
            ],
        ),
        (
            "compound-poisson",
            vec![-0.5, 0.5, 1.5, 2.5],
            vec![(-0.5, 0.5), (0.5, 1.5), (1.5, 2.5), (2.5, 3.5)],
        ),
    ];
    for ((tag, triplet), (_, x_edges, y_sets)) in kernels.iter().zip(&bins) {
        let kernel = TransitionKernel::new(triplet, 1.0)?;
        let sp = spec(triplet, 2, 1, opts.seed)?;
        let rows = evaluate_batch(&sp, 10 * opts.paths, &[u.clone(), v.clone()])?;
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
        let check = conditional_check(&kernel, 0.5, &pairs, x_edges, y_sets, 500)?;
        s.check(TestReport::at_most(
            format!("conditional/{tag}"),
            check.worst_scaled_gap,
            opts.radius_constant,
        ));
        s.note(TestReport::at_least(format!("conditional-bins/{tag}"), check.bins_used as f64, 1.0));
    }
    Ok(s.finish())
}

fn semigroup(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("semigroup", opts);
    for (tag, triplet) in shipped_triplets() {
        let family = PowerFamily::with_default_grid(&triplet, 1.0)?;
        let half = family.power(0.5)?;
        let twice = crate::laws::convolve(&half, &half)?;
        let full = family.power(1.0)?;
        let tv = twice.tv_distance(&full)?;
        s.check(TestReport::at_most(format!("half-squared/{tag}"), tv, opts.kernel_tol));
    }
    Ok(s.finish())
}

/// Compound Poisson with rate 4 and marks uniform on `[-2, 2]`.
fn counting_triplet() -> LevyTriplet {
    LevyTriplet::compound_poisson(4.0, MarkDist::Uniform { a: -2.0, b: 2.0 })
}

/// Brownian part, drift and well separated positive marks.
pub fn recovery_triplet() -> LevyTriplet {
    LevyTriplet {
        sigma: 0.5,
        gamma: 0.5,
        ..LevyTriplet::compound_poisson(4.0, MarkDist::Uniform { a: 1.0, b: 3.0 })
    }
}

fn jumps(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("jumps", opts);
    let n = opts.paths;
    let triplet = counting_triplet();
    let sp = spec(&triplet, 2, 3, opts.seed)?;
    let pos = MarkSet::open(1.0, f64::INFINITY)?;
    let neg = MarkSet::open(f64::NEG_INFINITY, -1.0)?;
    let big = MarkSet::abs_greater(1.0)?;
    let cases = [
        ("half-square/abs>1", rect(&[0.5, 0.5]), big.clone()),
        ("half-strip/>1", rect(&[1.0, 0.5]), pos.clone()),
        ("three-quarter/(0.5,1.5)", rect(&[0.75, 1.0]), MarkSet::open(0.5, 1.5)?),
    ];
    let unit = rect(&[1.0, 1.0]);
    let scan_plan = RegionPlan::new(DissectionLevel::new(2, 8)?, &IncrementRegion::rect(unit.clone()))?;
    let per_path = batch::map_indexed(0..n, |r| -> Result<_> {
        let path = sample_path_at(&sp, r)?;
        let counts: Vec<f64> = cases.iter().map(|(_, u, b)| count_jumps(&path, u, b) as f64).collect();
        let (scanned, _) = scan_jumps_plan(&path, &scan_plan, &big)?;
        let exact = count_jumps(&path, &unit, &big);
        Ok((
            counts,
            count_jumps(&path, &unit, &pos) as f64,
            count_jumps(&path, &unit, &neg) as f64,
            partial_sum(&path, &rect(&[0.5, 1.0]), &big),
            scanned == exact,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    for (i, (name, u, b)) in cases.iter().enumerate() {
        let xs: Vec<f64> = per_path.iter().map(|p| p.0[i]).collect();
        let (mean, se) = mean_and_se(&xs);
        let expected = u.measure() * triplet.nu_mass(b);
        s.check(TestReport::at_most(format!("mean-count/{name}"), (mean - expected).abs() / se, 3.0));
    }
    let a: Vec<f64> = per_path.iter().map(|p| p.1).collect();
    let b: Vec<f64> = per_path.iter().map(|p| p.2).collect();
    s.check(TestReport::at_most(
        "count-correlation/disjoint-marks",
        correlation(&a, &b).abs(),
        3.0 / (n as f64).sqrt(),
    ));
    // X^B over U is compound Poisson with intensity m(U)·ν restricted to B.
    let sums: Vec<f64> = per_path.iter().map(|p| p.3).collect();
    let est = ecf(&sums, &z_grid())?;
    let mut worst: f64 = 0.0;
    for (&z, v) in est.z.iter().zip(&est.values) {
        let exponent = triplet.nu_integral(&big, |x| Complex64::new(0.0, z * x).exp() - 1.0)? * 0.5;
        worst = worst.max((v - exponent.exp()).norm());
    }
    s.check(TestReport::at_most("partial-sum-cf/half-strip", worst, s.radius(n as usize)));
    let agree = per_path.iter().filter(|p| p.4).count() as f64 / n as f64;
    s.check(TestReport::at_least("scan-agrees-with-atoms", agree, 0.99));
    // Some jump is extracted with probability 1 − exp(−ν(ℝ)·m(U_max)).
    let mut with_jumps: Vec<(&str, LevyTriplet)> = shipped_triplets()
        .into_iter()
        .filter(|(_, t)| t.has_jumps())
        .collect();
    with_jumps.push(("counting", triplet.clone()));
    for (tag, t) in &with_jumps {
        let jsp = spec(t, 2, 3, opts.seed)?;
        let threshold = gaussian_threshold(t.sigma, 2, 3, 4.0);
        let hits = batch::map_indexed(0..n, |r| Ok(!extract_jumps(&sample_path_at(&jsp, r)?, 3, threshold)?.is_empty()))
            .into_iter()
            .collect::<Result<Vec<bool>>>()?;
        let hit = hits.iter().filter(|h| **h).count() as f64 / n as f64;
        let p = 1.0 - (-t.jump_rate()).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
        s.check(TestReport::at_most(format!("some-jump-probability/{tag}"), (hit - p).abs() / se, 3.0));
    }

    // Exact recovery of planted atoms at level 8.
    let level = 8;
    let rt = recovery_triplet();
    let rsp = spec(&rt, 2, level, opts.seed)?;
    let threshold = 0.5;
    let mark_tol = gaussian_threshold(rt.sigma, 2, level, 4.0);
    let outcomes = batch::map_indexed(0..100, |r| -> Result<(bool, bool)> {
        let path = sample_path_at(&rsp, r)?;
        if !atoms_separated(&path, level)? {
            return Ok((false, false));
        }
        let found = extract_jumps(&path, level, threshold)?;
        let cells = path.level;
        let ok = found.len() == path.jumps.len()
            && path.jumps.iter().all(|atom| {
                let cell = cells.cell_of(&atom.location);
                found.iter().any(|j| {
                    cells.cell_of(&j.location) == cell && (j.mark - atom.mark).abs() <= mark_tol
                })
            });
        Ok((true, ok))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let eligible = outcomes.iter().filter(|o| o.0).count();
    let recovered = outcomes.iter().filter(|o| o.0 && o.1).count();
    s.note(TestReport::at_least("recovery/separated-paths", eligible as f64, 1.0));
    s.check(TestReport::at_least(
        "recovery/exact-fraction",
        recovered as f64 / eligible.max(1) as f64,
        1.0,
    ));

    // Means: E[X_U] = m(U)·E[X_1] for the finite-mean spec.
    let u = IncrementRegion::rect(rect(&[0.5, 0.75]));
    let msp = spec(&rt, 2, 3, opts.seed)?;
    let xs = column(&evaluate_batch(&msp, n, std::slice::from_ref(&u))?, 0);
    let (mean, se) = mean_and_se(&xs);
    s.check(TestReport::at_most(
        "mean-decomposition",
        (mean - u.measure() * rt.mean()).abs() / se,
        3.0,
    ));
    Ok(s.finish())
}

/// Finite-activity triplets used for exact reconstruction.
fn finite_activity() -> Vec<(&'static str, LevyTriplet)> {
    let mut out: Vec<_> = shipped_triplets()
        .into_iter()
        .filter(|(t, _)| *t != "truncated-stable")
        .collect();
    out.push(("recovery", recovery_triplet()));
    out.push((
        "skewed-uniform",
        LevyTriplet {
            gamma: 0.0,
            ..LevyTriplet::compound_poisson(3.0, MarkDist::Uniform { a: -0.5, b: 2.0 })
        },
    ));
    out
}

/// The truncated-stable spec with `ε_0 = 10⁻³` used for the tail curve.
pub fn fine_stable_triplet() -> LevyTriplet {
    LevyTriplet::truncated_stable(1.0, 1.5, 1e-3, 5.0)
}

fn levy_ito(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("levy-ito", opts);
    let epsilons = [0.1, 0.01];
    for (tag, triplet) in finite_activity() {
        let sp = spec(&triplet, 2, 4, opts.seed)?;
        let worst = batch::map_indexed(0..20, |r| {
            let path = sample_path_at(&sp, r)?;
            Ok(levy_ito_decompose(&path, &triplet, &epsilons)?.reconstruction_error)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
        s.check(TestReport::at_most(format!("reconstruction/{tag}"), worst, opts.exact_tol));
    }

    let triplet = fine_stable_triplet();
    let sp = spec(&triplet, 2, 3, opts.seed)?;
    let epsilons = [0.1, 0.01, 0.001];
    let reports = batch::map_indexed(0..32, |r| levy_ito_decompose(&sample_path_at(&sp, r)?, &triplet, &epsilons))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut curve = vec![0.0; epsilons.len()];
    for rep in &reports {
        for (c, d) in curve.iter_mut().zip(&rep.tail_curve) {
            *c += d / reports.len() as f64;
        }
    }
    s.check(TestReport::at_most(
        "reconstruction/truncated-stable",
        reports.iter().map(|r| r.reconstruction_error).fold(0.0, f64::max),
        opts.exact_tol,
    ));
    let rises = curve.windows(2).filter(|w| w[1] >= w[0]).count();
    s.check(TestReport::at_most("tail-curve/mean-decreasing", rises as f64, 0.0));
    // The curve is a maximum over the rectangle family of a centred
    // variable whose sd is at most the bound.
    for (i, (&e, &c)) in epsilons.iter().zip(&curve).enumerate() {
        let bound = reports[0].tail_sd_bound[i];
        let ratio = if bound > 0.0 { c / bound } else { c };
        s.note(TestReport::at_most(format!("tail-curve/mean-over-sd-bound-at-{e}"), ratio, 3.0));
    }
    let monotone = reports
        .iter()
        .filter(|r| r.tail_curve.windows(2).all(|w| w[1] < w[0]))
        .count();
    s.note(TestReport::at_least(
        "tail-curve/single-path-decreasing-fraction",
        monotone as f64 / reports.len() as f64,
        1.0,
    ));
    Ok(s.finish())
}

/// `P(|X_{U_k} − X_A| > 0.1)` for `A = [0, 1/2]` and `U_k = [0, 1/2 + 2^-k]`
/// in dimension one, `k = 1..=12`, with standard errors.
fn continuity_curve(triplet: &LevyTriplet, seed: u64, paths: u64) -> Result<Vec<(f64, f64)>> {
    let levels = 12;
    let sp = spec(triplet, 1, levels, seed)?;
    let mut regions = vec![IncrementRegion::rect(rect(&[0.5]))];
    regions.extend((1..=levels).map(|k| IncrementRegion::rect(rect(&[0.5 + 0.5f64.powi(k as i32)]))));
    let rows = evaluate_batch(&sp, paths, &regions)?;
    Ok((1..regions.len())
        .map(|k| {
            let p = rows.iter().filter(|r| (r[k] - r[0]).abs() > 0.1).count() as f64 / paths as f64;
            (p, (p * (1.0 - p) / paths as f64).sqrt())
        })
        .collect())
}

fn continuity_checks(s: &mut Suite, tag: &str, triplet: &LevyTriplet) -> Result<()> {
    let curve = continuity_curve(triplet, s.opts.seed, s.opts.paths)?;
    let worst_rise = curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) / (w[0].1.hypot(w[1].1)).max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    s.check(TestReport::at_most(format!("in-probability/{tag}/rise-in-se"), worst_rise.max(0.0), 2.0));
    s.check(TestReport::at_most(
        format!("in-probability/{tag}/final"),
        curve.last().expect("nonempty").0,
        0.05,
    ));
    Ok(())
}

fn continuity(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("continuity", opts);
    let triplet = LevyTriplet::gaussian(1.0, 0.0);
    let level = 8;
    let sp = spec(&triplet, 2, level, opts.seed)?;
    let levels: Vec<u32> = (3..=level).collect();
    let paths = 200;
    let literal = gaussian_threshold(1.0, 2, 3, 4.0);
    let uniform = uniform_gaussian_threshold(1.0, 2, level, 1e-3);
    let literal_fine = gaussian_threshold(1.0, 2, level, 4.0);
    let per_path = batch::map_indexed(0..paths, |r| -> Result<_> {
        let path = sample_path_at(&sp, r)?;
        Ok((
            gaussian_sup_diagnostic(&path, &levels)?,
            extract_jumps(&path, level, uniform)?.is_empty(),
            extract_jumps(&path, level, literal_fine)?.is_empty(),
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let decreasing = per_path
        .iter()
        .filter(|p| p.0.windows(2).all(|w| w[1] < w[0]))
        .count() as f64
        / paths as f64;
    s.check(TestReport::at_least("sup/strictly-decreasing-fraction", decreasing, 0.95));
    let medians: Vec<f64> = (0..levels.len())
        .map(|i| median(&per_path.iter().map(|p| p.0[i]).collect::<Vec<_>>()))
        .collect();
    let rises = medians.windows(2).filter(|w| w[1] >= w[0]).count();
    s.check(TestReport::at_most("sup/median-rises", rises as f64, 0.0));
    for (&n, &m) in levels.iter().zip(&medians) {
        let cells = 4f64.powi(n as i32);
        // Expected maximum of `cells` independent N(0, 4^-n) magnitudes.
        let scale = (2.0 * cells.ln() / cells).sqrt();
        s.note(TestReport::at_most(format!("sup/median-level-{n}"), m, scale));
    }
    let frac = |f: fn(&(Vec<f64>, bool, bool)) -> bool| per_path.iter().filter(|p| f(p)).count() as f64 / paths as f64;
    s.check(TestReport::at_least("no-jumps/uniform-threshold-level-8", frac(|p| p.1), 0.99));
    s.note(TestReport::at_least("no-jumps/literal-threshold-level-8", frac(|p| p.2), 0.99));
    // The literal 4σ threshold at level 3, over the full path budget.
    let coarse = spec(&triplet, 2, 3, opts.seed)?;
    let clean = batch::map_indexed(0..opts.paths, |r| Ok(extract_jumps(&sample_path_at(&coarse, r)?, 3, literal)?.is_empty()))
        .into_iter()
        .collect::<Result<Vec<bool>>>()?;
    s.check(TestReport::at_least(
        "no-jumps/literal-threshold-level-3",
        clean.iter().filter(|c| **c).count() as f64 / opts.paths as f64,
        0.99,
    ));

    for (tag, triplet) in shipped_triplets() {
        continuity_checks(&mut s, tag, &triplet)?;
    }
    Ok(s.finish())
}

fn brownian_core(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut s = Suite::new("brownian-core", opts);
    let triplet = LevyTriplet::gaussian(1.0, 0.0);
    let n = opts.paths;
    canonical_checks(&mut s, "brownian", &triplet)?;

    let sp = spec(&triplet, 2, 3, opts.seed)?;
    let u = IncrementRegion::rect(rect(&[0.75, 0.5]));
    let v = IncrementRegion::difference(rect(&[1.0, 1.0]), rect(&[0.25, 0.25]));
    let empty = IncrementRegion::rect(RectSet::origin(2));
    let rows = evaluate_batch(&sp, n, &[u.clone(), v.clone(), empty])?;
    let products: Vec<f64> = rows.iter().map(|r| r[0] * r[1]).collect();
    let (mean, se) = mean_and_se(&products);
    let overlap = 0.75 * 0.5 - 0.25 * 0.25;
    s.check(TestReport::at_most("covariance/overlap-measure", (mean - overlap).abs() / se, 3.0));
    s.check(TestReport::at_most(
        "origin-is-zero",
        rows.iter().map(|r| r[2].abs()).fold(0.0, f64::max),
        0.0,
    ));

    let nested = &fdd_families()[0].1;
    let rows = evaluate_batch(&sp, n, nested)?;
    let mut worst: f64 = 0.0;
    for lambdas in lambda_tuples(2) {
        worst = worst.max((joint_ecf(&rows, &lambdas)? - fdd_char(&sp, nested, &lambdas)?).norm());
    }
    s.check(TestReport::at_most("joint-cf/nested", worst, s.radius(n as usize)));

    representation_checks(&mut s, "brownian", &triplet, 50)?;
    stationarity_checks(&mut s, "brownian", &triplet)?;

    let left = IncrementRegion::rect(rect(&[0.5, 1.0]));
    let right = IncrementRegion::difference(rect(&[1.0, 1.0]), rect(&[0.5, 1.0]));
    let rows = evaluate_batch(&sp, n, &[left, right])?;
    let joint: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    let zpairs: Vec<(f64, f64)> = (0..8).map(|j| (0.5 * (j + 1) as f64, 0.5 * (8 - j) as f64)).collect();
    let g = factorization_gap_with(&joint, &zpairs, opts.radius_constant)?;
    s.check(TestReport::at_most("independence/disjoint-halves", g.gap, g.radius));

    continuity_checks(&mut s, "brownian", &triplet)?;
    Ok(s.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_regions_are_aligned() {
        let mut rng = keyed_stream(1, Domain::Auxiliary, 9, 0);
        let level = DissectionLevel::new(2, 3).unwrap();
        for _ in 0..100 {
            let r = random_region(&mut rng, 2, 3, 3, 1.0 / 16.0);
            assert!(level.check_region(&r).is_ok());
            assert!(r.measure() >= 1.0 / 16.0);
        }
    }

    #[test]
    fn equal_measure_pairs_differ() {
        let level = DissectionLevel::new(2, 3).unwrap();
        for (a, b) in equal_measure_pairs(5, 10) {
            assert!((a.measure() - b.measure()).abs() < 1e-12);
            assert_ne!(a.cell_membership(&level), b.cell_membership(&level));
        }
    }

    #[test]
    fn split_is_a_partition() {
        let r = IncrementRegion::difference(rect(&[1.0, 1.0]), rect(&[0.25, 0.5]));
        let (a, b) = split(&r, &rect(&[0.5, 0.75]));
        assert!((a.measure() + b.measure() - r.measure()).abs() < 1e-15);
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("nope", &SuiteOptions::default()).is_err());
    }

    #[test]
    fn semigroup_suite_passes() {
        let report = run_suite("semigroup", &SuiteOptions::default()).unwrap();
        assert!(report.pass, "{}", report.to_json());
    }
}
