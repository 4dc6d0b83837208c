//! Monte Carlo and closed-form oracles for the engine, each computed
//! independently of the code under test.

use num_complex::Complex64;

use silevy::flows::{even_mesh, ElementaryFlow, ProjectionPlan};
use silevy::indexing::{atoms, m_partition, DissectionLevel, IncrementRegion, RectSet};
use silevy::jumps::{count_jumps, point_mass_jump};
use silevy::laws::{LevyTriplet, MarkDist, MarkSet};
use silevy::markov::{semilattice_fdd, semilattice_product, TransitionKernel};
use silevy::simulate::{evaluate_batch, fdd_char, sample_batch, sample_path_at, ProcessSpec};
use silevy::stats::{ecf, joint_ecf, mean_and_se, variance_and_se};

fn rect(c: &[f64]) -> RectSet {
    RectSet::Rect(c.to_vec())
}

fn brownian(level: u32) -> ProcessSpec {
    ProcessSpec::new(LevyTriplet::gaussian(1.0, 0.0), 2, level, 7).unwrap()
}

#[test]
fn measure_by_cell_count() {
    let r = IncrementRegion::new(rect(&[1.0, 1.0]), vec![rect(&[0.5, 1.0]), rect(&[1.0, 0.5])]);
    let d = DissectionLevel::new(2, 4).unwrap();
    let cells = (0..d.cell_count())
        .filter(|&k| {
            let (lo, hi) = d.cell_bounds(k);
            let centre: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            centre[0] > 0.5 && centre[1] > 0.5
        })
        .count();
    assert_eq!(cells as f64 * d.cell_measure(), 0.25);
    assert!((r.measure() - 0.25).abs() < 1e-15);
}

#[test]
fn redundant_subtraction_is_dropped() {
    let r = IncrementRegion::new(rect(&[0.5, 0.5]), vec![rect(&[0.25, 0.25]), rect(&[0.1, 0.1])]);
    let c = r.canonical_form().to_region();
    assert_eq!(c.subtracted, vec![rect(&[0.25, 0.25])]);
    // Set equality at level 6, checked on cell centres.
    let d = DissectionLevel::new(2, 6).unwrap();
    for k in 0..d.cell_count() {
        let (lo, hi) = d.cell_bounds(k);
        let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let oracle = p.iter().all(|&x| x <= 0.5) && !p.iter().all(|&x| x <= 0.25);
        assert_eq!(c.contains_point(&p), oracle);
    }
}

#[test]
fn three_overlapping_rectangles_have_seven_atoms() {
    let regions = [
        IncrementRegion::difference(rect(&[0.75, 0.75]), rect(&[0.25, 0.25])),
        IncrementRegion::rect(rect(&[1.0, 0.5])),
        IncrementRegion::rect(rect(&[0.5, 1.0])),
    ];
    let d = DissectionLevel::new(2, 3).unwrap();
    let found = atoms(&regions, &d).unwrap();
    let mut masks: Vec<Vec<usize>> = found.iter().map(|a| a.members.clone()).collect();
    masks.sort();
    let mut oracle: Vec<Vec<usize>> = Vec::new();
    let mut mass = std::collections::BTreeMap::new();
    for k in 0..d.cell_count() {
        let (lo, hi) = d.cell_bounds(k);
        let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let m: Vec<usize> = (0..3).filter(|&i| regions[i].contains_point(&p)).collect();
        if !m.is_empty() {
            *mass.entry(m.clone()).or_insert(0.0) += d.cell_measure();
            if !oracle.contains(&m) {
                oracle.push(m);
            }
        }
    }
    oracle.sort();
    assert_eq!(masks, oracle);
    assert_eq!(masks.len(), 7);
    for a in &found {
        assert!((a.measure - mass[&a.members]).abs() < 1e-15);
    }
}

#[test]
fn equal_measure_halves_split_at_root_half() {
    let parts = m_partition(&RectSet::unit(2), 2).unwrap();
    let t = parts[0].u0.corner().unwrap()[0];
    assert!((t - 0.5f64.sqrt()).abs() < 1e-10);
    for p in &parts {
        assert!((p.measure() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn uniform_marks_exponent_closed_form() {
    let t = LevyTriplet {
        sigma: 0.0,
        gamma: 0.0,
        nu: silevy::laws::JumpSpec::Compound {
            rate: 1.0,
            marks: MarkDist::Uniform { a: -1.0, b: 1.0 },
        },
    };
    let psi = t.char_exponent(1.0).unwrap();
    assert!((psi - Complex64::new(1f64.sin() - 1.0, 0.0)).norm() < 1e-10);
}

#[test]
fn brownian_covariance_is_overlap_measure() {
    let spec = brownian(3);
    let u = IncrementRegion::rect(rect(&[0.75, 0.5]));
    let v = IncrementRegion::rect(rect(&[0.5, 1.0]));
    let rows = evaluate_batch(&spec, 10_000, &[u, v]).unwrap();
    let products: Vec<f64> = rows.iter().map(|r| r[0] * r[1]).collect();
    let (mean, se) = mean_and_se(&products);
    assert!((mean - 0.25).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn poisson_mean_over_the_unit_square() {
    let spec = ProcessSpec::new(LevyTriplet::compound_poisson(2.0, MarkDist::Point { at: 1.0 }), 2, 2, 11).unwrap();
    let rows = evaluate_batch(&spec, 10_000, &[IncrementRegion::rect(RectSet::unit(2))]).unwrap();
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert!(xs.iter().all(|x| x.fract() == 0.0 && *x >= 0.0));
    let (mean, se) = mean_and_se(&xs);
    assert!((mean - 2.0).abs() < 3.0 * se, "{mean} ± {se}");
    let (var, vse) = variance_and_se(&xs);
    assert!((var - 2.0).abs() < 3.0 * vse, "{var} ± {vse}");
}

#[test]
fn nested_pair_joint_law() {
    let spec = brownian(2);
    let regions = [
        IncrementRegion::rect(rect(&[1.0, 1.0])),
        IncrementRegion::rect(rect(&[0.5, 0.5])),
    ];
    let analytic = fdd_char(&spec, &regions, &[1.0, 1.0]).unwrap();
    let oracle = (-0.5 * (0.75 + 4.0 * 0.25f64)).exp();
    assert!((analytic.re - oracle).abs() < 1e-14 && analytic.im.abs() < 1e-14);
    let rows = evaluate_batch(&spec, 10_000, &regions).unwrap();
    assert!((joint_ecf(&rows, &[1.0, 1.0]).unwrap() - oracle).norm() < 0.05);
}

#[test]
fn simple_difference_matches_rectangle_values() {
    let spec = ProcessSpec::new(LevyTriplet::compound_poisson(5.0, MarkDist::Normal { mean: 0.0, sd: 1.0 }), 2, 3, 3).unwrap();
    let u = rect(&[1.0, 0.75]);
    let v = rect(&[0.5, 1.0]);
    for path in sample_batch(&spec, 0..20).unwrap() {
        let c = path.evaluate(&IncrementRegion::difference(u.clone(), v.clone())).unwrap();
        let oracle = path.evaluate_rect(&u).unwrap() - path.evaluate_rect(&u.intersect(&v)).unwrap();
        assert!((c - oracle).abs() < 1e-12);
    }
}

#[test]
fn diagonal_projection_has_normal_increments() {
    let spec = brownian(4);
    let flow = ElementaryFlow::diagonal(2);
    // θ(t) = t², so the mesh points are θ at dyadic t: exact on the grid.
    let ts: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
    let mesh: Vec<f64> = ts.iter().map(|t| t * t).collect();
    let plan = ProjectionPlan::new(&flow, &mesh, spec.dissection()).unwrap();
    assert!(plan.gap < 1e-12);
    let trajectories: Vec<Vec<f64>> = (0..10_000).map(|r| plan.apply(&sample_path_at(&spec, r).unwrap()).unwrap()).collect();
    for k in [0, 7, 15] {
        let inc: Vec<f64> = trajectories.iter().map(|t| t[k + 1] - t[k]).collect();
        let (var, se) = variance_and_se(&inc);
        let ds = mesh[k + 1] - mesh[k];
        assert!((var - ds).abs() < 3.0 * se, "step {k}: {var} vs {ds} ± {se}");
    }
    assert_eq!(even_mesh(&flow, 4).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn point_jump_estimator_rms_on_gaussian_paths() {
    let spec = brownian(4);
    let squares: Vec<f64> = (0..4000)
        .map(|r| point_mass_jump(&sample_path_at(&spec, r).unwrap(), &[0.3, 0.6], 8).unwrap().powi(2))
        .collect();
    let (ms, se) = mean_and_se(&squares);
    let oracle = 4f64.powi(-8);
    assert!((ms - oracle).abs() < 3.0 * se, "{} vs {}", ms.sqrt(), oracle.sqrt());
}

#[test]
fn mean_count_is_measure_times_intensity() {
    // ν(B) = 4·P(|X| > 1) = 2 for marks uniform on [−2, 2].
    let triplet = LevyTriplet::compound_poisson(4.0, MarkDist::Uniform { a: -2.0, b: 2.0 });
    let spec = ProcessSpec::new(triplet, 2, 2, 5).unwrap();
    let b = MarkSet::abs_greater(1.0).unwrap();
    let u = rect(&[0.5, 0.5]);
    let counts: Vec<f64> = (0..10_000)
        .map(|r| count_jumps(&sample_path_at(&spec, r).unwrap(), &u, &b) as f64)
        .collect();
    let (mean, se) = mean_and_se(&counts);
    assert!((mean - 0.5).abs() < 3.0 * se, "{mean} ± {se}");
}

#[test]
fn nested_semilattice_marginals() {
    let k = TransitionKernel::new(&LevyTriplet::gaussian(1.0, 0.0), 1.0).unwrap();
    let members = vec![RectSet::origin(2), rect(&[0.5, 0.5]), rect(&[1.0, 1.0])];
    let chain = semilattice_fdd(&k, &members, 64).unwrap();
    let product = semilattice_product(&k, &members, 64).unwrap();
    assert!(chain.tv_distance(&product).unwrap() < 1e-5);
    // Marginal of the outer neighbourhood: μ^{3/4}, variance 0.75 up to
    // the binning correction step²/12.
    let m = chain.marginal(2);
    assert!((m.variance() - 0.75 - m.step * m.step / 12.0).abs() < 1e-3, "{}", m.variance());
}

#[test]
fn normal_draws_match_normal_cf() {
    let spec = brownian(1);
    let xs: Vec<f64> = evaluate_batch(&spec, 100_000, &[IncrementRegion::rect(RectSet::unit(2))])
        .unwrap()
        .into_iter()
        .map(|r| r[0])
        .collect();
    let est = ecf(&xs, &[1.0]).unwrap();
    assert!((est.values[0] - (-0.5f64).exp()).norm() < 5.0 / 100_000f64.sqrt());
}
