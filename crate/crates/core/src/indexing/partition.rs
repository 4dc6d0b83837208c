use super::{IncrementRegion, RectSet};
use crate::error::{Error, Result};
use crate::numeric::bisect_leftmost;

/// Target accuracy of each piece's measure.
pub const PARTITION_TOL: f64 = 1e-12;

/// Split `u` into `n` disjoint regions of measure `m(u)/n` along the diagonal
/// flow `t ↦ [0, t·corner]`: piece `i` is `f(t_i) \ f(t_{i-1})` where
/// `m(f(t_i)) = i·m(u)/n`.
pub fn m_partition(u: &RectSet, n: usize) -> Result<Vec<IncrementRegion>> {
    let corner = match u {
        RectSet::Rect(c) if u.measure() > 0.0 => c.clone(),
        _ => return Err(Error::DegenerateSet(format!("{u:?}"))),
    };
    if n == 0 {
        return Err(Error::InvalidParameter {
            field: "n".into(),
            reason: "partition size must be positive".into(),
        });
    }
    let total = u.measure();
    let flow = |t: f64| RectSet::Rect(corner.iter().map(|c| c * t).collect());
    let theta = |t: f64| flow(t).measure();
    // Bisection on t to 1e-15 keeps |θ(t) - target| well below the
    // tolerance, since θ' ≤ N·m(u) on [0,1].
    let mut cuts = Vec::with_capacity(n + 1);
    cuts.push(0.0);
    for i in 1..n {
        let target = total * i as f64 / n as f64;
        cuts.push(bisect_leftmost(theta, target, 0.0, 1.0, 1e-15));
    }
    cuts.push(1.0);
    Ok(cuts
        .windows(2)
        .map(|w| {
            let outer = if w[1] == 1.0 { u.clone() } else { flow(w[1]) };
            if w[0] == 0.0 {
                IncrementRegion::rect(outer)
            } else {
                IncrementRegion::difference(outer, flow(w[0]))
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_partition() {
        let u = RectSet::unit(2);
        assert_eq!(m_partition(&u, 1).unwrap(), vec![IncrementRegion::rect(u)]);
    }

    #[test]
    fn halves_split_at_root_half() {
        let parts = m_partition(&RectSet::unit(2), 2).unwrap();
        let t1 = parts[0].u0.corner().unwrap()[0];
        assert!((t1 - 0.707_106_781_2).abs() < 1e-10);
        for p in &parts {
            assert!((p.measure() - 0.5).abs() <= PARTITION_TOL);
        }
    }

    #[test]
    fn one_dimensional_quarters() {
        let parts = m_partition(&RectSet::unit(1), 4).unwrap();
        for (i, p) in parts.iter().enumerate() {
            assert!((p.measure() - 0.25).abs() <= PARTITION_TOL);
            let c = p.u0.corner().unwrap()[0];
            assert!((c - 0.25 * (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_set_is_rejected() {
        assert!(matches!(
            m_partition(&RectSet::Rect(vec![0.0, 1.0]), 3),
            Err(Error::DegenerateSet(_))
        ));
    }
}
