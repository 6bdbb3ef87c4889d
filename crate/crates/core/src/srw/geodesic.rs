use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::ot::{DiscreteMeasure, TransportPlan};

/// Atoms closer than this in the sup-norm are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Point at time `t` of the interpolation along `plan`: the pushforward of the
/// coupling by `(x, y) ↦ (1 − t) x + t y`, one atom per positive entry of the
/// plan, with coincident atoms merged.
///
/// When `plan` is optimal for `SRW_k`, this is a constant-speed geodesic for
/// `SRW_k`.
pub fn geodesic(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    t: f64,
) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("t must lie in [0, 1]"));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    if plan.rows() != mu.len() || plan.cols() != nu.len() {
        return Err(Error::invalid("plan shape does not match the measures"));
    }
    let d = mu.dim();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (i, j, w) in plan.nonzeros(0.0) {
        let (x, y) = (mu.point(i), nu.point(j));
        points.extend(x.iter().zip(y).map(|(a, b)| (1.0 - t) * a + t * b));
        weights.push(w);
    }
    let (points, weights) = merge_atoms(d, &points, &weights, MERGE_TOL);
    DiscreteMeasure::from_unnormalized(d, points, weights)
}

/// Merges atoms within `tol` of each other in the sup-norm, summing their
/// weights. Each output atom sits at the first input atom of its cluster;
/// output order follows the first coordinate.
pub fn merge_atoms(dim: usize, points: &[f64], weights: &[f64], tol: f64) -> (Vec<f64>, Vec<f64>) {
    let n = weights.len();
    let point = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        point(a)[0].partial_cmp(&point(b)[0]).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    let mut taken = alloc::vec![false; n];
    let mut out_points = Vec::new();
    let mut out_weights = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let pi = point(i);
        let mut w = weights[i];
        for &j in &order[pos + 1..] {
            let pj = point(j);
            if pj[0] - pi[0] > tol {
                break;
            }
            if !taken[j] && pi.iter().zip(pj).all(|(a, b)| (a - b).abs() <= tol) {
                taken[j] = true;
                w += weights[j];
            }
        }
        out_points.extend_from_slice(pi);
        out_weights.push(w);
    }
    (out_points, out_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn endpoints_reproduce_marginals() {
        let mu = DiscreteMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![3.0, 4.0, 5.0], vec![0.25, 0.25, 0.5]).unwrap();
        let plan = TransportPlan::independent(mu.weights(), nu.weights());
        let start = geodesic(&mu, &nu, &plan, 0.0).unwrap();
        assert_eq!(start.points(), &[0.0, 1.0]);
        assert!((start.weights()[0] - 0.5).abs() < 1e-15);
        let end = geodesic(&mu, &nu, &plan, 1.0).unwrap();
        assert_eq!(end.points(), &[3.0, 4.0, 5.0]);
        assert!((end.weights()[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dirac_midpoint() {
        let mu = DiscreteMeasure::dirac(&[0.0, 2.0]).unwrap();
        let nu = DiscreteMeasure::dirac(&[4.0, -2.0]).unwrap();
        let plan = TransportPlan::independent(&[1.0], &[1.0]);
        let mid = geodesic(&mu, &nu, &plan, 0.5).unwrap();
        assert_eq!(mid.points(), &[2.0, 0.0]);
        assert_eq!(mid.weights(), &[1.0]);
    }

    #[test]
    fn rejects_time_outside_unit_interval() {
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let plan = TransportPlan::independent(&[1.0], &[1.0]);
        assert!(geodesic(&mu, &mu, &plan, -0.1).is_err());
        assert!(geodesic(&mu, &mu, &plan, 1.5).is_err());
    }

    #[test]
    fn merge_respects_sup_norm() {
        let pts = [0.0, 0.0, 1e-13, 0.0, 0.0, 1e-11, 5e-13, 5e-13];
        let (p, w) = merge_atoms(2, &pts, &[0.1, 0.2, 0.3, 0.4], 1e-12);
        assert_eq!(w.len(), 2);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p.len(), 4);
    }
}
