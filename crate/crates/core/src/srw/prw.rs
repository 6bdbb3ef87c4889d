use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math;
use crate::ot::DiscreteMeasure;

/// Result of [`prw_2d_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrwSweep {
    /// `max_θ W(P_θ#μ, P_θ#ν)` over the grid.
    pub value: f64,
    /// Maximising angle in `[0, π)`.
    pub best_angle: f64,
    /// `(θ, W(P_θ#μ, P_θ#ν))` for every grid angle.
    pub curve: Vec<(f64, f64)>,
}

/// Projection robust Wasserstein distance of order 1 between planar measures,
/// by brute force over `n_angles` equispaced directions in `[0, π)`. Each
/// projected problem is one-dimensional and solved exactly by the monotone
/// (quantile) coupling.
pub fn prw_2d_sweep(mu: &DiscreteMeasure, nu: &DiscreteMeasure, n_angles: usize) -> Result<PrwSweep> {
    if mu.dim() != 2 || nu.dim() != 2 {
        return Err(Error::invalid("the angle sweep needs planar measures"));
    }
    if n_angles == 0 {
        return Err(Error::invalid("n_angles must be positive"));
    }
    let mut curve = Vec::with_capacity(n_angles);
    let mut best = (f64::NEG_INFINITY, 0.0);
    let project = |m: &DiscreteMeasure, c: f64, s: f64| -> Vec<f64> {
        m.points().chunks_exact(2).map(|p| c * p[0] + s * p[1]).collect()
    };
    for l in 0..n_angles {
        let theta = core::f64::consts::PI * l as f64 / n_angles as f64;
        let (c, s) = (math::cos(theta), math::sin(theta));
        let w2 = wasserstein_1d_squared(&project(mu, c, s), mu.weights(), &project(nu, c, s), nu.weights());
        let w = math::sqrt(w2.max(0.0));
        if w > best.0 {
            best = (w, theta);
        }
        curve.push((theta, w));
    }
    Ok(PrwSweep { value: best.0, best_angle: best.1, curve })
}

/// Squared 2-Wasserstein distance between weighted samples on the line, via
/// the monotone coupling of the two quantile functions.
pub fn wasserstein_1d_squared(x: &[f64], a: &[f64], y: &[f64], b: &[f64]) -> f64 {
    let sorted = |v: &[f64], w: &[f64]| -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = v.iter().copied().zip(w.iter().copied()).collect();
        pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap_or(Ordering::Equal));
        pairs
    };
    let xs = sorted(x, a);
    let ys = sorted(y, b);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (xs.first().map_or(0.0, |p| p.1), ys.first().map_or(0.0, |p| p.1));
    let mut total = 0.0;
    while i < xs.len() && j < ys.len() {
        let mass = ra.min(rb);
        let diff = xs[i].0 - ys[j].0;
        total += mass * diff * diff;
        ra -= mass;
        rb -= mass;
        if ra <= rb {
            i += 1;
            if i < xs.len() {
                ra = xs[i].1;
            }
        } else {
            j += 1;
            if j < ys.len() {
                rb = ys[j].1;
            }
        }
    }
    total
}
