//! Optimal transport between discrete measures: an exact min-cost-flow
//! solver, a log-domain Sinkhorn solver with warm starts, and a permutation
//! brute-force oracle for tiny uniform problems.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Tolerance on `|Σ weights − 1|` for a [`DiscreteMeasure`].
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Marginal tolerance attached to plans returned by [`exact_ot`].
pub const EXACT_MARGINAL_TOL: f64 = 1e-9;

/// Dense `n × m` ground-cost matrix.
pub type CostMatrix = Matrix;

/// Weighted point cloud `Σ a_i δ_{x_i}` in `ℝᵈ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// `points` is row-major `n × dim`; `weights` must be a probability vector.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::check_shape(dim, &points, &weights)?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid("weights must sum to one"));
        }
        Ok(DiscreteMeasure { dim, points, weights })
    }

    /// Measure with weight `1/n` on every point.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let n = points.len() / dim;
        Self::new(dim, points, vec![1.0 / n.max(1) as f64; n])
    }

    /// Rescales non-negative `weights` to sum to one.
    pub fn from_unnormalized(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::check_shape(dim, &points, &weights)?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("total weight must be positive"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(DiscreteMeasure { dim, points, weights })
    }

    /// A single atom at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        Self::new(x.len(), x.to_vec(), vec![1.0])
    }

    fn check_shape(dim: usize, points: &[f64], weights: &[f64]) -> Result<()> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if weights.is_empty() {
            return Err(Error::invalid("a measure needs at least one atom"));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                found: points.len(),
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coordinates must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Row-major `n × d` coordinates.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The same measure shifted by `c`.
    pub fn translated(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: c.len() });
        }
        let points = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(c).map(|(a, b)| a + b))
            .collect();
        Ok(DiscreteMeasure { dim: self.dim, points, weights: self.weights.clone() })
    }

    /// Atoms and weights reordered so that atom `i` of the result is atom
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: perm.len() });
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::invalid("not a permutation"));
            }
            seen[p] = true;
        }
        let points = perm.iter().flat_map(|&p| self.point(p).iter().copied()).collect();
        let weights = perm.iter().map(|&p| self.weights[p]).collect();
        Ok(DiscreteMeasure { dim: self.dim, points, weights })
    }
}

/// Coupling matrix between two discrete measures together with the marginals
/// it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    matrix: Matrix,
    row_marginal: Vec<f64>,
    col_marginal: Vec<f64>,
    marginal_tol: f64,
}

impl TransportPlan {
    /// Wraps a coupling, checking non-negativity and that every row and column
    /// sum lies within `marginal_tol` of the prescribed marginals.
    pub fn new(
        matrix: Matrix,
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
        marginal_tol: f64,
    ) -> Result<Self> {
        if matrix.rows() != row_marginal.len() || matrix.cols() != col_marginal.len() {
            return Err(Error::invalid("plan shape does not match marginals"));
        }
        if matrix.as_slice().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("plan entries must be finite and non-negative"));
        }
        let plan = TransportPlan { matrix, row_marginal, col_marginal, marginal_tol };
        if plan.max_marginal_violation() > marginal_tol {
            return Err(Error::invalid("plan marginals violate the tolerance"));
        }
        Ok(plan)
    }

    pub(crate) fn from_parts(
        matrix: Matrix,
        row_marginal: Vec<f64>,
        col_marginal: Vec<f64>,
        marginal_tol: f64,
    ) -> Self {
        TransportPlan { matrix, row_marginal, col_marginal, marginal_tol }
    }

    /// The forced coupling `a bᵀ`, which is the only coupling when either
    /// side has a single atom.
    pub fn independent(a: &[f64], b: &[f64]) -> Self {
        let matrix = Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j]);
        TransportPlan::from_parts(matrix, a.to_vec(), b.to_vec(), EXACT_MARGINAL_TOL)
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col_marginal
    }

    pub fn marginal_tol(&self) -> f64 {
        self.marginal_tol
    }

    /// Entries strictly above `threshold`, as `(i, j, π_ij)`.
    pub fn nonzeros(&self, threshold: f64) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let m = self.cols();
        self.matrix
            .as_slice()
            .iter()
            .enumerate()
            .filter(move |(_, v)| **v > threshold)
            .map(move |(idx, v)| (idx / m, idx % m, *v))
    }

    /// `⟨π, C⟩`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.matrix.dot(cost)
    }

    /// Largest absolute deviation of a row or column sum from its marginal.
    pub fn max_marginal_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows() {
            let s: f64 = self.matrix.row(i).iter().sum();
            worst = worst.max((s - self.row_marginal[i]).abs());
        }
        let mut cols = vec![0.0; self.cols()];
        for i in 0..self.rows() {
            for (c, v) in cols.iter_mut().zip(self.matrix.row(i)) {
                *c += v;
            }
        }
        for (c, b) in cols.iter().zip(&self.col_marginal) {
            worst = worst.max((c - b).abs());
        }
        worst
    }

    /// The plan viewed from the other side, `πᵀ`.
    pub fn transpose(&self) -> TransportPlan {
        TransportPlan {
            matrix: self.matrix.transpose(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
            marginal_tol: self.marginal_tol,
        }
    }
}

fn check_problem(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<()> {
    if cost.rows() != a.len() || cost.cols() != b.len() {
        return Err(Error::invalid("cost matrix shape does not match the measures"));
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("cost matrix must be finite"));
    }
    for w in [a, b] {
        if w.iter().any(|v| !v.is_finite() || *v < 0.0)
            || (w.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SUM_TOL
        {
            return Err(Error::invalid("weights must lie on the probability simplex"));
        }
    }
    Ok(())
}

/// Exact optimal transport by successive shortest paths on the bipartite
/// transport network, followed by cycle cancellation on the support so the
/// returned plan is a vertex of the transportation polytope (its support is a
/// forest with at most `n + m − 1` edges).
///
/// Each augmentation runs a dense Dijkstra over `n + m + 2` nodes, so the cost
/// is `O((n + m)³)` in the worst case; comfortable up to a thousand atoms.
pub fn exact_ot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
) -> Result<(TransportPlan, f64)> {
    exact_ot_weights(mu.weights(), nu.weights(), cost)
}

/// [`exact_ot`] on bare weight vectors.
pub fn exact_ot_weights(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<(TransportPlan, f64)> {
    check_problem(a, b, cost)?;
    if cost.as_slice().iter().any(|c| *c < 0.0) {
        return Err(Error::invalid("cost matrix must be non-negative"));
    }
    let mut flow = min_cost_flow(a, b, cost);
    cancel_support_cycles(&mut flow, cost);
    let plan = TransportPlan::from_parts(flow, a.to_vec(), b.to_vec(), EXACT_MARGINAL_TOL);
    let value = plan.cost(cost);
    Ok((plan, value))
}

/// Below this, remaining supply or demand counts as exhausted.
const FLOW_EPS: f64 = 1e-14;

fn min_cost_flow(a: &[f64], b: &[f64], cost: &CostMatrix) -> Matrix {
    let n = a.len();
    let m = b.len();
    let source = n + m;
    let sink = n + m + 1;
    let nodes = n + m + 2;

    let mut flow = Matrix::zeros(n, m);
    let mut supply: Vec<f64> = a.iter().map(|&v| if v > FLOW_EPS { v } else { 0.0 }).collect();
    let mut demand: Vec<f64> = b.iter().map(|&v| if v > FLOW_EPS { v } else { 0.0 }).collect();
    let mut potential = vec![0.0; nodes];
    let mut dist = vec![f64::INFINITY; nodes];
    let mut pred = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    loop {
        if supply.iter().all(|&s| s == 0.0) || demand.iter().all(|&s| s == 0.0) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[source] = 0.0;

        for _ in 0..nodes {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for (v, (&dv, &fin)) in dist.iter().zip(&done).enumerate() {
                if !fin && dv < best {
                    best = dv;
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let du = dist[u];
            let relax = |v: usize, reduced: f64, dist: &mut [f64], pred: &mut [usize]| {
                let cand = du + reduced.max(0.0);
                if cand < dist[v] {
                    dist[v] = cand;
                    pred[v] = u;
                }
            };
            if u == source {
                for i in 0..n {
                    if supply[i] > 0.0 && !done[i] {
                        relax(i, potential[source] - potential[i], &mut dist, &mut pred);
                    }
                }
            } else if u < n {
                let crow = cost.row(u);
                for j in 0..m {
                    let v = n + j;
                    if !done[v] {
                        relax(v, crow[j] + potential[u] - potential[v], &mut dist, &mut pred);
                    }
                }
            } else if u < n + m {
                let j = u - n;
                for i in 0..n {
                    if !done[i] && flow.get(i, j) > 0.0 {
                        relax(i, -cost.get(i, j) + potential[u] - potential[i], &mut dist, &mut pred);
                    }
                }
                if demand[j] > 0.0 && !done[sink] {
                    relax(sink, potential[u] - potential[sink], &mut dist, &mut pred);
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let max_finite = dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        for (p, d) in potential.iter_mut().zip(&dist) {
            *p += if d.is_finite() { *d } else { max_finite };
        }

        // Walk the path back from the sink to find the bottleneck.
        let last_col = pred[sink] - n;
        let mut delta = demand[last_col];
        let mut v = pred[sink];
        let first_row;
        loop {
            let u = pred[v];
            if u == source {
                first_row = v;
                delta = delta.min(supply[v]);
                break;
            }
            if v < n {
                // Reverse arc col u → row v cancels flow on (v, u − n).
                delta = delta.min(flow.get(v, u - n));
            }
            v = u;
        }

        supply[first_row] -= delta;
        if supply[first_row] <= FLOW_EPS {
            supply[first_row] = 0.0;
        }
        demand[last_col] -= delta;
        if demand[last_col] <= FLOW_EPS {
            demand[last_col] = 0.0;
        }
        let mut v = pred[sink];
        while pred[v] != source {
            let u = pred[v];
            if u < n {
                let f = flow.get(u, v - n) + delta;
                flow.set(u, v - n, f);
            } else {
                let f = flow.get(v, u - n) - delta;
                flow.set(v, u - n, if f <= FLOW_EPS { 0.0 } else { f });
            }
            v = u;
        }
    }
    flow
}

/// Removes cycles from the support graph of an optimal flow by shifting mass
/// around each cycle in its non-increasing cost direction until one edge
/// empties. The result keeps the marginals, does not increase the cost, and
/// has a forest as support.
fn cancel_support_cycles(flow: &mut Matrix, cost: &CostMatrix) {
    let n = flow.rows();
    let m = flow.cols();
    // Forest adjacency over nodes 0..n (rows) and n..n+m (columns).
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n + m];
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|&(i, j)| flow.get(i, j) > 0.0)
        .collect();

    let mut parent = vec![usize::MAX; n + m];
    let mut queue = VecDeque::new();
    for (i, j) in edges {
        if flow.get(i, j) == 0.0 {
            continue;
        }
        // BFS from column j looking for row i inside the current forest.
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        queue.clear();
        let start = n + j;
        parent[start] = start;
        queue.push_back(start);
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            if u == i {
                found = true;
                break;
            }
            for &v in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if !found {
            adj[i].push(n + j);
            adj[n + j].push(i);
            continue;
        }
        // Cycle: (i, j) followed by the forest path j → … → i. Signs alternate,
        // starting with + on (i, j).
        let mut cycle: Vec<(usize, usize)> = vec![(i, j)];
        let mut v = i;
        while v != start {
            let u = parent[v];
            let (r, c) = if v < n { (v, u - n) } else { (u, v - n) };
            cycle.push((r, c));
            v = u;
        }
        let signed_cost: f64 = cycle
            .iter()
            .enumerate()
            .map(|(idx, &(r, c))| if idx % 2 == 0 { cost.get(r, c) } else { -cost.get(r, c) })
            .sum();
        // Odd positions decrease when pushing in the + direction.
        let decreasing_parity = if signed_cost <= 0.0 { 1 } else { 0 };
        let (argmin, theta) = cycle
            .iter()
            .enumerate()
            .filter(|(idx, _)| idx % 2 == decreasing_parity)
            .map(|(idx, &(r, c))| (idx, flow.get(r, c)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let mut emptied = Vec::new();
        for (idx, &(r, c)) in cycle.iter().enumerate() {
            let f = flow.get(r, c);
            if idx == argmin || (idx % 2 == decreasing_parity && f - theta <= 0.0) {
                flow.set(r, c, 0.0);
                emptied.push((r, c));
            } else if idx % 2 == decreasing_parity {
                flow.set(r, c, f - theta);
            } else {
                flow.set(r, c, f + theta);
            }
        }
        for (r, c) in emptied {
            if (r, c) != (i, j) {
                adj[r].retain(|&x| x != n + c);
                adj[n + c].retain(|&x| x != r);
            }
        }
        if flow.get(i, j) > 0.0 {
            adj[i].push(n + j);
            adj[n + j].push(i);
        }
    }
}

/// Exact optimum of a uniform-weight square problem by enumerating all `n!`
/// permutations (`n ≤ 8`). Intended as a test oracle.
pub fn brute_force_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> Result<f64> {
    let n = mu.len();
    if n != nu.len() || n > 8 {
        return Err(Error::invalid("brute force needs n = m ≤ 8"));
    }
    let uniform = 1.0 / n as f64;
    for w in mu.weights().iter().chain(nu.weights()) {
        if (w - uniform).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid("brute force needs uniform weights"));
        }
    }
    if cost.rows() != n || cost.cols() != n {
        return Err(Error::invalid("cost matrix shape does not match the measures"));
    }
    let mut best = f64::INFINITY;
    for_each_permutation(n, |perm| {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
        best = best.min(total);
    });
    Ok(best * uniform)
}

/// Calls `visit` on every permutation of `0..n` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut counters = vec![0usize; n];
    visit(&perm);
    let mut i = 0;
    while i < n {
        if counters[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counters[i], i);
            }
            visit(&perm);
            counters[i] += 1;
            i = 0;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
}

/// Dual potentials of an entropic transport problem, in log-domain form:
/// `π_ij = exp((u_i + v_j − C_ij) / γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornState {
    pub potentials_u: Vec<f64>,
    pub potentials_v: Vec<f64>,
    pub gamma: f64,
}

/// Stopping rule and regularisation for [`sinkhorn_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    pub gamma: f64,
    pub max_iter: usize,
    /// Tolerance on the L1 violation of the row marginal (columns are exact
    /// after every iteration).
    pub tol: f64,
}

impl SinkhornOptions {
    pub fn new(gamma: f64) -> Self {
        SinkhornOptions { gamma, max_iter: 10_000, tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    pub plan: TransportPlan,
    /// Unregularised cost `⟨π, C⟩` of the returned plan.
    pub value: f64,
    pub state: SinkhornState,
    pub iterations: usize,
    pub converged: bool,
    /// L1 marginal violation of the returned plan.
    pub marginal_error: f64,
}

/// Entropic transport: minimises `⟨π, C⟩ + γ Σ π_ij (log π_ij − 1)` over
/// couplings of `mu` and `nu`, with log-sum-exp updates.
pub fn sinkhorn(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostMatrix,
    gamma: f64,
    warm: Option<&SinkhornState>,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    sinkhorn_with(mu.weights(), nu.weights(), cost, SinkhornOptions { gamma, max_iter, tol }, warm)
}

/// [`sinkhorn`] on bare weight vectors.
///
/// One iteration updates the column potentials and then measures the row
/// marginal error through the pending row update, so a converged warm state
/// on unchanged inputs returns after a single iteration. When `max_iter` is
/// exhausted the last (column-feasible) iterate is returned with
/// `converged = false`.
pub fn sinkhorn_with(
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
    opts: SinkhornOptions,
    warm: Option<&SinkhornState>,
) -> Result<SinkhornOutput> {
    check_problem(a, b, cost)?;
    let gamma = opts.gamma;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let n = a.len();
    let m = b.len();
    let rows: Vec<usize> = (0..n).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..m).filter(|&j| b[j] > 0.0).collect();
    let log_a: Vec<f64> = a.iter().map(|&w| math::ln(w)).collect();
    let log_b: Vec<f64> = b.iter().map(|&w| math::ln(w)).collect();
    let cost_t = cost.transpose();

    let mut f = match warm {
        Some(state) => {
            if state.potentials_u.len() != n || state.potentials_v.len() != m {
                return Err(Error::invalid("warm-start state does not match problem size"));
            }
            state.potentials_u.clone()
        }
        None => vec![0.0; n],
    };
    let mut g = vec![0.0; m];

    let update_g = |f: &[f64], g: &mut [f64]| {
        for &j in &cols {
            let cj = cost_t.row(j);
            let lse = math::log_sum_exp(rows.iter().map(|&i| (f[i] - cj[i]) / gamma));
            g[j] = gamma * (log_b[j] - lse);
        }
    };
    let update_f = |g: &[f64], f: &mut [f64]| {
        for &i in &rows {
            let ci = cost.row(i);
            let lse = math::log_sum_exp(cols.iter().map(|&j| (g[j] - ci[j]) / gamma));
            f[i] = gamma * (log_a[i] - lse);
        }
    };

    update_g(&f, &mut g);
    let mut iterations = 1;
    let mut f_next = f.clone();
    let mut converged;
    let mut marginal_error;
    loop {
        update_f(&g, &mut f_next);
        // Row sums of the current plan are a_i · exp((f_i − f_next_i) / γ).
        marginal_error = rows
            .iter()
            .map(|&i| (a[i] * (math::exp((f[i] - f_next[i]) / gamma) - 1.0)).abs())
            .sum::<f64>();
        converged = marginal_error <= opts.tol;
        if converged || iterations >= opts.max_iter {
            break;
        }
        core::mem::swap(&mut f, &mut f_next);
        update_g(&f, &mut g);
        iterations += 1;
    }

    let mut plan = Matrix::zeros(n, m);
    for &i in &rows {
        let ci = cost.row(i);
        let out = plan.row_mut(i);
        for &j in &cols {
            out[j] = math::exp((f[i] + g[j] - ci[j]) / gamma);
        }
    }
    let value = plan.dot(cost);
    let marginal_tol = if converged { opts.tol } else { marginal_error };
    // Potentials of zero-weight atoms never enter the plan.
    for i in 0..n {
        if a[i] == 0.0 {
            f[i] = 0.0;
        }
    }
    for j in 0..m {
        if b[j] == 0.0 {
            g[j] = 0.0;
        }
    }
    Ok(SinkhornOutput {
        plan: TransportPlan::from_parts(plan, a.to_vec(), b.to_vec(), marginal_tol),
        value,
        state: SinkhornState { potentials_u: f, potentials_v: g, gamma },
        iterations,
        converged,
        marginal_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::squared_euclidean_cost;

    fn measure(dim: usize, pts: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::uniform(dim, pts.to_vec()).unwrap()
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(2, vec![0.0, 0.0], vec![1.0]).is_ok());
        assert!(DiscreteMeasure::new(2, vec![0.0, 0.0], vec![0.5]).is_err());
        assert!(DiscreteMeasure::new(2, vec![0.0, 0.0, 1.0, 1.0], vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(2, vec![0.0], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![f64::NAN], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![], vec![]).is_err());
        let m = DiscreteMeasure::from_unnormalized(1, vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
        assert_eq!(m.weights(), &[0.25, 0.75]);
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let mu = measure(2, &[0.0, 0.0, 1.0, 0.0, 0.0, 2.0]);
        let cost = squared_euclidean_cost(mu.points(), mu.points(), 2).unwrap();
        let (plan, value) = exact_ot(&mu, &mu, &cost).unwrap();
        assert_eq!(value, 0.0);
        for (i, j, _) in plan.nonzeros(0.0) {
            assert_eq!(i, j);
        }
    }

    #[test]
    fn two_diracs() {
        let mu = DiscreteMeasure::dirac(&[1.0, 2.0]).unwrap();
        let nu = DiscreteMeasure::dirac(&[-1.0, 0.5]).unwrap();
        let cost = squared_euclidean_cost(mu.points(), nu.points(), 2).unwrap();
        let (plan, value) = exact_ot(&mu, &nu, &cost).unwrap();
        assert_eq!(plan.get(0, 0), 1.0);
        assert!((value - 6.25).abs() < 1e-15);
        let out = sinkhorn(&mu, &nu, &cost, 0.3, None, 100, 1e-9).unwrap();
        assert!((out.plan.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((out.value - 6.25).abs() < 1e-12);
    }

    #[test]
    fn brute_force_small_cases() {
        let one = measure(1, &[0.0]);
        let c = Matrix::from_vec(1, 1, vec![3.5]).unwrap();
        assert_eq!(brute_force_ot(&one, &one, &c).unwrap(), 3.5);
        let two = measure(1, &[0.0, 1.0]);
        let c = Matrix::from_vec(2, 2, vec![0.0, 5.0, 5.0, 0.0]).unwrap();
        assert_eq!(brute_force_ot(&two, &two, &c).unwrap(), 0.0);
    }

    #[test]
    fn brute_force_preconditions() {
        let nine = measure(1, &[0.0; 9]);
        let c = Matrix::zeros(9, 9);
        assert!(brute_force_ot(&nine, &nine, &c).is_err());
        let skew = DiscreteMeasure::new(1, vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        assert!(brute_force_ot(&skew, &skew, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn permutation_count() {
        let mut count = 0;
        for_each_permutation(5, |_| count += 1);
        assert_eq!(count, 120);
    }

    #[test]
    fn exact_rejects_bad_weights_and_costs() {
        let c = Matrix::zeros(2, 1);
        assert!(exact_ot_weights(&[0.5, 0.6], &[1.0], &c).is_err());
        let neg = Matrix::from_vec(2, 1, vec![-1.0, 0.0]).unwrap();
        assert!(exact_ot_weights(&[0.5, 0.5], &[1.0], &neg).is_err());
        assert!(exact_ot_weights(&[0.5, 0.5], &[1.0], &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn exact_handles_unequal_sizes_and_zero_weights() {
        let a = [0.2, 0.0, 0.5, 0.3];
        let b = [0.6, 0.4];
        let c = Matrix::from_vec(4, 2, vec![1.0, 2.0, 0.0, 0.0, 3.0, 1.0, 0.5, 4.0]).unwrap();
        let (plan, value) = exact_ot_weights(&a, &b, &c).unwrap();
        assert!(plan.max_marginal_violation() <= EXACT_MARGINAL_TOL);
        assert!(plan.nonzeros(0.0).count() <= 4 + 2 - 1);
        // Row 2 fills column 1 and spills 0.1 into column 0.
        assert!((value - (0.2 * 1.0 + 0.4 * 1.0 + 0.3 * 0.5 + 0.1 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_costs_still_give_vertex_plans() {
        // Every coupling is optimal; the support must still be a forest.
        let a = [0.25; 4];
        let b = [0.25; 4];
        let c = Matrix::from_vec(4, 4, vec![1.0; 16]).unwrap();
        let (plan, value) = exact_ot_weights(&a, &b, &c).unwrap();
        assert!((value - 1.0).abs() < 1e-12);
        assert!(plan.nonzeros(0.0).count() <= 7);
        assert!(plan.max_marginal_violation() <= EXACT_MARGINAL_TOL);
    }

    #[test]
    fn cycle_cancellation_keeps_cost_and_marginals() {
        let mut flow = Matrix::from_vec(2, 2, vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        let cost = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let before = flow.dot(&cost);
        cancel_support_cycles(&mut flow, &cost);
        assert!((flow.dot(&cost) - before).abs() < 1e-15);
        assert!(flow.as_slice().iter().filter(|v| **v > 0.0).count() <= 3);
        let plan = TransportPlan::new(flow, vec![0.5, 0.5], vec![0.5, 0.5], 1e-15);
        assert!(plan.is_ok());
    }

    #[test]
    fn sinkhorn_large_gamma_gives_independent_coupling() {
        let mu = DiscreteMeasure::new(1, vec![0.0, 1.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![-1.0, 2.0], vec![0.6, 0.4]).unwrap();
        let cost = squared_euclidean_cost(mu.points(), nu.points(), 1).unwrap();
        let out = sinkhorn(&mu, &nu, &cost, 1e6 * cost.max(), None, 10_000, 1e-9).unwrap();
        assert!(out.converged);
        for i in 0..3 {
            for j in 0..2 {
                let expected = mu.weights()[i] * nu.weights()[j];
                assert!((out.plan.get(i, j) - expected).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn sinkhorn_rejects_nonpositive_gamma() {
        let mu = measure(1, &[0.0]);
        let c = Matrix::zeros(1, 1);
        assert!(sinkhorn(&mu, &mu, &c, 0.0, None, 10, 1e-6).is_err());
        assert!(sinkhorn(&mu, &mu, &c, -1.0, None, 10, 1e-6).is_err());
    }

    #[test]
    fn sinkhorn_reports_non_convergence() {
        let mu = measure(1, &[0.0, 1.0, 2.0, 3.0]);
        let nu = measure(1, &[0.5, 1.5, 2.0, 9.0]);
        let cost = squared_euclidean_cost(mu.points(), nu.points(), 1).unwrap();
        let out = sinkhorn(&mu, &nu, &cost, 1e-2, None, 2, 1e-12).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert!(out.plan.max_marginal_violation() <= out.marginal_error + 1e-12);
    }

    #[test]
    fn sinkhorn_zero_weight_atoms() {
        let a = [0.5, 0.0, 0.5];
        let b = [1.0];
        let c = Matrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let out = sinkhorn_with(&a, &b, &c, SinkhornOptions::new(0.5), None).unwrap();
        assert_eq!(out.plan.get(1, 0), 0.0);
        assert!((out.value - 2.0).abs() < 1e-9);
        assert!(out.state.potentials_u.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sinkhorn_warm_state_shape_checked() {
        let mu = measure(1, &[0.0, 1.0]);
        let c = Matrix::zeros(2, 2);
        let bad = SinkhornState { potentials_u: vec![0.0], potentials_v: vec![0.0; 2], gamma: 1.0 };
        assert!(sinkhorn(&mu, &mu, &c, 1.0, Some(&bad), 10, 1e-6).is_err());
    }
}
