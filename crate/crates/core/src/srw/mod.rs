//! Subspace robust Wasserstein distances.
//!
//! `SRW_k²(μ, ν) = min_π Σ_{l≤k} λ_l(V_π) = max_{Ω ∈ R} min_π ⟨Ω | V_π⟩`, where
//! `R = {0 ⪯ Ω ⪯ I, tr Ω = k}` and `V_π` is the displacement second-moment
//! matrix of the coupling `π`. Two solvers work on the max-min side:
//! a projected supergradient ascent with exact inner transport
//! ([`srw_supergradient`]), a Frank–Wolfe ascent on the entropic smoothing
//! ([`srw_frank_wolfe`]), and a proximal bundle ascent with exact inner
//! transport that certifies its value to high accuracy ([`srw_bundle`]).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    eig_sym, mahalanobis_cost, squared_euclidean_cost, top_k_projector, Matrix, OmegaMatrix,
    SymMatrix,
};
use crate::math;
use crate::ot::{
    exact_ot_weights, sinkhorn_with, DiscreteMeasure, SinkhornOptions, SinkhornState,
    TransportPlan,
};

mod bundle;
mod frank_wolfe;
mod geodesic;
mod prw;
mod supergradient;

pub use bundle::srw_bundle;
pub use frank_wolfe::srw_frank_wolfe;
pub use geodesic::{geodesic, merge_atoms};
pub use prw::{prw_2d_sweep, wasserstein_1d_squared, PrwSweep};
pub use supergradient::srw_supergradient;

/// `V_π = Σ_ij π_ij (x_i − y_j)(x_i − y_j)ᵀ`, symmetric positive semidefinite;
/// its trace is the squared-Euclidean cost of `π`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementMatrix {
    entries: SymMatrix,
}

impl DisplacementMatrix {
    pub fn entries(&self) -> &SymMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Sum of the `k` largest eigenvalues.
    pub fn top_k_sum(&self, k: usize) -> Result<f64> {
        Ok(eig_sym(&self.entries)?.top_k_sum(k))
    }
}

/// Builds `V_π` for a plan between `mu` and `nu`.
///
/// Sparse plans are summed pair by pair. Dense plans use the expansion
/// `Σ r_i x_i x_iᵀ + Σ c_j y_j y_jᵀ − Xᵀ π Y − Yᵀ πᵀ X` (with `r`, `c` the
/// plan's own row and column sums) on coordinates centred at the joint mean.
pub fn displacement_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
) -> Result<DisplacementMatrix> {
    let d = mu.dim();
    if nu.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: nu.dim() });
    }
    let (n, m) = (mu.len(), nu.len());
    if plan.rows() != n || plan.cols() != m {
        return Err(Error::invalid("plan shape does not match the measures"));
    }
    let nnz = plan.matrix().as_slice().iter().filter(|v| **v != 0.0).count();
    let entries = if nnz * d <= 2 * (n * m + (n + m) * d) {
        displacement_sparse(mu, nu, plan)
    } else {
        displacement_dense(mu, nu, plan)
    };
    Ok(DisplacementMatrix { entries })
}

fn displacement_sparse(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &TransportPlan) -> SymMatrix {
    let d = mu.dim();
    let mut acc = alloc::vec![0.0; d * d];
    let mut diff = alloc::vec![0.0; d];
    for (i, j, w) in plan.nonzeros(0.0) {
        for ((out, a), b) in diff.iter_mut().zip(mu.point(i)).zip(nu.point(j)) {
            *out = a - b;
        }
        for r in 0..d {
            let wr = w * diff[r];
            if wr == 0.0 {
                continue;
            }
            let row = &mut acc[r * d..(r + 1) * d];
            for c in r..d {
                row[c] += wr * diff[c];
            }
        }
    }
    SymMatrix::from_upper(d, |r, c| acc[r * d + c])
}

fn displacement_dense(mu: &DiscreteMeasure, nu: &DiscreteMeasure, plan: &TransportPlan) -> SymMatrix {
    let d = mu.dim();
    let (n, m) = (mu.len(), nu.len());
    let mut center = alloc::vec![0.0; d];
    for p in mu.points().chunks_exact(d).chain(nu.points().chunks_exact(d)) {
        for (c, v) in center.iter_mut().zip(p) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= (n + m) as f64);
    let xc: Vec<f64> = mu
        .points()
        .chunks_exact(d)
        .flat_map(|p| p.iter().zip(&center).map(|(v, c)| v - c))
        .collect();
    let yc: Vec<f64> = nu
        .points()
        .chunks_exact(d)
        .flat_map(|p| p.iter().zip(&center).map(|(v, c)| v - c))
        .collect();

    let pi = plan.matrix();
    let mut col_sums = alloc::vec![0.0; m];
    // py = π Y  (n × d)
    let mut py = alloc::vec![0.0; n * d];
    let mut acc = alloc::vec![0.0; d * d];
    for i in 0..n {
        let row = pi.row(i);
        let out = &mut py[i * d..(i + 1) * d];
        let mut r_i = 0.0;
        for (j, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            r_i += w;
            col_sums[j] += w;
            for (o, y) in out.iter_mut().zip(&yc[j * d..(j + 1) * d]) {
                *o += w * y;
            }
        }
        let xi = &xc[i * d..(i + 1) * d];
        // r_i x xᵀ − x (πY)_iᵀ − (πY)_i xᵀ, upper triangle only.
        for r in 0..d {
            let row_acc = &mut acc[r * d..(r + 1) * d];
            for c in r..d {
                row_acc[c] += r_i * xi[r] * xi[c] - xi[r] * out[c] - out[r] * xi[c];
            }
        }
    }
    for j in 0..m {
        let yj = &yc[j * d..(j + 1) * d];
        let w = col_sums[j];
        if w == 0.0 {
            continue;
        }
        for r in 0..d {
            let row_acc = &mut acc[r * d..(r + 1) * d];
            for c in r..d {
                row_acc[c] += w * yj[r] * yj[c];
            }
        }
    }
    SymMatrix::from_upper(d, |r, c| acc[r * d + c])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Supergradient,
    FrankWolfe,
    /// Proximal bundle ascent with exact inner transport.
    Bundle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Supergradient => "supergradient",
            Algorithm::FrankWolfe => "frank_wolfe",
            Algorithm::Bundle => "bundle",
        }
    }
}

/// Settings for the SRW solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Entropic regularisation of the inner transport; `0` selects the exact
    /// solver (supergradient only).
    pub gamma: f64,
    /// Supergradient base step; `None` uses `k / (2 λ_max(V_{π₀}))`.
    pub tau0: Option<f64>,
    /// Stopping threshold on the relative duality gap.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Inner Sinkhorn settings once the outer loop passes `early_iterations`.
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
    /// Inner Sinkhorn settings for the first `early_iterations` outer steps
    /// and for the initialisation.
    pub sinkhorn_early_tol: f64,
    pub sinkhorn_early_max_iter: usize,
    pub early_iterations: usize,
}

impl SolverConfig {
    /// Frank–Wolfe on the entropic problem.
    pub fn frank_wolfe(k: usize, gamma: f64, epsilon: f64) -> Self {
        SolverConfig {
            algorithm: Algorithm::FrankWolfe,
            k,
            gamma,
            tau0: None,
            epsilon,
            max_iter: 200,
            sinkhorn_tol: 1e-6,
            sinkhorn_max_iter: 1000,
            sinkhorn_early_tol: 1e-3,
            sinkhorn_early_max_iter: 100,
            early_iterations: 5,
        }
    }

    /// Projected supergradient with exact inner transport.
    pub fn supergradient(k: usize, epsilon: f64) -> Self {
        SolverConfig {
            algorithm: Algorithm::Supergradient,
            gamma: 0.0,
            max_iter: 500,
            ..Self::frank_wolfe(k, 0.0, epsilon)
        }
    }

    /// Proximal bundle ascent with exact inner transport.
    pub fn bundle(k: usize, epsilon: f64) -> Self {
        SolverConfig { algorithm: Algorithm::Bundle, max_iter: 300, ..Self::supergradient(k, epsilon) }
    }

    pub fn with_k(&self, k: usize) -> Self {
        SolverConfig { k, ..self.clone() }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::invalid("k must lie in [1, d]"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be non-negative"));
        }
        if self.algorithm == Algorithm::FrankWolfe && self.gamma <= 0.0 {
            return Err(Error::invalid("Frank-Wolfe needs gamma > 0"));
        }
        if self.algorithm == Algorithm::Bundle && self.gamma != 0.0 {
            return Err(Error::invalid("the bundle solver uses exact transport (gamma = 0)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if let Some(tau0) = self.tau0 {
            if !(tau0 > 0.0 && tau0.is_finite()) {
                return Err(Error::invalid("tau0 must be positive"));
            }
        }
        Ok(())
    }

    fn sinkhorn_options(&self, outer_iteration: Option<usize>) -> SinkhornOptions {
        let early = outer_iteration.is_none_or(|t| t < self.early_iterations);
        if early {
            SinkhornOptions {
                gamma: self.gamma,
                max_iter: self.sinkhorn_early_max_iter,
                tol: self.sinkhorn_early_tol,
            }
        } else {
            SinkhornOptions { gamma: self.gamma, max_iter: self.sinkhorn_max_iter, tol: self.sinkhorn_tol }
        }
    }
}

/// One outer iteration of a solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// `⟨Ω | V_π⟩` at this iterate.
    pub objective: f64,
    /// Relative duality gap of this iterate.
    pub gap: f64,
    /// Sinkhorn iterations spent (0 for exact inner transport).
    pub inner_iterations: usize,
}

/// Output of an SRW solve.
#[derive(Debug, Clone)]
pub struct SrwResult {
    pub k: usize,
    pub algorithm: Algorithm,
    /// `SRW_k`, the square root of `value_squared`.
    pub value: f64,
    /// `⟨Ω | V_π⟩` at the returned pair.
    pub value_squared: f64,
    pub omega: OmegaMatrix,
    pub plan: TransportPlan,
    /// Relative duality gap certified at return.
    pub gap: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    /// Last Sinkhorn potentials, when entropic inner transport was used.
    pub sinkhorn_state: Option<SinkhornState>,
}

impl SrwResult {
    fn new(
        k: usize,
        algorithm: Algorithm,
        omega: OmegaMatrix,
        plan: TransportPlan,
        value_squared: f64,
        gap: f64,
    ) -> Self {
        let value_squared = value_squared.max(0.0);
        SrwResult {
            k,
            algorithm,
            value: math::sqrt(value_squared),
            value_squared,
            omega,
            plan,
            gap,
            iterations: 0,
            trace: Vec::new(),
            converged: true,
            sinkhorn_state: None,
        }
    }

    fn transposed(mut self) -> Self {
        self.plan = self.plan.transpose();
        self
    }
}

/// Absolute and relative duality gap of `(Ω, π)` for order `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGap {
    /// `Σ_{l≤k} λ_l(V) − ⟨Ω | V⟩`.
    pub absolute: f64,
    /// `absolute / ⟨Ω | V⟩`; zero when both vanish.
    pub relative: f64,
    pub top_k_sum: f64,
    pub inner: f64,
}

impl DualityGap {
    fn from_parts(top_k_sum: f64, inner: f64) -> Self {
        let absolute = top_k_sum - inner;
        let relative = if inner > 0.0 {
            absolute / inner
        } else if absolute <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        DualityGap { absolute, relative, top_k_sum, inner }
    }
}

pub fn duality_gap(v: &DisplacementMatrix, omega: &OmegaMatrix, k: usize) -> Result<DualityGap> {
    if k == 0 || k > v.dim() {
        return Err(Error::invalid("k must lie in [1, d]"));
    }
    if omega.dim() != v.dim() {
        return Err(Error::DimensionMismatch { expected: v.dim(), found: omega.dim() });
    }
    let top = eig_sym(v.entries())?.top_k_sum(k);
    Ok(DualityGap::from_parts(top, omega.inner(v.entries())))
}

/// Solves the inner transport problem under the ground cost `d_Ω²` (exact if
/// `gamma = 0`, Sinkhorn with default settings otherwise) and returns
/// `⟨Ω | V_π⟩` for the resulting plan.
pub fn f_value(mu: &DiscreteMeasure, nu: &DiscreteMeasure, omega: &OmegaMatrix, gamma: f64) -> Result<f64> {
    check_pair(mu, nu)?;
    let cost = mahalanobis_cost(mu.points(), nu.points(), mu.dim(), omega)?;
    let plan = if gamma == 0.0 {
        exact_ot_weights(mu.weights(), nu.weights(), &cost)?.0
    } else {
        sinkhorn_with(mu.weights(), nu.weights(), &cost, SinkhornOptions::new(gamma), None)?.plan
    };
    let v = displacement_matrix(mu, nu, &plan)?;
    Ok(omega.inner(v.entries()))
}

/// Projector onto the top `k` principal directions of the transport-weighted
/// displacements of an optimal (exact if `gamma = 0`, entropic otherwise)
/// plan for the squared Euclidean cost.
pub fn init_omega(mu: &DiscreteMeasure, nu: &DiscreteMeasure, k: usize, gamma: f64) -> Result<OmegaMatrix> {
    check_pair(mu, nu)?;
    if k == 0 || k > mu.dim() {
        return Err(Error::invalid("k must lie in [1, d]"));
    }
    let cost = squared_euclidean_cost(mu.points(), nu.points(), mu.dim())?;
    let plan = if gamma == 0.0 {
        exact_ot_weights(mu.weights(), nu.weights(), &cost)?.0
    } else {
        sinkhorn_with(mu.weights(), nu.weights(), &cost, SinkhornOptions::new(gamma), None)?.plan
    };
    let v = displacement_matrix(mu, nu, &plan)?;
    top_k_projector(&eig_sym(v.entries())?, k)
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    Ok(())
}

/// Starting information handed to a solver by a `k` sweep.
#[derive(Debug, Clone, Default)]
pub(crate) struct WarmStart {
    pub omega: Option<OmegaMatrix>,
    pub sinkhorn: Option<SinkhornState>,
}

/// Inner transport under `d_Ω²`: exact when `gamma = 0`, Sinkhorn otherwise.
pub(crate) struct InnerSolve {
    pub plan: TransportPlan,
    pub state: Option<SinkhornState>,
    pub iterations: usize,
}

pub(crate) fn solve_inner(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &Matrix,
    gamma: f64,
    opts: SinkhornOptions,
    warm: Option<&SinkhornState>,
) -> Result<InnerSolve> {
    if gamma == 0.0 {
        let (plan, _) = exact_ot_weights(mu.weights(), nu.weights(), cost)?;
        Ok(InnerSolve { plan, state: None, iterations: 0 })
    } else {
        let out = sinkhorn_with(mu.weights(), nu.weights(), cost, opts, warm)?;
        Ok(InnerSolve { plan: out.plan, state: Some(out.state), iterations: out.iterations })
    }
}

/// Closed form when one side has a single atom: the coupling is forced, and
/// the top-`k` projector of its displacement matrix is optimal.
fn forced_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure, config: &SolverConfig) -> Result<SrwResult> {
    let plan = TransportPlan::independent(mu.weights(), nu.weights());
    let v = displacement_matrix(mu, nu, &plan)?;
    let eig = eig_sym(v.entries())?;
    let omega = top_k_projector(&eig, config.k)?;
    let value_squared = omega.inner(v.entries());
    let gap = DualityGap::from_parts(eig.top_k_sum(config.k), value_squared);
    let mut result =
        SrwResult::new(config.k, config.algorithm, omega, plan, value_squared, gap.relative.max(0.0));
    result.trace.push(IterationRecord { objective: value_squared, gap: result.gap, inner_iterations: 0 });
    Ok(result)
}

/// SRW is symmetric, so problems are solved in a canonical orientation and the
/// plan is transposed back; swapping the arguments then reproduces the same
/// computation exactly.
fn should_swap(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> bool {
    use core::cmp::Ordering;
    let key = |m: &DiscreteMeasure| (m.len(), m.weights().to_vec(), m.points().to_vec());
    let (a, b) = (key(mu), key(nu));
    let ord = a.0.cmp(&b.0).then_with(|| {
        a.1.iter()
            .chain(&a.2)
            .zip(b.1.iter().chain(&b.2))
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    ord == Ordering::Greater
}

pub(crate) fn dispatch(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &SolverConfig,
    warm: &WarmStart,
) -> Result<SrwResult> {
    check_pair(mu, nu)?;
    config.validate(mu.dim())?;
    if should_swap(mu, nu) {
        let warm = WarmStart {
            omega: warm.omega.clone(),
            sinkhorn: warm.sinkhorn.as_ref().map(|s| SinkhornState {
                potentials_u: s.potentials_v.clone(),
                potentials_v: s.potentials_u.clone(),
                gamma: s.gamma,
            }),
        };
        let mut result = dispatch_oriented(nu, mu, config, &warm)?.transposed();
        if let Some(s) = result.sinkhorn_state.as_mut() {
            core::mem::swap(&mut s.potentials_u, &mut s.potentials_v);
        }
        return Ok(result);
    }
    dispatch_oriented(mu, nu, config, warm)
}

fn dispatch_oriented(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &SolverConfig,
    warm: &WarmStart,
) -> Result<SrwResult> {
    if mu.len() == 1 || nu.len() == 1 {
        return forced_coupling(mu, nu, config);
    }
    match config.algorithm {
        Algorithm::Supergradient => supergradient::run(mu, nu, config, warm),
        Algorithm::FrankWolfe => frank_wolfe::run(mu, nu, config, warm),
        Algorithm::Bundle => bundle::run(mu, nu, config, warm),
    }
}

/// Runs the solver selected by `config.algorithm`.
pub fn srw(mu: &DiscreteMeasure, nu: &DiscreteMeasure, config: &SolverConfig) -> Result<SrwResult> {
    dispatch(mu, nu, config, &WarmStart::default())
}

/// `SRW_k` for every `k = d, d−1, …, 1`, each solve initialised from the top-`k`
/// eigenvectors of the previous plan's displacement matrix and, with entropic
/// inner transport, from the previous Sinkhorn potentials. The returned vector
/// is indexed by `k − 1`. `config.k` is ignored.
pub fn srw_curve(mu: &DiscreteMeasure, nu: &DiscreteMeasure, config: &SolverConfig) -> Result<Vec<SrwResult>> {
    check_pair(mu, nu)?;
    let d = mu.dim();
    let mut results: Vec<SrwResult> = Vec::with_capacity(d);
    let mut warm = WarmStart::default();
    for k in (1..=d).rev() {
        let cfg = config.with_k(k);
        let result = dispatch(mu, nu, &cfg, &warm)?;
        let v = displacement_matrix(mu, nu, &result.plan)?;
        if k > 1 {
            warm.omega = Some(top_k_projector(&eig_sym(v.entries())?, k - 1)?);
        }
        warm.sinkhorn = result.sinkhorn_state.clone();
        results.push(result);
    }
    results.reverse();
    Ok(results)
}
