use alloc::vec::Vec;

use super::{
    displacement_matrix, solve_inner, DualityGap, IterationRecord, SolverConfig, SrwResult,
    WarmStart,
};
use crate::error::Result;
use crate::linalg::{
    eig_sym, mahalanobis_cost, project_spectrahedron, squared_euclidean_cost, top_k_projector,
    OmegaMatrix, SymMatrix,
};
use crate::ot::{DiscreteMeasure, SinkhornState};

/// Projected supergradient ascent of `f(Ω) = min_π ⟨Ω | V_π⟩` over the
/// spectrahedron: `Ω ← Proj[Ω + τ_t V_π]` with `τ_t = τ₀ / (t + 1)`, where
/// `V_π` (a supergradient by Danskin's theorem) comes from the inner transport
/// plan under `d_Ω²`.
///
/// The ascent is not monotone, so the solver keeps the iterate with the
/// highest `f(Ω)` together with its plan, and reports `f(Ω_best)`. Alongside
/// it keeps the smallest top-`k` eigenvalue sum over the iterates' plans and
/// their step-weighted running average. Those two give a certified bracket
/// `f(Ω_best) ≤ SRW_k² ≤ min Σ_{l≤k} λ_l(V_π)`; its relative width is the
/// reported gap, and the solve stops once it drops below `epsilon`.
pub fn srw_supergradient(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &SolverConfig,
) -> Result<SrwResult> {
    let config = SolverConfig { algorithm: super::Algorithm::Supergradient, ..config.clone() };
    super::dispatch(mu, nu, &config, &WarmStart::default())
}


pub(super) fn run(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &SolverConfig,
    warm: &WarmStart,
) -> Result<SrwResult> {
    let d = mu.dim();
    let k = config.k;
    let gamma = config.gamma;
    let mut sinkhorn: Option<SinkhornState> = warm.sinkhorn.clone();

    // Plain transport under the Euclidean cost.
    let euclid = squared_euclidean_cost(mu.points(), nu.points(), d)?;
    let init = solve_inner(mu, nu, &euclid, gamma, config.sinkhorn_options(None), sinkhorn.as_ref())?;
    if init.state.is_some() {
        sinkhorn = init.state.clone();
    }
    let v0 = displacement_matrix(mu, nu, &init.plan)?;
    let eig0 = eig_sym(v0.entries())?;
    let mut trace = Vec::new();

    let mut upper = eig0.top_k_sum(k);
    // With exact transport, π₀ is optimal for (k/d)·‖x − y‖², so
    // f((k/d) I) = (k/d) W² is a free lower bound.
    let mut best_f = if gamma == 0.0 { k as f64 / d as f64 * v0.trace() } else { f64::NEG_INFINITY };
    let mut best_omega = OmegaMatrix::scaled_identity(d, k)?;
    let mut best_plan = init.plan.clone();

    let mut omega = match &warm.omega {
        Some(o) if o.k() == k && o.dim() == d => o.clone(),
        _ => top_k_projector(&eig0, k)?,
    };
    let lambda_max = eig0.eigenvalues().first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        // No displacement at all: μ = ν.
        let mut result = SrwResult::new(k, config.algorithm, omega, init.plan, 0.0, 0.0);
        result.sinkhorn_state = sinkhorn;
        return Ok(result);
    }
    let tau0 = config.tau0.unwrap_or(k as f64 / (2.0 * lambda_max));

    let mut avg_v = SymMatrix::zeros(d);
    let mut avg_weight = 0.0;

    let mut converged = false;
    let mut iterations = 0;
    for t in 0..config.max_iter {
        iterations = t + 1;
        let cost = mahalanobis_cost(mu.points(), nu.points(), d, &omega)?;
        let inner = solve_inner(mu, nu, &cost, gamma, config.sinkhorn_options(Some(t)), sinkhorn.as_ref())?;
        if inner.state.is_some() {
            sinkhorn = inner.state;
        }
        let v = displacement_matrix(mu, nu, &inner.plan)?;
        let eig = eig_sym(v.entries())?;
        let f = omega.inner(v.entries());
        let top = eig.top_k_sum(k);
        let step = tau0 / (t + 1) as f64;

        if f > best_f {
            best_f = f;
            best_omega = omega.clone();
            best_plan = inner.plan.clone();
        }
        upper = upper.min(top);

        // V of the step-weighted running average of the plans.
        let w_new = step / (avg_weight + step);
        avg_v = avg_v.scaled(1.0 - w_new).add_scaled(w_new, v.entries());
        avg_weight += step;
        if t > 0 {
            upper = upper.min(eig_sym(&avg_v)?.top_k_sum(k));
        }

        let bracket = DualityGap::from_parts(upper, best_f);
        trace.push(IterationRecord {
            objective: f,
            gap: DualityGap::from_parts(top, f).relative,
            inner_iterations: inner.iterations,
        });
        if bracket.relative <= config.epsilon {
            converged = true;
            break;
        }
        omega = project_spectrahedron(&omega.matrix().add_scaled(step, v.entries()), k)?;
    }

    let v_best = displacement_matrix(mu, nu, &best_plan)?;
    let value_squared = best_omega.inner(v_best.entries());
    let gap = DualityGap::from_parts(upper, best_f).relative.max(0.0);
    let mut result = SrwResult::new(k, config.algorithm, best_omega, best_plan, value_squared, gap);
    result.iterations = iterations;
    result.trace = trace;
    result.converged = converged;
    result.sinkhorn_state = sinkhorn;
    Ok(result)
}
