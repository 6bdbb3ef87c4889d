use alloc::vec;
use alloc::vec::Vec;

use super::{displacement_matrix, DualityGap, IterationRecord, SolverConfig, SrwResult, WarmStart};
use crate::error::Result;
use crate::linalg::{
    eig_sym, mahalanobis_cost, nnls, project_capped_simplex, project_spectrahedron,
    squared_euclidean_cost, top_k_projector, EigenDecomposition, Matrix, OmegaMatrix, SymMatrix,
};
use crate::ot::{exact_ot_weights, DiscreteMeasure, TransportPlan};

const MAX_CUTS: usize = 128;
const MASTER_MAX_ITER: usize = 2000;
/// Eigenvalues of Ω within this distance of 0 or 1 count as integral when
/// building the optimality conditions of a mixture.
const INTEGRAL_TOL: f64 = 1e-6;
const SERIOUS_FRACTION: f64 = 0.1;
const MAX_STALLS: u32 = 10;

/// Proximal bundle ascent of `f(Ω) = min_π ⟨Ω | V_π⟩` with exact inner
/// transport.
///
/// Every plan `π` seen so far gives a global cut `f(Ω) ≤ ⟨Ω | V_π⟩`. The next
/// trial point maximises the cutting-plane model minus `ρ/2 ‖Ω − Ω_c‖²` over
/// the spectrahedron; its dual weights mix the stored plans into a coupling
/// whose top-`k` eigenvalue sum is an upper bound on `SRW_k²`. The solve stops
/// once that bound and the best `f(Ω)` agree to a relative `epsilon`. The
/// returned plan is the mixture coupling, so it can be used as an optimal plan
/// (for geodesics, say) and not only as a certificate.
pub fn srw_bundle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, config: &SolverConfig) -> Result<SrwResult> {
    let config = SolverConfig { algorithm: super::Algorithm::Bundle, gamma: 0.0, ..config.clone() };
    super::dispatch(mu, nu, &config, &WarmStart::default())
}

type SparsePlan = Vec<(usize, usize, f64)>;

struct Cut {
    v: SymMatrix,
    plan: usize,
    idle: usize,
}

struct Master {
    alpha: Vec<f64>,
    omega: OmegaMatrix,
    model: f64,
    v_alpha: SymMatrix,
}

struct Bundle {
    k: usize,
    cuts: Vec<Cut>,
    plans: Vec<SparsePlan>,
}

impl Bundle {
    fn push(&mut self, v: SymMatrix, plan: &TransportPlan) -> usize {
        self.plans.push(plan.nonzeros(0.0).collect());
        self.cuts.push(Cut { v, plan: self.plans.len() - 1, idle: 0 });
        self.plans.len() - 1
    }

    fn combine(&self, alpha: &[f64]) -> SymMatrix {
        let d = self.cuts[0].v.dim();
        alpha
            .iter()
            .zip(&self.cuts)
            .filter(|(a, _)| **a > 0.0)
            .fold(SymMatrix::zeros(d), |acc, (a, c)| acc.add_scaled(*a, &c.v))
    }

    /// Minimises the smooth dual `φ(α) = max_Ω ⟨Ω | V_α⟩ − ρ/2 ‖Ω − Ω_c‖²`
    /// over the probability simplex by accelerated projected gradient; the
    /// inner maximiser is `Proj_R(Ω_c + V_α / ρ)` and `∂φ/∂α_l = ⟨Ω | V_l⟩`.
    fn solve_master(&self, center: &SymMatrix, f_center: f64, rho: f64, start: Vec<f64>, tol: f64) -> Result<Master> {
        let step = rho / self.centred_gram_norm()?.max(f64::MIN_POSITIVE);

        let evaluate = |alpha: &[f64]| -> Result<(Master, Vec<f64>, f64)> {
            let v_alpha = self.combine(alpha);
            let omega = project_spectrahedron(&center.add_scaled(1.0 / rho, &v_alpha), self.k)?;
            let grad: Vec<f64> = self.cuts.iter().map(|c| omega.inner(&c.v)).collect();
            let phi = omega.inner(&v_alpha) - 0.5 * rho * square(omega.matrix().frobenius_distance(center));
            let model = grad.iter().copied().fold(f64::INFINITY, f64::min);
            let master = Master { alpha: alpha.to_vec(), omega, model, v_alpha };
            Ok((master, grad, phi))
        };

        let mut x = start;
        let mut y = x.clone();
        let mut theta: f64 = 1.0;
        let (mut best, grad_x, _) = evaluate(&x)?;
        let mut best_gap = dual_gap(&x, &grad_x);
        // A trial point is good enough once the master's own duality gap is
        // small next to the ascent it predicts.
        let good_enough = |m: &Master, gap: f64| gap <= tol.max(0.1 * (m.model - f_center));
        if good_enough(&best, best_gap) {
            return Ok(best);
        }
        for it in 1..=MASTER_MAX_ITER {
            let (_, grad_y, _) = evaluate(&y)?;
            let trial: Vec<f64> = y.iter().zip(&grad_y).map(|(a, g)| a - step * g).collect();
            let x_next = project_capped_simplex(&trial, 1)?;
            if it % 10 == 0 || it == MASTER_MAX_ITER {
                let (cand, grad_next, _) = evaluate(&x_next)?;
                let gap = dual_gap(&x_next, &grad_next);
                if gap < best_gap {
                    best_gap = gap;
                    best = cand;
                }
                if good_enough(&best, best_gap) {
                    break;
                }
            }
            // Gradient-based adaptive restart.
            let uphill: f64 = y
                .iter()
                .zip(&x_next)
                .zip(&x)
                .map(|((yv, xn), xv)| (yv - xn) * (xn - xv))
                .sum();
            if uphill > 0.0 {
                theta = 1.0;
                y = x_next.clone();
                x = x_next;
                continue;
            }
            let theta_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * theta * theta));
            let momentum = (theta - 1.0) / theta_next;
            y = x_next.iter().zip(&x).map(|(a, b)| a + momentum * (a - b)).collect();
            x = x_next;
            theta = theta_next;
        }
        Ok(best)
    }

    /// Largest eigenvalue of the Gram matrix `⟨V_l | V_j⟩` restricted to
    /// directions summing to zero, the only ones the simplex sees: the
    /// gradient of the master dual is Lipschitz with this constant over `ρ`.
    fn centred_gram_norm(&self) -> Result<f64> {
        let m = self.cuts.len();
        let mean = self.combine(&vec![1.0 / m as f64; m]);
        let centred: Vec<SymMatrix> = self.cuts.iter().map(|c| c.v.add_scaled(-1.0, &mean)).collect();
        let gram = SymMatrix::from_upper(m, |i, j| centred[i].inner(&centred[j]));
        Ok(eig_sym(&gram)?.eigenvalues().first().copied().unwrap_or(0.0))
    }

    /// Mixture weights under which `Ω` is a maximiser of `⟨· | V_α⟩`, so that
    /// `Σ_{l≤k} λ_l(V_α) = ⟨Ω | V_α⟩ = f` when the stored cuts allow it.
    ///
    /// In the eigenbasis of `Ω`, that holds when `V_α` has no coupling between
    /// the eigenvalue-1, fractional and eigenvalue-0 groups and is a multiple
    /// of the identity on the fractional group; only cuts active at `Ω`
    /// (`⟨Ω | V_l⟩ = f`) may enter. Those are linear conditions on `α`, solved
    /// in the least-squares sense over the simplex.
    fn certify(&self, omega: &OmegaMatrix, f: f64) -> Result<Vec<f64>> {
        let d = omega.dim();
        let eig = eig_sym(omega.matrix())?;
        let group: Vec<u8> = eig
            .eigenvalues()
            .iter()
            .map(|&w| if w >= 1.0 - INTEGRAL_TOL { 1 } else if w <= INTEGRAL_TOL { 0 } else { 2 })
            .collect();
        let fractional: Vec<usize> = (0..d).filter(|&i| group[i] == 2).collect();
        let mut conditions: Vec<(usize, usize)> = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                if group[i] != group[j] || group[i] == 2 {
                    conditions.push((i, j));
                }
            }
        }
        let rows = conditions.len() + fractional.len().saturating_sub(1) + 2;
        let m = self.cuts.len();
        let scale = 1.0 / f.abs().max(f64::MIN_POSITIVE);
        let mut a = Matrix::zeros(rows, m);
        for (l, cut) in self.cuts.iter().enumerate() {
            let rotated = rotate(&eig, &cut.v);
            let mut r = 0;
            for &(i, j) in &conditions {
                a.set(r, l, scale * rotated[i * d + j]);
                r += 1;
            }
            for w in fractional.windows(2) {
                a.set(r, l, scale * (rotated[w[1] * d + w[1]] - rotated[w[0] * d + w[0]]));
                r += 1;
            }
            a.set(r, l, scale * (omega.inner(&cut.v) - f));
            a.set(r + 1, l, 1.0);
        }
        let mut b = vec![0.0; rows];
        b[rows - 1] = 1.0;
        let mut alpha = nnls(&a, &b)?;
        let total: f64 = alpha.iter().sum();
        if total > 0.0 {
            alpha.iter_mut().for_each(|w| *w /= total);
        }
        Ok(alpha)
    }

    fn mixture_plan(&self, alpha: &[f64], n: usize, m: usize) -> Matrix {
        let mut acc = Matrix::zeros(n, m);
        for (a, cut) in alpha.iter().zip(&self.cuts) {
            if *a > 0.0 {
                for &(i, j, p) in &self.plans[cut.plan] {
                    acc.set(i, j, acc.get(i, j) + a * p);
                }
            }
        }
        acc
    }
}

/// `U V Uᵀ` (row-major) for the eigenvector rows `U` of `eig`.
fn rotate(eig: &EigenDecomposition, v: &SymMatrix) -> Vec<f64> {
    let d = v.dim();
    let u: Vec<&[f64]> = (0..d).map(|i| eig.eigenvector(i)).collect();
    let vu: Vec<Vec<f64>> = u
        .iter()
        .map(|uj| (0..d).map(|r| (0..d).map(|c| v.get(r, c) * uj[c]).sum()).collect())
        .collect();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = u[i].iter().zip(&vu[j]).map(|(a, b)| a * b).sum();
        }
    }
    out
}

fn square(x: f64) -> f64 {
    x * x
}

/// `Σ α_l g_l − min_l g_l`: the gap between the dual value and the primal
/// value of the master problem at the matching `Ω`.
fn dual_gap(alpha: &[f64], grad: &[f64]) -> f64 {
    let avg: f64 = alpha.iter().zip(grad).map(|(a, g)| a * g).sum();
    avg - grad.iter().copied().fold(f64::INFINITY, f64::min)
}

struct Upper {
    value: f64,
    plan: Matrix,
}

pub(super) fn run(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &SolverConfig,
    warm: &WarmStart,
) -> Result<SrwResult> {
    let d = mu.dim();
    let k = config.k;
    let (n, m) = (mu.len(), nu.len());
    let (a, b) = (mu.weights(), nu.weights());

    let euclid = squared_euclidean_cost(mu.points(), nu.points(), d)?;
    let (plan0, _) = exact_ot_weights(a, b, &euclid)?;
    let v0 = displacement_matrix(mu, nu, &plan0)?;
    let eig0 = eig_sym(v0.entries())?;
    let marginal_tol = plan0.marginal_tol();
    let mut upper = Upper { value: eig0.top_k_sum(k), plan: plan0.matrix().clone() };

    let lambda_max = eig0.eigenvalues().first().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        let omega = top_k_projector(&eig0, k)?;
        return Ok(SrwResult::new(k, config.algorithm, omega, plan0, 0.0, 0.0));
    }

    let mut bundle = Bundle { k, cuts: Vec::new(), plans: Vec::new() };
    bundle.push(v0.entries().clone(), &plan0);

    // (k/d) I is optimal for π₀ up to scale, so it comes with f for free.
    let mut center = OmegaMatrix::scaled_identity(d, k)?;
    let mut f_center = k as f64 / d as f64 * v0.trace();
    let start = match &warm.omega {
        Some(o) if o.k() == k && o.dim() == d => o.clone(),
        _ => top_k_projector(&eig0, k)?,
    };
    let evaluate = |omega: &OmegaMatrix| -> Result<(TransportPlan, SymMatrix, f64)> {
        let cost = mahalanobis_cost(mu.points(), nu.points(), d, omega)?;
        let (plan, _) = exact_ot_weights(a, b, &cost)?;
        let v = displacement_matrix(mu, nu, &plan)?;
        let f = omega.inner(v.entries());
        Ok((plan, v.entries().clone(), f))
    };
    let (plan_s, v_s, f_s) = evaluate(&start)?;
    let top_s = eig_sym(&v_s)?.top_k_sum(k);
    if top_s < upper.value {
        upper = Upper { value: top_s, plan: plan_s.matrix().clone() };
    }
    bundle.push(v_s, &plan_s);
    if f_s > f_center {
        center = start;
        f_center = f_s;
    }
    let mut best = (center.clone(), f_center);

    let mut rho = 2.0 * lambda_max / k as f64;
    let (rho_min, rho_max) = (rho * 1e-3, rho * 1e3);
    let mut alpha = vec![1.0 / bundle.cuts.len() as f64; bundle.cuts.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // Consecutive iterations where the model saw no ascent but the bracket
    // stayed open.
    let mut stalls = 0u32;

    for t in 0..config.max_iter {
        iterations = t + 1;
        let bracket = DualityGap::from_parts(upper.value, best.1);
        if bracket.relative <= config.epsilon {
            converged = true;
            break;
        }
        let tol = 0.1 * config.epsilon.max(1e-12) * f_center.abs().max(f64::MIN_POSITIVE)
            / libm::pow(10.0, stalls.min(4) as f64);
        let master = bundle.solve_master(center.matrix(), f_center, rho, alpha, tol)?;

        let top_alpha = eig_sym(&master.v_alpha)?.top_k_sum(k);
        if top_alpha < upper.value {
            upper = Upper { value: top_alpha, plan: bundle.mixture_plan(&master.alpha, n, m) };
        }

        let (plan, v, f) = evaluate(&master.omega)?;
        let top = eig_sym(&v)?.top_k_sum(k);
        if top < upper.value {
            upper = Upper { value: top, plan: plan.matrix().clone() };
        }
        if f > best.1 {
            best = (master.omega.clone(), f);
        }
        trace.push(IterationRecord {
            objective: f,
            gap: DualityGap::from_parts(upper.value, best.1).relative,
            inner_iterations: 0,
        });

        let predicted = master.model - f_center;
        let mut certified = None;
        if predicted <= config.epsilon * f_center.abs() || t % 10 == 9 {
            let weights = bundle.certify(&best.0, best.1)?;
            let top_c = eig_sym(&bundle.combine(&weights))?.top_k_sum(k);
            if top_c < upper.value {
                upper = Upper { value: top_c, plan: bundle.mixture_plan(&weights, n, m) };
            }
            certified = Some(weights);
        }
        let serious = f - f_center >= SERIOUS_FRACTION * predicted && f > f_center;
        if serious {
            if f - f_center >= 0.5 * predicted {
                rho = (rho * 0.5).max(rho_min);
            }
            center = master.omega.clone();
            f_center = f;
            stalls = 0;
        } else if predicted <= config.epsilon * f_center.abs() {
            // The aggregate cut only certifies the centre once ρ ‖Ω − Ω_c‖ is
            // small, so let the trial point travel further.
            stalls += 1;
            rho = (rho * 0.5).max(rho_min);
            if stalls > MAX_STALLS {
                // The master cannot be solved finely enough to make progress.
                bundle.push(v, &plan);
                break;
            }
        } else {
            rho = rho.min(rho_max);
        }

        // Age the cuts, drop long-idle ones, then append the new cut.
        alpha = master.alpha;
        for (l, (cut, w)) in bundle.cuts.iter_mut().zip(&alpha).enumerate() {
            let used = *w > 0.0 || certified.as_ref().is_some_and(|c| c[l] > 0.0);
            cut.idle = if used { 0 } else { cut.idle + 1 };
        }
        if bundle.cuts.len() >= MAX_CUTS {
            let keep: Vec<bool> = bundle.cuts.iter().map(|c| c.idle < 5).collect();
            let mut idx = 0;
            bundle.cuts.retain(|_| {
                idx += 1;
                keep[idx - 1]
            });
            let mut idx = 0;
            alpha.retain(|_| {
                idx += 1;
                keep[idx - 1]
            });
            while bundle.cuts.len() >= MAX_CUTS {
                let (drop, _) = alpha
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, w)| if *w < acc.1 { (i, *w) } else { acc });
                bundle.cuts.remove(drop);
                alpha.remove(drop);
            }
            let total: f64 = alpha.iter().sum();
            if total > 0.0 {
                alpha.iter_mut().for_each(|w| *w /= total);
            }
        }
        bundle.push(v, &plan);
        alpha.push(0.0);
        if alpha.iter().all(|w| *w == 0.0) {
            let l = alpha.len();
            alpha.iter_mut().for_each(|w| *w = 1.0 / l as f64);
        }
    }
    if !converged {
        converged = DualityGap::from_parts(upper.value, best.1).relative <= config.epsilon;
    }

    let plan = TransportPlan::from_parts(upper.plan, a.to_vec(), b.to_vec(), marginal_tol);
    let v_plan = displacement_matrix(mu, nu, &plan)?;
    let (omega, f_best) = best;
    let value_squared = omega.inner(v_plan.entries());
    let gap = DualityGap::from_parts(upper.value, f_best).relative.max(0.0);
    let mut result = SrwResult::new(k, config.algorithm, omega, plan, value_squared, gap);
    result.iterations = iterations;
    result.trace = trace;
    result.converged = converged;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srw::f_value;

    struct Lcg(u64);

    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        }

        fn cloud(&mut self, n: usize, d: usize, scale: &[f64]) -> DiscreteMeasure {
            let pts = (0..n * d).map(|i| scale[i % d] * self.next()).collect();
            DiscreteMeasure::uniform(d, pts).unwrap()
        }
    }

    #[test]
    fn dirac_pair_is_squared_distance() {
        let mu = DiscreteMeasure::dirac(&[1.0, -2.0, 0.5]).unwrap();
        let nu = DiscreteMeasure::dirac(&[0.0, 1.0, 0.5]).unwrap();
        for k in 1..=3 {
            let r = srw_bundle(&mu, &nu, &SolverConfig::bundle(k, 1e-9)).unwrap();
            assert!((r.value_squared - 10.0).abs() < 1e-9, "k={k}: {}", r.value_squared);
            assert!(r.converged);
        }
    }

    #[test]
    fn origin_to_signed_basis() {
        let d = 4;
        let mu = DiscreteMeasure::dirac(&[0.0; 4]).unwrap();
        let mut pts = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut p = vec![0.0; d];
                p[i] = s;
                pts.extend(p);
            }
        }
        let nu = DiscreteMeasure::uniform(d, pts).unwrap();
        for k in 1..=d {
            let r = srw_bundle(&mu, &nu, &SolverConfig::bundle(k, 1e-9)).unwrap();
            assert!((r.value_squared - k as f64 / d as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn full_rank_is_wasserstein() {
        let mut rng = Lcg(7);
        let mu = rng.cloud(9, 3, &[1.0, 2.0, 0.5]);
        let nu = rng.cloud(9, 3, &[1.5, 0.3, 1.0]);
        let cost = squared_euclidean_cost(mu.points(), nu.points(), 3).unwrap();
        let w2 = crate::ot::exact_ot(&mu, &nu, &cost).unwrap().1;
        let r = srw_bundle(&mu, &nu, &SolverConfig::bundle(3, 1e-9)).unwrap();
        assert!((r.value_squared - w2).abs() <= 1e-9 * w2);
    }

    #[test]
    fn random_instances_are_certified() {
        let mut rng = Lcg(42);
        for trial in 0..6 {
            let (n, d) = (6 + trial, 3 + trial % 3);
            let mu = rng.cloud(n, d, &[2.0, 1.0, 0.5, 1.5, 0.7]);
            let nu = rng.cloud(n, d, &[0.5, 1.0, 2.0, 0.3, 1.1]);
            for k in 1..d {
                let eps = 1e-6;
                let r = srw_bundle(&mu, &nu, &SolverConfig::bundle(k, eps)).unwrap();
                assert!(r.converged && r.gap <= eps, "trial {trial} k={k}: gap {}", r.gap);
                assert!(r.plan.max_marginal_violation() < 1e-12);

                // f(Ω) ≤ ⟨Ω | V_π⟩ ≤ topk(V_π) for the returned pair.
                let lower = f_value(&mu, &nu, &r.omega, 0.0).unwrap();
                let v = displacement_matrix(&mu, &nu, &r.plan).unwrap();
                let upper = v.top_k_sum(k).unwrap();
                assert!(lower <= r.value_squared * (1.0 + 1e-12));
                assert!(r.value_squared <= upper * (1.0 + 1e-12));
                assert!(upper - lower <= 2.0 * eps * lower, "trial {trial} k={k}");
            }
        }
    }

    #[test]
    fn identical_measures_give_zero() {
        let mut rng = Lcg(3);
        let mu = rng.cloud(5, 2, &[1.0, 1.0]);
        let r = srw_bundle(&mu, &mu, &SolverConfig::bundle(1, 1e-6)).unwrap();
        assert!(r.value_squared.abs() < 1e-12);
    }
}
