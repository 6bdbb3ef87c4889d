use std::io::Write;
use std::path::Path;

use srw_core::linalg::squared_euclidean_cost;
use srw_core::synthetic::{GeneratorKind, GeneratorSpec};
use srw_core::{exact_ot, srw, srw_curve, DiscreteMeasure, SrwResult};

use crate::args::{CurveArgs, DistArgs, GenArgs, GenKind};
use crate::error::{CliError, Outcome, Result};
use crate::io::{self, PlanRecord, ResultFile};

fn read_pair(mu: &Path, nu: &Path) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let mu = io::read_measure(mu)?;
    let nu = io::read_measure(nu)?;
    if mu.dim() != nu.dim() {
        return Err(CliError::input(format!(
            "measures live in different dimensions ({} and {})",
            mu.dim(),
            nu.dim()
        )));
    }
    Ok((mu, nu))
}

/// Writes to `path`, or to standard output when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => io::write_bytes(p, text.as_bytes()),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write { path: "<stdout>".into(), source }),
    }
}

fn log_trace(result: &SrwResult) {
    for (t, rec) in result.trace.iter().enumerate() {
        eprintln!(
            "k={} iter={} objective={} gap={} inner={}",
            result.k,
            t + 1,
            io::fmt_f64(rec.objective),
            io::fmt_f64(rec.gap),
            rec.inner_iterations
        );
    }
}

/// Exact `W²` with `Ω = I`, reported in the same shape as an SRW solve.
fn wasserstein(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(ResultFile, srw_core::TransportPlan)> {
    let d = mu.dim();
    let cost = squared_euclidean_cost(mu.points(), nu.points(), d)?;
    let (plan, w2) = exact_ot(mu, nu, &cost)?;
    let w2 = w2.max(0.0);
    let identity: Vec<Vec<f64>> =
        (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let file = ResultFile {
        value: w2.sqrt(),
        value_squared: w2,
        k: d,
        d,
        algorithm: "wasserstein".into(),
        gamma: 0.0,
        epsilon: 0.0,
        iterations: 0,
        relative_gap: 0.0,
        converged: true,
        seed: None,
        omega: identity,
        plan: None,
    };
    Ok((file, plan))
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(CliError::input(format!("--k must lie in [1, {d}], got {k}")));
    }
    Ok(())
}

pub fn dist(args: &DistArgs) -> Result<Outcome> {
    let (mu, nu) = read_pair(&args.mu, &args.nu)?;
    let (mut file, plan) = if args.wasserstein {
        wasserstein(&mu, &nu)?
    } else {
        let k = args.k.ok_or_else(|| CliError::input("--k is required"))?;
        check_k(k, mu.dim())?;
        let config = args.solver.config(k)?;
        let result = srw(&mu, &nu, &config)?;
        if args.solver.verbose {
            log_trace(&result);
        }
        (ResultFile::from_result(&result, config.gamma, config.epsilon), result.plan)
    };
    file.seed = args.solver.seed;
    if args.dense_plan {
        file.plan = Some(PlanRecord::dense(&plan));
    } else if args.emit_plan {
        file.plan = Some(PlanRecord::sparse(&plan));
    }
    emit(args.out.as_deref(), &file.to_json())?;
    if let Some(path) = &args.segments {
        io::write_bytes(path, io::format_segments(&mu, &nu, &plan).as_bytes())?;
    }
    Ok(Outcome::from_converged(file.converged))
}

pub const CURVE_HEADER: [&str; 5] = ["k", "value_squared", "gap", "iterations", "converged"];

pub fn format_curve(results: &[SrwResult]) -> String {
    let mut out = CURVE_HEADER.join(",");
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            io::fmt_f64(r.value_squared),
            io::fmt_f64(r.gap),
            r.iterations,
            r.converged
        ));
    }
    out
}

pub fn curve(args: &CurveArgs) -> Result<Outcome> {
    let (mu, nu) = read_pair(&args.mu, &args.nu)?;
    // The sweep ignores `k`.
    let config = args.solver.config(1)?;
    let results = srw_curve(&mu, &nu, &config)?;
    if args.solver.verbose {
        results.iter().rev().for_each(log_trace);
    }
    emit(args.out.as_deref(), &format_curve(&results))?;
    Ok(Outcome::from_converged(results.iter().all(|r| r.converged)))
}

pub fn gen_spec(args: &GenArgs) -> GeneratorSpec {
    let kind = match args.kind {
        GenKind::Hypercube => GeneratorKind::HypercubePair,
        GenKind::DiskAnnulus => GeneratorKind::DiskAnnulusPair,
        GenKind::Wishart => GeneratorKind::WishartGaussianPair,
        GenKind::Dirac => GeneratorKind::DiracPair,
        GenKind::Sphere => GeneratorKind::SphereVsDirac,
    };
    GeneratorSpec {
        kstar: args.kstar,
        degrees_of_freedom: args.dof,
        noise_sigma: args.sigma,
        coupled: args.coupled,
        exact_sphere: args.exact,
        ..GeneratorSpec::new(kind, args.d, args.n, args.seed)
    }
}

pub fn gen(args: &GenArgs) -> Result<Outcome> {
    let (mu, nu) = gen_spec(args).generate()?;
    let (mu_path, nu_path) = io::pair_paths(&args.out);
    io::write_measure(&mu_path, &mu)?;
    io::write_measure(&nu_path, &nu)?;
    Ok(Outcome::Converged)
}
