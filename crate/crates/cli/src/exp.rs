//! Reproduction experiments. Each experiment produces a long-format table of
//! per-trial values plus aggregate rows, and a JSON sidecar describing it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use srw_core::linalg::squared_euclidean_cost;
use srw_core::synthetic::{disk_annulus_w2, hypercube_w2, GeneratorSpec};
use srw_core::{exact_ot, srw, srw_curve, DiscreteMeasure, OmegaMatrix, SolverConfig};

use crate::args::{solver_config, AlgoArg, ExpArgs, ExpName};
use crate::error::{CliError, Result};
use crate::io;

pub const CSV_HEADER: [&str; 6] = ["experiment", "series", "x", "trial", "stat", "value"];

/// Aggregates written after the raw rows, in this order.
pub const STATS: [&str; 8] = ["mean", "median", "q10", "q25", "q75", "q90", "min", "max"];

/// Seed of trial `trial` in a run seeded with `seed`. Distinct `(seed, trial)`
/// pairs give distinct seeds for fewer than a million trials.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(trial as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    pub name: String,
    pub description: String,
}

fn axis(name: &str, description: &str) -> Axis {
    Axis { name: name.into(), description: description.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    /// Index into [`Table::series`].
    pub series: usize,
    pub x: f64,
    pub trial: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub experiment: &'static str,
    pub description: String,
    pub x: Axis,
    pub value: Axis,
    pub series: Vec<Axis>,
    pub parameters: BTreeMap<String, Value>,
    pub records: Vec<Record>,
    pub solves: usize,
    pub non_converged: usize,
}

/// Linear interpolation between order statistics of a sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The [`STATS`] of a non-empty sample, in order.
pub fn summarize(values: &[f64]) -> [f64; 8] {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    [
        mean,
        quantile(&s, 0.5),
        quantile(&s, 0.1),
        quantile(&s, 0.25),
        quantile(&s, 0.75),
        quantile(&s, 0.9),
        s[0],
        s[s.len() - 1],
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub series: usize,
    pub x: f64,
    pub stats: [f64; 8],
}

impl Table {
    fn sort(&mut self) {
        self.records.sort_by(|a, b| {
            a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)).then(a.trial.cmp(&b.trial))
        });
    }

    pub fn series_index(&self, name: &str) -> Option<usize> {
        self.series.iter().position(|s| s.name == name)
    }

    /// One aggregate per `(series, x)`, ordered like the raw rows.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for chunk in self.records.chunk_by(|a, b| a.series == b.series && a.x == b.x) {
            let values: Vec<f64> = chunk.iter().map(|r| r.value).collect();
            out.push(Aggregate { series: chunk[0].series, x: chunk[0].x, stats: summarize(&values) });
        }
        out
    }

    /// Aggregate statistic `stat` of `series` against x.
    pub fn stat_curve(&self, series: &str, stat: &str) -> Vec<(f64, f64)> {
        let (Some(s), Some(k)) = (self.series_index(series), STATS.iter().position(|x| *x == stat)) else {
            return Vec::new();
        };
        self.aggregates().into_iter().filter(|a| a.series == s).map(|a| (a.x, a.stats[k])).collect()
    }

    fn write_rows<W: std::io::Write>(&self, w: &mut csv::Writer<W>) -> csv::Result<()> {
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            let (x, trial, v) = (io::fmt_f64(r.x), r.trial.to_string(), io::fmt_f64(r.value));
            w.write_record([self.experiment, &self.series[r.series].name, &x, &trial, "raw", &v])?;
        }
        for a in self.aggregates() {
            let x = io::fmt_f64(a.x);
            for (stat, v) in STATS.iter().zip(a.stats) {
                w.write_record([self.experiment, &self.series[a.series].name, &x, "", stat, &io::fmt_f64(v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        self.write_rows(&mut w).expect("writing to memory cannot fail");
        let bytes = w.into_inner().expect("in-memory writer");
        String::from_utf8(bytes).expect("CSV fields are UTF-8")
    }

    pub fn schema(&self, trials: usize, seed: u64) -> Value {
        let stats: BTreeMap<&str, &str> = [
            ("raw", "value of one trial; `trial` holds its index"),
            ("mean", "mean over trials"),
            ("median", "0.5 quantile over trials"),
            ("q10", "0.1 quantile over trials"),
            ("q25", "0.25 quantile over trials"),
            ("q75", "0.75 quantile over trials"),
            ("q90", "0.9 quantile over trials"),
            ("min", "minimum over trials"),
            ("max", "maximum over trials"),
        ]
        .into_iter()
        .collect();
        json!({
            "schema_version": 1,
            "experiment": self.experiment,
            "description": self.description,
            "csv": format!("{}.csv", self.experiment),
            "columns": [
                {"name": "experiment", "type": "string", "description": "experiment name"},
                {"name": "series", "type": "string", "description": "curve identifier, see `series`"},
                {"name": "x", "type": "float", "description": self.x.description},
                {"name": "trial", "type": "integer", "description": "trial index; empty on aggregate rows"},
                {"name": "stat", "type": "string", "description": "`raw` or an aggregate, see `stats`"},
                {"name": "value", "type": "float", "description": self.value.description},
            ],
            "x": self.x,
            "value": self.value,
            "series": self.series,
            "stats": stats,
            "quantiles": "linear interpolation between order statistics",
            "float_format": "17 significant digits",
            "trials": trials,
            "seed": seed,
            "parameters": self.parameters,
            "solves": self.solves,
            "non_converged": self.non_converged,
        })
    }

    /// Writes `<dir>/<experiment>.csv` and `<dir>/<experiment>.schema.json`.
    pub fn write(&self, dir: &Path, trials: usize, seed: u64) -> Result<(PathBuf, PathBuf)> {
        let csv_path = dir.join(format!("{}.csv", self.experiment));
        let schema_path = dir.join(format!("{}.schema.json", self.experiment));
        io::write_bytes(&csv_path, self.to_csv().as_bytes())?;
        let mut schema = serde_json::to_string_pretty(&self.schema(trials, seed)).expect("plain JSON values");
        schema.push('\n');
        io::write_bytes(&schema_path, schema.as_bytes())?;
        Ok((csv_path, schema_path))
    }
}

/// Worker pool capped by `SRW_THREADS` (machine parallelism otherwise).
fn pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("SRW_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| CliError::input(format!("SRW_THREADS must be a positive integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::input(format!("cannot start worker pool: {e}")))
}

/// Runs `task(0..count)` in parallel; the output is in task order.
fn par_map<T: Send>(count: usize, task: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    pool()?.install(|| (0..count).into_par_iter().map(&task).collect())
}

/// Solver selection after applying the experiment's defaults.
#[derive(Debug, Clone, Copy)]
struct Solver {
    algo: AlgoArg,
    gamma: f64,
    eps: f64,
    max_iter: Option<usize>,
}

impl Solver {
    fn resolve(args: &ExpArgs, algo: AlgoArg, gamma: f64, eps: f64) -> Self {
        let algo = args.algo.unwrap_or(algo);
        let gamma = args.gamma.unwrap_or(if algo == AlgoArg::FrankWolfe { gamma } else { 0.0 });
        Solver { algo, gamma, eps: args.eps.unwrap_or(eps), max_iter: args.max_iter }
    }

    fn config(&self, k: usize) -> Result<SolverConfig> {
        solver_config(self.algo, k, self.gamma, self.eps, None, self.max_iter)
    }

    fn describe(&self, params: &mut BTreeMap<String, Value>) {
        let name = srw_core::Algorithm::from(self.algo).name();
        params.insert("algorithm".into(), json!(name));
        params.insert("gamma".into(), json!(self.gamma));
        params.insert("epsilon".into(), json!(self.eps));
        if let Some(m) = self.max_iter {
            params.insert("max_iter".into(), json!(m));
        }
    }
}

/// Solver settings of the hypercube, disk/annulus and timing experiments.
const FW_GAMMA: f64 = 0.1;
const FW_EPS: f64 = 0.05;
/// The Gaussian experiments compare values across noise levels, so they use
/// exact inner transport with a tighter gap.
const BUNDLE_EPS: f64 = 1e-3;

const DEFAULT_KSTARS: [usize; 4] = [2, 4, 7, 10];
const DEFAULT_NS: [usize; 6] = [25, 50, 100, 250, 500, 1000];
const DEFAULT_DIMS: [usize; 5] = [25, 50, 100, 250, 500];
const DEFAULT_SIGMAS: [f64; 8] = [0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0];

fn exact_w2(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let cost = squared_euclidean_cost(mu.points(), nu.points(), mu.dim())?;
    Ok(exact_ot(mu, nu, &cost)?.1)
}

/// The measure restricted to its first `k` coordinates.
fn leading_coordinates(m: &DiscreteMeasure, k: usize) -> Result<DiscreteMeasure> {
    let d = m.dim();
    let points = m.points().chunks_exact(d).flat_map(|p| p[..k].iter().copied()).collect();
    Ok(DiscreteMeasure::new(k, points, m.weights().to_vec())?)
}

fn check_positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(CliError::input(format!("--{name} must be positive")));
    }
    Ok(v)
}

fn check_kstars(kstars: &[usize], d: usize) -> Result<()> {
    match kstars.iter().find(|&&k| k == 0 || k > d) {
        Some(k) => Err(CliError::input(format!("--kstar {k} must lie in [1, {d}]"))),
        None if kstars.is_empty() => Err(CliError::input("--kstar needs at least one value")),
        None => Ok(()),
    }
}

fn base_table(name: ExpName, description: &str, x: Axis, value: Axis, series: Vec<Axis>) -> Table {
    Table {
        experiment: name.name(),
        description: description.into(),
        x,
        value,
        series,
        parameters: BTreeMap::new(),
        records: Vec::new(),
        solves: 0,
        non_converged: 0,
    }
}

#[derive(Clone, Copy)]
enum Family {
    Hypercube,
    DiskAnnulus,
}

impl Family {
    fn spec(self, d: usize, n: usize, kstar: usize, seed: u64) -> GeneratorSpec {
        match self {
            Family::Hypercube => GeneratorSpec::hypercube(d, n, kstar, seed),
            Family::DiskAnnulus => GeneratorSpec::disk_annulus(d, n, kstar, seed),
        }
    }
}

fn k_curves(args: &ExpArgs, name: ExpName, family: Family, description: &str) -> Result<Table> {
    let d = check_positive("d", args.d.unwrap_or(30))?;
    let n = check_positive("n", args.n.unwrap_or(100))?;
    let kstars = args.kstar.clone().unwrap_or_else(|| DEFAULT_KSTARS.to_vec());
    check_kstars(&kstars, d)?;
    let solver = Solver::resolve(args, AlgoArg::FrankWolfe, FW_GAMMA, FW_EPS);
    let config = solver.config(1)?;
    let trials = args.trials;

    let curves = par_map(kstars.len() * trials, |task| {
        let (s, trial) = (task / trials, task % trials);
        let (mu, nu) = family.spec(d, n, kstars[s], trial_seed(args.seed, trial)).generate()?;
        let curve = srw_curve(&mu, &nu, &config)?;
        Ok((s, trial, curve))
    })?;

    let series = kstars.iter().map(|k| axis(&format!("kstar={k}"), &format!("data with k* = {k}"))).collect();
    let mut table = base_table(
        name,
        description,
        axis("k", "subspace dimension k"),
        axis("value_squared", "SRW_k² between the two empirical measures"),
        series,
    );
    for (s, trial, curve) in curves {
        for r in curve {
            table.solves += 1;
            table.non_converged += usize::from(!r.converged);
            table.records.push(Record { series: s, x: r.k as f64, trial, value: r.value_squared });
        }
    }
    table.parameters.insert("d".into(), json!(d));
    table.parameters.insert("n".into(), json!(n));
    table.parameters.insert("kstar".into(), json!(kstars));
    solver.describe(&mut table.parameters);
    Ok(table)
}

/// One estimation trial at sample size `n`.
struct Estimate {
    value_squared: f64,
    subspace_error: f64,
    /// Exact `W²` of the empirical measures restricted to the first `k*`
    /// coordinates (disk/annulus only).
    w2_reference: Option<f64>,
    converged: bool,
}

fn estimation(args: &ExpArgs, name: ExpName, family: Family, description: &str) -> Result<Table> {
    let d = check_positive("d", args.d.unwrap_or(30))?;
    let kstars = args.kstar.clone().unwrap_or_else(|| vec![2]);
    check_kstars(&kstars, d)?;
    if kstars.len() != 1 {
        return Err(CliError::input("this experiment takes a single --kstar"));
    }
    let kstar = kstars[0];
    let k = args.k.unwrap_or(kstar);
    if k == 0 || k > d {
        return Err(CliError::input(format!("--k must lie in [1, {d}]")));
    }
    let ns = args.ns.clone().unwrap_or_else(|| DEFAULT_NS.to_vec());
    if ns.is_empty() || ns.contains(&0) {
        return Err(CliError::input("--ns must be a list of positive sizes"));
    }
    let solver = Solver::resolve(args, AlgoArg::FrankWolfe, FW_GAMMA, FW_EPS);
    let config = solver.config(k)?;
    let target = OmegaMatrix::coordinate_projector(d, kstar)?;
    let with_reference = matches!(family, Family::DiskAnnulus);
    let trials = args.trials;

    let estimates = par_map(ns.len() * trials, |task| {
        let (i, trial) = (task / trials, task % trials);
        let (mu, nu) = family.spec(d, ns[i], kstar, trial_seed(args.seed, trial)).generate()?;
        let r = srw(&mu, &nu, &config)?;
        let w2_reference = if with_reference {
            Some(exact_w2(&leading_coordinates(&mu, kstar)?, &leading_coordinates(&nu, kstar)?)?)
        } else {
            None
        };
        let est = Estimate {
            value_squared: r.value_squared,
            subspace_error: r.omega.frobenius_distance(&target),
            w2_reference,
            converged: r.converged,
        };
        Ok((ns[i], trial, est))
    })?;

    let population = match family {
        Family::Hypercube => hypercube_w2(kstar),
        Family::DiskAnnulus => disk_annulus_w2(),
    };
    let (value_axis, series) = match name {
        ExpName::HypercubeError => (
            axis("error", "|W²(μ, ν) − SRW_k²(μ̂, ν̂)| with W² = 4k*"),
            vec![axis("srw", "SRW_k² estimation error")],
        ),
        ExpName::HypercubeSubspace => (
            axis("subspace_error", "‖Ω* − Ω̂‖_F with Ω* the projector onto the first k* coordinates"),
            vec![axis("srw", "subspace estimation error")],
        ),
        _ => (
            axis("value", "depends on the series"),
            vec![
                axis("srw_error", "|W²(μ, ν) − SRW_k²(μ̂, ν̂)| with the closed-form population W²"),
                axis("subspace_error", "‖Ω* − Ω̂‖_F with Ω* the projector onto the first k* coordinates"),
                axis("w2_reference", "exact W² of the samples restricted to the first k* coordinates"),
            ],
        ),
    };
    let mut table = base_table(name, description, axis("n", "points per empirical measure"), value_axis, series);
    for (n, trial, est) in estimates {
        table.solves += 1;
        table.non_converged += usize::from(!est.converged);
        let x = n as f64;
        let error = (population - est.value_squared).abs();
        let mut push = |series: usize, value: f64| table.records.push(Record { series, x, trial, value });
        match name {
            ExpName::HypercubeError => push(0, error),
            ExpName::HypercubeSubspace => push(0, est.subspace_error),
            _ => {
                push(0, error);
                push(1, est.subspace_error);
                push(2, est.w2_reference.expect("computed for this family"));
            }
        }
    }
    table.parameters.insert("d".into(), json!(d));
    table.parameters.insert("kstar".into(), json!(kstar));
    table.parameters.insert("k".into(), json!(k));
    table.parameters.insert("ns".into(), json!(ns));
    table.parameters.insert("population_w2".into(), json!(population));
    solver.describe(&mut table.parameters);
    Ok(table)
}

struct WishartSetup {
    d: usize,
    n: usize,
    dof: usize,
    solver: Solver,
}

impl WishartSetup {
    fn from_args(args: &ExpArgs) -> Result<Self> {
        let setup = WishartSetup {
            d: check_positive("d", args.d.unwrap_or(20))?,
            n: check_positive("n", args.n.unwrap_or(100))?,
            dof: check_positive("dof", args.dof.unwrap_or(5))?,
            solver: Solver::resolve(args, AlgoArg::Bundle, 0.0, BUNDLE_EPS),
        };
        Ok(setup)
    }

    fn pair(&self, sigma: f64, seed: u64) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        Ok(GeneratorSpec::wishart(self.d, self.n, self.dof, sigma, seed).generate()?)
    }

    fn describe(&self, params: &mut BTreeMap<String, Value>) {
        params.insert("d".into(), json!(self.d));
        params.insert("n".into(), json!(self.n));
        params.insert("dof".into(), json!(self.dof));
        self.solver.describe(params);
    }
}

fn check_sigmas(sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(CliError::input("--sigma must be a list of non-negative noise levels"));
    }
    Ok(())
}

fn gaussians_curve(args: &ExpArgs) -> Result<Table> {
    let setup = WishartSetup::from_args(args)?;
    let noisy_sigma = match args.sigma.as_deref() {
        None => 1.0,
        Some([s]) => *s,
        Some(_) => return Err(CliError::input("this experiment takes a single --sigma")),
    };
    check_sigmas(&[noisy_sigma])?;
    let config = setup.solver.config(1)?;
    let sigmas = [0.0, noisy_sigma];
    let trials = args.trials;

    let curves = par_map(2 * trials, |task| {
        let (s, trial) = (task / trials, task % trials);
        let (mu, nu) = setup.pair(sigmas[s], trial_seed(args.seed, trial))?;
        let w2 = exact_w2(&mu, &nu)?;
        Ok((s, trial, w2, srw_curve(&mu, &nu, &config)?))
    })?;

    let mut table = base_table(
        ExpName::GaussiansCurve,
        "SRW_l² / W² against l for samples of two Gaussians with Wishart covariances",
        axis("l", "subspace dimension"),
        axis("ratio", "SRW_l²(μ̂, ν̂) / W²(μ̂, ν̂)"),
        vec![
            axis("clean", "noise-free samples"),
            axis("noisy", &format!("samples plus N(0, σ² I) noise with σ = {noisy_sigma}")),
        ],
    );
    for (s, trial, w2, curve) in curves {
        for r in curve {
            table.solves += 1;
            table.non_converged += usize::from(!r.converged);
            let value = if w2 > 0.0 { r.value_squared / w2 } else { 1.0 };
            table.records.push(Record { series: s, x: r.k as f64, trial, value });
        }
    }
    table.parameters.insert("noisy_sigma".into(), json!(noisy_sigma));
    setup.describe(&mut table.parameters);
    Ok(table)
}

fn noise_robustness(args: &ExpArgs) -> Result<Table> {
    let setup = WishartSetup::from_args(args)?;
    let k = args.k.unwrap_or(5);
    if k == 0 || k > setup.d {
        return Err(CliError::input(format!("--k must lie in [1, {}]", setup.d)));
    }
    let sigmas = args.sigma.clone().unwrap_or_else(|| DEFAULT_SIGMAS.to_vec());
    check_sigmas(&sigmas)?;
    let config = setup.solver.config(k)?;
    let trials = args.trials;

    // Index 0 is the noise-free reference of each trial.
    let levels: Vec<f64> = std::iter::once(0.0).chain(sigmas.iter().copied()).collect();
    let values = par_map(levels.len() * trials, |task| {
        let (s, trial) = (task / trials, task % trials);
        let (mu, nu) = setup.pair(levels[s], trial_seed(args.seed, trial))?;
        let r = srw(&mu, &nu, &config)?;
        Ok((r.value_squared, exact_w2(&mu, &nu)?, r.converged))
    })?;

    let mut table = base_table(
        ExpName::NoiseRobustness,
        "relative change of SRW_k² and W² when isotropic noise of level σ is added to the samples",
        axis("sigma", "noise standard deviation σ"),
        axis("relative_error", "|D(μ̂_σ, ν̂_σ) − D(μ̂_0, ν̂_0)| / D(μ̂_0, ν̂_0)"),
        vec![axis("srw", "D = SRW_k²"), axis("w2", "D = W²")],
    );
    let rel = |v: f64, base: f64| if base > 0.0 { (v - base).abs() / base } else { (v - base).abs() };
    for (s, &sigma) in sigmas.iter().enumerate() {
        for trial in 0..trials {
            let (srw0, w0, _) = values[trial];
            let (srw_s, w_s, converged) = values[(s + 1) * trials + trial];
            table.solves += 1;
            table.non_converged += usize::from(!converged);
            table.records.push(Record { series: 0, x: sigma, trial, value: rel(srw_s, srw0) });
            table.records.push(Record { series: 1, x: sigma, trial, value: rel(w_s, w0) });
        }
    }
    table.parameters.insert("k".into(), json!(k));
    table.parameters.insert("sigmas".into(), json!(sigmas));
    setup.describe(&mut table.parameters);
    Ok(table)
}

fn timing(args: &ExpArgs) -> Result<Table> {
    let n = check_positive("n", args.n.unwrap_or(100))?;
    let dims = args.dims.clone().unwrap_or_else(|| DEFAULT_DIMS.to_vec());
    let kstars = args.kstar.clone().unwrap_or_else(|| vec![2]);
    let kstar = match kstars.as_slice() {
        [k] => *k,
        _ => return Err(CliError::input("this experiment takes a single --kstar")),
    };
    for &d in &dims {
        check_kstars(&[kstar], d)?;
    }
    let k = args.k.unwrap_or(kstar);
    let solver = Solver::resolve(args, AlgoArg::FrankWolfe, FW_GAMMA, FW_EPS);

    let mut table = base_table(
        ExpName::Timing,
        "wall-clock time of one SRW_k and one exact W computation against the dimension (CPU, one worker)",
        axis("d", "ambient dimension"),
        axis("seconds", "wall-clock seconds"),
        vec![axis("srw", "SRW_k solve"), axis("w2", "exact W² solve")],
    );
    // Sequential on purpose: concurrent trials would distort the timings.
    for &d in &dims {
        if k == 0 || k > d {
            return Err(CliError::input(format!("--k must lie in [1, {d}]")));
        }
        let config = solver.config(k)?;
        for trial in 0..args.trials {
            let (mu, nu) = GeneratorSpec::hypercube(d, n, kstar, trial_seed(args.seed, trial)).generate()?;
            let start = Instant::now();
            let r = srw(&mu, &nu, &config)?;
            let srw_seconds = start.elapsed().as_secs_f64();
            let start = Instant::now();
            exact_w2(&mu, &nu)?;
            let w2_seconds = start.elapsed().as_secs_f64();
            table.solves += 1;
            table.non_converged += usize::from(!r.converged);
            let x = d as f64;
            table.records.push(Record { series: 0, x, trial, value: srw_seconds });
            table.records.push(Record { series: 1, x, trial, value: w2_seconds });
        }
    }
    table.parameters.insert("n".into(), json!(n));
    table.parameters.insert("kstar".into(), json!(kstar));
    table.parameters.insert("k".into(), json!(k));
    table.parameters.insert("dims".into(), json!(dims));
    solver.describe(&mut table.parameters);
    Ok(table)
}

/// Runs an experiment in memory; rows are sorted by series, x and trial.
pub fn run(args: &ExpArgs) -> Result<Table> {
    check_positive("trials", args.trials)?;
    let mut table = match args.name {
        ExpName::HypercubeCurve => k_curves(
            args,
            args.name,
            Family::Hypercube,
            "SRW_k² against k for fragmented-hypercube samples with several intrinsic dimensions k*",
        ),
        ExpName::DiskAnnulusCurve => k_curves(
            args,
            args.name,
            Family::DiskAnnulus,
            "SRW_k² against k for disk-to-annulus samples with several intrinsic dimensions k*",
        ),
        ExpName::HypercubeError => estimation(
            args,
            args.name,
            Family::Hypercube,
            "SRW_k² estimation error against the number of samples, fragmented hypercube",
        ),
        ExpName::HypercubeSubspace => estimation(
            args,
            args.name,
            Family::Hypercube,
            "subspace estimation error against the number of samples, fragmented hypercube",
        ),
        ExpName::DiskAnnulusError => estimation(
            args,
            args.name,
            Family::DiskAnnulus,
            "SRW_k² and subspace estimation errors against the number of samples, disk to annulus",
        ),
        ExpName::GaussiansCurve => gaussians_curve(args),
        ExpName::NoiseRobustness => noise_robustness(args),
        ExpName::Timing => timing(args),
    }?;
    table.sort();
    Ok(table)
}
