use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srw_core::{Algorithm, SolverConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "srw", version, about = "Subspace robust Wasserstein distances between point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance between two measure files.
    Dist(DistArgs),
    /// SRW_k² for every k = 1..d.
    Curve(CurveArgs),
    /// Write a synthetic measure pair.
    Gen(GenArgs),
    /// Run one of the reproduction experiments.
    Exp(ExpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Supergradient,
    #[value(name = "fw")]
    FrankWolfe,
    Bundle,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Supergradient => Algorithm::Supergradient,
            AlgoArg::FrankWolfe => Algorithm::FrankWolfe,
            AlgoArg::Bundle => Algorithm::Bundle,
        }
    }
}

/// Solver flags shared by `dist` and `curve`.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "fw")]
    pub algo: AlgoArg,
    /// Entropic regularisation [default: 0.1 for fw, 0 (exact) otherwise].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Relative duality gap at which the solver stops.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Base step of the supergradient method.
    #[arg(long)]
    pub tau0: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Recorded in the output; every solver is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Log every outer iteration to standard error.
    #[arg(long)]
    pub verbose: bool,
}

impl SolverArgs {
    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(match self.algo {
            AlgoArg::FrankWolfe => 0.1,
            _ => 0.0,
        })
    }

    pub fn config(&self, k: usize) -> Result<SolverConfig> {
        solver_config(self.algo, k, self.gamma(), self.eps, self.tau0, self.max_iter)
    }
}

pub fn solver_config(
    algo: AlgoArg,
    k: usize,
    gamma: f64,
    eps: f64,
    tau0: Option<f64>,
    max_iter: Option<usize>,
) -> Result<SolverConfig> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::input("--eps must be positive"));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(CliError::input("--gamma must be non-negative"));
    }
    let mut config = match algo {
        AlgoArg::FrankWolfe => SolverConfig::frank_wolfe(k, gamma, eps),
        AlgoArg::Supergradient => SolverConfig { gamma, ..SolverConfig::supergradient(k, eps) },
        AlgoArg::Bundle => SolverConfig { gamma, ..SolverConfig::bundle(k, eps) },
    };
    config.tau0 = tau0;
    if let Some(m) = max_iter {
        if m == 0 {
            return Err(CliError::input("--max-iter must be positive"));
        }
        config.max_iter = m;
    }
    Ok(config)
}

#[derive(Debug, Clone, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    /// Subspace dimension; required unless --wasserstein is given.
    #[arg(long, required_unless_present = "wasserstein")]
    pub k: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Plain Wasserstein distance with exact transport.
    #[arg(long)]
    pub wasserstein: bool,
    /// Result file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the transport plan (sparse) in the result.
    #[arg(long)]
    pub emit_plan: bool,
    /// Store the plan densely; implies --emit-plan.
    #[arg(long)]
    pub dense_plan: bool,
    /// Write the plan as a segment list to this CSV file.
    #[arg(long)]
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV output; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Hypercube,
    DiskAnnulus,
    Wishart,
    Dirac,
    Sphere,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub kstar: usize,
    /// Wishart degrees of freedom.
    #[arg(long, default_value_t = 5)]
    pub dof: usize,
    /// Standard deviation of the isotropic noise added to Wishart samples.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Push the first sample through the transport map for the second.
    #[arg(long)]
    pub coupled: bool,
    /// Sphere: the 2d signed basis vectors instead of n samples.
    #[arg(long)]
    pub exact: bool,
    /// Output prefix; writes <out>_mu.csv and <out>_nu.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpName {
    HypercubeCurve,
    HypercubeError,
    HypercubeSubspace,
    GaussiansCurve,
    NoiseRobustness,
    Timing,
    DiskAnnulusCurve,
    DiskAnnulusError,
}

impl ExpName {
    pub fn name(self) -> &'static str {
        match self {
            ExpName::HypercubeCurve => "hypercube-curve",
            ExpName::HypercubeError => "hypercube-error",
            ExpName::HypercubeSubspace => "hypercube-subspace",
            ExpName::GaussiansCurve => "gaussians-curve",
            ExpName::NoiseRobustness => "noise-robustness",
            ExpName::Timing => "timing",
            ExpName::DiskAnnulusCurve => "disk-annulus-curve",
            ExpName::DiskAnnulusError => "disk-annulus-error",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExpArgs {
    #[arg(value_enum)]
    pub name: ExpName,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Ambient dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Points per measure.
    #[arg(long)]
    pub n: Option<usize>,
    /// Subspace dimension of the solve.
    #[arg(long)]
    pub k: Option<usize>,
    /// Intrinsic dimension(s) of the data, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub kstar: Option<Vec<usize>>,
    #[arg(long)]
    pub dof: Option<usize>,
    /// Noise level(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Sample sizes for the estimation-error experiments, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    /// Dimensions for the timing experiment, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}
