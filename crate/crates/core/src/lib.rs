//! Subspace robust Wasserstein (SRW) distances between discrete measures.
//!
//! The squared SRW distance of order `k` between two discrete measures is the
//! smallest, over all couplings `π`, of the sum of the `k` largest eigenvalues
//! of the displacement second-moment matrix `V_π = Σ π_ij (x_i − y_j)(x_i − y_j)ᵀ`.
//! Equivalently it is the largest, over the spectrahedron
//! `{0 ⪯ Ω ⪯ I, tr Ω = k}`, of the optimal transport cost under the
//! Mahalanobis ground cost `(x − y)ᵀ Ω (x − y)`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerics:
//!
//! * [`linalg`]: symmetric eigendecomposition, spectrahedron projection,
//!   Mahalanobis cost matrices.
//! * [`ot`]: exact (min-cost flow) and log-domain Sinkhorn transport solvers,
//!   plus a permutation brute-force oracle.
//! * [`srw`]: projected supergradient and Frank–Wolfe solvers, duality gap,
//!   descending `k` sweeps, geodesics, and a planar PRW angle sweep.
//! * [`synthetic`]: seedable generators for the synthetic benchmark pairs.
//!
//! File formats, the command-line front end and the experiment drivers live in
//! the `srw-cli` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod linalg;
mod math;
pub mod ot;
pub mod srw;
pub mod synthetic;

pub use error::{Error, Result};
pub use linalg::{eig_sym, mahalanobis_cost, project_spectrahedron, top_k_projector};
pub use linalg::{EigenDecomposition, OmegaMatrix, SymMatrix};
pub use ot::{brute_force_ot, exact_ot, sinkhorn, sinkhorn_with, CostMatrix, DiscreteMeasure};
pub use ot::{SinkhornOptions, SinkhornOutput, SinkhornState, TransportPlan};
pub use srw::{
    displacement_matrix, duality_gap, f_value, geodesic, init_omega, prw_2d_sweep, srw,
    srw_bundle, srw_curve, srw_frank_wolfe, srw_supergradient, Algorithm, DisplacementMatrix, DualityGap,
    IterationRecord, PrwSweep, SolverConfig, SrwResult,
};
