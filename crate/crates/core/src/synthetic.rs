//! Seedable generators for the synthetic benchmark pairs.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, with one independent
//! stream per role (first measure, second measure, auxiliary draws such as
//! covariance factors, and per-measure noise), so a generator's output depends
//! only on its [`GeneratorSpec`] and is identical across platforms.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;
use crate::ot::DiscreteMeasure;

/// Population `W²` between the unit disk and the radius-[2, 3] annulus:
/// `14/5 + 8/(5√5) · log((3 + √5)/2)`.
pub fn disk_annulus_w2() -> f64 {
    let s5 = math::sqrt(5.0);
    14.0 / 5.0 + 8.0 / (5.0 * s5) * math::ln((3.0 + s5) / 2.0)
}

/// Population `W²` of the fragmented hypercube pair, `4 k*`.
pub fn hypercube_w2(kstar: usize) -> f64 {
    4.0 * kstar as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    /// Uniform hypercube versus its image under the fragmenting map.
    HypercubePair,
    /// Uniform `k*`-disk versus `k*`-annulus, padded with uniform coordinates.
    DiskAnnulusPair,
    /// Samples of two centred Gaussians with Wishart covariances.
    WishartGaussianPair,
    /// Two single-atom measures.
    DiracPair,
    /// A Dirac at the origin versus (a sample of) the unit sphere.
    SphereVsDirac,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::HypercubePair => "hypercube",
            GeneratorKind::DiskAnnulusPair => "disk-annulus",
            GeneratorKind::WishartGaussianPair => "wishart",
            GeneratorKind::DiracPair => "dirac",
            GeneratorKind::SphereVsDirac => "sphere",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub d: usize,
    pub n: usize,
    pub kstar: usize,
    pub degrees_of_freedom: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Hypercube and disk/annulus: push the first measure's atoms through the
    /// transport map instead of sampling the second measure independently.
    pub coupled: bool,
    /// Sphere: use the `2d` signed basis vectors instead of `n` samples.
    pub exact_sphere: bool,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, d: usize, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            d,
            n,
            kstar: 2.min(d),
            degrees_of_freedom: 5,
            noise_sigma: 0.0,
            seed,
            coupled: false,
            exact_sphere: false,
        }
    }

    pub fn hypercube(d: usize, n: usize, kstar: usize, seed: u64) -> Self {
        GeneratorSpec { kstar, ..Self::new(GeneratorKind::HypercubePair, d, n, seed) }
    }

    pub fn disk_annulus(d: usize, n: usize, kstar: usize, seed: u64) -> Self {
        GeneratorSpec { kstar, ..Self::new(GeneratorKind::DiskAnnulusPair, d, n, seed) }
    }

    pub fn wishart(d: usize, n: usize, dof: usize, noise_sigma: f64, seed: u64) -> Self {
        GeneratorSpec {
            degrees_of_freedom: dof,
            noise_sigma,
            ..Self::new(GeneratorKind::WishartGaussianPair, d, n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d must be positive"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if matches!(self.kind, GeneratorKind::HypercubePair | GeneratorKind::DiskAnnulusPair)
            && (self.kstar == 0 || self.kstar > self.d)
        {
            return Err(Error::invalid("kstar must lie in [1, d]"));
        }
        if self.kind == GeneratorKind::WishartGaussianPair && self.degrees_of_freedom == 0 {
            return Err(Error::invalid("degrees of freedom must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        Ok(())
    }

    /// Generates the measure pair described by this spec.
    pub fn generate(&self) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
        self.validate()?;
        match self.kind {
            GeneratorKind::HypercubePair => gen_hypercube_pair(self),
            GeneratorKind::DiskAnnulusPair => gen_disk_annulus_pair(self),
            GeneratorKind::WishartGaussianPair => gen_wishart_gaussian_pair(self),
            GeneratorKind::DiracPair => gen_dirac_pair(self),
            GeneratorKind::SphereVsDirac => gen_sphere_vs_dirac(self),
        }
    }
}

#[derive(Clone, Copy)]
enum Stream {
    First = 1,
    Second = 2,
    Aux = 3,
    NoiseFirst = 4,
    NoiseSecond = 5,
}

fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

/// Uniform on `[0, 1)` with 53 random bits.
fn unit(r: &mut ChaCha8Rng) -> f64 {
    (r.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

/// The fragmenting map `x ↦ x + 2 sign(x) ⊙ (e₁ + … + e_{k*})`, with
/// `sign(0) = +1`.
pub fn hypercube_map(x: &[f64], kstar: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| if i < kstar { v + if v < 0.0 { -2.0 } else { 2.0 } } else { v })
        .collect()
}

fn uniform_cube(r: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| 2.0 * unit(r) - 1.0).collect()
}

/// `μ̂`: `n` uniform samples of `[−1, 1]ᵈ`. `ν̂`: `n` independent samples of
/// `T(X)` with `X` uniform (or `T` applied to `μ̂`'s atoms when `coupled`).
pub fn gen_hypercube_pair(spec: &GeneratorSpec) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let first = uniform_cube(&mut rng(spec.seed, Stream::First), n, d);
    let source = if spec.coupled { first.clone() } else { uniform_cube(&mut rng(spec.seed, Stream::Second), n, d) };
    let second: Vec<f64> = source.chunks_exact(d).flat_map(|x| hypercube_map(x, spec.kstar)).collect();
    Ok((DiscreteMeasure::uniform(d, first)?, DiscreteMeasure::uniform(d, second)?))
}

/// Radial profile of the disk → annulus map in `k` dimensions:
/// `r ↦ (2^k + (3^k − 2^k) r^k)^{1/k}` (for `k = 2`, `√(4 + 5r²)`).
fn annulus_radius_from_disk(r: f64, k: usize) -> f64 {
    let k_f = k as f64;
    let lo = libm::pow(2.0, k_f);
    let hi = libm::pow(3.0, k_f);
    libm::pow(lo + (hi - lo) * libm::pow(r, k_f), 1.0 / k_f)
}

/// Uniform direction in `ℝᵏ`; polar angle for `k = 2`.
fn direction(r: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    if k == 2 {
        let theta = 2.0 * core::f64::consts::PI * unit(r);
        return vec![math::cos(theta), math::sin(theta)];
    }
    loop {
        let v: Vec<f64> = (0..k).map(|_| normal(r)).collect();
        let norm = math::sqrt(v.iter().map(|x| x * x).sum());
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn disk_atoms(r: &mut ChaCha8Rng, n: usize, d: usize, kstar: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n * d);
    for _ in 0..n {
        let radius = libm::pow(unit(r), 1.0 / kstar as f64);
        let u = direction(r, kstar);
        pts.extend(u.iter().map(|c| radius * c));
        pts.extend((kstar..d).map(|_| unit(r)));
    }
    pts
}

fn to_annulus(disk: &[f64], d: usize, kstar: usize) -> Vec<f64> {
    disk.chunks_exact(d)
        .flat_map(|p| {
            let r = math::sqrt(p[..kstar].iter().map(|x| x * x).sum());
            let scale = if r > 0.0 { annulus_radius_from_disk(r, kstar) / r } else { 0.0 };
            let mut q: Vec<f64> = p[..kstar].iter().map(|x| x * scale).collect();
            if r == 0.0 {
                q[0] = 2.0;
            }
            q.extend_from_slice(&p[kstar..]);
            q
        })
        .collect()
}

/// First `k*` coordinates uniform on the unit disk (`μ̂`) or on the annulus
/// `2 ≤ ‖·‖ ≤ 3` (`ν̂`), radii drawn by inverting the radial CDF; the remaining
/// coordinates are uniform on `[0, 1]` for both measures.
pub fn gen_disk_annulus_pair(spec: &GeneratorSpec) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    spec.validate()?;
    let (n, d, k) = (spec.n, spec.d, spec.kstar);
    let first = disk_atoms(&mut rng(spec.seed, Stream::First), n, d, k);
    let second = if spec.coupled {
        to_annulus(&first, d, k)
    } else {
        to_annulus(&disk_atoms(&mut rng(spec.seed, Stream::Second), n, d, k), d, k)
    };
    Ok((DiscreteMeasure::uniform(d, first)?, DiscreteMeasure::uniform(d, second)?))
}

/// `d × dof` factor `A` with standard normal entries; `Σ = A Aᵀ` is Wishart.
pub fn wishart_factor(r: &mut ChaCha8Rng, d: usize, dof: usize) -> Vec<f64> {
    (0..d * dof).map(|_| normal(r)).collect()
}

fn gaussian_atoms(r: &mut ChaCha8Rng, factor: &[f64], n: usize, d: usize, dof: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n * d);
    let mut z = vec![0.0; dof];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = normal(r));
        for i in 0..d {
            let row = &factor[i * dof..(i + 1) * dof];
            pts.push(row.iter().zip(&z).map(|(a, b)| a * b).sum());
        }
    }
    pts
}

fn add_noise(pts: &mut [f64], r: &mut ChaCha8Rng, sigma: f64) {
    // Always draw, so the base atoms do not depend on sigma.
    for p in pts.iter_mut() {
        let e = normal(r);
        *p += sigma * e;
    }
}

/// `n` samples each of `N(0, A₁A₁ᵀ)` and `N(0, A₂A₂ᵀ)` with `A_i` independent
/// `d × dof` standard normal factors, plus optional isotropic noise
/// `σ N(0, I)` per atom.
pub fn gen_wishart_gaussian_pair(spec: &GeneratorSpec) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    spec.validate()?;
    let (n, d, dof) = (spec.n, spec.d, spec.degrees_of_freedom);
    let mut aux = rng(spec.seed, Stream::Aux);
    let a1 = wishart_factor(&mut aux, d, dof);
    let a2 = wishart_factor(&mut aux, d, dof);
    let mut first = gaussian_atoms(&mut rng(spec.seed, Stream::First), &a1, n, d, dof);
    let mut second = gaussian_atoms(&mut rng(spec.seed, Stream::Second), &a2, n, d, dof);
    if spec.noise_sigma > 0.0 {
        add_noise(&mut first, &mut rng(spec.seed, Stream::NoiseFirst), spec.noise_sigma);
        add_noise(&mut second, &mut rng(spec.seed, Stream::NoiseSecond), spec.noise_sigma);
    }
    Ok((DiscreteMeasure::uniform(d, first)?, DiscreteMeasure::uniform(d, second)?))
}

/// Two Diracs at standard normal points.
pub fn gen_dirac_pair(spec: &GeneratorSpec) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    spec.validate()?;
    let x: Vec<f64> = {
        let mut r = rng(spec.seed, Stream::First);
        (0..spec.d).map(|_| normal(&mut r)).collect()
    };
    let y: Vec<f64> = {
        let mut r = rng(spec.seed, Stream::Second);
        (0..spec.d).map(|_| normal(&mut r)).collect()
    };
    Ok((DiscreteMeasure::dirac(&x)?, DiscreteMeasure::dirac(&y)?))
}

/// `δ₀` versus the signed basis `{±e_i}` (weights `1/(2d)`) when
/// `exact_sphere`, otherwise versus `n` normalised Gaussian samples.
pub fn gen_sphere_vs_dirac(spec: &GeneratorSpec) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    spec.validate()?;
    let d = spec.d;
    let origin = DiscreteMeasure::dirac(&vec![0.0; d])?;
    let sphere = if spec.exact_sphere {
        let mut pts = Vec::with_capacity(2 * d * d);
        for i in 0..d {
            for s in [1.0, -1.0] {
                pts.extend((0..d).map(|j| if i == j { s } else { 0.0 }));
            }
        }
        DiscreteMeasure::uniform(d, pts)?
    } else {
        let mut r = rng(spec.seed, Stream::Second);
        let pts: Vec<f64> = (0..spec.n).flat_map(|_| direction(&mut r, d)).collect();
        DiscreteMeasure::uniform(d, pts)?
    };
    Ok((origin, sphere))
}
