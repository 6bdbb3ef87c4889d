//! Dense symmetric linear algebra: eigendecomposition, projection onto the
//! spectrahedron `{0 ⪯ Ω ⪯ I, tr Ω = k}`, and Mahalanobis cost matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math;

/// Eigenvalues of an [`OmegaMatrix`] may leave `[0, 1]` by at most this much.
pub const OMEGA_EIG_TOL: f64 = 1e-8;
/// Allowed deviation of `tr Ω` from `k`.
pub const OMEGA_TRACE_TOL: f64 = 1e-8;

/// Dense row-major `rows × cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Multiplies every entry by `c`.
    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// Largest entry (or `-inf` when empty).
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Frobenius inner product `Σ a_ij b_ij`.
    pub fn dot(&self, other: &Matrix) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Symmetric `d × d` matrix. Both triangles are stored and kept bitwise equal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle `i ≤ j`.
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    /// Builds a matrix from a row-major `d × d` slice, reading only its upper
    /// triangle.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(Self::from_upper(dim, |i, j| entries[i * dim + j]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `⟨A | B⟩ = tr(AB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.inner(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, c: f64, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + c * b).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, data: self.data.iter().map(|a| c * a).collect() }
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        self.add_scaled(-1.0, other).frobenius_norm()
    }

    /// `Σ_l w_l u_l u_lᵀ` for the given unit vectors; rows of `vectors` are the
    /// `u_l`.
    fn from_spectral(dim: usize, weights: &[f64], vectors: &[f64]) -> SymMatrix {
        let mut m = SymMatrix::zeros(dim);
        for (l, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let u = &vectors[l * dim..(l + 1) * dim];
            for i in 0..dim {
                let wi = w * u[i];
                if wi == 0.0 {
                    continue;
                }
                let row = &mut m.data[i * dim..(i + 1) * dim];
                for j in i..dim {
                    row[j] += wi * u[j];
                }
            }
        }
        m.mirror_upper();
        m
    }

    fn mirror_upper(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                self.data[j * d + i] = self.data[i * d + j];
            }
        }
    }
}

/// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
///
/// Each eigenvector has its largest-magnitude component positive (first such
/// component on ties), which makes the output deterministic for simple
/// spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    dim: usize,
    values: Vec<f64>,
    /// Row `l` holds the unit eigenvector paired with `values[l]`.
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues `λ₁ ≥ … ≥ λ_d`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Unit eigenvector paired with `eigenvalues()[l]`.
    pub fn eigenvector(&self, l: usize) -> &[f64] {
        &self.vectors[l * self.dim..(l + 1) * self.dim]
    }

    /// The orthogonal matrix `U` whose column `l` is `eigenvector(l)`.
    pub fn eigenvector_matrix(&self) -> Matrix {
        Matrix::from_fn(self.dim, self.dim, |i, l| self.vectors[l * self.dim + i])
    }

    /// `λ₁ + … + λ_k`.
    pub fn top_k_sum(&self, k: usize) -> f64 {
        self.values[..k.min(self.dim)].iter().sum()
    }

    /// `U diag(w) Uᵀ`.
    pub fn recompose(&self, weights: &[f64]) -> SymMatrix {
        SymMatrix::from_spectral(self.dim, weights, &self.vectors)
    }

    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        self.recompose(&self.values)
    }
}

/// Symmetric eigendecomposition by Householder tridiagonalisation followed by
/// implicit QL iterations.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = a.dim;
    if n == 0 {
        return Ok(EigenDecomposition { dim: 0, values: Vec::new(), vectors: Vec::new() });
    }
    let mut v = a.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    // QL rotates columns of V; work on the transpose so those are rows.
    let mut vt = Matrix::from_vec(n, n, v).expect("square").transpose().data;
    tridiagonal_ql(n, &mut d, &mut e, &mut vt);
    Ok(finish(n, d, vt))
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below
/// `1e-12 · ‖A‖_F`, or after 100 sweeps. Slower than [`eig_sym`] for large
/// `d` but independent of it, which makes it a useful cross-check.
pub fn eig_sym_jacobi(a: &SymMatrix) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let n = a.dim;
    let mut m = a.data.clone();
    let mut vt = SymMatrix::identity(n).data;
    let threshold = 1e-12 * a.frobenius_norm();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
        }
        if math::sqrt(off) <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::hypot(theta, 1.0));
                let c = 1.0 / math::hypot(t, 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                // Eigenvectors are stored as rows, so the column update of V
                // becomes a row update here.
                for k in 0..n {
                    let vp = vt[p * n + k];
                    let vq = vt[q * n + k];
                    vt[p * n + k] = c * vp - s * vq;
                    vt[q * n + k] = s * vp + c * vq;
                }
            }
        }
    }
    let d = (0..n).map(|i| m[i * n + i]).collect();
    Ok(finish(n, d, vt))
}

/// Sorts eigenpairs descending and normalises eigenvector signs. `vt` holds
/// eigenvectors as rows.
fn finish(n: usize, values: Vec<f64>, vt: Vec<f64>) -> EigenDecomposition {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(Ordering::Equal));
    let mut sorted_values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * n);
    for &l in &order {
        sorted_values.push(values[l]);
        let u = &vt[l * n..(l + 1) * n];
        let mut pivot = 0;
        for (i, x) in u.iter().enumerate() {
            if x.abs() > u[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if u[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.extend(u.iter().map(|x| sign * x));
    }
    EigenDecomposition { dim: n, values: sorted_values, vectors }
}

/// Householder reduction of the row-major symmetric matrix in `v` to
/// tridiagonal form. On exit `d` holds the diagonal, `e[1..]` the
/// sub-diagonal, and `v` the accumulated orthogonal transformation.
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = math::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal matrix `(d, e)`; `vt` holds the current
/// basis as rows and is rotated in place.
fn tridiagonal_ql(n: usize, d: &mut [f64], e: &mut [f64], vt: &mut [f64]) {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            for _iter in 0..100 {
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = math::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = math::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = vt.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for k in 0..n {
                        let h = row_i1[k];
                        row_i1[k] = s * row_i[k] + c * h;
                        row_i[k] = c * row_i[k] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}

/// Euclidean projection of `values` onto the capped simplex
/// `{w : 0 ≤ w_i ≤ 1, Σ w_i = k}`.
///
/// The solution is `w_i = clamp(values_i − s, 0, 1)` where the shift `s` is the
/// root of the non-increasing piecewise-linear map `s ↦ Σ clamp(values_i − s, 0, 1)`.
/// The breakpoints `values_i − 1` and `values_i` are swept in order, tracking
/// the slope, and the root is located exactly inside its linear piece.
pub fn project_capped_simplex(values: &[f64], k: usize) -> Result<Vec<f64>> {
    let d = values.len();
    if k == 0 || k > d {
        return Err(Error::invalid("k must lie in [1, d]"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }
    let target = k as f64;
    // (position, slope change): a term starts decreasing at v − 1 and
    // saturates at 0 from v on.
    let mut events: Vec<(f64, f64)> = values.iter().flat_map(|&v| [(v - 1.0, -1.0), (v, 1.0)]).collect();
    events.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    // Left of every breakpoint each term equals 1.
    let mut mass = d as f64;
    let mut slope = 0.0;
    let mut pos = events[0].0;
    let mut shift = pos;
    let mut idx = 0;
    while idx < events.len() {
        let next = events[idx].0;
        let mass_next = mass + slope * (next - pos);
        if mass_next <= target {
            shift = if slope < 0.0 { pos + (target - mass) / slope } else { pos };
            break;
        }
        mass = mass_next;
        pos = next;
        shift = pos;
        while idx < events.len() && events[idx].0 == next {
            slope += events[idx].1;
            idx += 1;
        }
    }
    Ok(values.iter().map(|&v| (v - shift).clamp(0.0, 1.0)).collect())
}

/// Non-negative least squares `min ‖A x − b‖₂` subject to `x ≥ 0`, by the
/// Lawson–Hanson active-set method. Subproblems are solved by Householder QR.
pub fn nnls(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (a.rows(), a.cols());
    if b.len() != rows {
        return Err(Error::DimensionMismatch { expected: rows, found: b.len() });
    }
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entry in least squares problem"));
    }
    let scale = a.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 10.0 * f64::EPSILON * scale * (rows.max(cols) as f64);
    let mut x = vec![0.0; cols];
    let mut passive = vec![false; cols];
    let gradient = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = (0..rows).map(|i| b[i] - dot(a.row(i), x)).collect();
        (0..cols).map(|j| (0..rows).map(|i| a.get(i, j) * r[i]).sum()).collect()
    };
    for _ in 0..3 * cols.max(1) {
        let w = gradient(&x);
        let entering = (0..cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap_or(Ordering::Equal));
        let j = match entering {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;
        loop {
            let set: Vec<usize> = (0..cols).filter(|&i| passive[i]).collect();
            let sub = Matrix::from_fn(rows, set.len(), |r, c| a.get(r, set[c]));
            let z_set = least_squares(&sub, b);
            let mut z = vec![0.0; cols];
            for (c, &i) in set.iter().enumerate() {
                z[i] = z_set[c];
            }
            if set.iter().all(|&i| z[i] > 0.0) {
                x = z;
                break;
            }
            let step = set
                .iter()
                .filter(|&&i| z[i] <= 0.0)
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            for i in 0..cols {
                x[i] += step * (z[i] - x[i]);
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    Ok(x)
}

/// Least-squares solution of `A x ≈ b` by Householder QR; columns that are
/// numerically dependent get a zero coefficient.
fn least_squares(a: &Matrix, b: &[f64]) -> Vec<f64> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut y = b.to_vec();
    let steps = cols.min(rows);
    let mut diag = vec![0.0; steps];
    for k in 0..steps {
        let norm = math::sqrt((k..rows).map(|i| r.get(i, k) * r.get(i, k)).sum());
        if norm == 0.0 {
            continue;
        }
        let alpha = if r.get(k, k) > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| r.get(i, k)).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 == 0.0 {
            diag[k] = alpha;
            continue;
        }
        for c in k..cols {
            let proj: f64 = v.iter().enumerate().map(|(t, vt)| vt * r.get(k + t, c)).sum::<f64>() * 2.0 / vnorm2;
            for (t, vt) in v.iter().enumerate() {
                r.set(k + t, c, r.get(k + t, c) - proj * vt);
            }
        }
        let proj: f64 = v.iter().enumerate().map(|(t, vt)| vt * y[k + t]).sum::<f64>() * 2.0 / vnorm2;
        for (t, vt) in v.iter().enumerate() {
            y[k + t] -= proj * vt;
        }
        diag[k] = r.get(k, k);
    }
    let largest = diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = largest * f64::EPSILON * rows.max(cols) as f64;
    let mut x = vec![0.0; cols];
    for k in (0..steps).rev() {
        if diag[k].abs() <= cutoff {
            continue;
        }
        let tail: f64 = (k + 1..steps).map(|c| r.get(k, c) * x[c]).sum();
        x[k] = (y[k] - tail) / diag[k];
    }
    x
}

/// A member of the spectrahedron `{Ω symmetric, 0 ⪯ Ω ⪯ I, tr Ω = k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    k: usize,
    matrix: SymMatrix,
}

impl OmegaMatrix {
    /// Validates `matrix` against the spectrahedron constraints for `k`.
    pub fn new(matrix: SymMatrix, k: usize) -> Result<Self> {
        let d = matrix.dim();
        if k == 0 || k > d {
            return Err(Error::invalid("k must lie in [1, d]"));
        }
        if (matrix.trace() - k as f64).abs() > OMEGA_TRACE_TOL {
            return Err(Error::invalid("trace of Ω differs from k"));
        }
        let eig = eig_sym(&matrix)?;
        let values = eig.eigenvalues();
        if values[0] > 1.0 + OMEGA_EIG_TOL || values[d - 1] < -OMEGA_EIG_TOL {
            return Err(Error::invalid("eigenvalues of Ω leave [0, 1]"));
        }
        Ok(OmegaMatrix { k, matrix })
    }

    /// `Ω = I` with `k = d`.
    pub fn identity(dim: usize) -> Self {
        OmegaMatrix { k: dim, matrix: SymMatrix::identity(dim) }
    }

    /// `Ω = (k/d) I`, the barycentre of the spectrahedron.
    pub fn scaled_identity(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::invalid("k must lie in [1, d]"));
        }
        Ok(OmegaMatrix { k, matrix: SymMatrix::identity(dim).scaled(k as f64 / dim as f64) })
    }

    /// Orthogonal projector onto the span of the first `k` coordinate axes.
    pub fn coordinate_projector(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::invalid("k must lie in [1, d]"));
        }
        let diag: Vec<f64> = (0..dim).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
        Ok(OmegaMatrix { k, matrix: SymMatrix::from_diag(&diag) })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }

    /// `⟨Ω | V⟩ = tr(Ω V)`.
    pub fn inner(&self, v: &SymMatrix) -> f64 {
        self.matrix.inner(v)
    }

    /// `(1 − τ) Ω + τ other`, which stays in the spectrahedron for `τ ∈ [0, 1]`.
    pub fn convex_step(&self, other: &OmegaMatrix, tau: f64) -> OmegaMatrix {
        debug_assert_eq!(self.k, other.k);
        let matrix = SymMatrix {
            dim: self.dim(),
            data: self
                .matrix
                .data
                .iter()
                .zip(&other.matrix.data)
                .map(|(a, b)| (1.0 - tau) * a + tau * b)
                .collect(),
        };
        OmegaMatrix { k: self.k, matrix }
    }

    pub fn frobenius_distance(&self, other: &OmegaMatrix) -> f64 {
        self.matrix.frobenius_distance(&other.matrix)
    }
}

/// Frobenius-nearest point of the spectrahedron for `k`: eigendecompose `a`,
/// project its spectrum onto the capped simplex, recompose.
pub fn project_spectrahedron(a: &SymMatrix, k: usize) -> Result<OmegaMatrix> {
    if k == 0 || k > a.dim() {
        return Err(Error::invalid("k must lie in [1, d]"));
    }
    let eig = eig_sym(a)?;
    let weights = project_capped_simplex(eig.eigenvalues(), k)?;
    Ok(OmegaMatrix { k, matrix: eig.recompose(&weights) })
}

/// `U diag(1_k, 0_{d−k}) Uᵀ`, the maximiser of `Ω ↦ ⟨Ω | V⟩` over the
/// spectrahedron when `decomp` is the eigendecomposition of `V`.
pub fn top_k_projector(decomp: &EigenDecomposition, k: usize) -> Result<OmegaMatrix> {
    if k == 0 || k > decomp.dim() {
        return Err(Error::invalid("k must lie in [1, d]"));
    }
    let weights: Vec<f64> = (0..decomp.dim()).map(|l| if l < k { 1.0 } else { 0.0 }).collect();
    Ok(OmegaMatrix { k, matrix: decomp.recompose(&weights) })
}

/// Squared Mahalanobis costs `C_ij = (x_i − y_j)ᵀ Ω (x_i − y_j)` between the
/// rows of two row-major point arrays of dimension `dim`.
pub fn mahalanobis_cost(x: &[f64], y: &[f64], dim: usize, omega: &OmegaMatrix) -> Result<Matrix> {
    if omega.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: omega.dim() });
    }
    quadratic_form_cost(x, y, dim, omega.matrix())
}

/// Squared Euclidean costs `‖x_i − y_j‖²`.
pub fn squared_euclidean_cost(x: &[f64], y: &[f64], dim: usize) -> Result<Matrix> {
    check_points(x, y, dim)?;
    let n = x.len() / dim;
    let m = y.len() / dim;
    Ok(Matrix::from_fn(n, m, |i, j| {
        let xi = &x[i * dim..(i + 1) * dim];
        let yj = &y[j * dim..(j + 1) * dim];
        xi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum()
    }))
}

fn check_points(x: &[f64], y: &[f64], dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    for pts in [x, y] {
        if pts.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, found: pts.len() % dim });
        }
    }
    Ok(())
}

/// `(x − y)ᵀ A (x − y)` for every pair, computed through the expansion
/// `xᵀAx + yᵀAy − 2 xᵀAy` on coordinates centred at the joint mean, and
/// clamped to be non-negative.
pub(crate) fn quadratic_form_cost(x: &[f64], y: &[f64], dim: usize, a: &SymMatrix) -> Result<Matrix> {
    check_points(x, y, dim)?;
    if a.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: a.dim() });
    }
    let n = x.len() / dim;
    let m = y.len() / dim;
    let mut center = vec![0.0; dim];
    for p in x.chunks_exact(dim).chain(y.chunks_exact(dim)) {
        for (c, v) in center.iter_mut().zip(p) {
            *c += v;
        }
    }
    let total = (n + m).max(1) as f64;
    center.iter_mut().for_each(|c| *c /= total);

    let centred = |pts: &[f64]| -> Vec<f64> {
        pts.chunks_exact(dim).flat_map(|p| p.iter().zip(&center).map(|(v, c)| v - c)).collect()
    };
    let xc = centred(x);
    let yc = centred(y);

    // ax = Xc A (n × d), and the diagonal quadratic forms.
    let mut ax = vec![0.0; n * dim];
    for i in 0..n {
        let xi = &xc[i * dim..(i + 1) * dim];
        let out = &mut ax[i * dim..(i + 1) * dim];
        for (r, &xr) in xi.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let arow = &a.data[r * dim..(r + 1) * dim];
            for (o, &arc) in out.iter_mut().zip(arow) {
                *o += xr * arc;
            }
        }
    }
    let qx: Vec<f64> = (0..n)
        .map(|i| dot(&ax[i * dim..(i + 1) * dim], &xc[i * dim..(i + 1) * dim]))
        .collect();
    let qy: Vec<f64> = (0..m)
        .map(|j| {
            let yj = &yc[j * dim..(j + 1) * dim];
            let mut acc = 0.0;
            for (r, &yr) in yj.iter().enumerate() {
                acc += yr * dot(&a.data[r * dim..(r + 1) * dim], yj);
            }
            acc
        })
        .collect();
    let mut cost = Matrix::zeros(n, m);
    for i in 0..n {
        let axi = &ax[i * dim..(i + 1) * dim];
        let row = cost.row_mut(i);
        for j in 0..m {
            let cross = dot(axi, &yc[j * dim..(j + 1) * dim]);
            row[j] = (qx[i] + qy[j] - 2.0 * cross).max(0.0);
        }
    }
    Ok(cost)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let a = SymMatrix::from_diag(&[3.0, 1.0, 2.0]);
        let eig = eig_sym(&a).unwrap();
        assert_eq!(eig.eigenvalues(), &[3.0, 2.0, 1.0]);
        // U is a signed permutation; with the sign convention it is a permutation.
        assert_eq!(eig.eigenvector(0), &[1.0, 0.0, 0.0]);
        assert_eq!(eig.eigenvector(1), &[0.0, 0.0, 1.0]);
        assert_eq!(eig.eigenvector(2), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_spectrum() {
        let eig = eig_sym(&SymMatrix::identity(4)).unwrap();
        assert!(eig.eigenvalues().iter().all(|&l| close(l, 1.0, 1e-15)));
    }

    #[test]
    fn two_by_two_closed_form() {
        // λ² − 4λ + 3 = 0 → λ ∈ {3, 1}.
        let a = SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        for eig in [eig_sym(&a).unwrap(), eig_sym_jacobi(&a).unwrap()] {
            assert!(close(eig.eigenvalues()[0], 3.0, 1e-14));
            assert!(close(eig.eigenvalues()[1], 1.0, 1e-14));
            let h = core::f64::consts::FRAC_1_SQRT_2;
            let u0 = eig.eigenvector(0);
            assert!(close(u0[0], h, 1e-14) && close(u0[1], h, 1e-14));
            let u1 = eig.eigenvector(1);
            assert!(close(u1[0].abs(), h, 1e-14) && close(u1[0], -u1[1], 1e-14));
        }
    }

    #[test]
    fn eig_rejects_nan() {
        let a = SymMatrix::from_diag(&[1.0, f64::NAN]);
        assert!(matches!(eig_sym(&a), Err(Error::InvalidInput(_))));
        assert!(matches!(eig_sym_jacobi(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn one_by_one_and_empty() {
        let eig = eig_sym(&SymMatrix::from_diag(&[-2.5])).unwrap();
        assert_eq!(eig.eigenvalues(), &[-2.5]);
        assert_eq!(eig.eigenvector(0), &[1.0]);
        assert_eq!(eig_sym(&SymMatrix::zeros(0)).unwrap().dim(), 0);
    }

    #[test]
    fn projection_fixed_point() {
        let a = SymMatrix::from_diag(&[1.0, 1.0, 0.0]);
        let p = project_spectrahedron(&a, 2).unwrap();
        assert!(p.matrix().frobenius_distance(&a) < 1e-14);
    }

    #[test]
    fn projection_budget_one() {
        let p = project_spectrahedron(&SymMatrix::from_diag(&[5.0, 0.2, -1.0]), 1).unwrap();
        assert!(p.matrix().frobenius_distance(&SymMatrix::from_diag(&[1.0, 0.0, 0.0])) < 1e-14);
    }

    #[test]
    fn capped_simplex_matches_kkt_scan() {
        // First coordinate saturates at 1; the other two solve
        // (0.5 − s) + (0.1 − s) = 1, so s = −0.2.
        let w = project_capped_simplex(&[0.9, 0.5, 0.1], 2).unwrap();
        assert!(close(w[0], 1.0, 1e-15));
        assert!(close(w[1], 0.7, 1e-15));
        assert!(close(w[2], 0.3, 1e-15));
        let oracle = kkt_grid_oracle(&[0.9, 0.5, 0.1], 2);
        for (a, b) in w.iter().zip(&oracle) {
            assert!(close(*a, *b, 1e-6));
        }
    }

    /// Brute-force search over the shift on a fine grid, followed by bisection.
    fn kkt_grid_oracle(v: &[f64], k: usize) -> Vec<f64> {
        let mass = |s: f64| v.iter().map(|&x| (x - s).clamp(0.0, 1.0)).sum::<f64>();
        let lo0 = v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
        let hi0 = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let steps = 100_000;
        let mut lo = lo0;
        for s in 0..=steps {
            let t = lo0 + (hi0 - lo0) * s as f64 / steps as f64;
            if mass(t) >= k as f64 {
                lo = t;
            }
        }
        let mut hi = lo + (hi0 - lo0) / steps as f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) >= k as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        v.iter().map(|&x| (x - lo).clamp(0.0, 1.0)).collect()
    }

    #[test]
    fn projection_partial_budget_is_feasible() {
        let p = project_spectrahedron(&SymMatrix::from_diag(&[0.9, 0.5, 0.1]), 2).unwrap();
        let eig = eig_sym(p.matrix()).unwrap();
        assert!(close(eig.eigenvalues().iter().sum::<f64>(), 2.0, 1e-12));
        assert!(eig.eigenvalues().iter().all(|&l| (-1e-12..=1.0 + 1e-12).contains(&l)));
    }

    #[test]
    fn capped_simplex_full_budget() {
        let w = project_capped_simplex(&[0.3, -4.0, 7.0], 3).unwrap();
        assert_eq!(w, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn k_out_of_range() {
        let a = SymMatrix::identity(3);
        assert!(project_spectrahedron(&a, 0).is_err());
        assert!(project_spectrahedron(&a, 4).is_err());
        let eig = eig_sym(&a).unwrap();
        assert!(top_k_projector(&eig, 0).is_err());
        assert!(top_k_projector(&eig, 4).is_err());
    }

    #[test]
    fn top_k_projector_diagonal() {
        let v = SymMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let omega = top_k_projector(&eig_sym(&v).unwrap(), 2).unwrap();
        assert!(omega.matrix().frobenius_distance(&SymMatrix::from_diag(&[1.0, 1.0, 0.0])) < 1e-15);
        assert!(close(omega.inner(&v), 5.0, 1e-14));
    }

    #[test]
    fn top_k_projector_degenerate_spectrum() {
        let omega = top_k_projector(&eig_sym(&SymMatrix::identity(4)).unwrap(), 1).unwrap();
        let m = omega.matrix();
        assert!(close(m.trace(), 1.0, 1e-10));
        let sq = SymMatrix::from_upper(4, |i, j| (0..4).map(|l| m.get(i, l) * m.get(l, j)).sum());
        assert!(sq.frobenius_distance(m) < 1e-8);
    }

    #[test]
    fn omega_validation() {
        assert!(OmegaMatrix::new(SymMatrix::from_diag(&[1.0, 1.0, 0.0]), 2).is_ok());
        assert!(OmegaMatrix::new(SymMatrix::from_diag(&[1.5, 0.5, 0.0]), 2).is_err());
        assert!(OmegaMatrix::new(SymMatrix::from_diag(&[1.0, 0.5, 0.0]), 2).is_err());
        assert!(OmegaMatrix::new(SymMatrix::from_diag(&[1.2, 1.0, -0.2]), 2).is_err());
    }

    #[test]
    fn mahalanobis_identity_is_squared_euclidean() {
        let x = [0.0, 1.0, 2.0, -1.0, 0.5, 0.5];
        let y = [3.0, 0.0, -1.0, 2.0];
        let c = mahalanobis_cost(&x, &y, 2, &OmegaMatrix::identity(2)).unwrap();
        let e = squared_euclidean_cost(&x, &y, 2).unwrap();
        assert_eq!((c.rows(), c.cols()), (3, 2));
        for (a, b) in c.as_slice().iter().zip(e.as_slice()) {
            assert!(close(*a, *b, 1e-12));
        }
    }

    #[test]
    fn mahalanobis_coordinate_projector_truncates() {
        let x = [1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 10.0];
        let c = mahalanobis_cost(&x, &y, 3, &OmegaMatrix::coordinate_projector(3, 2).unwrap()).unwrap();
        assert!(close(c.get(0, 0), 5.0, 1e-12));
    }

    #[test]
    fn mahalanobis_half_identity() {
        let omega = OmegaMatrix::scaled_identity(2, 1).unwrap();
        let c = mahalanobis_cost(&[1.0, 0.0], &[0.0, 0.0], 2, &omega).unwrap();
        assert!(close(c.get(0, 0), 0.5, 1e-15));
    }

    #[test]
    fn mahalanobis_dimension_mismatch() {
        let omega = OmegaMatrix::identity(3);
        assert!(matches!(
            mahalanobis_cost(&[1.0, 0.0], &[0.0, 0.0], 2, &omega),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(squared_euclidean_cost(&[1.0, 0.0, 1.0], &[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn nnls_identity_clips_negatives() {
        let a = Matrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let x = nnls(&a, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn nnls_satisfies_kkt_on_pseudo_random_problems() {
        // Optimality certificate: x ≥ 0, w = Aᵀ(b − Ax) ≤ 0, and w = 0 on the support.
        let mut state = 0x2545_f491_4f6c_dd1d_u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for (rows, cols) in [(6, 3), (4, 7), (10, 10), (3, 1)] {
            let a = Matrix::from_fn(rows, cols, |_, _| next());
            let b: Vec<f64> = (0..rows).map(|_| next()).collect();
            let x = nnls(&a, &b).unwrap();
            let r: Vec<f64> = (0..rows).map(|i| b[i] - dot(a.row(i), &x)).collect();
            for j in 0..cols {
                let w: f64 = (0..rows).map(|i| a.get(i, j) * r[i]).sum();
                assert!(x[j] >= 0.0);
                assert!(w <= 1e-10, "w[{j}] = {w}");
                if x[j] > 0.0 {
                    assert!(w.abs() <= 1e-10, "w[{j}] = {w}");
                }
            }
        }
    }

    #[test]
    fn nnls_handles_dependent_columns() {
        // Two copies of the same column: any split of the weight is optimal.
        let a = Matrix::from_vec(2, 2, vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let x = nnls(&a, &[1.0, 2.0]).unwrap();
        assert!(close(x[0] + x[1], 1.0, 1e-12));
        assert!(x.iter().all(|v| *v >= 0.0));
    }
}
