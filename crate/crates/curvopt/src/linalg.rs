//! Small dense linear-algebra substrate: vectors as `Vec<f64>`/`&[f64]`,
//! row-major rectangular matrices, fully-stored symmetric matrices, a
//! Cholesky solver, and a top-k SVD built on subspace iteration over the
//! smaller Gram matrix.
//!
//! Everything here is double precision and cache-friendly rather than
//! clever; problem sizes cap at a few thousand parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::parallel;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    /// Pivot `index` was non-positive during Cholesky: the matrix is not SPD.
    /// Callers typically respond by increasing damping.
    #[error("matrix is not symmetric positive definite (pivot {index} = {pivot:.3e})")]
    NotSpd { index: usize, pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(&'static str),
}

// ---------------------------------------------------------------------------
// vector helpers
// ---------------------------------------------------------------------------

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

pub fn scale(a: &mut [f64], c: f64) {
    for x in a.iter_mut() {
        *x *= c;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], alpha: f64, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + alpha * y).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

// ---------------------------------------------------------------------------
// rectangular matrix
// ---------------------------------------------------------------------------

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `M x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Mᵀ x`
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            axpy(x[i], self.row(i), &mut out);
        }
        out
    }

    /// Gram matrix `MᵀM` (cols × cols), accumulated row-by-row so memory
    /// access stays contiguous. Parallel over row chunks with a
    /// deterministic merge.
    pub fn gram(&self) -> SymMat {
        let n = self.cols;
        let acc = parallel::chunked_map_reduce(
            self.rows,
            |range| {
                let mut local = vec![0.0; n * n];
                for r in range {
                    let row = self.row(r);
                    for i in 0..n {
                        let ri = row[i];
                        if ri == 0.0 {
                            continue;
                        }
                        let dst = &mut local[i * n + i..i * n + n];
                        let src = &row[i..n];
                        for k in 0..dst.len() {
                            dst[k] += ri * src[k];
                        }
                    }
                }
                local
            },
            vec![0.0; n * n],
            |mut a, b| {
                parallel::add_assign(&mut a, &b);
                a
            },
        );
        let mut g = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = acc[i * n + j];
                g.set_sym(i, j, v);
            }
        }
        g
    }

    /// Kernel Gram matrix `MMᵀ` (rows × rows). Each entry is one dot of two
    /// contiguous rows; parallel over row blocks.
    pub fn kernel_gram(&self) -> SymMat {
        let m = self.rows;
        let blocks = parallel::chunked_map_reduce(
            m,
            |range| {
                let mut rows_out = Vec::with_capacity(range.len());
                for i in range.clone() {
                    let mut row = vec![0.0; m - i];
                    let ri = self.row(i);
                    for j in i..m {
                        row[j - i] = dot(ri, self.row(j));
                    }
                    rows_out.push((i, row));
                }
                rows_out
            },
            Vec::new(),
            |mut a, mut b| {
                a.append(&mut b);
                a
            },
        );
        let mut g = SymMat::zeros(m);
        for (i, row) in blocks {
            for (off, v) in row.into_iter().enumerate() {
                g.set_sym(i, i + off, v);
            }
        }
        g
    }
}

// ---------------------------------------------------------------------------
// symmetric matrix
// ---------------------------------------------------------------------------

/// Fully stored symmetric matrix. Mutators write both triangles so the
/// representation stays symmetric to machine precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    n: usize,
    data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            assert_eq!(rows[i].len(), n);
            for j in 0..n {
                m.data[i * n + j] = rows[i][j];
            }
        }
        m.symmetrize();
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Set `(i,j)` and `(j,i)`.
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.n + i]).collect()
    }

    pub fn add_diag(&mut self, lambda: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += lambda;
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        scale(&mut self.data, c);
    }

    /// Average out any drift between the two triangles.
    pub fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// Accumulate `Σ cᵢ vᵢvᵢᵀ` onto the matrix. The accumulation touches the
    /// upper triangle only and mirrors at the end, so the result is exactly
    /// symmetric.
    pub fn sym_rank_updates(&mut self, terms: &[(f64, &[f64])]) {
        let n = self.n;
        for (c, v) in terms {
            assert_eq!(v.len(), n, "rank-update vector length");
            for i in 0..n {
                let cvi = c * v[i];
                if cvi == 0.0 {
                    continue;
                }
                let dst = &mut self.data[i * n + i..i * n + n];
                let src = &v[i..n];
                for k in 0..dst.len() {
                    dst[k] += cvi * src[k];
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Cholesky factorization `A = LLᵀ`. Fails with [`LinalgError::NotSpd`]
    /// on a non-positive pivot; the caller decides whether that is fatal
    /// (tests) or a signal to raise damping (LM).
    pub fn cholesky(&self) -> Result<Cholesky, LinalgError> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                // dot over the already-computed prefixes; both slices are
                // contiguous rows of L.
                let s = dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let aij = self.data[i * n + j];
                if i == j {
                    let pivot = aij - s;
                    if pivot <= 0.0 || !pivot.is_finite() {
                        return Err(LinalgError::NotSpd { index: i, pivot });
                    }
                    l[i * n + i] = pivot.sqrt();
                } else {
                    l[i * n + j] = (aij - s) / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }
}

/// Lower-triangular Cholesky factor with forward/back substitution.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let l = &self.l;
        // L z = b
        let mut z = vec![0.0; n];
        for i in 0..n {
            let s = dot(&l[i * n..i * n + i], &z[..i]);
            z[i] = (b[i] - s) / l[i * n + i];
        }
        // Lᵀ x = z
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        x
    }
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn cholesky_solve(a: &SymMat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.n() {
        return Err(LinalgError::DimMismatch("cholesky_solve rhs length"));
    }
    Ok(a.cholesky()?.solve(b))
}

// ---------------------------------------------------------------------------
// top-k SVD via subspace iteration on the small Gram side
// ---------------------------------------------------------------------------

/// Leading singular values and right singular vectors of `m`.
///
/// Works through the Gram matrix on the smaller side (`MMᵀ` when the matrix
/// is wide, `MᵀM` otherwise) and runs orthogonal subspace iteration with
/// Rayleigh-Ritz projection. `k` is clipped to the detected numerical rank.
pub fn svd_top_k(m: &Mat, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let small_is_rows = m.rows() <= m.cols();
    let b = if small_is_rows { m.kernel_gram() } else { m.gram() };
    let k = k.min(b.n());
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    let (eigvals, eigvecs) = sym_top_eigs(&b, k);
    let mut sigmas = Vec::with_capacity(k);
    let mut right = Vec::with_capacity(k);
    let scale_ref = eigvals.first().copied().unwrap_or(0.0).max(0.0);
    for (lam, v) in eigvals.into_iter().zip(eigvecs) {
        let lam = lam.max(0.0);
        let sigma = lam.sqrt();
        // rank clip: discard directions with negligible singular value
        if sigma * sigma <= 1e-28 * scale_ref.max(1e-300) {
            break;
        }
        if small_is_rows {
            // v is a left singular vector; map to the right side.
            let mut w = m.tr_matvec(&v);
            let nrm = norm2(&w);
            if nrm == 0.0 {
                break;
            }
            scale(&mut w, 1.0 / nrm);
            sigmas.push(sigma);
            right.push(w);
        } else {
            sigmas.push(sigma);
            right.push(v);
        }
    }
    (sigmas, right)
}

/// Leading `k` eigenpairs of a symmetric PSD matrix by blocked subspace
/// iteration with Rayleigh-Ritz extraction.
fn sym_top_eigs(b: &SymMat, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = b.n();
    let q = (k + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(SVD_SEED);
    let mut basis: Vec<Vec<f64>> = (0..q)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut basis);
    let scale_b = b.fro_norm().max(1e-300);
    let max_iters = 2000;
    for _ in 0..max_iters {
        // W = B V, project S = Vᵀ W, rotate by eigenvectors of S.
        let w: Vec<Vec<f64>> = basis.iter().map(|v| b.matvec(v)).collect();
        let mut s = vec![vec![0.0; q]; q];
        for i in 0..q {
            for j in 0..q {
                s[i][j] = dot(&basis[i], &w[j]);
            }
        }
        let (_svals, svecs) = jacobi_small(&s);
        // new basis = W * svecs (columns), then orthonormalize
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(q);
        for col in 0..q {
            let mut v = vec![0.0; n];
            for (i, wi) in w.iter().enumerate() {
                axpy(svecs[i][col], wi, &mut v);
            }
            next.push(v);
        }
        orthonormalize(&mut next);
        basis = next;
        // residual check on the wanted pairs
        let mut converged = true;
        for i in 0..k {
            let bv = b.matvec(&basis[i]);
            let lam = dot(&basis[i], &bv);
            let mut r = bv;
            axpy(-lam, &basis[i], &mut r);
            if norm2(&r) > 1e-12 * scale_b {
                converged = false;
                break;
            }
        }
        if converged {
            break;
        }
    }
    // final Rayleigh quotients on the orthonormal basis
    let mut pairs: Vec<(f64, Vec<f64>)> = basis
        .into_iter()
        .map(|v| {
            let lam = dot(&v, &b.matvec(&v));
            (lam, v)
        })
        .collect();
    pairs.sort_by(|a, c| c.0.partial_cmp(&a.0).unwrap());
    let (vals, vecs): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().take(k).unzip();
    (vals, vecs)
}

/// Modified Gram-Schmidt in place; replaces near-null columns with fresh
/// deterministic directions so the basis keeps full rank.
fn orthonormalize(basis: &mut [Vec<f64>]) {
    let mut rng = ChaCha8Rng::seed_from_u64(SVD_SEED ^ 0xff);
    for i in 0..basis.len() {
        for j in 0..i {
            let (head, tail) = basis.split_at_mut(i);
            let c = dot(&head[j], &tail[0]);
            axpy(-c, &head[j], &mut tail[0]);
        }
        let nrm = norm2(&basis[i]);
        if nrm < 1e-300 {
            for x in basis[i].iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            let nrm2v = norm2(&basis[i]);
            scale(&mut basis[i], 1.0 / nrm2v);
        } else {
            scale(&mut basis[i], 1.0 / nrm);
        }
    }
}

/// Cyclic Jacobi eigensolver for the small projected matrix. Returns
/// eigenvalues (descending) and the rotation matrix whose columns are the
/// matching eigenvectors.
fn jacobi_small(s: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = s.len();
    let mut a: Vec<Vec<f64>> = s.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        v[i][i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-30 + 1e-15 * frob(&a) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - sn * aiq;
                    a[i][q] = sn * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = c * apj - sn * aqj;
                    a[q][j] = sn * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = c * vip - sn * viq;
                    v[i][q] = sn * vip + c * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    // permute columns of v accordingly
    let mut vecs = vec![vec![0.0; n]; n];
    for (newc, &oldc) in order.iter().enumerate() {
        for i in 0..n {
            vecs[i][newc] = v[i][oldc];
        }
    }
    (vals, vecs)
}

fn frob(a: &[Vec<f64>]) -> f64 {
    a.iter().map(|r| dot(r, r)).sum::<f64>().sqrt()
}

/// Fixed seed for the subspace-iteration starting block.
const SVD_SEED: u64 = 0x5EED_57D0;
