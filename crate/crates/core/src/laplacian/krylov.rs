//! Lowest eigenpairs of a sparse symmetric positive definite matrix.
//!
//! Small problems use a dense symmetric eigensolver. Large ones run a
//! thick-restart block Krylov–Schur iteration on the inverse (sparse
//! Cholesky), followed by a Rayleigh–Ritz projection with the matrix itself.

use faer::linalg::matmul::matmul;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::symmetry::Csr;
use crate::error::{Error, Result};

/// Sizes up to which the dense solver is used.
pub(crate) const DENSE_LIMIT: usize = 3000;

/// Target relative residual of the returned pairs.
pub(crate) const RESIDUAL_TARGET: f64 = 1e-9;

const KRYLOV_TOL: f64 = 1e-11;
const MAX_RESTARTS: usize = 300;
const ROW_CHUNK: usize = 4096;

/// Eigenvalues ascending with orthonormal (Euclidean) eigenvectors as columns.
pub(crate) struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
}

pub(crate) fn lowest_eigenpairs(t: &Csr, nev: usize, seed: u64) -> Result<EigenPairs> {
    let n = t.dim();
    assert!(nev >= 1 && nev <= n);
    let b = block_size(nev);
    let m = krylov_dim(nev, b);
    if n <= DENSE_LIMIT || m + b > n / 2 {
        return Ok(dense(t, n));
    }
    let llt = factor(t)?;
    let op = |x: MatRef<'_, f64>, mut y: MatMut<'_, f64>| {
        y.copy_from(x);
        llt.solve_in_place(y);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = krylov_schur(n, nev, b, m, &op, &mut rng)?;
    let mut pairs = rayleigh_ritz(t, x);
    for _ in 0..4 {
        let worst = max_residual(t, &pairs);
        if worst <= RESIDUAL_TARGET {
            return Ok(pairs);
        }
        // one step of block inverse iteration sharpens the tail of the window
        let mut y = Mat::zeros(n, nev);
        op(pairs.vectors.as_ref(), y.as_mut());
        let q = y.qr().compute_thin_Q();
        pairs = rayleigh_ritz(t, q);
    }
    let worst = max_residual(t, &pairs);
    if worst <= 10.0 * RESIDUAL_TARGET {
        Ok(pairs)
    } else {
        Err(Error::NoConvergence { what: "sparse eigensolver", residual: worst })
    }
}

fn block_size(nev: usize) -> usize {
    if nev > 64 {
        16
    } else {
        8
    }
}

fn krylov_dim(nev: usize, b: usize) -> usize {
    let m = (2 * nev).max(nev + 4 * b);
    m.div_ceil(b) * b
}

fn dense(t: &Csr, n: usize) -> EigenPairs {
    let evd = t.to_dense().self_adjoint_eigen(Side::Lower).expect("dense symmetric eigensolver");
    let s = evd.S().column_vector();
    let values = (0..n).map(|i| s[i]).collect();
    EigenPairs { values, vectors: evd.U().to_owned() }
}

fn factor(t: &Csr) -> Result<faer::sparse::linalg::solvers::Llt<usize, f64>> {
    let mut trip = Vec::with_capacity(t.nnz());
    for r in 0..t.dim() {
        for (c, v) in t.row(r) {
            trip.push(Triplet::new(r, c, v));
        }
    }
    let s = SparseColMat::<usize, f64>::try_new_from_triplets(t.dim(), t.dim(), &trip)
        .map_err(|e| Error::Numeric(format!("sparse assembly: {e:?}")))?;
    s.sp_cholesky(Side::Lower).map_err(|e| Error::Numeric(format!("sparse Cholesky: {e:?}")))
}

fn gemm(dst: MatMut<'_, f64>, accum: Accum, lhs: MatRef<'_, f64>, rhs: MatRef<'_, f64>, alpha: f64) {
    matmul(dst, accum, lhs, rhs, alpha, Par::Seq);
}

fn col_norm(x: MatRef<'_, f64>, j: usize) -> f64 {
    x.col(j).norm_l2()
}

fn random_column(rng: &mut ChaCha8Rng, mut out: MatMut<'_, f64>, j: usize) {
    for i in 0..out.nrows() {
        out[(i, j)] = StandardNormal.sample(rng);
    }
}

/// Projects column `j` of `w` out of `basis` (twice).
fn project_out(basis: MatRef<'_, f64>, mut w: MatMut<'_, f64>, j: usize) {
    if basis.ncols() == 0 {
        return;
    }
    for _ in 0..2 {
        let c = basis.transpose() * w.as_ref().col(j);
        let mut wj = w.rb_mut().col_mut(j);
        wj -= basis * &c;
    }
}

/// Modified Gram–Schmidt on the columns of `w` after they have been projected
/// against `basis`. Columns that collapse relative to `scale` are replaced by
/// fresh random directions. Returns the triangular factor.
fn orthonormalize(basis: MatRef<'_, f64>, mut w: MatMut<'_, f64>, scale: &[f64], rng: &mut ChaCha8Rng) -> Mat<f64> {
    let b = w.ncols();
    let mut r = Mat::zeros(b, b);
    for j in 0..b {
        for _ in 0..2 {
            for i in 0..j {
                let d = w.as_ref().col(i).transpose() * w.as_ref().col(j);
                r[(i, j)] += d;
                let (qi, mut wj) = split_cols(w.rb_mut(), i, j);
                wj -= d * qi;
            }
        }
        let nrm = col_norm(w.as_ref(), j);
        if nrm > 1e-12 * scale[j] && nrm > 0.0 {
            r[(j, j)] = nrm;
            let mut wj = w.rb_mut().col_mut(j);
            wj /= nrm;
            continue;
        }
        let mut attempts = 0;
        loop {
            random_column(rng, w.rb_mut(), j);
            project_out(basis, w.rb_mut(), j);
            for _ in 0..2 {
                for i in 0..j {
                    let d = w.as_ref().col(i).transpose() * w.as_ref().col(j);
                    let (qi, mut wj) = split_cols(w.rb_mut(), i, j);
                    wj -= d * qi;
                }
            }
            let nrm = col_norm(w.as_ref(), j);
            attempts += 1;
            if nrm > 1e-8 || attempts > 10 {
                let mut wj = w.rb_mut().col_mut(j);
                wj /= nrm;
                break;
            }
        }
    }
    r
}

fn split_cols(w: MatMut<'_, f64>, i: usize, j: usize) -> (faer::ColRef<'_, f64>, faer::ColMut<'_, f64>) {
    debug_assert!(i < j);
    let (left, right) = w.split_at_col_mut(j);
    (left.into_const().col(i), right.col_mut(0))
}

/// `v[:, ..p] = v[:, ..m] * y` computed in place one row block at a time.
fn rotate_in_place(mut v: MatMut<'_, f64>, m: usize, y: MatRef<'_, f64>) {
    let n = v.nrows();
    let p = y.ncols();
    let mut tmp = Mat::zeros(ROW_CHUNK.min(n), p);
    let mut r0 = 0;
    while r0 < n {
        let len = ROW_CHUNK.min(n - r0);
        let mut t = tmp.as_mut().subrows_mut(0, len);
        gemm(t.rb_mut(), Accum::Replace, v.as_ref().submatrix(r0, 0, len, m), y, 1.0);
        v.rb_mut().submatrix_mut(r0, 0, len, p).copy_from(t.as_ref());
        r0 += len;
    }
}

/// Returns an orthonormal basis of the dominant `nev`-dimensional invariant
/// subspace of the symmetric operator `op`.
fn krylov_schur(
    n: usize,
    nev: usize,
    b: usize,
    m: usize,
    op: &dyn Fn(MatRef<'_, f64>, MatMut<'_, f64>),
    rng: &mut ChaCha8Rng,
) -> Result<Mat<f64>> {
    let mut v = Mat::<f64>::zeros(n, m + b);
    let mut h = Mat::<f64>::zeros(m + b, m);
    {
        let mut first = v.as_mut().subcols_mut(0, b);
        for j in 0..b {
            random_column(rng, first.rb_mut(), j);
        }
        let empty = Mat::<f64>::zeros(n, 0);
        orthonormalize(empty.as_ref(), first, &vec![1.0; b], rng);
    }
    let mut w = Mat::<f64>::zeros(n, b);
    let mut k = 0;
    let mut worst = f64::INFINITY;
    for _restart in 0..MAX_RESTARTS {
        let mut j = k;
        while j < m {
            op(v.as_ref().subcols(j, b), w.as_mut());
            let scale: Vec<f64> = (0..b).map(|c| col_norm(w.as_ref(), c)).collect();
            let c = j + b;
            let basis = v.as_ref().subcols(0, c);
            let mut coeffs = Mat::<f64>::zeros(c, b);
            for _ in 0..2 {
                let mut p = Mat::<f64>::zeros(c, b);
                gemm(p.as_mut(), Accum::Replace, basis.transpose(), w.as_ref(), 1.0);
                gemm(w.as_mut(), Accum::Add, basis, p.as_ref(), -1.0);
                coeffs += &p;
            }
            h.as_mut().submatrix_mut(0, j, c, b).copy_from(&coeffs);
            let r = orthonormalize(basis, w.as_mut(), &scale, rng);
            h.as_mut().submatrix_mut(c, j, b, b).copy_from(&r);
            v.as_mut().subcols_mut(c, b).copy_from(&w);
            j += b;
        }

        let hm = Mat::<f64>::from_fn(m, m, |r, c| 0.5 * (h[(r, c)] + h[(c, r)]));
        let evd = hm.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numeric(format!("{e:?}")))?;
        let s = evd.S().column_vector();
        // descending order: dominant Ritz values first
        let theta: Vec<f64> = (0..m).rev().map(|i| s[i]).collect();
        let y = Mat::<f64>::from_fn(m, m, |r, c| evd.U()[(r, m - 1 - c)]);
        let rm = h.as_ref().submatrix(m, m - b, b, b).to_owned();
        let coupling = &rm * y.as_ref().subrows(m - b, b);
        let res: Vec<f64> = (0..m).map(|i| coupling.col(i).norm_l2()).collect();
        worst = (0..nev).map(|i| res[i] / theta[i].abs()).fold(0.0, f64::max);
        if worst <= KRYLOV_TOL {
            rotate_in_place(v.as_mut(), m, y.as_ref().subcols(0, nev));
            return Ok(v.as_ref().subcols(0, nev).to_owned());
        }

        let p = (((nev + m) / 2) / b * b).max(b).min(m - b);
        rotate_in_place(v.as_mut(), m, y.as_ref().subcols(0, p));
        let tail = v.as_ref().subcols(m, b).to_owned();
        v.as_mut().subcols_mut(p, b).copy_from(&tail);
        h.fill(0.0);
        for i in 0..p {
            h[(i, i)] = theta[i];
        }
        for r in 0..b {
            for c in 0..p {
                h[(p + r, c)] = coupling[(r, c)];
                h[(c, p + r)] = coupling[(r, c)];
            }
        }
        k = p;
    }
    Err(Error::NoConvergence { what: "block Krylov-Schur", residual: worst })
}

/// Rayleigh–Ritz of `t` on the span of the orthonormal columns of `x`.
fn rayleigh_ritz(t: &Csr, mut x: Mat<f64>) -> EigenPairs {
    let n = x.nrows();
    let k = x.ncols();
    let mut g = Mat::<f64>::zeros(k, k);
    let chunk = 32;
    let mut z = Mat::<f64>::zeros(n, chunk);
    let mut c0 = 0;
    while c0 < k {
        let len = chunk.min(k - c0);
        for c in 0..len {
            let src = x.col_as_slice(c0 + c).to_vec();
            t.apply(&src, z.col_as_slice_mut(c));
        }
        gemm(g.as_mut().subcols_mut(c0, len), Accum::Replace, x.as_ref().transpose(), z.as_ref().subcols(0, len), 1.0);
        c0 += len;
    }
    let gs = Mat::<f64>::from_fn(k, k, |r, c| 0.5 * (g[(r, c)] + g[(c, r)]));
    let evd = gs.self_adjoint_eigen(Side::Lower).expect("projected eigensolver");
    let s = evd.S().column_vector();
    let values = (0..k).map(|i| s[i]).collect();
    rotate_in_place(x.as_mut(), k, evd.U());
    EigenPairs { values, vectors: x }
}

fn max_residual(t: &Csr, pairs: &EigenPairs) -> f64 {
    let n = pairs.vectors.nrows();
    let mut y = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for (j, &mu) in pairs.values.iter().enumerate() {
        let x = pairs.vectors.col_as_slice(j);
        t.apply(x, &mut y);
        let r: f64 = y.iter().zip(x).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt();
        let xn: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(r / (mu.abs() * xn));
    }
    worst
}
