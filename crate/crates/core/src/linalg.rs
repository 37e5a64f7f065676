//! Dense and sparse complex linear algebra shared by every module.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Anything that can compute `y = A x` for a Hermitian `A`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply(x, &mut y);
        y
    }

    /// Dense matrix by applying the operator to every basis vector.
    fn to_dense(&self) -> CMat {
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        let mut e = vec![ZERO; n];
        let mut col = vec![ZERO; n];
        for j in 0..n {
            e[j] = ONE;
            self.apply(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
            e[j] = ZERO;
        }
        m
    }
}

impl LinearOperator for CMat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        // column-major storage: accumulate whole columns
        let n = self.nrows();
        y[..n].iter_mut().for_each(|v| *v = ZERO);
        for (col, xj) in self.as_slice().chunks_exact(n).zip(x) {
            if *xj != ZERO {
                for (yi, a) in y.iter_mut().zip(col) {
                    *yi += a * xj;
                }
            }
        }
    }

    fn to_dense(&self) -> CMat {
        self.clone()
    }
}

/// `(1 - s) A + s B`, evaluated lazily.
pub struct Interpolated<'a> {
    pub a: &'a dyn LinearOperator,
    pub b: &'a dyn LinearOperator,
    pub s: f64,
}

impl LinearOperator for Interpolated<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.dim();
        let mut tmp = vec![ZERO; n];
        self.a.apply(x, y);
        self.b.apply(x, &mut tmp);
        let (wa, wb) = (1.0 - self.s, self.s);
        for (yi, ti) in y.iter_mut().zip(&tmp) {
            *yi = *yi * wa + *ti * wb;
        }
    }
}

/// Below this dimension sparse products run on one thread.
const PAR_MIN_DIM: usize = 4096;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub dim: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
        match self.indices[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => ZERO,
        }
    }

    /// Largest `|H_ij - conj(H_ji)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in 0..self.dim {
            for k in self.indptr[row]..self.indptr[row + 1] {
                let col = self.indices[k];
                let d = (self.values[k] - self.get(col, row).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Coordinate text: a `dim nnz` header, then one `row col re im` line per entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::with_capacity(32 * (self.nnz() + 1));
        let _ = writeln!(out, "{} {}", self.dim, self.nnz());
        for row in 0..self.dim {
            for k in self.indptr[row]..self.indptr[row + 1] {
                let v = self.values[k];
                let _ = writeln!(out, "{} {} {:e} {:e}", row, self.indices[k], v.re, v.im);
            }
        }
        out
    }

    pub fn from_coordinate_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Input("empty coordinate file".into()))?;
        let mut hs = header.split_whitespace();
        let parse_usize = |s: Option<&str>| -> Result<usize> {
            s.and_then(|x| x.parse().ok())
                .ok_or_else(|| Error::Input(format!("bad coordinate header `{header}`")))
        };
        let dim = parse_usize(hs.next())?;
        let nnz = parse_usize(hs.next())?;
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Input(format!("bad coordinate line `{line}`")));
            }
            let bad = || Error::Input(format!("bad coordinate line `{line}`"));
            let r: usize = f[0].parse().map_err(|_| bad())?;
            let cidx: usize = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            triplets.push((r, cidx, c(re, im)));
        }
        if triplets.len() != nnz {
            return Err(Error::Input(format!(
                "header announces {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Ok(Self::from_triplets(dim, triplets))
    }

    /// Keeps every entry that is not exactly zero.
    pub fn from_dense(m: &CMat) -> Self {
        let mut trip = Vec::new();
        for r in 0..m.nrows() {
            for k in 0..m.ncols() {
                if m[(r, k)] != ZERO {
                    trip.push((r, k, m[(r, k)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), trip)
    }

    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, cidx, v) in triplets {
            if last == Some((r, cidx)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(cidx);
                values.push(v);
                rows.push(r);
                last = Some((r, cidx));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, cidx), v) in rows.iter().zip(indices).zip(values) {
            if v != ZERO {
                indptr[r + 1] += 1;
                keep_idx.push(cidx);
                keep_val.push(v);
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            dim,
            indptr,
            indices: keep_idx,
            values: keep_val,
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let row = |(r, yi): (usize, &mut C64)| {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi = acc;
        };
        if self.dim < PAR_MIN_DIM {
            y.iter_mut().enumerate().for_each(row);
        } else {
            y.par_iter_mut().enumerate().for_each(row);
        }
    }
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `‖U†U − I‖_max`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Compares two matrices up to a global phase, using the largest entry of `b`
/// to fix the phase.
pub fn equal_up_to_phase(a: &CMat, b: &CMat, tol: f64) -> bool {
    if a.shape() != b.shape() {
        return false;
    }
    let (mut best, mut at) = (0.0, 0);
    for (k, v) in b.iter().enumerate() {
        if v.norm() > best {
            best = v.norm();
            at = k;
        }
    }
    if best == 0.0 {
        return a.iter().all(|v| v.norm() <= tol);
    }
    let ratio = a.as_slice()[at] / b.as_slice()[at];
    if (ratio.norm() - 1.0).abs() > tol {
        return false;
    }
    let phase = ratio / ratio.norm();
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x - phase * y).norm() <= tol)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Spectral norm of a Hermitian matrix.
pub fn hermitian_norm(m: &CMat) -> f64 {
    hermitian_eigenvalues(m)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| c(x, 0.0)))
}
