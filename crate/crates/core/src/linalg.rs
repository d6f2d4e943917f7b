//! Dense real linear algebra: vectors, row-major matrices, Cholesky
//! factorization and the pseudo-inverse of wide full-row-rank matrices.
//!
//! Everything is `f64`. Matrices are immutable once built; the kernels
//! used in solver hot loops (`gemv`, `gemv_t`) work on raw slices and skip
//! shape validation, while the public wrappers validate.

use std::fmt::Write as _;
use std::fs;
use std::ops::Deref;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};

/// A finite, non-empty real vector.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("vector must be non-empty".into()));
        }
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(entries))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Wraps entries the caller already knows to be finite.
    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Self(entries)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    pub fn support(&self) -> Vec<usize> {
        support(&self.0)
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DenseVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "DenseMatrix::new",
                format!("{} entries", rows * cols),
                format!("{} entries", data.len()),
            ));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for (j, &v) in self.row(i).iter().enumerate() {
                t.data[j * self.rows + i] = v;
            }
        }
        t
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Max-norm of `self - other`.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "max_abs_diff",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// The submatrix made of the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, columns.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = out.row_mut(i);
            for (k, &j) in columns.iter().enumerate() {
                dst[k] = src[j];
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize without reassociation flags.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean distance between two slices.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn support(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `out = A * v` without shape checks.
pub(crate) fn gemv(a: &DenseMatrix, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.cols, v.len());
    debug_assert_eq!(a.rows, out.len());
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(a.row(i), v);
    }
}

/// `out = A^T * v` without shape checks.
pub(crate) fn gemv_t(a: &DenseMatrix, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.rows, v.len());
    debug_assert_eq!(a.cols, out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi != 0.0 {
            axpy(vi, a.row(i), out);
        }
    }
}

pub fn matvec(a: &DenseMatrix, v: &DenseVector) -> Result<DenseVector> {
    if a.cols != v.len() {
        return Err(Error::shape("matvec", format!("vector of length {}", a.cols), v.len()));
    }
    let mut out = vec![0.0; a.rows];
    gemv(a, v, &mut out);
    Ok(DenseVector(out))
}

/// `A^T * v`.
pub fn matvec_t(a: &DenseMatrix, v: &DenseVector) -> Result<DenseVector> {
    if a.rows != v.len() {
        return Err(Error::shape("matvec_t", format!("vector of length {}", a.rows), v.len()));
    }
    let mut out = vec![0.0; a.cols];
    gemv_t(a, v, &mut out);
    Ok(DenseVector(out))
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "matmul",
            format!("{} rows on the right", a.cols),
            b.rows,
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let dst = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                axpy(aik, b.row(k), dst);
            }
        }
    }
    Ok(out)
}

/// `A * A^T`, exploiting symmetry.
pub fn gram_rows(a: &DenseMatrix) -> DenseMatrix {
    let m = a.rows;
    let mut g = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = dot(a.row(i), a.row(j));
            g.data[i * m + j] = v;
            g.data[j * m + i] = v;
        }
    }
    g
}

/// Lower-triangular Cholesky factor `L` with `G = L L^T`, stored packed by
/// rows. It can grow one row/column at a time, which greedy solvers use to
/// refit on a support that gains one atom per iteration.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    packed: Vec<f64>,
}

impl Cholesky {
    pub fn empty() -> Self {
        Self {
            n: 0,
            packed: Vec::new(),
        }
    }

    /// Factors a symmetric positive-definite matrix. Symmetry is not
    /// checked here, only the lower triangle is read.
    pub fn factor(g: &DenseMatrix) -> Result<Self> {
        if g.rows != g.cols {
            return Err(Error::shape("cholesky", "square matrix", format!("{:?}", g.shape())));
        }
        let n = g.rows;
        let scale = (0..n).fold(0.0f64, |acc, i| acc.max(g.get(i, i).abs()));
        let mut chol = Self {
            n: 0,
            packed: Vec::with_capacity(n * (n + 1) / 2),
        };
        for i in 0..n {
            chol.push_row(&g.row(i)[..=i], scale, n)?;
        }
        Ok(chol)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn row_start(i: usize) -> usize {
        i * (i + 1) / 2
    }

    fn l_row(&self, i: usize) -> &[f64] {
        let s = Self::row_start(i);
        &self.packed[s..s + i + 1]
    }

    fn push_row(&mut self, g_row: &[f64], scale: f64, final_dim: usize) -> Result<()> {
        let i = self.n;
        debug_assert_eq!(g_row.len(), i + 1);
        let mut new_row = vec![0.0; i + 1];
        for j in 0..i {
            let lj = self.l_row(j);
            let s = g_row[j] - dot(&new_row[..j], &lj[..j]);
            new_row[j] = s / lj[j];
        }
        let d = g_row[i] - norm_sq(&new_row[..i]);
        let threshold = f64::EPSILON * final_dim.max(1) as f64 * scale.max(g_row[i].abs());
        if !d.is_finite() || d <= threshold {
            return Err(Error::Singular { pivot: i, value: d });
        }
        new_row[i] = d.sqrt();
        self.packed.extend_from_slice(&new_row);
        self.n += 1;
        Ok(())
    }

    /// Extends the factor of `G` to the factor of `[[G, c], [c^T, d]]`,
    /// where `cross = c` and `diag = d`.
    pub fn extend(&mut self, cross: &[f64], diag: f64) -> Result<()> {
        if cross.len() != self.n {
            return Err(Error::shape("Cholesky::extend", self.n, cross.len()));
        }
        let scale = (0..self.n).fold(diag.abs(), |acc, i| {
            let r = self.l_row(i);
            acc.max(norm_sq(r))
        });
        let mut row = cross.to_vec();
        row.push(diag);
        let dim = self.n + 1;
        self.push_row(&row, scale, dim)
    }

    /// Solves `G x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        // L y = b
        for i in 0..self.n {
            let li = self.l_row(i);
            b[i] = (b[i] - dot(&li[..i], &b[..i])) / li[i];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let xi = b[i] / self.l_row(i)[i];
            b[i] = xi;
            for (k, bk) in b[..i].iter_mut().enumerate() {
                *bk -= self.packed[Self::row_start(i) + k] * xi;
            }
        }
    }

    /// Solves `G X = B` for a right-hand side with many columns. Works on
    /// whole rows of `B` so the inner loops stay contiguous.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows != self.n {
            return Err(Error::shape("Cholesky::solve_matrix", self.n, b.rows));
        }
        let cols = b.cols;
        let mut x = b.clone();
        for i in 0..self.n {
            let li = self.l_row(i).to_vec();
            let (done, rest) = x.data.split_at_mut(i * cols);
            let row_i = &mut rest[..cols];
            for (k, &lik) in li[..i].iter().enumerate() {
                if lik != 0.0 {
                    axpy(-lik, &done[k * cols..(k + 1) * cols], row_i);
                }
            }
            let inv = 1.0 / li[i];
            row_i.iter_mut().for_each(|v| *v *= inv);
        }
        for i in (0..self.n).rev() {
            let (head, tail) = x.data.split_at_mut((i + 1) * cols);
            let row_i = &mut head[i * cols..];
            for k in i + 1..self.n {
                let lki = self.packed[Self::row_start(k) + i];
                if lki != 0.0 {
                    let off = (k - i - 1) * cols;
                    axpy(-lki, &tail[off..off + cols], row_i);
                }
            }
            let inv = 1.0 / self.l_row(i)[i];
            row_i.iter_mut().for_each(|v| *v *= inv);
        }
        Ok(x)
    }
}

fn check_symmetric(g: &DenseMatrix, tol: f64) -> Result<()> {
    for i in 0..g.rows {
        for j in 0..i {
            let gap = (g.get(i, j) - g.get(j, i)).abs();
            if gap > tol {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
        }
    }
    Ok(())
}

/// Solves `G X = B` for symmetric positive-definite `G`.
pub fn cholesky_solve(g: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if g.rows != g.cols {
        return Err(Error::shape("cholesky_solve", "square matrix", format!("{:?}", g.shape())));
    }
    if b.rows != g.rows {
        return Err(Error::shape("cholesky_solve", format!("{} rows", g.rows), b.rows));
    }
    check_symmetric(g, 1e-12 * g.max_abs().max(1.0))?;
    Cholesky::factor(g)?.solve_matrix(b)
}

/// Relative ridge applied when a Gram matrix fails to factor.
pub const RIDGE_RELATIVE: f64 = 1e-10;

/// Factors `G`, retrying once with `G + RIDGE_RELATIVE * trace(G)/k * I`
/// on failure. Returns the factor and the ridge that was applied.
pub fn factor_with_ridge(g: &DenseMatrix) -> Result<(Cholesky, f64)> {
    match Cholesky::factor(g) {
        Ok(c) => Ok((c, 0.0)),
        Err(Error::Singular { pivot, .. }) => {
            let k = g.rows as f64;
            let ridge = RIDGE_RELATIVE * g.trace().abs().max(f64::MIN_POSITIVE) / k;
            log::warn!("Gram matrix singular at pivot {pivot}; retrying with ridge {ridge:e}");
            let mut reg = g.clone();
            for i in 0..g.rows {
                reg.data[i * g.cols + i] += ridge;
            }
            Ok((Cholesky::factor(&reg)?, ridge))
        }
        Err(e) => Err(e),
    }
}

/// Moore-Penrose pseudo-inverse `Φ⁺ = Φ^T (Φ Φ^T)^{-1}` of a wide matrix.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    matrix: DenseMatrix,
    source_rows: usize,
    source_cols: usize,
    construction_seconds: f64,
    ridge: f64,
    null_dim: usize,
}

impl PseudoInverse {
    /// The `n x m` matrix `Φ⁺`.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn source_shape(&self) -> (usize, usize) {
        (self.source_rows, self.source_cols)
    }

    /// Wall time spent building this pseudo-inverse.
    pub fn construction_seconds(&self) -> f64 {
        self.construction_seconds
    }

    /// Ridge added to `Φ Φ^T` (zero unless the fallback was taken).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Dimension of the null space of `Φ^T` that was deflated out of the Gram.
    pub fn null_dimension(&self) -> usize {
        self.null_dim
    }

    /// `Φ⁺ v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        gemv(&self.matrix, v, out);
    }
}

fn pinv_from_factor(phi: &DenseMatrix, chol: &Cholesky) -> Result<DenseMatrix> {
    // X = (Φ Φ^T)^{-1} Φ is m x n; Φ⁺ = X^T.
    Ok(chol.solve_matrix(phi)?.transpose())
}

fn check_wide(phi: &DenseMatrix) -> Result<()> {
    if phi.rows > phi.cols {
        return Err(Error::shape(
            "pseudo_inverse",
            "rows <= cols",
            format!("{}x{}", phi.rows, phi.cols),
        ));
    }
    Ok(())
}

/// Pseudo-inverse of a full-row-rank matrix; fails on a singular Gram.
pub fn pseudo_inverse(phi: &DenseMatrix) -> Result<PseudoInverse> {
    check_wide(phi)?;
    let start = Instant::now();
    let chol = Cholesky::factor(&gram_rows(phi))?;
    let matrix = pinv_from_factor(phi, &chol)?;
    Ok(PseudoInverse {
        matrix,
        source_rows: phi.rows,
        source_cols: phi.cols,
        construction_seconds: start.elapsed().as_secs_f64(),
        ridge: 0.0,
        null_dim: 0,
    })
}

/// Like [`pseudo_inverse`], but tolerates a rank-deficient `Φ`.
///
/// When `G = Φ Φ^T` fails to factor, unit null vectors `v` of `G` are found
/// by inverse iteration and deflated as `G + c v v^T`; the result is then
/// projected onto the orthogonal complement of those vectors, which gives
/// the Moore-Penrose pseudo-inverse. A plain ridge is the last resort when
/// the small eigenvalue is not numerically zero.
pub fn pseudo_inverse_regularized(phi: &DenseMatrix) -> Result<PseudoInverse> {
    check_wide(phi)?;
    let start = Instant::now();
    let g = gram_rows(phi);
    let (chol, nulls, ridge) = factor_deflated(&g)?;
    let mut x = chol.solve_matrix(phi)?;
    for v in &nulls {
        // X ← (I − v v^T) X
        let mut proj = vec![0.0; x.cols];
        gemv_t(&x, v, &mut proj);
        for (i, &vi) in v.iter().enumerate() {
            axpy(-vi, &proj, x.row_mut(i));
        }
    }
    if !nulls.is_empty() {
        log::warn!("Φ is rank deficient; deflated a {}-dimensional null space", nulls.len());
    }
    Ok(PseudoInverse {
        matrix: x.transpose(),
        source_rows: phi.rows,
        source_cols: phi.cols,
        construction_seconds: start.elapsed().as_secs_f64(),
        ridge,
        null_dim: nulls.len(),
    })
}

const MAX_DEFLATIONS: usize = 8;
const NULL_EIGEN_RELATIVE: f64 = 1e-8;

fn factor_deflated(g: &DenseMatrix) -> Result<(Cholesky, Vec<Vec<f64>>, f64)> {
    let k = g.rows;
    let scale = (g.trace().abs() / k as f64).max(f64::MIN_POSITIVE);
    let mut work = g.clone();
    let mut nulls: Vec<Vec<f64>> = Vec::new();
    loop {
        match Cholesky::factor(&work) {
            Ok(c) => return Ok((c, nulls, 0.0)),
            Err(Error::Singular { .. }) => {}
            Err(e) => return Err(e),
        }
        let fallback = |nulls: Vec<Vec<f64>>| -> Result<(Cholesky, Vec<Vec<f64>>, f64)> {
            let (c, ridge) = factor_with_ridge(&work)?;
            Ok((c, nulls, ridge))
        };
        if nulls.len() >= MAX_DEFLATIONS {
            return fallback(nulls);
        }
        let mut shifted = work.clone();
        for i in 0..k {
            shifted.data[i * k + i] += RIDGE_RELATIVE * scale;
        }
        let Ok(inv) = Cholesky::factor(&shifted) else {
            return fallback(nulls);
        };
        let mut v: Vec<f64> = (0..k).map(|i| 1.0 + ((i * 7919 + 13) % 101) as f64 / 101.0).collect();
        for _ in 0..3 {
            for u in &nulls {
                axpy(-dot(u, &v), u, &mut v);
            }
            inv.solve_in_place(&mut v);
            let len = norm(&v);
            v.iter_mut().for_each(|e| *e /= len);
        }
        for u in &nulls {
            axpy(-dot(u, &v), u, &mut v);
        }
        let len = norm(&v);
        v.iter_mut().for_each(|e| *e /= len);
        let mut gv = vec![0.0; k];
        gemv(g, &v, &mut gv);
        if dot(&v, &gv) > NULL_EIGEN_RELATIVE * scale {
            return fallback(nulls);
        }
        for i in 0..k {
            axpy(scale * v[i], &v, work.row_mut(i));
        }
        nulls.push(v);
    }
}

/// Least squares `argmin_c ||A c - y||` through the normal equations,
/// using the ridge fallback if `A^T A` is singular.
pub fn least_squares(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if a.rows != y.len() {
        return Err(Error::shape("least_squares", a.rows, y.len()));
    }
    let at = a.transpose();
    let (chol, _) = factor_with_ridge(&gram_rows(&at))?;
    let mut rhs = vec![0.0; a.cols];
    gemv(&at, y, &mut rhs);
    chol.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// Parses the text matrix format: an optional run of `#` comment lines,
/// then `rows cols`, then one whitespace-separated row per line.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut offset = 0;
    let mut lines = Vec::new();
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            lines.push((offset, trimmed));
        }
        offset += line.len();
    }
    let mut iter = lines.into_iter();
    let (hoff, header) = iter.next().ok_or(Error::Parse {
        offset: 0,
        message: "missing 'rows cols' header".into(),
    })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            offset: hoff,
            message: format!("bad header '{header}': {e}"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            offset: hoff,
            message: format!("header must be 'rows cols', got '{header}'"),
        });
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (off, line) = iter.next().ok_or(Error::Parse {
            offset,
            message: format!("expected {rows} rows, found {r}"),
        })?;
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                offset: off,
                message: format!("bad number '{tok}'"),
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                offset: off,
                message: format!("row {r} has {} entries, expected {cols}", data.len() - before),
            });
        }
    }
    if let Some((off, _)) = iter.next() {
        return Err(Error::Parse {
            offset: off,
            message: "trailing data after last row".into(),
        });
    }
    DenseMatrix::new(rows, cols, data)
}

/// Formats a matrix in the text format. Floats use the shortest
/// representation that parses back to the same value.
pub fn format_matrix(m: &DenseMatrix, comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let _ = writeln!(out, "{} {}", m.rows, m.cols);
    for i in 0..m.rows {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix, comment: Option<&str>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m, comment)).map_err(|e| Error::io(path, e))
}

/// Vectors use the same format as an `n x 1` matrix.
pub fn write_vector(path: impl AsRef<Path>, v: &DenseVector, comment: Option<&str>) -> Result<()> {
    let m = DenseMatrix::from_vec_unchecked(v.len(), 1, v.0.clone());
    write_matrix(path, &m, comment)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<DenseVector> {
    let m = read_matrix(path)?;
    if m.cols != 1 && m.rows != 1 {
        return Err(Error::shape("read_vector", "n x 1 or 1 x n", format!("{}x{}", m.rows, m.cols)));
    }
    Ok(DenseVector(m.data))
}
