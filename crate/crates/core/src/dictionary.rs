use once_cell::sync::OnceCell;

use crate::error::Result;
use crate::linalg::{self, DenseMatrix, PseudoInverse};

/// A measurement matrix or dictionary `Φ` (m x n) with its columns also
/// stored contiguously and a lazily built, cached pseudo-inverse.
#[derive(Debug)]
pub struct Dictionary {
    phi: DenseMatrix,
    columns: DenseMatrix,
    column_norms: Vec<f64>,
    pinv: OnceCell<PseudoInverse>,
}

impl Dictionary {
    pub fn new(phi: DenseMatrix) -> Self {
        let columns = phi.transpose();
        let column_norms = (0..columns.rows()).map(|j| linalg::norm(columns.row(j))).collect();
        Self {
            phi,
            columns,
            column_norms,
            pinv: OnceCell::new(),
        }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.phi
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }

    pub fn cols(&self) -> usize {
        self.phi.cols()
    }

    /// Column `j` of `Φ` as a contiguous slice.
    pub fn atom(&self, j: usize) -> &[f64] {
        self.columns.row(j)
    }

    /// `Φ^T` (n x m).
    pub fn transposed(&self) -> &DenseMatrix {
        &self.columns
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// The pseudo-inverse, computed on first use. A rank-deficient `Φ Φ^T`
    /// is retried once with a small ridge.
    pub fn pinv(&self) -> Result<&PseudoInverse> {
        self.pinv
            .get_or_try_init(|| linalg::pseudo_inverse_regularized(&self.phi))
    }

    pub fn pinv_is_cached(&self) -> bool {
        self.pinv.get().is_some()
    }

    /// `out = Φ x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        linalg::gemv(&self.phi, x, out);
    }

    /// `out = Φ x` for `x` that is mostly zeros.
    pub fn apply_sparse(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                linalg::axpy(xj, self.atom(j), out);
            }
        }
    }

    /// `out = Φ^T r`.
    pub fn correlate(&self, r: &[f64], out: &mut [f64]) {
        linalg::gemv(&self.columns, r, out);
    }

    /// `‖Φ x − y‖₂` for a sparse `x`.
    pub fn residual_norm(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut phix = vec![0.0; self.rows()];
        self.apply_sparse(x, &mut phix);
        linalg::distance(&phix, y)
    }
}

impl From<DenseMatrix> for Dictionary {
    fn from(phi: DenseMatrix) -> Self {
        Self::new(phi)
    }
}
