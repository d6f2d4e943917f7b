//! The two constraint sets of sparse recovery and their projections:
//! hard thresholding onto `{x : ‖x‖₀ ≤ s}` and the pseudo-inverse
//! projection onto the affine set `{x : Φx = y}`, plus the Difference Map
//! estimates built from them.

use std::cmp::Ordering;
use std::sync::Arc;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;

/// `{x ∈ ℝⁿ : ‖x‖₀ ≤ s}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SparsitySet {
    s: usize,
    n: usize,
}

impl SparsitySet {
    pub fn new(s: usize, n: usize) -> Result<Self> {
        if s == 0 || s > n {
            return Err(Error::InvalidArgument(format!(
                "sparsity must satisfy 0 < s <= n, got s = {s}, n = {n}"
            )));
        }
        Ok(Self { s, n })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && x.iter().filter(|v| **v != 0.0).count() <= self.s
    }
}

/// The data-fidelity set. Projection targets the manifold `Φx = y`;
/// `delta` is carried for stopping rules only.
#[derive(Clone, Debug)]
pub struct DataFidelitySet {
    dictionary: Arc<Dictionary>,
    y: DenseVector,
    delta: f64,
}

impl DataFidelitySet {
    pub fn new(dictionary: Arc<Dictionary>, y: DenseVector, delta: f64) -> Result<Self> {
        if y.len() != dictionary.rows() {
            return Err(Error::shape("DataFidelitySet", dictionary.rows(), y.len()));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
        }
        Ok(Self { dictionary, y, delta })
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        &self.dictionary
    }

    pub fn y(&self) -> &DenseVector {
        &self.y
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether `‖Φx − y‖₂² ≤ delta`.
    pub fn within_delta(&self, x: &[f64]) -> bool {
        let r = self.dictionary.residual_norm(x, &self.y);
        r * r <= self.delta
    }
}

/// The Difference Map step parameter; never zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParam(f64);

impl BetaParam {
    pub const DEFAULT: f64 = -0.14;

    pub fn new(beta: f64) -> Result<Self> {
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "beta must be finite and nonzero, got {beta}"
            )));
        }
        Ok(Self(beta))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for BetaParam {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// Order by decreasing magnitude, then increasing index.
fn magnitude_order(x: &[f64], a: usize, b: usize) -> Ordering {
    x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b))
}

/// Keeps the `s` largest-magnitude entries of `x` in `out` and zeroes the
/// rest. Ties at the cutoff keep the lower index. `scratch` is reused
/// across calls to avoid reallocating the index buffer.
pub(crate) fn hard_threshold_into(x: &[f64], s: usize, scratch: &mut Vec<usize>, out: &mut [f64]) {
    let n = x.len();
    debug_assert_eq!(out.len(), n);
    if s >= n {
        out.copy_from_slice(x);
        return;
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    if s == 0 {
        return;
    }
    scratch.clear();
    scratch.extend(0..n);
    scratch.select_nth_unstable_by(s - 1, |&a, &b| magnitude_order(x, a, b));
    for &i in &scratch[..s] {
        out[i] = x[i];
    }
}

/// Indices of the `k` largest-magnitude entries, lower index winning ties,
/// sorted ascending.
pub(crate) fn top_k_indices(x: &[f64], k: usize) -> Vec<usize> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n && k > 0 {
        idx.select_nth_unstable_by(k - 1, |&a, &b| magnitude_order(x, a, b));
    }
    idx.truncate(k.min(n));
    idx.sort_unstable();
    idx
}

/// `P_A(x) = [x]_s`.
pub fn project_sparsity(x: &DenseVector, a: &SparsitySet) -> Result<DenseVector> {
    if x.len() != a.n {
        return Err(Error::shape("project_sparsity", a.n, x.len()));
    }
    let mut out = vec![0.0; a.n];
    hard_threshold_into(x, a.s, &mut Vec::with_capacity(a.n), &mut out);
    Ok(DenseVector::from_vec_unchecked(out))
}

/// Scratch buffers for the affine projection.
#[derive(Debug)]
pub(crate) struct FidelityScratch {
    residual: Vec<f64>,
    correction: Vec<f64>,
}

impl FidelityScratch {
    pub(crate) fn new(m: usize, n: usize) -> Self {
        Self {
            residual: vec![0.0; m],
            correction: vec![0.0; n],
        }
    }
}

/// `out = x − Φ⁺(Φx − y)`.
pub(crate) fn fidelity_project_into(
    b: &DataFidelitySet,
    x: &[f64],
    scratch: &mut FidelityScratch,
    out: &mut [f64],
) -> Result<()> {
    let dict = &b.dictionary;
    let pinv = dict.pinv()?;
    dict.apply(x, &mut scratch.residual);
    for (r, yi) in scratch.residual.iter_mut().zip(b.y.iter()) {
        *r -= yi;
    }
    pinv.apply(&scratch.residual, &mut scratch.correction);
    for ((o, xi), c) in out.iter_mut().zip(x).zip(&scratch.correction) {
        *o = xi - c;
    }
    Ok(())
}

/// `P_B(x) = x − Φ⁺(Φx − y)`.
pub fn project_fidelity(x: &DenseVector, b: &DataFidelitySet) -> Result<DenseVector> {
    let (m, n) = (b.dictionary.rows(), b.dictionary.cols());
    if x.len() != n {
        return Err(Error::shape("project_fidelity", n, x.len()));
    }
    let mut out = vec![0.0; n];
    fidelity_project_into(b, x, &mut FidelityScratch::new(m, n), &mut out)?;
    Ok(DenseVector::from_vec_unchecked(out))
}

/// `f_A(x) = P_A(x) − (P_A(x) − x)/β`.
pub fn estimate_fa(x: &DenseVector, a: &SparsitySet, beta: BetaParam) -> Result<DenseVector> {
    let pa = project_sparsity(x, a)?;
    let inv = 1.0 / beta.get();
    let out = pa.iter().zip(x.iter()).map(|(p, xi)| p - (p - xi) * inv).collect();
    Ok(DenseVector::from_vec_unchecked(out))
}

/// `f_B(x) = P_B(x) + (P_B(x) − x)/β`.
pub fn estimate_fb(x: &DenseVector, b: &DataFidelitySet, beta: BetaParam) -> Result<DenseVector> {
    let pb = project_fidelity(x, b)?;
    let inv = 1.0 / beta.get();
    let out = pb.iter().zip(x.iter()).map(|(p, xi)| p + (p - xi) * inv).collect();
    Ok(DenseVector::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, DenseMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    fn fidelity(rows: &[Vec<f64>], y: &[f64]) -> DataFidelitySet {
        let dict = Arc::new(Dictionary::new(DenseMatrix::from_rows(rows).unwrap()));
        DataFidelitySet::new(dict, v(y), 0.0).unwrap()
    }

    fn gaussian_fidelity(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DataFidelitySet {
        let phi = DenseMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal)).unwrap();
        let y: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        DataFidelitySet::new(Arc::new(Dictionary::new(phi)), v(&y), 0.0).unwrap()
    }

    /// Every s-subset of indices; the brute-force oracle for hard thresholding.
    fn subsets(n: usize, s: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, s: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == s {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, s, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, s, &mut Vec::new(), &mut out);
        out
    }

    fn brute_force_min_distance(x: &[f64], s: usize) -> f64 {
        subsets(x.len(), s)
            .iter()
            .map(|keep| {
                x.iter()
                    .enumerate()
                    .filter(|(i, _)| !keep.contains(i))
                    .map(|(_, v)| v * v)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    #[test]
    fn sparsity_set_bounds() {
        assert!(SparsitySet::new(0, 3).is_err());
        assert!(SparsitySet::new(4, 3).is_err());
        assert!(SparsitySet::new(3, 3).is_ok());
    }

    #[test]
    fn beta_rejects_zero() {
        assert!(BetaParam::new(0.0).is_err());
        assert!(BetaParam::new(f64::NAN).is_err());
        assert_eq!(BetaParam::default().get(), -0.14);
    }

    #[test]
    fn hard_threshold_examples() {
        let a = SparsitySet::new(2, 3).unwrap();
        assert_eq!(project_sparsity(&v(&[3.0, -1.0, 2.0]), &a).unwrap().as_slice(), &[3.0, 0.0, 2.0]);
        let full = SparsitySet::new(3, 3).unwrap();
        assert_eq!(project_sparsity(&v(&[3.0, -1.0, 2.0]), &full).unwrap().as_slice(), &[3.0, -1.0, 2.0]);
        // ties at the cutoff keep the lower index
        assert_eq!(project_sparsity(&v(&[1.0, -1.0, 1.0]), &a).unwrap().as_slice(), &[1.0, -1.0, 0.0]);
        let tie = [1.0, -1.0, 2.0];
        let out = project_sparsity(&v(&tie), &a).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 0.0, 2.0]);
        assert_eq!(linalg::distance(&out, &tie), brute_force_min_distance(&tie, 2));
    }

    #[test]
    fn hard_threshold_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=12 {
            for s in 1..=n {
                let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let a = SparsitySet::new(s, n).unwrap();
                let out = project_sparsity(&v(&x), &a).unwrap();
                assert!(out.nnz() <= s);
                for (o, xi) in out.iter().zip(&x) {
                    assert!(*o == 0.0 || o == xi);
                }
                let d = linalg::distance(&out, &x);
                assert!((d - brute_force_min_distance(&x, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_examples() {
        let b = fidelity(&[vec![1.0, 0.0]], &[2.0]);
        assert_eq!(project_fidelity(&v(&[0.0, 0.0]), &b).unwrap().as_slice(), &[2.0, 0.0]);
        let on = v(&[2.0, -7.0]);
        assert_eq!(project_fidelity(&on, &b).unwrap(), on);

        let b = fidelity(&[vec![1.0, 1.0]], &[2.0]);
        let p = project_fidelity(&v(&[0.0, 0.0]), &b).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_shape_error() {
        let b = fidelity(&[vec![1.0, 0.0]], &[2.0]);
        assert!(project_fidelity(&v(&[1.0, 2.0, 3.0]), &b).is_err());
        let dict = Arc::new(Dictionary::new(DenseMatrix::identity(2)));
        assert!(DataFidelitySet::new(dict, v(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn fa_fb_examples() {
        let a = SparsitySet::new(2, 3).unwrap();
        let x = v(&[3.0, -1.0, 2.0]);
        let fa = estimate_fa(&x, &a, BetaParam::new(-0.5).unwrap()).unwrap();
        assert_eq!(fa.as_slice(), &[3.0, 2.0, 2.0]);

        let in_a = v(&[3.0, 0.0, 2.0]);
        assert_eq!(estimate_fa(&in_a, &a, BetaParam::default()).unwrap(), in_a);

        let fa = estimate_fa(&x, &a, BetaParam::new(-1.0).unwrap()).unwrap();
        let pa = project_sparsity(&x, &a).unwrap();
        for i in 0..3 {
            assert_eq!(fa[i], 2.0 * pa[i] - x[i]);
        }

        let b = fidelity(&[vec![1.0, 1.0, 0.5]], &[2.0]);
        let x = v(&[0.3, -1.2, 4.0]);
        let fb = estimate_fb(&x, &b, BetaParam::new(-1.0).unwrap()).unwrap();
        for i in 0..3 {
            assert!((fb[i] - x[i]).abs() < 1e-15);
        }
        let pb = project_fidelity(&x, &b).unwrap();
        let fb = estimate_fb(&x, &b, BetaParam::new(1.0).unwrap()).unwrap();
        for i in 0..3 {
            assert!((fb[i] - (2.0 * pb[i] - x[i])).abs() < 1e-14);
        }
        let on = project_fidelity(&x, &b).unwrap();
        let fb = estimate_fb(&on, &b, BetaParam::default()).unwrap();
        for i in 0..3 {
            assert!((fb[i] - on[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_output_offset_is_orthogonal_to_null_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (m, n) = (4, 9);
            let b = gaussian_fidelity(&mut rng, m, n);
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let p = project_fidelity(&v(&x), &b).unwrap();
            let offset: Vec<f64> = p.iter().zip(&x).map(|(a, b)| a - b).collect();
            // Null-space vectors: project random vectors onto ker Φ by
            // Gram-Schmidt against the rows of Φ (computed here, not by the library).
            let phi = b.dictionary().matrix();
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for i in 0..m {
                let mut r = phi.row(i).to_vec();
                for q in &basis {
                    let c = linalg::dot(&r, q);
                    linalg::axpy(-c, q, &mut r);
                }
                let nr = linalg::norm(&r);
                basis.push(r.iter().map(|v| v / nr).collect());
            }
            for _ in 0..5 {
                let mut z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for q in &basis {
                    let c = linalg::dot(&z, q);
                    linalg::axpy(-c, q, &mut z);
                }
                assert!(linalg::dot(&offset, &z).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projections_are_idempotent(seed in 0u64..10_000, s in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, n) = (5, 10);
            let a = SparsitySet::new(s, n).unwrap();
            let b = gaussian_fidelity(&mut rng, m, n);
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let x = v(&x);
            let pa = project_sparsity(&x, &a).unwrap();
            prop_assert_eq!(project_sparsity(&pa, &a).unwrap(), pa);
            let pb = project_fidelity(&x, &b).unwrap();
            let pbb = project_fidelity(&pb, &b).unwrap();
            let scale = 1.0 + linalg::norm(&pb);
            prop_assert!(linalg::distance(&pb, &pbb) <= 1e-10 * scale);
        }

        #[test]
        fn fidelity_projection_is_non_expansive(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = gaussian_fidelity(&mut rng, 6, 15);
            let u: Vec<f64> = (0..15).map(|_| rng.sample(StandardNormal)).collect();
            let w: Vec<f64> = (0..15).map(|_| rng.sample(StandardNormal)).collect();
            let pu = project_fidelity(&v(&u), &b).unwrap();
            let pw = project_fidelity(&v(&w), &b).unwrap();
            prop_assert!(linalg::distance(&pu, &pw) <= linalg::distance(&u, &w) + 1e-10);
        }

        #[test]
        fn fidelity_output_satisfies_data(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = gaussian_fidelity(&mut rng, 7, 20);
            let x: Vec<f64> = (0..20).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let p = project_fidelity(&v(&x), &b).unwrap();
            let r = linalg::matvec(b.dictionary().matrix(), &p).unwrap();
            let err = linalg::distance(&r, b.y());
            prop_assert!(err <= 1e-8 * (1.0 + b.y().norm()));
        }
    }
}
