//! Random compressed-sensing problems: Gaussian measurement matrices with
//! zero-mean unit-norm columns, Gaussian s-sparse signals, and additive
//! Gaussian noise scaled to hit a target SNR exactly.
//!
//! Randomness comes from ChaCha8 seeded with the master seed. Each
//! component draws from its own ChaCha stream so that, for instance,
//! changing the sparsity does not perturb the matrix:
//!
//! | stream | component |
//! |--------|-----------|
//! | 1      | measurement matrix |
//! | 2      | sparse signal (support and values) |
//! | 3      | observation noise |

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::projections::SparsitySet;
use crate::solvers::RecoveryProblem;

pub const MATRIX_STREAM: u64 = 1;
pub const SIGNAL_STREAM: u64 = 2;
pub const NOISE_STREAM: u64 = 3;

/// A seeded RNG on one of the documented streams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemSpec {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    /// `None` means noise-free.
    pub target_snr_db: Option<f64>,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn new(m: usize, n: usize, s: usize, target_snr_db: Option<f64>, seed: u64) -> Result<Self> {
        let spec = Self {
            m,
            n,
            s,
            target_snr_db,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidArgument(format!(
                "need 0 < m < n, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        if self.s == 0 || self.s > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 0 < s <= n, got s = {}, n = {}",
                self.s, self.n
            )));
        }
        if let Some(snr) = self.target_snr_db {
            if snr.is_nan() {
                return Err(Error::InvalidArgument("target SNR is NaN".into()));
            }
        }
        Ok(())
    }
}

/// `ỹ = y + ε·N(0, σ²)` with σ fixed at 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub epsilon: f64,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(Self { epsilon, sigma: 1.0 })
    }
}

/// Gaussian `m x n` matrix whose columns are centred and then scaled to
/// unit norm.
pub fn gen_dictionary(spec: &ProblemSpec) -> Result<Dictionary> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = stream_rng(spec.seed, MATRIX_STREAM);
    // Draw column by column so the matrix is laid out the same way for any m.
    let mut columns = vec![0.0; m * n];
    for col in columns.chunks_exact_mut(m) {
        for v in col.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if m > 1 {
            let mean = col.iter().sum::<f64>() / m as f64;
            col.iter_mut().for_each(|v| *v -= mean);
        }
        let nrm = linalg::norm(col);
        col.iter_mut().for_each(|v| *v /= nrm);
    }
    let cols = DenseMatrix::new(n, m, columns)?;
    Ok(Dictionary::new(cols.transpose()))
}

/// An s-sparse vector with a uniformly random support and N(0,1) values.
pub fn gen_sparse_signal(spec: &ProblemSpec) -> Result<DenseVector> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, SIGNAL_STREAM);
    let mut x = vec![0.0; spec.n];
    for i in index::sample(&mut rng, spec.n, spec.s) {
        let mut value: f64 = 0.0;
        while value == 0.0 {
            value = rng.sample(StandardNormal);
        }
        x[i] = value;
    }
    DenseVector::new(x)
}

/// Adds fresh Gaussian noise scaled so the realized SNR equals
/// `target_snr_db`. An infinite target returns `y` unchanged with `ε = 0`.
pub fn calibrate_noise(y: &DenseVector, target_snr_db: f64, seed: u64) -> Result<(DenseVector, f64)> {
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Err(Error::InvalidArgument("cannot calibrate noise for a zero signal".into()));
    }
    if target_snr_db.is_nan() {
        return Err(Error::InvalidArgument("target SNR is NaN".into()));
    }
    if target_snr_db == f64::INFINITY {
        return Ok((y.clone(), 0.0));
    }
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let eta: Vec<f64> = (0..y.len()).map(|_| rng.sample(StandardNormal)).collect();
    let eps = y_norm / (10f64.powf(target_snr_db / 20.0) * linalg::norm(&eta));
    let y_tilde = y.iter().zip(&eta).map(|(yi, ei)| yi + eps * ei).collect();
    Ok((DenseVector::new(y_tilde)?, eps))
}

/// `‖estimate − truth‖₂² / ‖truth‖₂²`.
pub fn rel_mse(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::shape("rel_mse", truth.len(), estimate.len()));
    }
    let t = linalg::norm_sq(truth);
    if t == 0.0 {
        return Err(Error::InvalidArgument("rel_mse needs a nonzero reference".into()));
    }
    let d: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(d / t)
}

/// `20·log₁₀(‖reference‖ / ‖reference − test‖)`; `+∞` for an exact match.
pub fn snr_db(reference: &[f64], test: &[f64]) -> f64 {
    let err = linalg::distance(reference, test);
    if err == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (linalg::norm(reference) / err).log10()
}

/// A fully generated random instance: the recovery problem plus the noise
/// scale that was applied.
#[derive(Clone, Debug)]
pub struct GeneratedProblem {
    pub spec: ProblemSpec,
    pub problem: RecoveryProblem,
    pub epsilon: f64,
}

/// Builds `(Φ, x, ỹ)` for a spec. `delta` is set to the realized noise
/// energy `‖ỹ − Φx‖₂²`.
pub fn generate(spec: &ProblemSpec) -> Result<GeneratedProblem> {
    let dict = gen_dictionary(spec)?;
    generate_with_dictionary(spec, Arc::new(dict))
}

/// Same as [`generate`] but reusing a dictionary.
pub fn generate_with_dictionary(spec: &ProblemSpec, dict: Arc<Dictionary>) -> Result<GeneratedProblem> {
    spec.validate()?;
    let x = gen_sparse_signal(spec)?;
    let y = linalg::matvec(dict.matrix(), &x)?;
    let (y_obs, epsilon) = match spec.target_snr_db {
        Some(snr) => calibrate_noise(&y, snr, spec.seed)?,
        None => (y.clone(), 0.0),
    };
    let delta = linalg::distance(&y, &y_obs).powi(2);
    let sparsity = SparsitySet::new(spec.s, spec.n)?;
    let problem = RecoveryProblem::new(dict, y_obs, sparsity, delta, Some(x))?;
    Ok(GeneratedProblem {
        spec: *spec,
        problem,
        epsilon,
    })
}
