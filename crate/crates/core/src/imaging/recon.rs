//! Per-patch sparse coding of an image against a fixed dictionary.

use std::sync::Arc;

use rayon::prelude::*;

use super::tiling::{assemble, tile};
use super::{image_snr_db, GrayImage};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseVector};
use crate::probgen;
use crate::projections::{project_sparsity, BetaParam, SparsitySet};
use crate::solvers::{Algorithm, RecoveryProblem, SolverConfig, SolverTrace, Termination};

/// `Φ [x_t]_s + mean`, with `x_t` the lowest-residual snapshot taken no
/// later than `t`. For a patch the residual is the coding error itself, so
/// this is the best reconstruction the solver has produced by time `t`.
pub fn reconstruct_patch(
    trace: &SolverTrace,
    a: &SparsitySet,
    dict: &Dictionary,
    t: f64,
    mean: f64,
) -> Result<DenseVector> {
    let snap = trace.best_snapshot_at(t).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no {} snapshot within {t} s; the budget is shorter than one iteration",
            trace.algorithm
        ))
    })?;
    let x = project_sparsity(&snap.estimate, a)?;
    let mut out = vec![0.0; dict.rows()];
    dict.apply_sparse(&x, &mut out);
    out.iter_mut().for_each(|v| *v += mean);
    DenseVector::new(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageOptions {
    pub s: usize,
    pub subtract_mean: bool,
}

#[derive(Clone, Debug)]
pub struct ImageReconstruction {
    pub image: GrayImage,
    /// Per patch, in patch order, over the unclamped patch pixels.
    pub per_patch_snr: Vec<f64>,
    pub overall_snr_db: f64,
    pub precompute_seconds: f64,
    /// How each patch solve ended, in patch order.
    pub terminations: Vec<Termination>,
}

/// Codes every `w × w` patch of `img` (with `w² = dict.rows()`) using
/// `solver` with a per-patch budget of `cfg.time_budget`, then reassembles.
/// The pseudo-inverse is built once up front and shared by all patches.
pub fn reconstruct_image(
    img: &GrayImage,
    dict: &Arc<Dictionary>,
    solver: Algorithm,
    cfg: &SolverConfig,
    opts: &ImageOptions,
) -> Result<ImageReconstruction> {
    if !cfg.amortize_precompute {
        return Err(Error::InvalidArgument(
            "image reconstruction needs amortize_precompute = true".into(),
        ));
    }
    let w = patch_width(dict)?;
    let a = SparsitySet::new(opts.s, dict.cols())?;
    let precompute_seconds = if matches!(solver, Algorithm::Dm | Algorithm::Am) {
        dict.pinv()?.construction_seconds()
    } else {
        0.0
    };
    let grid = tile(img, w, opts.subtract_mean)?;
    let solved: Vec<(Vec<f64>, Termination)> = grid
        .patches
        .par_iter()
        .map(|patch| {
            let p = RecoveryProblem::new(dict.clone(), patch.clone(), a, 0.0, None)?;
            let trace = solver.solve(&p, cfg)?;
            let rec = reconstruct_patch(&trace, &a, dict, cfg.time_budget, 0.0)?;
            Ok((rec.into_vec(), trace.terminated_by))
        })
        .collect::<Result<_>>()?;
    let (coded, terminations): (Vec<Vec<f64>>, Vec<Termination>) = solved.into_iter().unzip();

    let per_patch_snr = grid
        .patches
        .iter()
        .zip(&grid.means)
        .zip(&coded)
        .map(|((orig, mean), rec)| {
            let o: Vec<f64> = orig.iter().map(|v| v + mean).collect();
            let r: Vec<f64> = rec.iter().map(|v| v + mean).collect();
            probgen::snr_db(&o, &r)
        })
        .collect();
    let views: Vec<&[f64]> = coded.iter().map(Vec::as_slice).collect();
    let image = assemble(&grid, &views, &grid.means)?;
    let overall_snr_db = image_snr_db(img, &image)?;
    Ok(ImageReconstruction {
        image,
        per_patch_snr,
        overall_snr_db,
        precompute_seconds,
        terminations,
    })
}

/// Picks DM's β for image coding: each candidate codes `patches` (already
/// mean-free) under `cfg` and is scored by total squared coding error.
/// Returns the best β and the `(β, error)` table in candidate order.
pub fn tune_patch_beta(
    patches: &[DenseVector],
    dict: &Arc<Dictionary>,
    s: usize,
    cfg: &SolverConfig,
    betas: &[f64],
) -> Result<(f64, Vec<(f64, f64)>)> {
    if patches.is_empty() || betas.is_empty() {
        return Err(Error::InvalidArgument("need at least one patch and one beta".into()));
    }
    let a = SparsitySet::new(s, dict.cols())?;
    let mut table = Vec::with_capacity(betas.len());
    for &beta in betas {
        let c = cfg.clone().with_beta(BetaParam::new(beta)?);
        let mut err = 0.0;
        for patch in patches {
            let p = RecoveryProblem::new(dict.clone(), patch.clone(), a, 0.0, None)?;
            let trace = Algorithm::Dm.solve(&p, &c)?;
            let rec = reconstruct_patch(&trace, &a, dict, c.time_budget, 0.0)?;
            err += linalg::distance(patch.as_slice(), rec.as_slice()).powi(2);
        }
        table.push((beta, err));
    }
    let best = table
        .iter()
        .fold(table[0], |best, &row| if row.1 < best.1 { row } else { best })
        .0;
    Ok((best, table))
}

pub(crate) fn patch_width(dict: &Dictionary) -> Result<usize> {
    let d = dict.rows();
    let w = (d as f64).sqrt().round() as usize;
    if w * w != d {
        return Err(Error::InvalidArgument(format!(
            "dictionary atoms have {d} entries, which is not a square patch"
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::solvers::omp_solve;

    fn haar2() -> Arc<Dictionary> {
        // 2x2 patches, an orthonormal basis plus two extra unit atoms.
        let h = 0.5;
        let cols = [
            [h, h, h, h],
            [h, -h, h, -h],
            [h, h, -h, -h],
            [h, -h, -h, h],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        Arc::new(Dictionary::new(DenseMatrix::from_fn(4, 6, |i, j| cols[j][i]).unwrap()))
    }

    #[test]
    fn zero_code_gives_flat_patch_at_mean() {
        let dict = haar2();
        let y = DenseVector::zeros(4);
        let p = RecoveryProblem::new(dict.clone(), y, SparsitySet::new(2, 6).unwrap(), 0.0, None).unwrap();
        let trace = omp_solve(&p, &SolverConfig::default()).unwrap();
        let a = SparsitySet::new(2, 6).unwrap();
        let out = reconstruct_patch(&trace, &a, &dict, 1.0, 0.25).unwrap();
        assert!(out.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn sparse_estimate_is_not_changed_by_thresholding() {
        let dict = haar2();
        let y = DenseVector::new(vec![0.5, -0.5, 0.5, -0.5]).unwrap();
        let p = RecoveryProblem::new(dict.clone(), y.clone(), SparsitySet::new(1, 6).unwrap(), 0.0, None).unwrap();
        let trace = omp_solve(&p, &SolverConfig::default()).unwrap();
        let a = SparsitySet::new(3, 6).unwrap();
        let out = reconstruct_patch(&trace, &a, &dict, 1.0, 0.0).unwrap();
        assert_eq!(probgen::snr_db(&y, &out), f64::INFINITY);
    }

    #[test]
    fn missing_snapshot_is_an_error() {
        let dict = haar2();
        let y = DenseVector::new(vec![0.5, -0.5, 0.5, -0.5]).unwrap();
        let p = RecoveryProblem::new(dict.clone(), y, SparsitySet::new(1, 6).unwrap(), 0.0, None).unwrap();
        let trace = omp_solve(&p, &SolverConfig::default()).unwrap();
        let a = SparsitySet::new(1, 6).unwrap();
        assert!(reconstruct_patch(&trace, &a, &dict, 0.0, 0.0).is_err());
    }

    #[test]
    fn image_from_basis_atoms_is_exact() {
        let dict = haar2();
        let pixels = vec![0.2, 0.6, 0.9, 0.1, 0.2, 0.6, 0.9, 0.1];
        let img = GrayImage::new(4, 2, pixels).unwrap();
        let cfg = SolverConfig::default().with_amortized_precompute(true).with_budget(0.5);
        let opts = ImageOptions { s: 4, subtract_mean: true };
        let r = reconstruct_image(&img, &dict, Algorithm::Omp, &cfg, &opts).unwrap();
        assert!(r.overall_snr_db > 200.0);
        assert_eq!(r.per_patch_snr.len(), 2);
    }

    #[test]
    fn beta_tuning_scores_every_candidate() {
        let dict = haar2();
        let patches = vec![DenseVector::new(vec![0.5, -0.5, 0.5, -0.5]).unwrap()];
        let cfg = SolverConfig::default().with_budget(0.05).with_max_iters(200);
        let (best, table) = tune_patch_beta(&patches, &dict, 1, &cfg, &[-0.9, -0.14]).unwrap();
        assert_eq!(table.len(), 2);
        assert!(table.iter().all(|&(_, e)| e.is_finite() && e >= 0.0));
        assert!(best == -0.9 || best == -0.14);
        assert!(tune_patch_beta(&[], &dict, 1, &cfg, &[-0.5]).is_err());
    }

    #[test]
    fn requires_amortized_precompute() {
        let img = GrayImage::new(2, 2, vec![0.0; 4]).unwrap();
        let opts = ImageOptions { s: 1, subtract_mean: true };
        let err = reconstruct_image(&img, &haar2(), Algorithm::Dm, &SolverConfig::default(), &opts);
        assert!(err.is_err());
    }
}
