//! Desk-scale dictionary learning: sparse coding alternated with the
//! method of optimal directions (MOD).
//!
//! Each round codes every training patch against the current dictionary,
//! refits the coefficients by least squares on the chosen support, and
//! keeps whichever of the new code and the previous support (refit to the
//! current atoms) fits better. The MOD
//! step then solves `Φ = Y X^T (X X^T)^{-1}` over the atoms in use. Both
//! steps can only lower `‖Y − ΦX‖_F`, so the recorded training error is
//! non-increasing up to round-off.
//!
//! Randomness (initial atoms, replacement directions, patch sampling) uses
//! ChaCha8 stream 4 of the caller's seed.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::GrayImage;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{self, factor_with_ridge, DenseMatrix, DenseVector};
use crate::probgen::stream_rng;
use crate::projections::SparsitySet;
use crate::solvers::greedy::fit_support;
use crate::solvers::{Algorithm, RecoveryProblem, SolverConfig};

pub const LEARN_STREAM: u64 = 4;

#[derive(Clone, Debug)]
pub struct LearnOptions {
    pub atoms: usize,
    pub s_train: usize,
    pub iterations: usize,
    pub seed: u64,
    pub coder: Algorithm,
    /// Per-patch solver settings for the coding pass.
    pub coder_cfg: SolverConfig,
}

impl Default for LearnOptions {
    fn default() -> Self {
        Self {
            atoms: 128,
            s_train: 6,
            iterations: 20,
            seed: 0,
            coder: Algorithm::Dm,
            coder_cfg: SolverConfig::default()
                .with_max_iters(150)
                .with_budget(1.0)
                .with_amortized_precompute(true),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMeta {
    pub num_patches: usize,
    pub iterations: usize,
    /// Mean code support size after the last round.
    pub avg_nonzeros: f64,
    /// `‖Y − ΦX‖_F / ‖Y‖_F` after each MOD update.
    pub rel_error: Vec<f64>,
}

#[derive(Debug)]
pub struct LearnedDictionary {
    pub dictionary: Dictionary,
    pub patch_w: usize,
    pub training: TrainingMeta,
}

type Code = Vec<(usize, f64)>;

fn code_error(phi_cols: &[Vec<f64>], code: &Code, y: &[f64]) -> f64 {
    let mut r = y.to_vec();
    for &(j, c) in code {
        linalg::axpy(-c, &phi_cols[j], &mut r);
    }
    linalg::norm_sq(&r)
}

fn to_matrix(cols: &[Vec<f64>]) -> DenseMatrix {
    let d = cols[0].len();
    DenseMatrix::from_vec_unchecked(
        d,
        cols.len(),
        (0..d).flat_map(|i| cols.iter().map(move |c| c[i])).collect(),
    )
}

fn random_unit(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = linalg::norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn validate(patches: &[DenseVector], k: usize, s: usize) -> Result<usize> {
    let d = patches.first().map(|p| p.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidArgument("no training patches".into()));
    }
    if let Some(bad) = patches.iter().position(|p| p.len() != d) {
        return Err(Error::shape("learn_dictionary patch", d, patches[bad].len()));
    }
    if patches.len() < k {
        return Err(Error::InvalidArgument(format!(
            "need at least as many patches as atoms, got {} < {k}",
            patches.len()
        )));
    }
    if s == 0 || s > k {
        return Err(Error::InvalidArgument(format!("s_train must be in 1..={k}, got {s}")));
    }
    Ok(d)
}

/// Learns an overcomplete dictionary (`atoms > patch length`) starting from
/// randomly chosen, normalized training patches.
pub fn learn_dictionary(patches: &[DenseVector], opts: &LearnOptions) -> Result<LearnedDictionary> {
    let d = validate(patches, opts.atoms, opts.s_train)?;
    if opts.atoms <= d {
        return Err(Error::InvalidArgument(format!(
            "dictionary must be overcomplete, got {} atoms for patches of length {d}",
            opts.atoms
        )));
    }
    let mut rng = stream_rng(opts.seed, LEARN_STREAM);
    let init: Vec<Vec<f64>> = index::sample(&mut rng, patches.len(), opts.atoms)
        .into_iter()
        .map(|i| {
            let p = &patches[i];
            let n = p.norm();
            if n > 0.0 {
                p.iter().map(|v| v / n).collect()
            } else {
                random_unit(d, &mut rng)
            }
        })
        .collect();
    learn_dictionary_from(patches, &to_matrix(&init), opts)
}

/// Same as [`learn_dictionary`] from a caller-supplied initial dictionary
/// (`d × K` with `K ≥ d`); `opts.atoms` is ignored.
pub fn learn_dictionary_from(
    patches: &[DenseVector],
    init: &DenseMatrix,
    opts: &LearnOptions,
) -> Result<LearnedDictionary> {
    let k = init.cols();
    let d = validate(patches, k, opts.s_train)?;
    if init.rows() != d || k < d {
        return Err(Error::shape("learn_dictionary_from", format!("{d}xK, K >= {d}"), format!("{d}x{k}")));
    }
    let patch_w = (d as f64).sqrt().round() as usize;
    let mut rng = stream_rng(opts.seed, LEARN_STREAM);

    let mut atoms: Vec<Vec<f64>> = (0..k).map(|j| init.column(j)).collect();
    for a in &mut atoms {
        let n = linalg::norm(a);
        if n > 0.0 {
            a.iter_mut().for_each(|v| *v /= n);
        } else {
            *a = random_unit(d, &mut rng);
        }
    }
    let y_total: f64 = patches.iter().map(|p| linalg::norm_sq(p)).sum();
    let y_norm = y_total.sqrt().max(f64::MIN_POSITIVE);
    let a = SparsitySet::new(opts.s_train, k)?;
    let mut codes: Vec<Code> = vec![Vec::new(); patches.len()];
    let mut rel_error = Vec::with_capacity(opts.iterations);

    for round in 0..opts.iterations {
        let dict = Arc::new(Dictionary::new(to_matrix(&atoms)));
        if matches!(opts.coder, Algorithm::Dm | Algorithm::Am) {
            dict.pinv()?;
        }
        let atoms_ref = &atoms;
        codes = patches
            .par_iter()
            .zip(codes.par_iter())
            .map(|(y, old)| -> Result<Code> {
                if y.norm() == 0.0 {
                    return Ok(Vec::new());
                }
                let p = RecoveryProblem::new(dict.clone(), y.clone(), a, 0.0, None)?;
                let trace = opts.coder.solve(&p, &opts.coder_cfg)?;
                let support = trace.best_snapshot().estimate.support();
                let coefs = fit_support(&dict, &support, y)?;
                let fresh: Code = support.into_iter().zip(coefs).collect();
                if old.is_empty() {
                    return Ok(fresh);
                }
                // The previous support, refit to the current atoms.
                let old_support: Vec<usize> = old.iter().map(|&(j, _)| j).collect();
                let old_coefs = fit_support(&dict, &old_support, y)?;
                let refit: Code = old_support.into_iter().zip(old_coefs).collect();
                let prev = if code_error(atoms_ref, &refit, y) <= code_error(atoms_ref, old, y) {
                    refit
                } else {
                    old.clone()
                };
                let keep_old = code_error(atoms_ref, &prev, y) <= code_error(atoms_ref, &fresh, y);
                Ok(if keep_old { prev } else { fresh })
            })
            .collect::<Result<_>>()?;

        let before = total_error(&atoms, &codes, patches);
        let updated = mod_update(&atoms, &codes, patches)?;
        if total_error(&updated, &codes, patches) <= before {
            atoms = updated;
        }
        normalize(&mut atoms, &mut codes);
        reseed_dead(&mut atoms, &codes, patches, &mut rng);
        let err = total_error(&atoms, &codes, patches).sqrt() / y_norm;
        log::debug!("dictionary round {}: rel_error {err:.6}", round + 1);
        rel_error.push(err);
    }

    let avg_nonzeros = codes.iter().map(|c| c.iter().filter(|(_, v)| *v != 0.0).count()).sum::<usize>() as f64
        / patches.len() as f64;
    Ok(LearnedDictionary {
        dictionary: Dictionary::new(to_matrix(&atoms)),
        patch_w,
        training: TrainingMeta {
            num_patches: patches.len(),
            iterations: opts.iterations,
            avg_nonzeros,
            rel_error,
        },
    })
}

fn total_error(atoms: &[Vec<f64>], codes: &[Code], patches: &[DenseVector]) -> f64 {
    codes.par_iter().zip(patches).map(|(c, y)| code_error(atoms, c, y)).sum()
}

/// MOD over the atoms that appear in some code; unused atoms are returned
/// unchanged.
fn mod_update(atoms: &[Vec<f64>], codes: &[Code], patches: &[DenseVector]) -> Result<Vec<Vec<f64>>> {
    let k = atoms.len();
    let d = atoms[0].len();
    let mut slot = vec![usize::MAX; k];
    let mut used = Vec::new();
    for &(j, _) in codes.iter().flatten() {
        if slot[j] == usize::MAX {
            slot[j] = used.len();
            used.push(j);
        }
    }
    let u = used.len();
    let mut out = atoms.to_vec();
    if u == 0 {
        return Ok(out);
    }
    // G = X X^T (u × u) and B = X Y^T (u × d)
    let mut g = DenseMatrix::zeros(u, u);
    let mut b = DenseMatrix::zeros(u, d);
    for (code, y) in codes.iter().zip(patches) {
        for &(i, ci) in code {
            let si = slot[i];
            linalg::axpy(ci, y, b.row_mut(si));
            for &(j, cj) in code {
                let sj = slot[j];
                g.set(si, sj, g.get(si, sj) + ci * cj);
            }
        }
    }
    let (chol, _) = factor_with_ridge(&g)?;
    let phi_t = chol.solve_matrix(&b)?;
    for (s, &j) in used.iter().enumerate() {
        out[j] = phi_t.row(s).to_vec();
    }
    Ok(out)
}

fn normalize(atoms: &mut [Vec<f64>], codes: &mut [Code]) {
    let norms: Vec<f64> = atoms.iter().map(|a| linalg::norm(a)).collect();
    for (a, &n) in atoms.iter_mut().zip(&norms) {
        if n > 0.0 {
            a.iter_mut().for_each(|v| *v /= n);
        }
    }
    for code in codes.iter_mut() {
        code.retain(|&(j, _)| norms[j] > 0.0);
        for (j, c) in code.iter_mut() {
            *c *= norms[*j];
        }
    }
}

/// Replaces atoms no code uses with the worst-reconstructed patches.
fn reseed_dead(atoms: &mut [Vec<f64>], codes: &[Code], patches: &[DenseVector], rng: &mut impl Rng) {
    let mut used = vec![false; atoms.len()];
    for &(j, _) in codes.iter().flatten() {
        used[j] = true;
    }
    let dead: Vec<usize> = (0..atoms.len()).filter(|&j| !used[j]).collect();
    if dead.is_empty() {
        return;
    }
    let mut errs: Vec<(usize, f64)> = codes
        .iter()
        .zip(patches)
        .enumerate()
        .map(|(i, (c, y))| (i, code_error(atoms, c, y)))
        .collect();
    errs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let d = atoms[0].len();
    for (slot, j) in dead.into_iter().enumerate() {
        let fresh = errs
            .get(slot)
            .map(|&(i, _)| patches[i].as_slice())
            .filter(|p| linalg::norm(p) > 0.0)
            .map(|p| {
                let n = linalg::norm(p);
                p.iter().map(|v| v / n).collect()
            });
        atoms[j] = fresh.unwrap_or_else(|| random_unit(d, rng));
    }
    log::debug!("re-seeded {} unused atoms", atoms.len() - used.iter().filter(|u| **u).count());
}

/// Samples `count` random `w × w` patches (overlap allowed) from `images`,
/// optionally with the patch mean removed.
pub fn extract_training_patches(
    images: &[GrayImage],
    w: usize,
    count: usize,
    subtract_mean: bool,
    seed: u64,
) -> Result<Vec<DenseVector>> {
    let usable: Vec<&GrayImage> = images.iter().filter(|im| im.width() >= w && im.height() >= w).collect();
    if w == 0 || usable.is_empty() {
        return Err(Error::InvalidArgument(format!("no image is at least {w}x{w}")));
    }
    let mut rng = stream_rng(seed, LEARN_STREAM);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let im = usable[rng.random_range(0..usable.len())];
        let x0 = rng.random_range(0..=im.width() - w);
        let y0 = rng.random_range(0..=im.height() - w);
        let mut p: Vec<f64> = (0..w * w).map(|k| im.get(x0 + k % w, y0 + k / w)).collect();
        if subtract_mean {
            let mean = p.iter().sum::<f64>() / p.len() as f64;
            p.iter_mut().for_each(|v| *v -= mean);
        }
        out.push(DenseVector::new(p)?);
    }
    Ok(out)
}

/// Writes `Φ` (`d × K`) in the text matrix format under a
/// `# atoms KxD patch_w=W` header line.
pub fn write_dictionary(path: impl AsRef<Path>, dict: &Dictionary, patch_w: usize) -> Result<()> {
    let header = format!("atoms {}x{} patch_w={patch_w}", dict.cols(), dict.rows());
    linalg::write_matrix(path, dict.matrix(), Some(&header))
}

/// Reads a dictionary file, returning it with its patch width. Files
/// without the header must have a square atom length.
pub fn read_dictionary(path: impl AsRef<Path>) -> Result<(Dictionary, usize)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let phi = linalg::parse_matrix(&text)?;
    let declared = text
        .lines()
        .take_while(|l| l.trim_start().starts_with('#') || l.trim().is_empty())
        .find_map(|l| l.split("patch_w=").nth(1))
        .map(|v| {
            v.split_whitespace().next().unwrap_or("").parse::<usize>().map_err(|_| Error::Parse {
                offset: 0,
                message: format!("bad patch_w in header: '{}'", v.trim()),
            })
        })
        .transpose()?;
    let d = phi.rows();
    let w = match declared {
        Some(w) => w,
        None => (d as f64).sqrt().round() as usize,
    };
    if w * w != d {
        return Err(Error::InvalidArgument(format!(
            "atom length {d} does not match a {w}x{w} patch"
        )));
    }
    Ok((Dictionary::new(phi), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probgen::{self, ProblemSpec};

    fn synthetic(d: usize, k: usize, s: usize, count: usize, seed: u64) -> (Dictionary, Vec<DenseVector>) {
        let dict = probgen::gen_dictionary(&ProblemSpec::new(d, k, s, None, seed).unwrap()).unwrap();
        let patches = (0..count as u64)
            .map(|i| {
                let x = probgen::gen_sparse_signal(&ProblemSpec::new(d, k, s, None, seed * 100_000 + i).unwrap())
                    .unwrap();
                linalg::matvec(dict.matrix(), &x).unwrap()
            })
            .collect();
        (dict, patches)
    }

    #[test]
    fn complete_orthonormal_basis_fits_exactly_in_one_round() {
        let d = 9;
        let (_, patches) = synthetic(d, 20, 3, 40, 2);
        let opts = LearnOptions {
            atoms: d,
            s_train: d,
            iterations: 1,
            ..LearnOptions::default()
        };
        let learned = learn_dictionary_from(&patches, &DenseMatrix::identity(d), &opts).unwrap();
        assert!(learned.training.rel_error[0] <= 1e-12);
        assert_eq!(learned.patch_w, 3);
    }

    #[test]
    fn error_is_monotone_and_atoms_are_unit() {
        let (_, patches) = synthetic(16, 32, 3, 300, 5);
        let opts = LearnOptions {
            atoms: 32,
            s_train: 3,
            iterations: 6,
            seed: 1,
            ..LearnOptions::default()
        };
        let learned = learn_dictionary(&patches, &opts).unwrap();
        let e = &learned.training.rel_error;
        assert_eq!(e.len(), 6);
        assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-6), "{e:?}");
        assert!(e[5] < e[0]);
        assert!(learned.dictionary.column_norms().iter().all(|n| (n - 1.0).abs() <= 1e-10));
        assert!(learned.training.avg_nonzeros <= 3.0);
    }

    #[test]
    fn preconditions() {
        let (_, patches) = synthetic(16, 32, 3, 20, 5);
        let opts = LearnOptions {
            atoms: 32,
            s_train: 3,
            ..LearnOptions::default()
        };
        assert!(learn_dictionary(&patches, &opts).is_err());
        let (_, patches) = synthetic(16, 32, 3, 64, 5);
        let opts = LearnOptions { atoms: 16, ..opts };
        assert!(learn_dictionary(&patches, &opts).is_err());
    }

    #[test]
    fn dead_atoms_are_replaced_by_worst_patch() {
        let atoms = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]];
        let patches = vec![
            DenseVector::new(vec![2.0, 0.0]).unwrap(),
            DenseVector::new(vec![0.0, 3.0]).unwrap(),
        ];
        let codes = vec![vec![(0, 2.0)], Vec::new()];
        let mut out = atoms.clone();
        reseed_dead(&mut out, &codes, &patches, &mut stream_rng(0, LEARN_STREAM));
        assert_eq!(out[0], atoms[0]);
        assert_eq!(out[1], vec![0.0, 1.0]);
        assert_eq!(out[2], vec![1.0, 0.0]);
    }

    #[test]
    fn dictionary_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mat");
        let dict = probgen::gen_dictionary(&ProblemSpec::new(16, 40, 2, None, 3).unwrap()).unwrap();
        write_dictionary(&path, &dict, 4).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# atoms 40x16 patch_w=4\n"));
        let (back, w) = read_dictionary(&path).unwrap();
        assert_eq!(w, 4);
        assert_eq!(back.matrix(), dict.matrix());
    }

    #[test]
    fn training_patches_have_requested_shape() {
        let img = GrayImage::new(12, 10, (0..120).map(|i| i as f64 / 119.0).collect()).unwrap();
        let p = extract_training_patches(std::slice::from_ref(&img), 4, 50, true, 9).unwrap();
        assert_eq!(p.len(), 50);
        assert!(p.iter().all(|v| v.len() == 16 && v.iter().sum::<f64>().abs() < 1e-12));
        assert!(extract_training_patches(&[img], 13, 5, true, 9).is_err());
    }
}
