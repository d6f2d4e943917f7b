//! Greedy baselines: Subspace Pursuit and Orthogonal Matching Pursuit.
//! Both refit by least squares on the selected atoms through the Gram
//! matrix and a Cholesky factor.

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{self, factor_with_ridge, Cholesky, DenseMatrix};
use crate::projections::top_k_indices;

use super::{Algorithm, RecoveryProblem, Recorder, SolverConfig, SolverTrace, Step};

/// Least-squares coefficients of `y` on the atoms in `support`.
pub(crate) fn fit_support(dict: &Dictionary, support: &[usize], y: &[f64]) -> Result<Vec<f64>> {
    let k = support.len();
    let mut gram = DenseMatrix::zeros(k, k);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate().take(a + 1) {
            let v = linalg::dot(dict.atom(i), dict.atom(j));
            gram.set(a, b, v);
            gram.set(b, a, v);
        }
    }
    let (chol, _) = factor_with_ridge(&gram)?;
    let mut rhs: Vec<f64> = support.iter().map(|&j| linalg::dot(dict.atom(j), y)).collect();
    chol.solve_in_place(&mut rhs);
    Ok(rhs)
}

fn scatter(support: &[usize], coefs: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (&j, &c) in support.iter().zip(coefs) {
        out[j] = c;
    }
}

/// Subspace Pursuit. Each iteration merges the current support with the
/// `s` atoms most correlated with the residual, refits, prunes back to the
/// `s` largest coefficients and refits again; it stops as soon as the
/// residual fails to decrease, keeping the last accepted estimate.
pub fn sp_solve(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.validate()?;
    let dict = p.dictionary();
    let (m, n, s) = (dict.rows(), dict.cols(), p.sparsity().s());
    if 2 * s > n {
        return Err(Error::InvalidArgument(format!(
            "subspace pursuit needs 2s <= n, got s = {s}, n = {n}"
        )));
    }
    let y = p.y_obs().as_slice();
    let mut rec = Recorder::new(Algorithm::Sp, p, cfg, 0.0);

    let mut corr = vec![0.0; n];
    let mut resid = vec![0.0; m];
    let mut x = vec![0.0; n];
    let mut candidate = vec![0.0; n];

    let residual_of = |x: &[f64], resid: &mut [f64]| {
        dict.apply_sparse(x, resid);
        for (r, yi) in resid.iter_mut().zip(y) {
            *r = yi - *r;
        }
        linalg::norm(resid)
    };

    dict.correlate(y, &mut corr);
    let mut support = top_k_indices(&corr, s);
    let coefs = fit_support(dict, &support, y)?;
    scatter(&support, &coefs, &mut x);
    let mut res = residual_of(&x, &mut resid);

    let mut iter = 1;
    if let Step::Stop(t) = rec.after_iteration(iter, &x, Some(res), res == 0.0) {
        return Ok(rec.finish(t));
    }
    let termination = loop {
        iter += 1;
        dict.correlate(&resid, &mut corr);
        let mut merged = support.clone();
        merged.extend(top_k_indices(&corr, s));
        merged.sort_unstable();
        merged.dedup();

        let wide = fit_support(dict, &merged, y)?;
        let keep = top_k_indices(&wide, s);
        let pruned: Vec<usize> = keep.iter().map(|&k| merged[k]).collect();
        let coefs = fit_support(dict, &pruned, y)?;
        scatter(&pruned, &coefs, &mut candidate);
        let mut cand_resid = vec![0.0; m];
        let cand_res = residual_of(&candidate, &mut cand_resid);

        let improved = cand_res < res;
        if improved {
            std::mem::swap(&mut x, &mut candidate);
            resid = cand_resid;
            res = cand_res;
            support = pruned;
        }
        if let Step::Stop(t) = rec.after_iteration(iter, &x, Some(res), !improved || res == 0.0) {
            break t;
        }
    };
    Ok(rec.finish(termination))
}

/// Orthogonal Matching Pursuit: add the atom most correlated with the
/// residual, refit on the support, repeat until `s` atoms are selected.
pub fn omp_solve(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.validate()?;
    let dict = p.dictionary();
    let (m, n, s) = (dict.rows(), dict.cols(), p.sparsity().s());
    let y = p.y_obs().as_slice();
    let y_norm = linalg::norm(y);
    let mut rec = Recorder::new(Algorithm::Omp, p, cfg, 0.0);

    let mut corr = vec![0.0; n];
    let mut resid = y.to_vec();
    let mut x = vec![0.0; n];
    let mut selected = vec![false; n];
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut rhs: Vec<f64> = Vec::with_capacity(s);
    let mut chol = Cholesky::empty();

    let mut iter = 0;
    let termination = loop {
        iter += 1;
        dict.correlate(&resid, &mut corr);
        let best = (0..n)
            .filter(|&j| !selected[j])
            .fold(None::<(usize, f64)>, |acc, j| match acc {
                Some((_, v)) if corr[j].abs() <= v => acc,
                _ => Some((j, corr[j].abs())),
            });
        let exhausted = match best {
            Some((j, c)) if c > 0.0 => {
                let atom = dict.atom(j);
                let cross: Vec<f64> = support.iter().map(|&i| linalg::dot(dict.atom(i), atom)).collect();
                if chol.extend(&cross, linalg::norm_sq(atom)).is_err() {
                    support.push(j);
                    let mut gram = DenseMatrix::zeros(support.len(), support.len());
                    for (a, &i) in support.iter().enumerate() {
                        for (b, &k) in support.iter().enumerate() {
                            gram.set(a, b, linalg::dot(dict.atom(i), dict.atom(k)));
                        }
                    }
                    chol = factor_with_ridge(&gram)?.0;
                } else {
                    support.push(j);
                }
                selected[j] = true;
                rhs.push(linalg::dot(atom, y));
                let mut coefs = rhs.clone();
                chol.solve_in_place(&mut coefs);
                scatter(&support, &coefs, &mut x);
                dict.apply_sparse(&x, &mut resid);
                for (r, yi) in resid.iter_mut().zip(y) {
                    *r = yi - *r;
                }
                false
            }
            _ => true,
        };
        let res = linalg::norm(&resid);
        let done = exhausted || support.len() >= s || res <= 1e-12 * y_norm;
        if let Step::Stop(t) = rec.after_iteration(iter, &x, Some(res), done) {
            break t;
        }
    };
    debug_assert_eq!(resid.len(), m);
    Ok(rec.finish(termination))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseVector;
    use crate::probgen::{self, ProblemSpec};
    use crate::projections::SparsitySet;
    use crate::solvers::Termination;

    #[test]
    fn omp_picks_the_matching_atom() {
        let g = probgen::generate(&ProblemSpec::new(20, 50, 3, None, 2).unwrap()).unwrap();
        let dict = g.problem.dictionary().clone();
        for j in [0, 17, 49] {
            let y = DenseVector::new(dict.atom(j).to_vec()).unwrap();
            let p = RecoveryProblem::new(dict.clone(), y, SparsitySet::new(1, 50).unwrap(), 0.0, None).unwrap();
            let trace = omp_solve(&p, &SolverConfig::default()).unwrap();
            let est = &trace.final_snapshot().estimate;
            assert_eq!(est.support(), vec![j]);
            assert!((est[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_noise_free_recovery() {
        let g = probgen::generate(&ProblemSpec::new(100, 250, 10, None, 9).unwrap()).unwrap();
        let cfg = SolverConfig::default().with_budget(2.0);
        for solve in [omp_solve, sp_solve] {
            let trace = solve(&g.problem, &cfg).unwrap();
            assert!(trace.final_snapshot().rel_mse.unwrap() <= 1e-6);
            assert_eq!(trace.final_snapshot().estimate.support(), g.problem.truth().unwrap().support());
            assert_eq!(trace.terminated_by, Termination::Converged);
        }
    }

    #[test]
    fn sp_residual_is_non_increasing() {
        let g = probgen::generate(&ProblemSpec::new(60, 150, 25, Some(15.0), 3).unwrap()).unwrap();
        let trace = sp_solve(&g.problem, &SolverConfig::default().with_snapshot_period(1)).unwrap();
        assert!(trace
            .snapshots
            .windows(2)
            .all(|w| w[1].residual_l2 <= w[0].residual_l2));
        assert!(trace.snapshots.iter().all(|s| s.estimate.nnz() <= 25));
    }

    #[test]
    fn sp_requires_room_for_merged_support() {
        let g = probgen::generate(&ProblemSpec::new(10, 20, 11, None, 1).unwrap()).unwrap();
        assert!(sp_solve(&g.problem, &SolverConfig::default()).is_err());
    }

    #[test]
    fn sp_survives_merged_support_wider_than_rows() {
        // 2s > m makes the merged Gram singular; the ridge fallback keeps it going.
        let g = probgen::generate(&ProblemSpec::new(20, 60, 14, None, 5).unwrap()).unwrap();
        let trace = sp_solve(&g.problem, &SolverConfig::default()).unwrap();
        let last = trace.final_snapshot();
        assert!(last.estimate.iter().all(|v| v.is_finite()));
        assert!(last.estimate.nnz() <= 14);
    }

    #[test]
    fn omp_support_grows_by_one() {
        let g = probgen::generate(&ProblemSpec::new(40, 100, 8, Some(20.0), 6).unwrap()).unwrap();
        let trace = omp_solve(&g.problem, &SolverConfig::default().with_snapshot_period(1)).unwrap();
        for (k, snap) in trace.snapshots.iter().enumerate() {
            assert_eq!(snap.estimate.nnz(), k + 1);
        }
        assert_eq!(trace.snapshots.len(), 8);
    }
}
