//! Normalized iterative hard thresholding:
//! `x ← P_A(x + μ Φ^T(ỹ − Φx))` with `μ = ‖g_S‖² / ‖Φ g_S‖²` for the
//! gradient `g` restricted to the current support `S`.
//!
//! When a step changes the support, `μ` is shrunk until it is below
//! `(1 − c)‖Δx‖² / ‖Φ Δx‖²`, which keeps the iteration stable.

use crate::error::Result;
use crate::linalg;
use crate::projections::hard_threshold_into;

use super::{fixed_point_tol, Algorithm, RecoveryProblem, Recorder, SolverConfig, SolverTrace, Step};

const SHRINK_C: f64 = 0.01;
const SHRINK_KAPPA: f64 = 2.0;
const MAX_SHRINKS: usize = 60;

pub fn niht_solve(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.validate()?;
    let dict = p.dictionary();
    let (m, n, s) = (dict.rows(), dict.cols(), p.sparsity().s());
    let y = p.y_obs().as_slice();

    let mut rec = Recorder::new(Algorithm::Niht, p, cfg, 0.0);
    let mut x = vec![0.0; n];
    let mut resid = vec![0.0; m];
    let mut grad = vec![0.0; n];
    let mut g_s = vec![0.0; n];
    let mut phi_buf = vec![0.0; m];
    let mut trial = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut idx = Vec::with_capacity(n);

    let mut iter = 0;
    let termination = loop {
        iter += 1;
        // g = Φ^T (ỹ − Φx)
        dict.apply_sparse(&x, &mut resid);
        for (r, yi) in resid.iter_mut().zip(y) {
            *r = yi - *r;
        }
        dict.correlate(&resid, &mut grad);

        let empty = x.iter().all(|v| *v == 0.0);
        for ((gs, g), xi) in g_s.iter_mut().zip(&grad).zip(&x) {
            *gs = if empty || *xi != 0.0 { *g } else { 0.0 };
        }
        dict.apply_sparse(&g_s, &mut phi_buf);
        let den = linalg::norm_sq(&phi_buf);
        let mut mu = if den > 0.0 { linalg::norm_sq(&g_s) / den } else { 1.0 };
        if !mu.is_finite() || mu <= 0.0 {
            mu = 1.0;
        }

        let mut shrinks = 0;
        loop {
            for ((t, xi), g) in trial.iter_mut().zip(&x).zip(&grad) {
                *t = xi + mu * g;
            }
            hard_threshold_into(&trial, s, &mut idx, &mut next);
            let same_support = x.iter().zip(&next).all(|(a, b)| (*a != 0.0) == (*b != 0.0));
            if same_support || shrinks >= MAX_SHRINKS {
                break;
            }
            for ((d, a), b) in delta.iter_mut().zip(&next).zip(&x) {
                *d = a - b;
            }
            dict.apply_sparse(&delta, &mut phi_buf);
            let phi_d = linalg::norm_sq(&phi_buf);
            let omega = if phi_d > 0.0 {
                (1.0 - SHRINK_C) * linalg::norm_sq(&delta) / phi_d
            } else {
                f64::INFINITY
            };
            if mu <= omega {
                break;
            }
            mu /= SHRINK_KAPPA * (1.0 - SHRINK_C);
            shrinks += 1;
        }

        let change = linalg::distance(&next, &x);
        std::mem::swap(&mut x, &mut next);
        let converged = change <= fixed_point_tol(&x);
        if let Step::Stop(t) = rec.after_iteration(iter, &x, Some(change), converged) {
            break t;
        }
    };
    Ok(rec.finish(termination))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dictionary::Dictionary;
    use crate::linalg::{DenseMatrix, DenseVector};
    use crate::probgen::{self, ProblemSpec};
    use crate::projections::SparsitySet;
    use crate::solvers::Termination;

    #[test]
    fn zero_data_stays_zero() {
        let g = probgen::generate(&ProblemSpec::new(10, 30, 3, None, 1).unwrap()).unwrap();
        let p = RecoveryProblem::new(
            g.problem.dictionary().clone(),
            DenseVector::zeros(10),
            SparsitySet::new(3, 30).unwrap(),
            0.0,
            None,
        )
        .unwrap();
        let trace = niht_solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(trace.terminated_by, Termination::Converged);
        assert!(trace.snapshots.iter().all(|s| s.estimate.nnz() == 0));
    }

    #[test]
    fn recovers_sparse_noise_free_signal() {
        let g = probgen::generate(&ProblemSpec::new(100, 250, 10, None, 9).unwrap()).unwrap();
        let trace = niht_solve(&g.problem, &SolverConfig::default().with_budget(2.0)).unwrap();
        assert!(trace.final_snapshot().rel_mse.unwrap() <= 1e-6);
    }

    #[test]
    fn orthonormal_dictionary_is_one_step() {
        // Φ = I: μ = 1 and one thresholded gradient step is exact.
        let dict = Arc::new(Dictionary::new(DenseMatrix::identity(5)));
        let y = DenseVector::new(vec![0.0, 3.0, 0.0, -1.0, 0.0]).unwrap();
        let p = RecoveryProblem::new(dict, y.clone(), SparsitySet::new(2, 5).unwrap(), 0.0, Some(y.clone()))
            .unwrap();
        let trace = niht_solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(trace.snapshots[0].estimate, y);
    }
}
