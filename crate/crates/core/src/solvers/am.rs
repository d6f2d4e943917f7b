//! Alternating Map `x ← P_A(P_B(x))`, using the same projections as DM.

use crate::error::Result;
use crate::linalg;
use crate::projections::hard_threshold_into;

use super::{fixed_point_tol, Algorithm, RecoveryProblem, Recorder, SolverConfig, SolverTrace, Step};

/// Starts from `x₀ = Φ⁺ỹ`.
pub fn am_solve(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    am_solve_from(p, cfg, None)
}

/// Alternating Map from a caller-supplied starting point.
pub fn am_solve_from(p: &RecoveryProblem, cfg: &SolverConfig, start: Option<&[f64]>) -> Result<SolverTrace> {
    cfg.validate()?;
    let dict = p.dictionary();
    let pinv = dict.pinv()?;
    let (m, n, s) = (dict.rows(), dict.cols(), p.sparsity().s());
    let y = p.y_obs().as_slice();

    let mut rec = Recorder::new(Algorithm::Am, p, cfg, pinv.construction_seconds());
    let mut x = vec![0.0; n];
    match start {
        Some(x0) if x0.len() == n => x.copy_from_slice(x0),
        Some(x0) => return Err(crate::error::Error::shape("am_solve_from", n, x0.len())),
        None => pinv.apply(y, &mut x),
    }

    let mut resid = vec![0.0; m];
    let mut corr = vec![0.0; n];
    let mut pb = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut idx = Vec::with_capacity(n);

    let mut iter = 0;
    let termination = loop {
        iter += 1;
        dict.apply_sparse(&x, &mut resid);
        for (r, yi) in resid.iter_mut().zip(y) {
            *r -= yi;
        }
        pinv.apply(&resid, &mut corr);
        for ((b, xi), c) in pb.iter_mut().zip(&x).zip(&corr) {
            *b = xi - c;
        }
        hard_threshold_into(&pb, s, &mut idx, &mut next);
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
    use super::*;
    use crate::probgen::{self, ProblemSpec};
    use crate::solvers::Termination;

    #[test]
    fn full_sparsity_is_one_projection() {
        let g = probgen::generate(&ProblemSpec::new(10, 25, 25, Some(20.0), 1).unwrap()).unwrap();
        let trace = am_solve(&g.problem, &SolverConfig::default()).unwrap();
        assert_eq!(trace.terminated_by, Termination::Converged);
        let x0 = linalg::matvec(g.problem.dictionary().pinv().unwrap().matrix(), g.problem.y_obs()).unwrap();
        let first = &trace.snapshots[0];
        assert!(linalg::distance(&first.estimate, &x0) < 1e-10);
        assert!(trace.iterations() <= 2);
    }

    #[test]
    fn stationary_when_started_in_intersection() {
        let g = probgen::generate(&ProblemSpec::new(30, 60, 4, None, 4).unwrap()).unwrap();
        let truth = g.problem.truth().unwrap().clone();
        let trace = am_solve_from(&g.problem, &SolverConfig::default(), Some(&truth)).unwrap();
        assert_eq!(trace.terminated_by, Termination::Converged);
        assert_eq!(trace.iterations(), 1);
        assert!(linalg::distance(&trace.final_snapshot().estimate, &truth) < 1e-10);
    }
}
