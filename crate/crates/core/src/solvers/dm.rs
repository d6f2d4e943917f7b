//! The Difference Map for `A = {‖x‖₀ ≤ s}` and `B = {Φx = ỹ}`:
//!
//! ```text
//! D(x) = x + β [P_A∘f_B(x) − P_B∘f_A(x)]
//! f_A(x) = P_A(x) − (P_A(x) − x)/β
//! f_B(x) = P_B(x) + (P_B(x) − x)/β
//! ```
//!
//! [`dm_step`] is the update exactly as written, with `A` the sparsity set.
//! [`dm_solve`] can also run it with the roles of the two sets exchanged
//! (see [`DmRoles`]); exchanging the sets is the same as negating `β`, so
//! the solver reuses one kernel for both.
//!
//! Each snapshot reports whichever of two s-sparse readouts fits `ỹ`
//! better: the sparse branch, or the hard-thresholded data projection
//! `[P_B(x)]_s` of the iterate. At a fixed point the sparse branch lies in
//! both sets and has zero residual, so it is the one reported.

use crate::dictionary::Dictionary;
use crate::error::Result;
use crate::linalg::{self, DenseVector, PseudoInverse};
use crate::projections::{
    estimate_fa, estimate_fb, hard_threshold_into, project_fidelity, project_sparsity, BetaParam,
    DataFidelitySet, SparsitySet,
};

use super::{Algorithm, RecoveryProblem, Recorder, SolverConfig, SolverTrace};

/// Assignment of the two constraint sets to the `A` and `B` slots of the
/// update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DmRoles {
    /// `A` = sparsity set, `B` = data manifold.
    SparsityFirst,
    /// `A` = data manifold, `B` = sparsity set. With this assignment the
    /// interval `β ∈ [−0.9, −0.1]` is the well-behaved one.
    #[default]
    FidelityFirst,
}

impl DmRoles {
    /// `β` to feed the sparsity-first kernel.
    fn kernel_beta(self, beta: f64) -> f64 {
        match self {
            DmRoles::SparsityFirst => beta,
            DmRoles::FidelityFirst => -beta,
        }
    }
}

/// The DM iterate together with the two branch values computed from the
/// previous iterate (the ones that produced `x`).
#[derive(Clone, Debug, PartialEq)]
pub struct DmState {
    pub x: DenseVector,
    /// `P_A∘f_B` at the previous iterate.
    pub pa_fb: DenseVector,
    /// `P_B∘f_A` at the previous iterate.
    pub pb_fa: DenseVector,
}

impl DmState {
    pub fn new(x: DenseVector) -> Self {
        let n = x.len();
        Self {
            x,
            pa_fb: DenseVector::zeros(n),
            pb_fa: DenseVector::zeros(n),
        }
    }
}

/// One Difference Map step. Returns the next state and the monitor
/// `‖P_A∘f_B(x) − P_B∘f_A(x)‖₂` evaluated at the current iterate.
pub fn dm_step(
    state: &DmState,
    a: &SparsitySet,
    b: &DataFidelitySet,
    beta: BetaParam,
) -> Result<(DmState, f64)> {
    let x = &state.x;
    let fa = estimate_fa(x, a, beta)?;
    let fb = estimate_fb(x, b, beta)?;
    let pa_fb = project_sparsity(&fb, a)?;
    let pb_fa = project_fidelity(&fa, b)?;
    let diff: Vec<f64> = pa_fb.iter().zip(pb_fa.iter()).map(|(p, q)| p - q).collect();
    let monitor = linalg::norm(&diff);
    let next: Vec<f64> = x.iter().zip(&diff).map(|(xi, d)| xi + beta.get() * d).collect();
    Ok((
        DmState {
            x: DenseVector::new(next)?,
            pa_fb,
            pb_fa,
        },
        monitor,
    ))
}

/// Allocation-free DM step. Uses `Φ f_A(x) = (1 − 1/β) Φ P_A(x) + Φx/β`
/// so that only one dense product with `Φ` and two with `Φ⁺` are needed.
pub(crate) struct DmEngine<'a> {
    dict: &'a Dictionary,
    pinv: &'a PseudoInverse,
    y: &'a [f64],
    s: usize,
    idx: Vec<usize>,
    pa: Vec<f64>,
    phix: Vec<f64>,
    phipa: Vec<f64>,
    resid: Vec<f64>,
    corr: Vec<f64>,
    fb: Vec<f64>,
    pub(crate) pb_x: Vec<f64>,
    pub(crate) pa_fb: Vec<f64>,
    pub(crate) pb_fa: Vec<f64>,
}

impl<'a> DmEngine<'a> {
    pub(crate) fn new(dict: &'a Dictionary, pinv: &'a PseudoInverse, y: &'a [f64], s: usize) -> Self {
        let (m, n) = (dict.rows(), dict.cols());
        Self {
            dict,
            pinv,
            y,
            s,
            idx: Vec::with_capacity(n),
            pa: vec![0.0; n],
            phix: vec![0.0; m],
            phipa: vec![0.0; m],
            resid: vec![0.0; m],
            corr: vec![0.0; n],
            fb: vec![0.0; n],
            pb_x: vec![0.0; n],
            pa_fb: vec![0.0; n],
            pb_fa: vec![0.0; n],
        }
    }

    /// Evaluates both branches at `x`, then moves `x` by `step` times
    /// their difference. Returns the monitor.
    pub(crate) fn step(&mut self, x: &mut [f64], beta: f64, step: f64) -> f64 {
        let inv = 1.0 / beta;
        hard_threshold_into(x, self.s, &mut self.idx, &mut self.pa);

        // P_B(x) = x − Φ⁺(Φx − y); f_B(x) = x − (1 + 1/β) Φ⁺(Φx − y)
        self.dict.apply(x, &mut self.phix);
        for ((r, p), y) in self.resid.iter_mut().zip(&self.phix).zip(self.y) {
            *r = p - y;
        }
        self.pinv.apply(&self.resid, &mut self.corr);
        let gain = 1.0 + inv;
        for (((f, b), xi), c) in self.fb.iter_mut().zip(&mut self.pb_x).zip(x.iter()).zip(&self.corr) {
            *b = xi - c;
            *f = xi - gain * c;
        }
        hard_threshold_into(&self.fb, self.s, &mut self.idx, &mut self.pa_fb);

        // f_A(x) = (1 − 1/β) P_A(x) + x/β, then P_B of it
        let keep = 1.0 - inv;
        self.dict.apply_sparse(&self.pa, &mut self.phipa);
        for (((r, pa), px), y) in self.resid.iter_mut().zip(&self.phipa).zip(&self.phix).zip(self.y) {
            *r = keep * pa + inv * px - y;
        }
        self.pinv.apply(&self.resid, &mut self.corr);
        for (((q, pa), xi), c) in self.pb_fa.iter_mut().zip(&self.pa).zip(x.iter()).zip(&self.corr) {
            *q = keep * pa + inv * xi - c;
        }

        let mut monitor = 0.0;
        for ((xi, p), q) in x.iter_mut().zip(&self.pa_fb).zip(&self.pb_fa) {
            let d = p - q;
            monitor += d * d;
            *xi += step * d;
        }
        monitor.sqrt()
    }
}

/// Iterates the Difference Map from `x₀ = Φ⁺ỹ` until the monitor drops to
/// the configured tolerance, the time budget runs out, or `max_iters`.
///
/// If the iterate norm blows past `1e8·(1 + ‖x₀‖)` it is reset to the
/// iterate behind the best snapshot so far and the step is halved.
pub fn dm_solve(p: &RecoveryProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.validate()?;
    let dict = p.dictionary();
    let pinv = dict.pinv()?;
    let (n, s) = (dict.cols(), p.sparsity().s());
    let y = p.y_obs().as_slice();
    let beta = cfg.dm_roles.kernel_beta(cfg.beta.get());
    let tol = cfg.monitor_tol_for(n);

    let mut rec = Recorder::new(Algorithm::Dm, p, cfg, pinv.construction_seconds());
    let mut engine = DmEngine::new(dict, pinv, y, s);

    let mut x = vec![0.0; n];
    pinv.apply(y, &mut x);
    let blowup = 1e8 * (1.0 + linalg::norm(&x));
    let mut before = x.clone();
    let mut anchor = x.clone();
    let mut readout = vec![0.0; n];
    let mut idx = Vec::with_capacity(n);
    let mut damping = 1.0;

    let mut iter = 0;
    let termination = loop {
        iter += 1;
        before.copy_from_slice(&x);
        let monitor = engine.step(&mut x, beta, beta * damping);
        let (snap, stop) = rec.poll(iter, monitor <= tol);
        if snap {
            hard_threshold_into(&engine.pb_x, s, &mut idx, &mut readout);
            let estimate = if rec.residual(&readout) < rec.residual(&engine.pa_fb) {
                &readout
            } else {
                &engine.pa_fb
            };
            rec.record(iter, estimate, Some(monitor));
            if rec.best_is_latest() {
                anchor.copy_from_slice(&before);
            }
        }
        if let Some(t) = stop {
            break t;
        }
        if !x.iter().all(|v| v.is_finite()) || linalg::norm(&x) > blowup {
            damping *= 0.5;
            log::warn!("difference map iterate diverged at iteration {iter}; resetting with damping {damping}");
            x.copy_from_slice(&anchor);
        }
    };
    Ok(rec.finish(termination))
}
