//! Time-budgeted sparse recovery solvers sharing one interface: each takes
//! a [`RecoveryProblem`] and a [`SolverConfig`] and returns a
//! [`SolverTrace`] of timestamped s-sparse estimates.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::probgen;
use crate::projections::{BetaParam, DataFidelitySet, SparsitySet};

mod am;
mod dm;
pub(crate) mod greedy;
mod niht;

pub use am::{am_solve, am_solve_from};
pub use dm::{dm_solve, dm_step, DmRoles, DmState};
pub use greedy::{omp_solve, sp_solve};
pub use niht::niht_solve;

/// One recovery task: find s-sparse `x` with `Φx ≈ ỹ`.
#[derive(Clone, Debug)]
pub struct RecoveryProblem {
    dictionary: Arc<Dictionary>,
    y_obs: DenseVector,
    sparsity: SparsitySet,
    delta: f64,
    truth: Option<DenseVector>,
}

impl RecoveryProblem {
    pub fn new(
        dictionary: Arc<Dictionary>,
        y_obs: DenseVector,
        sparsity: SparsitySet,
        delta: f64,
        truth: Option<DenseVector>,
    ) -> Result<Self> {
        if y_obs.len() != dictionary.rows() {
            return Err(Error::shape("RecoveryProblem", dictionary.rows(), y_obs.len()));
        }
        if sparsity.n() != dictionary.cols() {
            return Err(Error::shape("RecoveryProblem sparsity", dictionary.cols(), sparsity.n()));
        }
        if !(delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
        }
        if let Some(t) = &truth {
            if t.len() != dictionary.cols() {
                return Err(Error::shape("RecoveryProblem truth", dictionary.cols(), t.len()));
            }
        }
        Ok(Self {
            dictionary,
            y_obs,
            sparsity,
            delta,
            truth,
        })
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        &self.dictionary
    }

    pub fn y_obs(&self) -> &DenseVector {
        &self.y_obs
    }

    pub fn sparsity(&self) -> SparsitySet {
        self.sparsity
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn truth(&self) -> Option<&DenseVector> {
        self.truth.as_ref()
    }

    pub fn fidelity_set(&self) -> DataFidelitySet {
        DataFidelitySet::new(self.dictionary.clone(), self.y_obs.clone(), self.delta)
            .expect("validated at construction")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub beta: BetaParam,
    /// Wall-clock budget in seconds.
    pub time_budget: f64,
    pub max_iters: usize,
    /// DM convergence threshold on `‖P_A∘f_B(x) − P_B∘f_A(x)‖₂`;
    /// `None` means `1e-7·√n`.
    pub monitor_tol: Option<f64>,
    pub snapshot_period: usize,
    /// Exclude pseudo-inverse construction from the clock.
    pub amortize_precompute: bool,
    /// Which constraint set DM treats as `A` in its update.
    pub dm_roles: DmRoles,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: BetaParam::default(),
            time_budget: 1.0,
            max_iters: 1_000_000,
            monitor_tol: None,
            snapshot_period: 10,
            amortize_precompute: false,
            dm_roles: DmRoles::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_budget(mut self, seconds: f64) -> Self {
        self.time_budget = seconds;
        self
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_beta(mut self, beta: BetaParam) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_monitor_tol(mut self, tol: f64) -> Self {
        self.monitor_tol = Some(tol);
        self
    }

    pub fn with_snapshot_period(mut self, period: usize) -> Self {
        self.snapshot_period = period;
        self
    }

    pub fn with_amortized_precompute(mut self, amortize: bool) -> Self {
        self.amortize_precompute = amortize;
        self
    }

    pub fn with_dm_roles(mut self, roles: DmRoles) -> Self {
        self.dm_roles = roles;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_budget > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time budget must be > 0, got {}",
                self.time_budget
            )));
        }
        if let Some(tol) = self.monitor_tol {
            if !(tol >= 0.0) {
                return Err(Error::InvalidArgument(format!("monitor_tol must be >= 0, got {tol}")));
            }
        }
        if self.max_iters == 0 || self.snapshot_period == 0 {
            return Err(Error::InvalidArgument(
                "max_iters and snapshot_period must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn monitor_tol_for(&self, n: usize) -> f64 {
        self.monitor_tol.unwrap_or(1e-7 * (n as f64).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Dm,
    Am,
    Niht,
    Sp,
    Omp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Dm,
        Algorithm::Am,
        Algorithm::Niht,
        Algorithm::Sp,
        Algorithm::Omp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dm => "dm",
            Algorithm::Am => "am",
            Algorithm::Niht => "niht",
            Algorithm::Sp => "sp",
            Algorithm::Omp => "omp",
        }
    }

    pub fn solve(self, p: &RecoveryProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
        match self {
            Algorithm::Dm => dm_solve(p, cfg),
            Algorithm::Am => am_solve(p, cfg),
            Algorithm::Niht => niht_solve(p, cfg),
            Algorithm::Sp => sp_solve(p, cfg),
            Algorithm::Omp => omp_solve(p, cfg),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    Budget,
    MaxIters,
}

impl Termination {
    pub const ALL: [Termination; 3] = [Termination::Converged, Termination::Budget, Termination::MaxIters];

    pub fn name(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Budget => "budget",
            Termination::MaxIters => "max_iters",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(Termination::Converged),
            "budget" => Ok(Termination::Budget),
            "max_iters" => Ok(Termination::MaxIters),
            other => Err(Error::InvalidArgument(format!("unknown termination '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub elapsed_seconds: f64,
    pub iteration: usize,
    /// Always s-sparse.
    pub estimate: DenseVector,
    pub monitor: Option<f64>,
    /// `‖Φx̂ − ỹ‖₂`
    pub residual_l2: f64,
    /// `‖x̂ − x‖₂² / ‖x‖₂²` when ground truth is known.
    pub rel_mse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SolverTrace {
    pub algorithm: Algorithm,
    pub snapshots: Vec<Snapshot>,
    pub precompute_seconds: f64,
    pub terminated_by: Termination,
    /// Index of the snapshot with the smallest residual.
    pub best_index: usize,
}

impl SolverTrace {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("traces hold at least one snapshot")
    }

    pub fn best_snapshot(&self) -> &Snapshot {
        &self.snapshots[self.best_index]
    }

    /// The last snapshot taken no later than `t` seconds.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().take_while(|s| s.elapsed_seconds <= t).last()
    }

    /// Lowest-residual snapshot among those taken no later than `t`.
    pub fn best_snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .take_while(|s| s.elapsed_seconds <= t)
            .min_by(|a, b| a.residual_l2.total_cmp(&b.residual_l2))
    }

    pub fn iterations(&self) -> usize {
        self.final_snapshot().iteration
    }
}

/// Clock and snapshot bookkeeping shared by every solver loop.
pub(crate) struct Recorder<'a> {
    problem: &'a RecoveryProblem,
    algorithm: Algorithm,
    start: Instant,
    offset: f64,
    budget: f64,
    period: usize,
    max_iters: usize,
    precompute_seconds: f64,
    snapshots: Vec<Snapshot>,
    best_index: usize,
    scratch: Vec<f64>,
}

pub(crate) enum Step {
    Continue,
    Stop(Termination),
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        algorithm: Algorithm,
        problem: &'a RecoveryProblem,
        cfg: &SolverConfig,
        precompute_seconds: f64,
    ) -> Self {
        let offset = if cfg.amortize_precompute { 0.0 } else { precompute_seconds };
        Self {
            problem,
            algorithm,
            start: Instant::now(),
            offset,
            budget: cfg.time_budget,
            period: cfg.snapshot_period,
            max_iters: cfg.max_iters,
            precompute_seconds,
            snapshots: Vec::new(),
            best_index: 0,
            scratch: vec![0.0; problem.dictionary.rows()],
        }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.offset + self.start.elapsed().as_secs_f64()
    }

    /// Records a snapshot; callers pass s-sparse estimates only.
    pub(crate) fn record(&mut self, iteration: usize, estimate: &[f64], monitor: Option<f64>) {
        debug_assert!(self.problem.sparsity.contains(estimate));
        let mut elapsed = self.elapsed();
        if let Some(last) = self.snapshots.last() {
            if elapsed <= last.elapsed_seconds {
                elapsed = last.elapsed_seconds + 1e-9;
            }
        }
        let residual_l2 = self.residual(estimate);
        let rel_mse = self
            .problem
            .truth
            .as_ref()
            .and_then(|t| probgen::rel_mse(estimate, t).ok());
        let snap = Snapshot {
            elapsed_seconds: elapsed,
            iteration,
            estimate: DenseVector::from_vec_unchecked(estimate.to_vec()),
            monitor,
            residual_l2,
            rel_mse,
        };
        if self.snapshots.is_empty() || residual_l2 < self.snapshots[self.best_index].residual_l2 {
            self.best_index = self.snapshots.len();
        }
        self.snapshots.push(snap);
    }

    pub(crate) fn best_is_latest(&self) -> bool {
        !self.snapshots.is_empty() && self.best_index + 1 == self.snapshots.len()
    }

    /// Decides, after a completed iteration, whether to snapshot and
    /// whether to stop. Stop precedence: converged, budget, max_iters.
    pub(crate) fn poll(&self, iteration: usize, converged: bool) -> (bool, Option<Termination>) {
        let stop = if converged {
            Some(Termination::Converged)
        } else if self.elapsed() >= self.budget {
            Some(Termination::Budget)
        } else if iteration >= self.max_iters {
            Some(Termination::MaxIters)
        } else {
            None
        };
        (stop.is_some() || iteration % self.period == 0, stop)
    }

    /// Residual `‖Φx − ỹ‖₂` of a sparse vector.
    pub(crate) fn residual(&mut self, estimate: &[f64]) -> f64 {
        self.problem.dictionary.apply_sparse(estimate, &mut self.scratch);
        crate::linalg::distance(&self.scratch, &self.problem.y_obs)
    }

    /// [`Recorder::poll`] followed by the snapshot, for solvers whose
    /// estimate is always at hand.
    pub(crate) fn after_iteration(
        &mut self,
        iteration: usize,
        estimate: &[f64],
        monitor: Option<f64>,
        converged: bool,
    ) -> Step {
        let (snap, stop) = self.poll(iteration, converged);
        if snap {
            self.record(iteration, estimate, monitor);
        }
        match stop {
            Some(t) => Step::Stop(t),
            None => Step::Continue,
        }
    }

    pub(crate) fn finish(self, terminated_by: Termination) -> SolverTrace {
        SolverTrace {
            algorithm: self.algorithm,
            snapshots: self.snapshots,
            precompute_seconds: self.precompute_seconds,
            terminated_by,
            best_index: self.best_index,
        }
    }
}

/// Fixed-point tolerance on the iterate change used by AM and NIHT.
pub(crate) fn fixed_point_tol(x: &[f64]) -> f64 {
    1e-10 * crate::linalg::norm(x).max(1.0)
}
