//! Suite drivers: the three random-problem sweeps, the image comparison
//! and the two-stage β grid search.

use std::sync::Arc;
use std::time::Instant;

use super::config::{ExperimentConfig, GridValue, RecordMode, Suite};
use super::record::BenchRecord;
use crate::error::{Error, Result};
use crate::imaging::{read_dictionary, read_pgm, reconstruct_image, ImageOptions};
use crate::probgen::{self, GeneratedProblem, ProblemSpec};
use crate::projections::BetaParam;
use crate::solvers::{Algorithm, SolverConfig, SolverTrace, Termination};

impl ExperimentConfig {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::default()
            .with_budget(self.budget)
            .with_beta(self.beta)
            .with_max_iters(self.max_iters)
            .with_snapshot_period(self.snapshot_period)
            .with_amortized_precompute(self.amortize_precompute || self.suite == Suite::Image)
    }

    fn trial_seed(&self, trial: usize) -> u64 {
        self.master_seed.wrapping_add(trial as u64)
    }

    fn problem(&self, g: &GridValue, trial: usize) -> Result<GeneratedProblem> {
        let (m, n, s) = self.dims(g);
        probgen::generate(&ProblemSpec::new(m, n, s, Some(self.snr_at(g)), self.trial_seed(trial))?)
    }
}

/// The estimate a final-result record reports: the lowest-residual
/// snapshot. The choice uses only the data residual, never the truth, and
/// is applied identically to every algorithm.
pub fn reported_snapshot(trace: &SolverTrace) -> &crate::solvers::Snapshot {
    trace.best_snapshot()
}

/// Runs every `(algorithm, grid value, trial)` of a suite, sequentially so
/// that wall-clock budgets are not shared between concurrent solves.
/// Records come back ordered by algorithm (in the fixed dm, am, niht, sp,
/// omp order), grid position, trial, then time.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut keyed = match cfg.suite {
        Suite::VaryS | Suite::VaryNoise | Suite::VarySize => run_random(cfg)?,
        Suite::Image => run_image(cfg)?,
        Suite::TuneBeta => {
            return Err(Error::InvalidArgument(
                "the tune-beta suite produces a β table, use tune_beta".into(),
            ))
        }
    };
    keyed.sort_by_key(|(k, _)| *k);
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

type Key = (Algorithm, usize, usize, usize);

fn run_random(cfg: &ExperimentConfig) -> Result<Vec<(Key, BenchRecord)>> {
    let solver_cfg = cfg.solver_config();
    let mut out = Vec::new();
    for (gi, g) in cfg.grid.iter().enumerate() {
        for trial in 0..cfg.trials {
            let gen = cfg.problem(g, trial)?;
            let spec = gen.spec;
            for &alg in &cfg.algorithms {
                let trace = alg.solve(&gen.problem, &solver_cfg)?;
                log::info!(
                    "{} {alg} {g} trial {trial}: rel_mse {:.3e} ({} iterations, {})",
                    cfg.suite,
                    reported_snapshot(&trace).rel_mse.unwrap_or(f64::NAN),
                    trace.iterations(),
                    trace.terminated_by
                );
                let snaps: Vec<_> = match cfg.mode {
                    RecordMode::Final => vec![reported_snapshot(&trace)],
                    RecordMode::Trace => trace.snapshots.iter().collect(),
                };
                for (k, snap) in snaps.into_iter().enumerate() {
                    let record = BenchRecord {
                        suite: cfg.suite,
                        algorithm: alg,
                        m: spec.m,
                        n: spec.n,
                        s: spec.s,
                        snr_db_target: cfg.snr_at(g),
                        trial_seed: spec.seed,
                        elapsed_s: snap.elapsed_seconds,
                        rel_mse: snap.rel_mse.unwrap_or(f64::NAN),
                        residual_l2: snap.residual_l2,
                        terminated_by: trace.terminated_by,
                    };
                    out.push(((alg, gi, trial, k), record));
                }
            }
        }
    }
    Ok(out)
}

fn run_image(cfg: &ExperimentConfig) -> Result<Vec<(Key, BenchRecord)>> {
    let (image, dict) = match (&cfg.image, &cfg.dictionary) {
        (Some(i), Some(d)) => (read_pgm(i)?, read_dictionary(d)?.0),
        _ => return Err(Error::InvalidArgument("image suite needs image and dictionary".into())),
    };
    let dict = Arc::new(dict);
    let solver_cfg = cfg.solver_config();
    let energy: f64 = image.pixels().iter().map(|p| p * p).sum();
    let mut out = Vec::new();
    for (gi, g) in cfg.grid.iter().enumerate() {
        let GridValue::Sparsity(s) = *g else {
            return Err(Error::InvalidArgument(format!("image grid values are sparsities, got {g}")));
        };
        let opts = ImageOptions {
            s,
            subtract_mean: cfg.subtract_mean,
        };
        for trial in 0..cfg.trials {
            for &alg in &cfg.algorithms {
                let start = Instant::now();
                let r = reconstruct_image(&image, &dict, alg, &solver_cfg, &opts)?;
                let elapsed = start.elapsed().as_secs_f64();
                let err: f64 = image
                    .pixels()
                    .iter()
                    .zip(r.image.pixels())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                log::info!("image {alg} s={s} trial {trial}: {:.2} dB in {elapsed:.1} s", r.overall_snr_db);
                let record = BenchRecord {
                    suite: Suite::Image,
                    algorithm: alg,
                    m: dict.rows(),
                    n: dict.cols(),
                    s,
                    snr_db_target: 0.0,
                    trial_seed: cfg.trial_seed(trial),
                    elapsed_s: elapsed,
                    rel_mse: if energy > 0.0 { err / energy } else { err },
                    residual_l2: err.sqrt(),
                    terminated_by: most_common(&r.terminations),
                };
                out.push(((alg, gi, trial, 0), record));
            }
        }
    }
    Ok(out)
}

fn most_common(ts: &[Termination]) -> Termination {
    Termination::ALL
        .into_iter()
        .max_by_key(|t| (ts.iter().filter(|x| *x == t).count(), std::cmp::Reverse(*t as u8)))
        .unwrap_or(Termination::Budget)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaTuning {
    pub best_beta: f64,
    /// Every evaluated `(β, mean rel_mse)`: the coarse stage, then the fine one.
    pub table: Vec<(f64, f64)>,
    pub coarse_points: usize,
}

/// Coarse grid `β ∈ {−1.2, −1.1, …, 1.2} \ {0}`.
pub fn coarse_betas() -> Vec<f64> {
    (-12..=12).filter(|&k| k != 0).map(|k| k as f64 / 10.0).collect()
}

/// Fine grid: step 0.01 within ±0.5 of `center`, never 0.
pub fn fine_betas(center: f64) -> Vec<f64> {
    let c = (center * 100.0).round() as i64;
    (c - 50..=c + 50).filter(|&k| k != 0).map(|k| k as f64 / 100.0).collect()
}

/// Two-stage grid search for DM's β on training problems shaped like the
/// target: the grid values are sparsities, all run at `m × n` and
/// `snr_db`, `trials` seeds each; the score is mean rel_mse of the
/// reported estimate.
pub fn tune_beta(cfg: &ExperimentConfig) -> Result<BetaTuning> {
    cfg.validate()?;
    let mut problems = Vec::new();
    for g in &cfg.grid {
        for trial in 0..cfg.trials {
            problems.push(cfg.problem(g, trial)?);
        }
    }
    let base = cfg.solver_config();
    let score = |beta: f64| -> Result<f64> {
        let c = base.clone().with_beta(BetaParam::new(beta)?);
        let mut total = 0.0;
        for gen in &problems {
            let trace = Algorithm::Dm.solve(&gen.problem, &c)?;
            total += reported_snapshot(&trace).rel_mse.unwrap_or(f64::NAN);
        }
        let mean = total / problems.len() as f64;
        log::info!("beta {beta:+.2}: mean rel_mse {mean:.4e}");
        Ok(mean)
    };
    let argmin = |table: &[(f64, f64)]| {
        table
            .iter()
            .fold(None::<(f64, f64)>, |best, &(b, v)| match best {
                Some((_, bv)) if !(v < bv) => best,
                _ => Some((b, v)),
            })
            .map(|(b, _)| b)
    };
    let mut table = coarse_betas()
        .into_iter()
        .map(|b| Ok((b, score(b)?)))
        .collect::<Result<Vec<_>>>()?;
    let coarse_points = table.len();
    let center = argmin(&table).unwrap_or(BetaParam::DEFAULT);
    for b in fine_betas(center) {
        table.push((b, score(b)?));
    }
    Ok(BetaTuning {
        best_beta: argmin(&table).unwrap_or(center),
        table,
        coarse_points,
    })
}
