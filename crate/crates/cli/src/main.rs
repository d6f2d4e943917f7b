use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use dm_sparse::bench::{self, ExperimentConfig};
use dm_sparse::imaging::{self, ImageOptions, LearnOptions};
use dm_sparse::linalg;
use dm_sparse::probgen::{self, ProblemSpec};
use dm_sparse::{Algorithm, BetaParam, Dictionary, Error, RecoveryProblem, SolverConfig, SparsitySet};

/// Sparse recovery with the Difference Map and baseline solvers.
#[derive(Parser)]
#[command(name = "dmsparse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random problem (or a procedural test image).
    Gen(GenArgs),
    /// Solve one problem and print the outcome.
    Solve(SolveArgs),
    /// Run a benchmark suite from a config file and write CSV.
    Bench(BenchArgs),
    /// Two-stage grid search for DM's β.
    TuneBeta(TuneArgs),
    /// Sparse-code an image patch by patch and write the reconstruction.
    ReconImage(ReconArgs),
    /// Learn a patch dictionary from PGM images or synthetic data.
    LearnDict(LearnArgs),
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long, default_value_t = 400)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    s: usize,
    /// Target SNR in dB; omit for noise-free data.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Directory receiving phi.mat, x.vec and y.vec.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Write a procedural WIDTHxHEIGHT PGM to this path instead of a problem.
    #[arg(long, value_name = "PATH")]
    image: Option<PathBuf>,
    #[arg(long, default_value = "320x240")]
    size: String,
}

#[derive(Args)]
struct SolveArgs {
    /// Measurement matrix in the text format; without it a random problem
    /// is generated from the shape options.
    #[arg(long = "matrix-file")]
    matrix_file: Option<PathBuf>,
    #[arg(long = "y-file")]
    y_file: Option<PathBuf>,
    /// Ground truth, for reporting rel_mse.
    #[arg(long = "truth-file")]
    truth_file: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value = "dm")]
    solver: String,
    #[arg(long, default_value_t = 2.0)]
    budget: f64,
    #[arg(long, default_value_t = BetaParam::DEFAULT, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Exclude the pseudo-inverse construction from the budget.
    #[arg(long)]
    amortize: bool,
    /// Write the reported estimate here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write every snapshot as benchmark CSV rows.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// `key = value` experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-grid-point mean and median rel_mse.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the full (beta, mean_rel_mse) table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    s: usize,
    /// Per-patch budget in seconds.
    #[arg(long, default_value_t = 0.1)]
    budget: f64,
    #[arg(long, default_value = "dm")]
    solver: String,
    #[arg(long, default_value_t = BetaParam::DEFAULT, allow_negative_numbers = true)]
    beta: f64,
    /// Code raw patches instead of mean-subtracted ones.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    diff: Option<PathBuf>,
    /// Write per-patch SNR values, one per line.
    #[arg(long)]
    per_patch: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Training images; without any, patches are synthesized from a random
    /// dictionary (useful as a sanity check).
    #[arg(long, num_args = 1..)]
    images: Vec<PathBuf>,
    #[arg(long, default_value_t = 8)]
    patch_w: usize,
    #[arg(long, default_value_t = 128)]
    atoms: usize,
    #[arg(long, default_value_t = 6)]
    s_train: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 5000)]
    patches: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "dm")]
    coder: String,
    /// Keep patch means instead of subtracting them.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Bench(a) => run_bench(a),
        Command::TuneBeta(a) => tune(a),
        Command::ReconImage(a) => recon(a),
        Command::LearnDict(a) => learn(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

type Result<T> = dm_sparse::Result<T>;

fn spec(shape: &ShapeArgs) -> Result<ProblemSpec> {
    ProblemSpec::new(shape.m, shape.n, shape.s, shape.snr, shape.seed)
}

fn parse_size(text: &str) -> Result<(usize, usize)> {
    text.split_once(['x', 'X'])
        .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
        .ok_or_else(|| Error::InvalidArgument(format!("size must be WIDTHxHEIGHT, got '{text}'")))
}

fn gen(a: GenArgs) -> Result<()> {
    if let Some(path) = a.image {
        let (w, h) = parse_size(&a.size)?;
        imaging::write_pgm(&imaging::procedural_image(w, h, a.shape.seed)?, &path)?;
        println!("wrote {}", path.display());
        return Ok(());
    }
    let g = probgen::generate(&spec(&a.shape)?)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let note = format!(
        "m={} n={} s={} snr_db={} seed={} epsilon={:e}",
        a.shape.m,
        a.shape.n,
        a.shape.s,
        a.shape.snr.map_or("none".to_string(), |v| v.to_string()),
        a.shape.seed,
        g.epsilon
    );
    let p = &g.problem;
    linalg::write_matrix(a.out_dir.join("phi.mat"), p.dictionary().matrix(), Some(&note))?;
    linalg::write_vector(a.out_dir.join("y.vec"), p.y_obs(), Some(&note))?;
    if let Some(x) = p.truth() {
        linalg::write_vector(a.out_dir.join("x.vec"), x, Some(&note))?;
    }
    println!("wrote phi.mat, x.vec, y.vec to {}", a.out_dir.display());
    Ok(())
}

fn solver_config(budget: f64, beta: f64, max_iters: Option<usize>, amortize: bool) -> Result<SolverConfig> {
    let mut cfg = SolverConfig::default()
        .with_budget(budget)
        .with_beta(BetaParam::new(beta)?)
        .with_amortized_precompute(amortize);
    if let Some(k) = max_iters {
        cfg = cfg.with_max_iters(k);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn solve(a: SolveArgs) -> Result<()> {
    let alg: Algorithm = a.solver.parse()?;
    let cfg = solver_config(a.budget, a.beta, a.max_iters, a.amortize)?;
    let problem = match (&a.matrix_file, &a.y_file) {
        (Some(mf), Some(yf)) => {
            let dict = Arc::new(Dictionary::new(linalg::read_matrix(mf)?));
            let y = linalg::read_vector(yf)?;
            let truth = a.truth_file.as_ref().map(linalg::read_vector).transpose()?;
            let n = dict.cols();
            RecoveryProblem::new(dict, y, SparsitySet::new(a.shape.s, n)?, 0.0, truth)?
        }
        (None, None) => probgen::generate(&spec(&a.shape)?)?.problem,
        _ => {
            return Err(Error::InvalidArgument(
                "--matrix-file and --y-file must be given together".into(),
            ))
        }
    };
    let trace = alg.solve(&problem, &cfg)?;
    let best = bench::reported_snapshot(&trace);
    print!(
        "{alg}: {} iterations, {}, residual {:.6e}",
        trace.iterations(),
        trace.terminated_by,
        best.residual_l2
    );
    match best.rel_mse {
        Some(r) => println!(", rel_mse {r:.6e}"),
        None => println!(),
    }
    if let Some(out) = &a.out {
        linalg::write_vector(out, &best.estimate, Some(&format!("{alg} estimate")))?;
    }
    if let Some(path) = &a.trace {
        let dict = problem.dictionary();
        let records: Vec<_> = trace
            .snapshots
            .iter()
            .map(|snap| bench::BenchRecord {
                suite: bench::Suite::VaryS,
                algorithm: alg,
                m: dict.rows(),
                n: dict.cols(),
                s: a.shape.s,
                snr_db_target: a.shape.snr.unwrap_or(0.0),
                trial_seed: a.shape.seed,
                elapsed_s: snap.elapsed_seconds,
                rel_mse: snap.rel_mse.unwrap_or(f64::NAN),
                residual_l2: snap.residual_l2,
                terminated_by: trace.terminated_by,
            })
            .collect();
        bench::emit_csv(&records, path)?;
    }
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&a.config)?;
    let out = a
        .out
        .or_else(|| cfg.output_path.clone())
        .ok_or_else(|| Error::InvalidArgument("no output path: set 'output' or pass --out".into()))?;
    let records = bench::run_suite(&cfg)?;
    bench::emit_csv(&records, &out)?;
    let rows = bench::summarize(&records);
    match &a.summary {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            bench::write_summary_csv(&rows, file)?;
        }
        None => bench::write_summary_csv(&rows, std::io::stdout())?,
    }
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&a.config)?;
    let t = bench::tune_beta(&cfg)?;
    if let Some(path) = &a.out {
        let mut text = String::from("stage,beta,mean_rel_mse\n");
        for (i, (b, v)) in t.table.iter().enumerate() {
            let stage = if i < t.coarse_points { "coarse" } else { "fine" };
            text.push_str(&format!("{stage},{b:.2},{v:.16e}\n"));
        }
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    println!("best beta {:.2}", t.best_beta);
    Ok(())
}

fn recon(a: ReconArgs) -> Result<()> {
    let alg: Algorithm = a.solver.parse()?;
    let cfg = solver_config(a.budget, a.beta, None, true)?;
    let img = imaging::read_pgm(&a.image)?;
    let (dict, _) = imaging::read_dictionary(&a.dict)?;
    let dict = Arc::new(dict);
    let opts = ImageOptions {
        s: a.s,
        subtract_mean: !a.raw,
    };
    let r = imaging::reconstruct_image(&img, &dict, alg, &cfg, &opts)?;
    imaging::write_pgm(&r.image, &a.out)?;
    if let Some(diff) = &a.diff {
        imaging::write_pgm(&imaging::difference_image(&img, &r.image)?, diff)?;
    }
    if let Some(path) = &a.per_patch {
        let text: String = r.per_patch_snr.iter().map(|v| format!("{v:.6}\n")).collect();
        std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    println!(
        "{alg}: overall SNR {:.3} dB over {} patches (precompute {:.3} s)",
        r.overall_snr_db,
        r.per_patch_snr.len(),
        r.precompute_seconds
    );
    Ok(())
}

fn learn(a: LearnArgs) -> Result<()> {
    let coder: Algorithm = a.coder.parse()?;
    let d = a.patch_w * a.patch_w;
    let patches = if a.images.is_empty() {
        synthetic_patches(d, a.atoms, a.s_train, a.patches, a.seed)?
    } else {
        let images = a.images.iter().map(|p| imaging::read_pgm(p)).collect::<Result<Vec<_>>>()?;
        imaging::extract_training_patches(&images, a.patch_w, a.patches, !a.raw, a.seed)?
    };
    let opts = LearnOptions {
        atoms: a.atoms,
        s_train: a.s_train,
        iterations: a.iters,
        seed: a.seed,
        coder,
        ..LearnOptions::default()
    };
    let learned = imaging::learn_dictionary(&patches, &opts)?;
    imaging::write_dictionary(&a.out, &learned.dictionary, a.patch_w)?;
    let t = &learned.training;
    println!(
        "{} atoms from {} patches, {} rounds: rel_error {:.4}, {:.2} nonzeros per patch",
        a.atoms,
        t.num_patches,
        t.iterations,
        t.rel_error.last().copied().unwrap_or(f64::NAN),
        t.avg_nonzeros
    );
    Ok(())
}

fn synthetic_patches(d: usize, k: usize, s: usize, count: usize, seed: u64) -> Result<Vec<dm_sparse::DenseVector>> {
    let truth = probgen::gen_dictionary(&ProblemSpec::new(d, k, s, None, seed)?)?;
    (0..count as u64)
        .map(|i| {
            let spec = ProblemSpec::new(d, k, s, None, seed.wrapping_mul(1_000_003).wrapping_add(i + 1))?;
            linalg::matvec(truth.matrix(), &probgen::gen_sparse_signal(&spec)?)
        })
        .collect()
}
