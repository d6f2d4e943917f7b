//! Line-oriented `key = value` experiment files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::projections::BetaParam;
use crate::solvers::Algorithm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    VaryS,
    VaryNoise,
    VarySize,
    Image,
    TuneBeta,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::VaryS => "vary-s",
            Suite::VaryNoise => "vary-noise",
            Suite::VarySize => "vary-size",
            Suite::Image => "image",
            Suite::TuneBeta => "tune-beta",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Suite::VaryS, Suite::VaryNoise, Suite::VarySize, Suite::Image, Suite::TuneBeta]
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

/// One point of the varied axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridValue {
    Sparsity(usize),
    SnrDb(f64),
    Size { m: usize, n: usize },
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Sparsity(s) => write!(f, "{s}"),
            GridValue::SnrDb(v) => write!(f, "{v}"),
            GridValue::Size { m, n } => write!(f, "{m}x{n}"),
        }
    }
}

/// Whether a run emits one record per trial or one per snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordMode {
    Final,
    Trace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub grid: Vec<GridValue>,
    pub trials: usize,
    /// Per-solve budget in seconds (per patch for the image suite).
    pub budget: f64,
    pub algorithms: Vec<Algorithm>,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub mode: RecordMode,
    pub beta: BetaParam,
    /// Measurement count and length for the suites that do not vary them.
    pub m: usize,
    pub n: usize,
    /// Fixed sparsity for `vary-noise` and `tune-beta`.
    pub s: usize,
    /// Fixed SNR for the suites that do not vary it.
    pub snr_db: f64,
    /// `s / n` for `vary-size`.
    pub sparsity_ratio: f64,
    pub amortize_precompute: bool,
    pub snapshot_period: usize,
    pub max_iters: usize,
    /// Image suite inputs.
    pub image: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub subtract_mean: bool,
}

impl ExperimentConfig {
    /// Defaults for a suite; `grid` gets the suite's default axis.
    pub fn new(suite: Suite) -> Self {
        let grid = match suite {
            Suite::VaryS => [50, 100, 150, 200].map(GridValue::Sparsity).to_vec(),
            Suite::VaryNoise => [0.0, 10.0, 20.0, 30.0, 40.0].map(GridValue::SnrDb).to_vec(),
            Suite::VarySize => [(100, 250), (200, 500), (400, 1000)]
                .map(|(m, n)| GridValue::Size { m, n })
                .to_vec(),
            Suite::Image => vec![GridValue::Sparsity(32)],
            Suite::TuneBeta => vec![GridValue::Sparsity(50)],
        };
        Self {
            suite,
            grid,
            trials: 10,
            budget: 2.0,
            algorithms: Algorithm::ALL.to_vec(),
            master_seed: 0,
            output_path: None,
            mode: RecordMode::Final,
            beta: BetaParam::default(),
            m: 400,
            n: 1000,
            s: 150,
            snr_db: 20.0,
            sparsity_ratio: 1.0 / 3.0,
            amortize_precompute: suite == Suite::Image,
            snapshot_period: 10,
            max_iters: 1_000_000,
            image: None,
            dictionary: None,
            subtract_mean: true,
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.output_path, &mut cfg.image, &mut cfg.dictionary].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            pairs.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let suite_line = pairs
            .iter()
            .find(|(_, k, _)| k == "suite")
            .ok_or(Error::Config {
                line: 0,
                message: "missing 'suite'".into(),
            })?;
        let suite: Suite = suite_line.2.parse().map_err(|e: Error| Error::Config {
            line: suite_line.0,
            message: e.to_string(),
        })?;
        let mut cfg = Self::new(suite);
        let mut grid_text = None;
        for (line, key, value) in &pairs {
            let bad = |message: String| Error::Config { line: *line, message };
            let num = |what: &str| bad(format!("{what} '{value}' for {key}"));
            match key.as_str() {
                "suite" => {}
                "grid" => grid_text = Some((*line, value.clone())),
                "trials" => cfg.trials = value.parse().map_err(|_| num("bad count"))?,
                "budget" => cfg.budget = value.parse().map_err(|_| num("bad number"))?,
                "algorithms" => {
                    cfg.algorithms = split_list(value)
                        .map(|a| a.parse::<Algorithm>().map_err(|e| bad(e.to_string())))
                        .collect::<Result<_>>()?;
                }
                "master_seed" | "seed" => cfg.master_seed = value.parse().map_err(|_| num("bad seed"))?,
                "output" | "output_path" => cfg.output_path = Some(PathBuf::from(value)),
                "mode" => {
                    cfg.mode = match value.as_str() {
                        "final" => RecordMode::Final,
                        "trace" => RecordMode::Trace,
                        _ => return Err(bad(format!("mode must be 'final' or 'trace', got '{value}'"))),
                    }
                }
                "beta" => {
                    let b: f64 = value.parse().map_err(|_| num("bad number"))?;
                    cfg.beta = BetaParam::new(b).map_err(|e| bad(e.to_string()))?;
                }
                "m" => cfg.m = value.parse().map_err(|_| num("bad count"))?,
                "n" => cfg.n = value.parse().map_err(|_| num("bad count"))?,
                "s" => cfg.s = value.parse().map_err(|_| num("bad count"))?,
                "snr_db" => cfg.snr_db = value.parse().map_err(|_| num("bad number"))?,
                "sparsity_ratio" => cfg.sparsity_ratio = value.parse().map_err(|_| num("bad number"))?,
                "amortize_precompute" => cfg.amortize_precompute = parse_bool(value).ok_or_else(|| num("bad flag"))?,
                "snapshot_period" => cfg.snapshot_period = value.parse().map_err(|_| num("bad count"))?,
                "max_iters" => cfg.max_iters = value.parse().map_err(|_| num("bad count"))?,
                "image" => cfg.image = Some(PathBuf::from(value)),
                "dictionary" => cfg.dictionary = Some(PathBuf::from(value)),
                "subtract_mean" => cfg.subtract_mean = parse_bool(value).ok_or_else(|| num("bad flag"))?,
                _ => return Err(bad(format!("unknown key '{key}'"))),
            }
        }
        if let Some((line, text)) = grid_text {
            cfg.grid = parse_grid(suite, &text).map_err(|e| Error::Config {
                line,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rejects empty axes and infeasible `(m, n, s)` combinations.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::Config { line: 0, message });
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if self.grid.is_empty() {
            return fail("grid must not be empty".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithms must not be empty".into());
        }
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return fail(format!("budget must be a positive number of seconds, got {}", self.budget));
        }
        if self.snapshot_period == 0 || self.max_iters == 0 {
            return fail("snapshot_period and max_iters must be positive".into());
        }
        if self.suite == Suite::Image {
            if self.image.is_none() || self.dictionary.is_none() {
                return fail("the image suite needs 'image' and 'dictionary' paths".into());
            }
            if let Some(GridValue::Sparsity(0)) = self.grid.iter().find(|g| **g == GridValue::Sparsity(0)) {
                return fail("sparsity must be >= 1".into());
            }
            return Ok(());
        }
        for g in &self.grid {
            let (m, n, s) = self.dims(g);
            if m == 0 || s == 0 {
                return fail(format!("grid value {g}: m and s must be positive"));
            }
            if m >= n {
                return fail(format!("grid value {g}: need m < n, got m = {m}, n = {n}"));
            }
            if s > n {
                return fail(format!("grid value {g}: need s <= n, got s = {s}, n = {n}"));
            }
            if let GridValue::SnrDb(v) = g {
                if !v.is_finite() {
                    return fail(format!("SNR must be finite, got {v}"));
                }
            }
        }
        Ok(())
    }

    /// `(m, n, s)` at a grid point.
    pub fn dims(&self, g: &GridValue) -> (usize, usize, usize) {
        match (self.suite, *g) {
            (Suite::VaryS | Suite::TuneBeta, GridValue::Sparsity(s)) => (self.m, self.n, s),
            (Suite::VarySize, GridValue::Size { m, n }) => {
                (m, n, ((self.sparsity_ratio * n as f64).round() as usize).max(1))
            }
            _ => (self.m, self.n, self.s),
        }
    }

    /// Target SNR at a grid point.
    pub fn snr_at(&self, g: &GridValue) -> f64 {
        match g {
            GridValue::SnrDb(v) => *v,
            _ => self.snr_db,
        }
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split([',', ' ']).map(str::trim).filter(|t| !t.is_empty())
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_grid(suite: Suite, text: &str) -> Result<Vec<GridValue>> {
    split_list(text)
        .map(|tok| {
            let bad = || Error::InvalidArgument(format!("bad grid value '{tok}' for suite {suite}"));
            Ok(match suite {
                Suite::VaryS | Suite::Image | Suite::TuneBeta => GridValue::Sparsity(tok.parse().map_err(|_| bad())?),
                Suite::VaryNoise => GridValue::SnrDb(tok.parse().map_err(|_| bad())?),
                Suite::VarySize => {
                    let (m, n) = tok.split_once(['x', 'X']).ok_or_else(bad)?;
                    GridValue::Size {
                        m: m.parse().map_err(|_| bad())?,
                        n: n.parse().map_err(|_| bad())?,
                    }
                }
            })
        })
        .collect()
}
