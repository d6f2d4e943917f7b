//! Benchmark rows and their CSV form.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use super::config::Suite;
use crate::error::{Error, Result};
use crate::solvers::{Algorithm, Termination};

pub const CSV_HEADER: [&str; 11] = [
    "suite",
    "algorithm",
    "m",
    "n",
    "s",
    "snr_db_target",
    "trial_seed",
    "elapsed_s",
    "rel_mse",
    "residual_l2",
    "terminated_by",
];

/// One measured estimate. For the image suite `m × n` is the dictionary
/// shape, `rel_mse` is `‖recon − image‖² / ‖image‖²` over all pixels and
/// `snr_db_target` is 0 since no noise is added.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub suite: Suite,
    pub algorithm: Algorithm,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub snr_db_target: f64,
    pub trial_seed: u64,
    pub elapsed_s: f64,
    pub rel_mse: f64,
    pub residual_l2: f64,
    pub terminated_by: Termination,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the header and one line per record, in the given order.
pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.suite.name().to_string(),
            r.algorithm.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.s.to_string(),
            float(r.snr_db_target),
            r.trial_seed.to_string(),
            float(r.elapsed_s),
            float(r.rel_mse),
            float(r.residual_l2),
            r.terminated_by.name().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn emit_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(records, io::BufWriter::new(file)).map_err(|e| match e {
        Error::Csv(c) if c.is_io_error() => Error::io(path, io::Error::other(c.to_string())),
        other => other,
    })
}

pub fn parse_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            offset: 0,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let offset = row.position().map(|p| p.byte() as usize).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |i: usize| Error::Parse {
            offset,
            message: format!("bad {} '{}'", CSV_HEADER[i], field(i)),
        };
        let f = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let u = |i: usize| field(i).parse::<usize>().map_err(|_| bad(i));
        out.push(BenchRecord {
            suite: field(0).parse().map_err(|_| bad(0))?,
            algorithm: field(1).parse().map_err(|_| bad(1))?,
            m: u(2)?,
            n: u(3)?,
            s: u(4)?,
            snr_db_target: f(5)?,
            trial_seed: field(6).parse().map_err(|_| bad(6))?,
            elapsed_s: f(7)?,
            rel_mse: f(8)?,
            residual_l2: f(9)?,
            terminated_by: field(10).parse().map_err(|_| bad(10))?,
        });
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(io::BufReader::new(file))
}

/// Mean and median of the reported error at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub suite: Suite,
    pub algorithm: Algorithm,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub snr_db_target: f64,
    pub trials: usize,
    pub mean_rel_mse: f64,
    pub median_rel_mse: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Groups records by `(suite, algorithm, m, n, s, snr)` in first-seen
/// order. Within a trial the lowest-residual record stands for the trial,
/// so trace-mode files summarize the same way as final-mode files.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    type Key = (Suite, Algorithm, usize, usize, usize, u64);
    let mut keys: Vec<Key> = Vec::new();
    let mut trials: Vec<Vec<(u64, f64, f64)>> = Vec::new();
    for r in records {
        let key = (r.suite, r.algorithm, r.m, r.n, r.s, r.snr_db_target.to_bits());
        let g = match keys.iter().position(|k| *k == key) {
            Some(g) => g,
            None => {
                keys.push(key);
                trials.push(Vec::new());
                keys.len() - 1
            }
        };
        match trials[g].iter_mut().find(|t| t.0 == r.trial_seed) {
            Some(t) if r.residual_l2 < t.1 => *t = (r.trial_seed, r.residual_l2, r.rel_mse),
            Some(_) => {}
            None => trials[g].push((r.trial_seed, r.residual_l2, r.rel_mse)),
        }
    }
    keys.into_iter()
        .zip(trials)
        .map(|((suite, algorithm, m, n, s, snr), t)| {
            let mut v: Vec<f64> = t.iter().map(|x| x.2).collect();
            SummaryRow {
                suite,
                algorithm,
                m,
                n,
                s,
                snr_db_target: f64::from_bits(snr),
                trials: v.len(),
                mean_rel_mse: v.iter().sum::<f64>() / v.len() as f64,
                median_rel_mse: median(&mut v),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "suite",
        "algorithm",
        "m",
        "n",
        "s",
        "snr_db_target",
        "trials",
        "mean_rel_mse",
        "median_rel_mse",
    ])?;
    for r in rows {
        w.write_record([
            r.suite.name().to_string(),
            r.algorithm.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.s.to_string(),
            float(r.snr_db_target),
            r.trials.to_string(),
            float(r.mean_rel_mse),
            float(r.median_rel_mse),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
