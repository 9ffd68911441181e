use super::metrics::MetricsRow;
use super::EvalError;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::Write;
use std::path::Path;

fn create(path: &Path) -> Result<File, EvalError> {
    File::create(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `rows` with columns
/// `instances,accuracy_cum,accuracy_window,seconds,throughput,splits,leaves`.
pub fn write_rows<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(MetricsRow::COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(EvalError::Read)?;
    Ok(())
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<(), EvalError> {
    write_rows(create(path)?, rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>, EvalError> {
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub stddev: f64,
}

impl Spread {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stddev = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stddev }
    }
}

/// Row `j` of several repetitions, summarized.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub instances: u64,
    pub runs: usize,
    pub accuracy_cum: Spread,
    pub accuracy_window: Spread,
    pub seconds: Spread,
    pub throughput: Spread,
    pub splits: Spread,
    pub leaves: Spread,
}

/// Aggregates repetitions row by row, up to the shortest run.
pub fn aggregate(runs: &[Vec<MetricsRow>]) -> Vec<AggregateRow> {
    let len = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|j| {
            let col = |f: fn(&MetricsRow) -> f64| Spread::of(&runs.iter().map(|r| f(&r[j])).collect::<Vec<_>>());
            AggregateRow {
                instances: runs[0][j].instances,
                runs: runs.len(),
                accuracy_cum: col(|r| r.accuracy_cum),
                accuracy_window: col(|r| r.accuracy_window),
                seconds: col(|r| r.seconds),
                throughput: col(|r| r.throughput),
                splits: col(|r| r.splits as f64),
                leaves: col(|r| r.leaves as f64),
            }
        })
        .collect()
}

pub fn emit_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["instances".to_string(), "runs".to_string()];
    for c in &MetricsRow::COLUMNS[1..] {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_stddev"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.instances.to_string(), r.runs.to_string()];
        for s in [r.accuracy_cum, r.accuracy_window, r.seconds, r.throughput, r.splits, r.leaves] {
            rec.push(s.mean.to_string());
            rec.push(s.stddev.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(EvalError::Read)?;
    Ok(())
}
