//! Datasets in, prequential measurements out.

mod dataset;
mod metrics;
mod output;
mod plot;
mod prequential;

pub use dataset::{from_reader, load_dataset, write_csv, Column, ColumnKind, DatasetHeader, DatasetReader, Format};
pub use metrics::{MetricsRow, PrequentialMeter};
pub use output::{aggregate, emit_aggregate_csv, emit_csv, read_csv, write_rows, AggregateRow, Spread};
pub use plot::{emit_plot, render_svg};
pub use prequential::{measure_throughput, prequential, speedup};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("read error: {0}")]
    Read(std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity { line: u64, expected: usize, found: usize },
    #[error("line {line}: unknown value '{value}' for column '{column}'")]
    UnknownValue { line: u64, column: String, value: String },
    #[error("cannot tell the format of {0}; use .arff or .csv")]
    UnknownFormat(String),
    #[error("bad header: {0}")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("nothing to plot")]
    NothingToPlot,
    #[error("wall time must be positive")]
    ZeroDuration,
}
