use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use vht_core::{HoeffdingParams, SplitCriterion, Variant};

#[derive(Parser, Debug)]
#[command(name = "vht", version, about = "Vertical Hoeffding Tree experiment runner")]
#[command(after_help = "Log verbosity is read from VHT_LOG (error, warn, info, debug, trace).")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train and evaluate a learner prequentially.
    Run(RunArgs),
    /// Export a synthetic stream as CSV.
    Gen(GenArgs),
    /// Render accuracy curves from metric CSV files to SVG.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Single Hoeffding tree.
    Sequential,
    /// VHT on the synchronous single-threaded engine.
    VhtLocal,
    /// VHT on worker threads, forwarding instances during splits.
    VhtWok,
    /// VHT on worker threads, forwarding and buffering up to z instances.
    VhtWk,
    /// p independent trees on round-robin slices, majority vote.
    Sharding,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    /// Random-tree concept over categorical and numeric attributes.
    Dense,
    /// Zipf bag-of-words tweets.
    Sparse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Criterion {
    InfoGain,
    Gini,
}

#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Synthetic generator [default: dense, unless --dataset is given].
    #[arg(long = "gen", value_enum)]
    pub generator: Option<Generator>,
    /// Categorical attributes of the dense generator [default: 10].
    #[arg(long)]
    pub categorical: Option<usize>,
    /// Numeric attributes of the dense generator [default: 10].
    #[arg(long)]
    pub numerical: Option<usize>,
    /// Vocabulary size of the sparse generator [default: 1000].
    #[arg(long)]
    pub vocabulary: Option<usize>,
    /// ARFF or CSV file to read instead of generating.
    #[arg(long, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Number of instances; for a dataset, at most this many are read.
    #[arg(short = 'n', long = "instances")]
    pub instances: Option<u64>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long = "algo", value_enum)]
    pub algorithm: Algorithm,
    /// Statistics replicas for VHT, shards for sharding.
    #[arg(short = 'p', long, default_value_t = 1)]
    pub parallelism: usize,
    /// Model aggregator replicas (VHT only).
    #[arg(short = 'q', long = "model-replicas", default_value_t = 1)]
    pub model_replicas: usize,
    /// Buffer size for vht-wk.
    #[arg(short = 'z', long = "buffer")]
    pub buffer: Option<usize>,
    /// Split deadline in engine time units (100 ms each on threads).
    #[arg(long, default_value_t = 30)]
    pub timeout: u64,
    /// Capacity of each processor's input queue.
    #[arg(long, default_value_t = 1024)]
    pub queue: usize,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Interval between metric rows, in instances.
    #[arg(long, default_value_t = 100_000)]
    pub report_every: u64,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Comma-separated seeds, one per repetition [default: 1..=repetitions].
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Hoeffding bound confidence.
    #[arg(long, default_value_t = 1e-7)]
    pub delta: f64,
    /// Instances a leaf accumulates between split attempts.
    #[arg(long, default_value_t = 200.0)]
    pub grace_period: f64,
    /// Tie threshold.
    #[arg(long, default_value_t = 0.05)]
    pub tie_threshold: f64,
    #[arg(long, value_enum, default_value_t = Criterion::InfoGain)]
    pub criterion: Criterion,
    /// Also run at each of these parallelism levels and write speedups over
    /// the sequential tree to speedup.csv.
    #[arg(long, value_delimiter = ',', value_name = "P,..")]
    pub sweep: Option<Vec<usize>>,
    /// Directory for per-run and aggregate CSV files.
    #[arg(long = "out", default_value = "results")]
    pub out_dir: PathBuf,
    /// Also render accuracy curves to this SVG file.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Write the final tree of the last run as indented text.
    #[arg(long, value_name = "PATH")]
    pub dump_model: Option<PathBuf>,
    /// Write the final tree of the last run in the binary model format.
    #[arg(long, value_name = "PATH")]
    pub save_model: Option<PathBuf>,
    /// Write zero for the timing columns so that output is reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV file; standard output when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    /// Metric CSV files written by `run`, one curve each.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Where instances come from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Dense { categorical: usize, numerical: usize, instances: u64 },
    Sparse { vocabulary: usize, instances: u64 },
    Dataset { path: PathBuf, limit: Option<u64> },
}

/// A validated `run` invocation.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub parallelism: usize,
    pub model_replicas: usize,
    pub variant: Variant,
    pub timeout: u64,
    pub queue: usize,
    pub source: Source,
    pub report_every: u64,
    pub seeds: Vec<u64>,
    pub params: HoeffdingParams,
    pub sweep: Vec<usize>,
    pub out_dir: PathBuf,
    pub svg: Option<PathBuf>,
    pub dump_model: Option<PathBuf>,
    pub save_model: Option<PathBuf>,
    pub timing: bool,
}

/// Rejection of an otherwise well-formed command line.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

impl SourceArgs {
    pub fn resolve(&self) -> Result<Source, UsageError> {
        if let Some(path) = &self.dataset {
            if self.generator.is_some() {
                return Err(usage("--dataset and --gen are mutually exclusive"));
            }
            if self.categorical.is_some() || self.numerical.is_some() || self.vocabulary.is_some() {
                return Err(usage("generator options cannot be combined with --dataset"));
            }
            return Ok(Source::Dataset {
                path: path.clone(),
                limit: self.instances,
            });
        }
        let instances = self.instances.unwrap_or(100_000);
        match self.generator.unwrap_or(Generator::Dense) {
            Generator::Dense => {
                if self.vocabulary.is_some() {
                    return Err(usage("--vocabulary applies to --gen sparse only"));
                }
                let categorical = self.categorical.unwrap_or(10);
                let numerical = self.numerical.unwrap_or(10);
                if categorical + numerical == 0 {
                    return Err(usage("the dense generator needs at least one attribute"));
                }
                Ok(Source::Dense {
                    categorical,
                    numerical,
                    instances,
                })
            }
            Generator::Sparse => {
                if self.categorical.is_some() || self.numerical.is_some() {
                    return Err(usage("--categorical and --numerical apply to --gen dense only"));
                }
                let vocabulary = self.vocabulary.unwrap_or(1000);
                if vocabulary == 0 {
                    return Err(usage("--vocabulary must be positive"));
                }
                Ok(Source::Sparse { vocabulary, instances })
            }
        }
    }
}

impl RunArgs {
    pub fn into_spec(self) -> Result<RunSpec, UsageError> {
        let vht = matches!(self.algorithm, Algorithm::VhtLocal | Algorithm::VhtWok | Algorithm::VhtWk);
        let variant = match (self.algorithm, self.buffer) {
            (Algorithm::VhtWk, Some(z)) => Variant::Wk(z),
            (Algorithm::VhtWk, None) => return Err(usage("vht-wk needs a buffer size (-z)")),
            (_, Some(_)) => return Err(usage(format!("-z only applies to vht-wk, not {:?}", self.algorithm))),
            _ => Variant::Wok,
        };
        if self.algorithm == Algorithm::Sharding && self.save_model.is_some() {
            return Err(usage("--save-model writes a single tree; use --dump-model for sharding"));
        }
        if !vht && self.model_replicas != 1 {
            return Err(usage("-q only applies to the VHT algorithms"));
        }
        if self.parallelism == 0 {
            return Err(usage("-p must be at least 1"));
        }
        if self.model_replicas == 0 {
            return Err(usage("-q must be at least 1"));
        }
        if self.timeout == 0 {
            return Err(usage("--timeout must be positive"));
        }
        if self.queue == 0 {
            return Err(usage("--queue must be at least 1"));
        }
        if self.report_every == 0 {
            return Err(usage("--report-every must be positive"));
        }
        if self.repetitions == 0 {
            return Err(usage("--repetitions must be at least 1"));
        }
        let seeds = match self.seeds {
            Some(s) if s.len() != self.repetitions => {
                return Err(usage(format!("{} seeds given for {} repetitions", s.len(), self.repetitions)));
            }
            Some(s) => s,
            None => (1..=self.repetitions as u64).collect(),
        };
        let sweep = self.sweep.unwrap_or_default();
        if sweep.contains(&0) {
            return Err(usage("sweep parallelism levels must be at least 1"));
        }
        if !sweep.is_empty() && self.algorithm == Algorithm::Sequential {
            return Err(usage("--sweep needs a parallel algorithm"));
        }
        let params = HoeffdingParams {
            delta: self.delta,
            grace_period: self.grace_period,
            tie_threshold: self.tie_threshold,
            criterion: match self.criterion {
                Criterion::InfoGain => SplitCriterion::InfoGain,
                Criterion::Gini => SplitCriterion::Gini,
            },
            ..HoeffdingParams::default()
        };
        params.validate().map_err(|e| usage(e.to_string()))?;
        Ok(RunSpec {
            algorithm: self.algorithm,
            parallelism: self.parallelism,
            model_replicas: self.model_replicas,
            variant,
            timeout: self.timeout,
            queue: self.queue,
            source: self.source.resolve()?,
            report_every: self.report_every,
            seeds,
            params,
            sweep,
            out_dir: self.out_dir,
            svg: self.svg,
            dump_model: self.dump_model,
            save_model: self.save_model,
            timing: !self.no_timing,
        })
    }
}
