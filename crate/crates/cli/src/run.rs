use crate::args::{Algorithm, GenArgs, PlotArgs, RunSpec, Source};
use anyhow::{Context, Result};
use log::info;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};
use vht_core::baselines::ShardEnsemble;
use vht_core::datagen::{DenseGenConfig, DenseGenerator, SparseGenConfig, SparseGenerator};
use vht_core::engine::ThreadedConfig;
use vht_core::eval::{
    aggregate, emit_aggregate_csv, emit_csv, emit_plot, load_dataset, prequential, read_csv, speedup, write_csv, Format,
    MetricsRow,
};
use vht_core::tree::codec;
use vht_core::vht::VhtRun;
use vht_core::{HoeffdingTree, Instance, Schema, VhtConfig};

type Stream = Box<dyn Iterator<Item = Instance> + Send>;

fn open_source(source: &Source, seed: u64) -> Result<(Arc<Schema>, Stream)> {
    Ok(match source {
        Source::Dense {
            categorical,
            numerical,
            instances,
        } => {
            let g = DenseGenerator::new(DenseGenConfig::new(*categorical, *numerical, seed))?;
            (Arc::clone(g.schema()), Box::new(g.stream(*instances)))
        }
        Source::Sparse { vocabulary, instances } => {
            let g = SparseGenerator::new(SparseGenConfig::new(*vocabulary, seed))?;
            (Arc::clone(g.schema()), Box::new(g.stream(*instances)))
        }
        Source::Dataset { path, limit } => {
            let format = Format::from_path(path)?;
            let reader = load_dataset(path, format)?;
            let schema = Arc::new(reader.header().schema());
            // Parse errors surface here, before training starts.
            let data = reader
                .take(limit.map_or(usize::MAX, |l| l as usize))
                .collect::<Result<Vec<_>, _>>()
                .with_context(|| format!("reading {}", path.display()))?;
            (schema, Box::new(data.into_iter()))
        }
    })
}

/// The final model of a run, kept for dumping.
enum Model {
    Single(vht_core::Tree),
    Shards(Vec<vht_core::Tree>),
}

impl Model {
    fn dump(&self) -> String {
        match self {
            Model::Single(t) => t.dump(),
            Model::Shards(ts) => ts
                .iter()
                .enumerate()
                .map(|(i, t)| format!("# shard {i}\n{}", t.dump()))
                .collect(),
        }
    }
}

struct RunResult {
    rows: Vec<MetricsRow>,
    wall: Duration,
    model: Model,
}

fn run_once(spec: &RunSpec, algorithm: Algorithm, p: usize, seed: u64) -> Result<RunResult> {
    let (schema, stream) = open_source(&spec.source, seed)?;
    let start = Instant::now();
    let vht_config = |variant| VhtConfig {
        parallelism: p,
        model_replicas: spec.model_replicas,
        variant,
        timeout: spec.timeout,
        params: spec.params,
        queue_capacity: spec.queue,
        spill_dir: None,
        report_every: spec.report_every,
    };
    let result = match algorithm {
        Algorithm::Sequential => {
            let mut tree = HoeffdingTree::new(schema, spec.params)?;
            let rows = prequential(&mut tree, stream, spec.report_every)?;
            RunResult {
                rows,
                wall: start.elapsed(),
                model: Model::Single(tree.into_tree()),
            }
        }
        Algorithm::Sharding => {
            let mut e = ShardEnsemble::new(schema, spec.params, p)?;
            let rows = prequential(&mut e, stream, spec.report_every)?;
            RunResult {
                rows,
                wall: start.elapsed(),
                model: Model::Shards(e.shards().iter().map(|s| s.tree().clone()).collect()),
            }
        }
        Algorithm::VhtLocal | Algorithm::VhtWok | Algorithm::VhtWk => {
            let run = VhtRun::new(vht_config(spec.variant), schema)?;
            let out = if algorithm == Algorithm::VhtLocal {
                run.run_local(stream)?
            } else {
                run.run_threaded(stream, ThreadedConfig::default())?
            };
            let c = out.models[0].counters();
            info!(
                "{} split attempts, {} timeouts, {} discarded, {} replayed",
                c.computes, c.timeouts, c.discarded, c.replayed
            );
            RunResult {
                wall: out.report.wall,
                model: Model::Single(out.tree().clone()),
                rows: out.rows,
            }
        }
    };
    Ok(result)
}

fn strip_timing(rows: &mut [MetricsRow]) {
    for r in rows {
        r.seconds = 0.0;
        r.throughput = 0.0;
    }
}

fn label(algorithm: Algorithm) -> &'static str {
    match algorithm {
        Algorithm::Sequential => "sequential",
        Algorithm::VhtLocal => "vht-local",
        Algorithm::VhtWok => "vht-wok",
        Algorithm::VhtWk => "vht-wk",
        Algorithm::Sharding => "sharding",
    }
}

/// Runs every repetition, writes the per-run and aggregate CSVs and, when
/// asked, the plot, model files and speedup table.
pub fn execute(spec: &RunSpec) -> Result<()> {
    fs::create_dir_all(&spec.out_dir).with_context(|| format!("creating {}", spec.out_dir.display()))?;
    let name = label(spec.algorithm);
    let mut runs = Vec::with_capacity(spec.seeds.len());
    let mut last_model = None;
    for &seed in &spec.seeds {
        let mut r = run_once(spec, spec.algorithm, spec.parallelism, seed)
            .with_context(|| format!("{name} run with seed {seed}"))?;
        if !spec.timing {
            strip_timing(&mut r.rows);
        }
        let path = spec.out_dir.join(format!("{name}-seed{seed}.csv"));
        emit_csv(&r.rows, &path).with_context(|| format!("writing {}", path.display()))?;
        if let Some(last) = r.rows.last() {
            println!(
                "{name} seed {seed}: {} instances, accuracy {:.2}%, {} leaves, {:.2}s",
                last.instances,
                last.accuracy_cum,
                last.leaves,
                r.wall.as_secs_f64()
            );
        }
        runs.push((format!("{name} seed {seed}"), r.rows));
        last_model = Some(r.model);
    }
    let rows: Vec<Vec<MetricsRow>> = runs.iter().map(|(_, r)| r.clone()).collect();
    let path = spec.out_dir.join(format!("{name}-aggregate.csv"));
    emit_aggregate_csv(&aggregate(&rows), &path).with_context(|| format!("writing {}", path.display()))?;

    if let Some(svg) = &spec.svg {
        emit_plot(&runs, svg).with_context(|| format!("writing {}", svg.display()))?;
    }
    let model = last_model.expect("at least one repetition");
    if let Some(path) = &spec.dump_model {
        fs::write(path, model.dump()).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &spec.save_model {
        let Model::Single(tree) = &model else {
            unreachable!("sharding with --save-model is rejected during validation");
        };
        fs::write(path, codec::to_bytes(tree)).with_context(|| format!("writing {}", path.display()))?;
    }
    if !spec.sweep.is_empty() {
        sweep(spec)?;
    }
    Ok(())
}

fn sweep(spec: &RunSpec) -> Result<()> {
    let path = spec.out_dir.join("speedup.csv");
    let mut w = csv_writer(&path)?;
    writeln!(w, "algorithm,p,seed,baseline_seconds,seconds,speedup,accuracy")?;
    for &seed in &spec.seeds {
        let base = run_once(spec, Algorithm::Sequential, 1, seed)?;
        for &p in &spec.sweep {
            let r = run_once(spec, spec.algorithm, p, seed).with_context(|| format!("sweep p={p} seed {seed}"))?;
            let s = speedup(base.wall, r.wall)?;
            let acc = r.rows.last().map_or(0.0, |l| l.accuracy_cum);
            println!("{} p={p} seed {seed}: speedup {s:.2}", label(spec.algorithm));
            writeln!(
                w,
                "{},{p},{seed},{},{},{s},{acc}",
                label(spec.algorithm),
                base.wall.as_secs_f64(),
                r.wall.as_secs_f64()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn generate(args: &GenArgs) -> Result<()> {
    let source = args.source.resolve()?;
    if matches!(source, Source::Dataset { .. }) {
        anyhow::bail!(crate::args::UsageError("gen writes synthetic streams; --dataset is not accepted".into()));
    }
    let (schema, stream) = open_source(&source, args.seed)?;
    match &args.out {
        Some(path) => write_csv(csv_writer(path)?, &schema, stream)?,
        None => write_csv(io::stdout().lock(), &schema, stream)?,
    }
    Ok(())
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    let mut series = Vec::new();
    for path in &args.inputs {
        let rows = read_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        series.push((name, rows));
    }
    emit_plot(&series, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}
