use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, TraceSource};
use crate::baselines::{CmHeap, CountHeap, SketchHeapConfig, SpaceSaving};
use crate::elastic::ElasticStd;
use crate::elastic_hh::ElasticHh;
use crate::error::Result;
use crate::metrics::{self, Accuracy, AccuracyOptions, Oracle, ThroughputStats};
use crate::sketch::{HeavyHitterReport, HeavyHitterSketch, Lambda};
use crate::trace::{self, FlowKey, Trace};

pub const DEFAULT_MEMORIES_KB: [usize; 5] = [100, 200, 300, 400, 500];
pub const DEFAULT_LAMBDAS: [(u32, u32); 6] = [(1, 4), (1, 2), (1, 1), (2, 1), (4, 1), (8, 1)];

/// Any of the five evaluated sketches.
#[derive(Debug, Clone)]
pub enum AnySketch {
    ElasticHh(ElasticHh),
    Elastic(ElasticStd),
    SpaceSaving(SpaceSaving),
    CmHeap(CmHeap),
    CountHeap(CountHeap),
}

macro_rules! dispatch {
    ($self:expr, $s:ident => $body:expr) => {
        match $self {
            AnySketch::ElasticHh($s) => $body,
            AnySketch::Elastic($s) => $body,
            AnySketch::SpaceSaving($s) => $body,
            AnySketch::CmHeap($s) => $body,
            AnySketch::CountHeap($s) => $body,
        }
    };
}

impl HeavyHitterSketch for AnySketch {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        dispatch!(self, s => HeavyHitterSketch::insert(s, key))
    }

    fn query(&self, key: FlowKey) -> u64 {
        dispatch!(self, s => HeavyHitterSketch::query(s, key))
    }

    fn report(&self, threshold: u64) -> HeavyHitterReport {
        dispatch!(self, s => HeavyHitterSketch::report(s, threshold))
    }

    fn name(&self) -> &'static str {
        dispatch!(self, s => s.name())
    }
}

impl AnySketch {
    /// Throughput of fresh clones of this (unused) sketch. Each variant is
    /// timed through its concrete type so the insert loop is monomorphic.
    fn measure_throughput(&self, trace: &Trace, repeats: usize) -> Result<ThroughputStats> {
        dispatch!(self, s => metrics::measure_throughput(|| s.clone(), trace, repeats))
    }
}

pub fn build_sketch(config: &ExperimentConfig) -> Result<AnySketch> {
    config.validate()?;
    let memory = config.memory_bytes();
    let lambda = config.effective_lambda().unwrap_or(Lambda::ONE);
    let heap_config = SketchHeapConfig {
        rows: config.rows,
        heap_capacity: config.heap_capacity,
        heap_in_budget: config.heap_in_budget,
    };
    Ok(match config.algo {
        Algorithm::ElasticHh => AnySketch::ElasticHh(ElasticHh::new(
            memory,
            lambda,
            config.cells_per_bucket,
            config.seed,
        )?),
        Algorithm::Elastic => AnySketch::Elastic(ElasticStd::new(
            memory,
            lambda,
            config.cells_per_bucket,
            config.heavy_light_ratio,
            config.seed,
        )?),
        Algorithm::SpaceSaving => AnySketch::SpaceSaving(SpaceSaving::with_memory(memory)?),
        Algorithm::CmHeap => {
            AnySketch::CmHeap(CmHeap::with_memory(memory, heap_config, config.seed)?)
        }
        Algorithm::CountHeap => {
            AnySketch::CountHeap(CountHeap::with_memory(memory, heap_config, config.seed)?)
        }
    })
}

pub fn build_trace(source: &TraceSource) -> Result<Trace> {
    match source {
        TraceSource::File { path, format } => trace::load_trace(path, *format),
        TraceSource::Zipf(spec) => trace::generate_zipf(spec),
    }
}

/// One experiment's outcome with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub lambda: Option<Lambda>,
    pub threshold: u64,
    pub n_packets: u64,
    pub n_distinct: usize,
    pub remapped_zeros: u64,
    pub accuracy: Accuracy,
    pub throughput: Option<ThroughputStats>,
    pub insert_ms: f64,
    pub report_ms: f64,
    pub started_unix_s: u64,
    pub code_version: String,
}

impl ResultRow {
    /// True when every accuracy field matches `other` exactly.
    pub fn same_accuracy(&self, other: &ResultRow) -> bool {
        self.threshold == other.threshold
            && self.n_packets == other.n_packets
            && self.accuracy == other.accuracy
    }
}

fn accuracy_pass(config: &ExperimentConfig, trace: &Trace, oracle: &Oracle) -> Result<ResultRow> {
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let mut sketch = build_sketch(config)?;
    let threshold = oracle.threshold(config.threshold_frac);

    let start = Instant::now();
    for key in trace.iter() {
        sketch.insert(key);
    }
    let insert_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let report = sketch.report(threshold);
    let report_ms = start.elapsed().as_secs_f64() * 1e3;

    let options = AccuracyOptions {
        query_set: config.query_set,
        cdf_samples: config.cdf_samples,
    };
    let accuracy = metrics::compute_accuracy(oracle, &report, threshold, options)?;
    Ok(ResultRow {
        config: config.clone(),
        config_hash: config.hash_hex(),
        lambda: config.effective_lambda(),
        threshold,
        n_packets: oracle.total(),
        n_distinct: oracle.distinct(),
        remapped_zeros: trace.remapped_zeros(),
        accuracy,
        throughput: None,
        insert_ms,
        report_ms,
        started_unix_s,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn throughput_pass(row: &mut ResultRow, trace: &Trace) -> Result<()> {
    if row.config.repeats > 0 {
        let sketch = build_sketch(&row.config)?;
        row.throughput = Some(sketch.measure_throughput(trace, row.config.repeats)?);
    }
    Ok(())
}

/// Runs one configuration: an accuracy pass, then (if `repeats > 0`) a
/// separate throughput measurement on fresh sketches.
pub fn run_single(config: &ExperimentConfig) -> Result<ResultRow> {
    config.validate()?;
    let trace = build_trace(&config.trace)?;
    let oracle = Oracle::build(&trace);
    let mut row = accuracy_pass(config, &trace, &oracle)?;
    throughput_pass(&mut row, &trace)?;
    Ok(row)
}

/// Runs many configurations. Accuracy passes run in parallel, one sketch
/// per worker; throughput passes run one at a time afterwards. Each distinct
/// trace source is materialized once.
pub fn run_grid(configs: &[ExperimentConfig]) -> Result<Vec<ResultRow>> {
    let mut traces: Vec<(TraceSource, Trace, Oracle)> = Vec::new();
    for config in configs {
        config.validate()?;
        if !traces.iter().any(|(s, _, _)| *s == config.trace) {
            let trace = build_trace(&config.trace)?;
            let oracle = Oracle::build(&trace);
            traces.push((config.trace.clone(), trace, oracle));
        }
    }
    let lookup = |config: &ExperimentConfig| {
        let (_, t, o) = traces
            .iter()
            .find(|(s, _, _)| *s == config.trace)
            .expect("trace built");
        (t, o)
    };

    let mut rows = configs
        .par_iter()
        .map(|config| {
            let (trace, oracle) = lookup(config);
            accuracy_pass(config, trace, oracle)
        })
        .collect::<Result<Vec<_>>>()?;
    for row in &mut rows {
        let (trace, _) = lookup(&row.config);
        throughput_pass(row, trace)?;
    }
    Ok(rows)
}

/// Every algorithm at every memory size.
pub fn run_memory_sweep(base: &ExperimentConfig, memories_kb: &[usize]) -> Result<Vec<ResultRow>> {
    let configs: Vec<_> = Algorithm::ALL
        .into_iter()
        .flat_map(|algo| {
            memories_kb.iter().map(move |&memory_kb| ExperimentConfig {
                algo,
                memory_kb,
                lambda: None,
                ..base.clone()
            })
        })
        .collect();
    run_grid(&configs)
}

/// Elastic-HH at every `lambda`, plus standard Elastic at 8 and at 1.
pub fn run_lambda_sweep(base: &ExperimentConfig, lambdas: &[Lambda]) -> Result<Vec<ResultRow>> {
    let hh = lambdas.iter().map(|&l| (Algorithm::ElasticHh, l));
    let reference = [
        (Algorithm::Elastic, Lambda::EIGHT),
        (Algorithm::Elastic, Lambda::ONE),
    ];
    let configs: Vec<_> = hh
        .chain(reference)
        .map(|(algo, lambda)| ExperimentConfig {
            algo,
            lambda: Some(lambda),
            ..base.clone()
        })
        .collect();
    run_grid(&configs)
}
