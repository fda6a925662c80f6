//! Ground truth and evaluation metrics.
//!
//! Accuracy is measured against an exact count of the trace:
//!
//! * AAE / ARE: mean absolute / relative error over a query set of flows,
//!   by default the true heavy hitters with unreported flows estimated at 0.
//! * PR / RR / F1: precision and recall of the reported key set against the
//!   true heavy hitters, and their harmonic mean.
//! * AE / RE samples: per-flow errors of the correctly reported flows, for
//!   empirical CDFs.
//!
//! Throughput is insertion rate in million packets per second.

use std::hint::black_box;
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::{HeavyHitterReport, HeavyHitterSketch, NoopSketch};
use crate::trace::{FlowKey, Trace};

pub const DEFAULT_REPEATS: usize = 100;

/// Exact per-flow packet counts of a trace.
#[derive(Debug, Clone, Default)]
pub struct Oracle {
    counts: FxHashMap<FlowKey, u64>,
    total: u64,
}

impl Oracle {
    pub fn build(trace: &Trace) -> Self {
        let mut counts = FxHashMap::default();
        for key in trace.iter() {
            *counts.entry(key).or_insert(0) += 1;
        }
        Self {
            counts,
            total: trace.len() as u64,
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, key: FlowKey) -> u64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FlowKey, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    /// `ceil(fraction * N)`, at least 1.
    pub fn threshold(&self, fraction: f64) -> u64 {
        threshold_for(self.total, fraction)
    }

    /// Flows with `count >= threshold`, sorted by key.
    pub fn true_heavy_hitters(&self, threshold: u64) -> Vec<(FlowKey, u64)> {
        let mut hh: Vec<_> = self.iter().filter(|&(_, c)| c >= threshold).collect();
        hh.sort_unstable_by_key(|&(k, _)| k);
        hh
    }
}

/// `ceil(fraction * total)`, at least 1. Products within 1e-9 of an integer
/// are snapped to it so that e.g. 0.0001 * 10^6 gives 100.
pub fn threshold_for(total: u64, fraction: f64) -> u64 {
    let x = fraction * total as f64;
    let nearest = x.round();
    let t = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (t as u64).max(1)
}

/// Flows over which AAE and ARE are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuerySet {
    /// Every true heavy hitter; unreported ones count with estimate 0.
    #[default]
    TrueHeavyHitters,
    /// Only true heavy hitters that were reported.
    ReportedCorrect,
}

/// Flows contributing AE/RE samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfSamples {
    #[default]
    CorrectOnly,
    /// Also include false positives, measured against their true counts.
    AllReported,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyOptions {
    pub query_set: QuerySet,
    pub cdf_samples: CdfSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub aae: f64,
    pub are: f64,
    pub pr: f64,
    pub rr: f64,
    pub f1: f64,
    pub n_true: usize,
    pub n_reported: usize,
    pub n_correct: usize,
    #[serde(skip)]
    pub ae_samples: Vec<f64>,
    #[serde(skip)]
    pub re_samples: Vec<f64>,
}

pub fn f1_score(pr: f64, rr: f64) -> f64 {
    if pr + rr > 0.0 {
        2.0 * pr * rr / (pr + rr)
    } else {
        0.0
    }
}

/// Scores `report` against the oracle at `threshold`.
///
/// Fails with [`Error::NoHeavyHitters`] when no flow reaches the threshold.
/// With nothing reported, PR is 0.
pub fn compute_accuracy(
    oracle: &Oracle,
    report: &HeavyHitterReport,
    threshold: u64,
    options: AccuracyOptions,
) -> Result<Accuracy> {
    let truth = oracle.true_heavy_hitters(threshold);
    if truth.is_empty() {
        return Err(Error::NoHeavyHitters { threshold });
    }
    let reported: FxHashMap<FlowKey, u64> = report.iter().map(|e| (e.key, e.estimate)).collect();

    let mut abs_sum = 0.0;
    let mut rel_sum = 0.0;
    let mut n_query = 0usize;
    let mut n_correct = 0usize;
    let mut ae_samples = Vec::new();
    let mut re_samples = Vec::new();
    for &(key, true_count) in &truth {
        let estimate = reported.get(&key).copied();
        if estimate.is_some() {
            n_correct += 1;
        }
        if estimate.is_none() && options.query_set == QuerySet::ReportedCorrect {
            continue;
        }
        let ae = true_count.abs_diff(estimate.unwrap_or(0)) as f64;
        let re = ae / true_count as f64;
        abs_sum += ae;
        rel_sum += re;
        n_query += 1;
        if estimate.is_some() {
            ae_samples.push(ae);
            re_samples.push(re);
        }
    }
    if options.cdf_samples == CdfSamples::AllReported {
        for entry in report.iter() {
            let true_count = oracle.count(entry.key);
            if true_count > 0 && true_count < threshold {
                let ae = true_count.abs_diff(entry.estimate) as f64;
                ae_samples.push(ae);
                re_samples.push(ae / true_count as f64);
            }
        }
    }

    let (aae, are) = if n_query == 0 {
        (0.0, 0.0)
    } else {
        (abs_sum / n_query as f64, rel_sum / n_query as f64)
    };
    let pr = if reported.is_empty() {
        0.0
    } else {
        n_correct as f64 / reported.len() as f64
    };
    let rr = n_correct as f64 / truth.len() as f64;
    Ok(Accuracy {
        aae,
        are,
        pr,
        rr,
        f1: f1_score(pr, rr),
        n_true: truth.len(),
        n_reported: reported.len(),
        n_correct,
        ae_samples,
        re_samples,
    })
}

/// Empirical CDF as step points `(value, fraction of samples <= value)`.
pub fn cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == v => last.1 = fraction,
            _ => points.push((v, fraction)),
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputStats {
    pub samples_mpps: Vec<f64>,
    pub mean_mpps: f64,
    pub std_mpps: f64,
    /// Mean rate of the no-op sketch over the same trace.
    pub calibration_mpps: f64,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn timed_pass<S: HeavyHitterSketch>(mut sketch: S, keys: &[FlowKey]) -> Duration {
    let start = Instant::now();
    for &key in keys {
        sketch.insert(key);
    }
    let elapsed = start.elapsed();
    black_box(&sketch);
    elapsed
}

fn rates<S, F>(mut factory: F, trace: &Trace, repeats: usize) -> Vec<f64>
where
    S: HeavyHitterSketch,
    F: FnMut() -> S,
{
    let keys = trace.records();
    (0..repeats)
        .map(|_| {
            let sketch = factory();
            let secs = timed_pass(sketch, keys).as_secs_f64().max(1e-12);
            keys.len() as f64 / secs / 1e6
        })
        .collect()
}

/// Times `repeats` full insertion passes, each on a fresh sketch from
/// `factory`. Construction happens outside the timed region.
pub fn measure_throughput<S, F>(
    factory: F,
    trace: &Trace,
    repeats: usize,
) -> Result<ThroughputStats>
where
    S: HeavyHitterSketch,
    F: FnMut() -> S,
{
    if trace.is_empty() {
        return Err(Error::param(
            "trace",
            "throughput needs at least one packet",
        ));
    }
    if repeats == 0 {
        return Err(Error::param("repeats", "must be positive"));
    }
    let samples_mpps = rates(factory, trace, repeats);
    let (mean_mpps, std_mpps) = mean_std(&samples_mpps);
    let (calibration_mpps, _) = mean_std(&rates(|| NoopSketch, trace, repeats));
    Ok(ThroughputStats {
        samples_mpps,
        mean_mpps,
        std_mpps,
        calibration_mpps,
    })
}
