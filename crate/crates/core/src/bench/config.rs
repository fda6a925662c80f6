use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elastic::{self, HeavyLightRatio};
use crate::error::{Error, Result};
use crate::metrics::{CdfSamples, QuerySet, DEFAULT_REPEATS};
use crate::sketch::Lambda;
use crate::trace::{TraceFormat, ZipfSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    ElasticHh,
    Elastic,
    #[serde(rename = "ss")]
    SpaceSaving,
    CmHeap,
    CountHeap,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ElasticHh,
        Algorithm::Elastic,
        Algorithm::SpaceSaving,
        Algorithm::CmHeap,
        Algorithm::CountHeap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ElasticHh => "elastic-hh",
            Algorithm::Elastic => "elastic",
            Algorithm::SpaceSaving => "ss",
            Algorithm::CmHeap => "cm-heap",
            Algorithm::CountHeap => "count-heap",
        }
    }

    /// Eviction parameter used when the configuration leaves it unset.
    pub fn default_lambda(self) -> Option<Lambda> {
        match self {
            Algorithm::ElasticHh => Some(Lambda::ONE),
            Algorithm::Elastic => Some(elastic::DEFAULT_LAMBDA),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                Error::param(
                    "algo",
                    format!("unknown algorithm `{s}` (expected elastic-hh, elastic, ss, cm-heap or count-heap)"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceSource {
    File { path: PathBuf, format: TraceFormat },
    Zipf(ZipfSpec),
}

impl Default for TraceSource {
    fn default() -> Self {
        TraceSource::Zipf(ZipfSpec::default())
    }
}

/// Everything needed to reproduce one run. Defaults are the reference
/// setup: 300 KB, a threshold of 0.01% of the packets, seven cells per
/// bucket, 3:1 heavy:light split, three rows and a 4096-node heap, 100
/// throughput repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub algo: Algorithm,
    pub memory_kb: usize,
    pub threshold_frac: f64,
    /// `None` picks the algorithm default (1 for elastic-hh, 8 for elastic).
    pub lambda: Option<Lambda>,
    pub cells_per_bucket: usize,
    pub heavy_light_ratio: HeavyLightRatio,
    pub heap_capacity: usize,
    pub rows: usize,
    pub heap_in_budget: bool,
    pub trace: TraceSource,
    pub seed: u64,
    /// Throughput passes; 0 skips throughput.
    pub repeats: usize,
    pub query_set: QuerySet,
    pub cdf_samples: CdfSamples,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algo: Algorithm::ElasticHh,
            memory_kb: 300,
            threshold_frac: 0.0001,
            lambda: None,
            cells_per_bucket: crate::elastic_hh::DEFAULT_CELLS_PER_BUCKET,
            heavy_light_ratio: HeavyLightRatio::default(),
            heap_capacity: 4096,
            rows: 3,
            heap_in_budget: true,
            trace: TraceSource::default(),
            seed: 1,
            repeats: DEFAULT_REPEATS,
            query_set: QuerySet::default(),
            cdf_samples: CdfSamples::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn memory_bytes(&self) -> usize {
        self.memory_kb * 1024
    }

    pub fn effective_lambda(&self) -> Option<Lambda> {
        self.algo.default_lambda().map(|d| self.lambda.unwrap_or(d))
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory_kb == 0 {
            return Err(Error::Config("memory_kb must be positive".into()));
        }
        if !(self.threshold_frac > 0.0 && self.threshold_frac <= 1.0) {
            return Err(Error::Config(format!(
                "threshold_frac must be in (0, 1], got {}",
                self.threshold_frac
            )));
        }
        if self.cells_per_bucket == 0 || self.rows == 0 {
            return Err(Error::Config(
                "cells_per_bucket and rows must be positive".into(),
            ));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the JSON encoding.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json)[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}
