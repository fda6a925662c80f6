//! Heavy-hitter detection over packet streams.
//!
//! The centerpiece is [`ElasticHh`], an Elastic sketch cut down to its heavy
//! part with a more eager eviction rule: a full bucket hands its smallest
//! cell to a newcomer as soon as the bucket's negative votes exceed that
//! cell's count, and the newcomer inherits the count plus one. Standard
//! [`ElasticStd`], [`SpaceSaving`], [`CmHeap`] and [`CountHeap`] are
//! provided for comparison, all behind [`HeavyHitterSketch`].
//!
//! [`metrics`] holds the exact-count oracle and the accuracy/throughput
//! metrics; [`bench`] runs whole experiments and backs the `hhbench` binary.

pub mod baselines;
pub mod bench;
mod buckets;
pub mod elastic;
pub mod elastic_hh;
pub mod error;
pub mod hash;
pub mod metrics;
pub mod sketch;
pub mod trace;

pub use baselines::{CmHeap, CountHeap, SketchHeapConfig, SpaceSaving};
pub use buckets::bucket_footprint_bytes;
pub use elastic::{ElasticStd, HeavyLightRatio, StdInsertOutcome};
pub use elastic_hh::{ElasticHh, InsertOutcome, InsertTally};
pub use error::{Error, Result};
pub use hash::HashFamily;
pub use metrics::Oracle;
pub use sketch::{HeavyHitterReport, HeavyHitterSketch, Lambda, NoopSketch, ReportEntry};
pub use trace::{generate_zipf, load_trace, FlowKey, Trace, TraceFormat, ZipfSpec};
