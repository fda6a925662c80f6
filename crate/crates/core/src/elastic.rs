//! Software Elastic sketch: a voting heavy part backed by a light part of
//! 8-bit counters.
//!
//! Heavy cells carry an eviction flag in the top bit of their counter word.
//! The flag is set on the cell a flow receives when it evicts the bucket
//! minimum, because packets of that flow may already sit in the light part.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::buckets::{self, BucketArray, BucketMut};
use crate::error::{Error, Result};
use crate::hash::{HashFamily, Modulus};
use crate::sketch::{HeavyHitterReport, HeavyHitterSketch, Lambda};
use crate::trace::FlowKey;

const FLAG_BIT: u32 = 1 << 31;
const VOTE_MASK: u32 = !FLAG_BIT;
const HEAVY_ROW: usize = 0;
const LIGHT_ROW: usize = 1;

pub const DEFAULT_LAMBDA: Lambda = Lambda::EIGHT;

/// Split of the memory budget between heavy and light parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HeavyLightRatio {
    pub heavy: u32,
    pub light: u32,
}

impl HeavyLightRatio {
    pub fn new(heavy: u32, light: u32) -> Result<Self> {
        if heavy == 0 || light == 0 {
            return Err(Error::param(
                "heavy_light_ratio",
                "both parts must be positive",
            ));
        }
        Ok(Self { heavy, light })
    }

    /// Bytes of `memory_bytes` given to the heavy part (rounded down).
    pub fn heavy_bytes(self, memory_bytes: usize) -> usize {
        (memory_bytes as u128 * u128::from(self.heavy)
            / (u128::from(self.heavy) + u128::from(self.light))) as usize
    }
}

impl Default for HeavyLightRatio {
    fn default() -> Self {
        Self { heavy: 3, light: 1 }
    }
}

impl fmt::Display for HeavyLightRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.heavy, self.light)
    }
}

impl FromStr for HeavyLightRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("heavy_light_ratio", format!("`{s}` is not of the form H:L"));
        let (h, l) = s.split_once(':').ok_or_else(bad)?;
        HeavyLightRatio::new(
            h.trim().parse().map_err(|_| bad())?,
            l.trim().parse().map_err(|_| bad())?,
        )
    }
}

impl TryFrom<String> for HeavyLightRatio {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<HeavyLightRatio> for String {
    fn from(r: HeavyLightRatio) -> String {
        r.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StdInsertOutcome {
    Hit,
    EmptyInsert,
    /// The packet was counted in the light part.
    ToLight,
    /// The bucket minimum moved to the light part and the flow took its cell.
    Eviction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StdCell {
    pub id: Option<FlowKey>,
    pub vote_plus: u32,
    pub flag: bool,
}

#[derive(Clone)]
pub struct ElasticStd {
    heavy: BucketArray,
    light: Vec<u8>,
    lambda: Lambda,
    hash: HashFamily,
    heavy_range: Modulus,
    light_range: Modulus,
    /// Votes dropped because a light counter was already saturated.
    light_overflow: u64,
}

impl ElasticStd {
    pub fn new(
        memory_bytes: usize,
        lambda: Lambda,
        cells_per_bucket: usize,
        ratio: HeavyLightRatio,
        seed: u64,
    ) -> Result<Self> {
        let heavy_bytes = ratio.heavy_bytes(memory_bytes);
        let heavy =
            BucketArray::with_budget(heavy_bytes, cells_per_bucket).map_err(|e| match e {
                Error::MemoryTooSmall { message, .. } => Error::MemoryTooSmall {
                    memory_bytes,
                    message: format!("heavy part gets {heavy_bytes} bytes; {message}"),
                },
                other => other,
            })?;
        let light_counters = memory_bytes - heavy_bytes;
        if light_counters == 0 {
            return Err(Error::MemoryTooSmall {
                memory_bytes,
                message: "light part gets no counters".into(),
            });
        }
        Ok(Self {
            heavy_range: Modulus::new(heavy.len()),
            light_range: Modulus::new(light_counters),
            heavy,
            light: vec![0; light_counters],
            lambda,
            hash: HashFamily::new(seed, 2)?,
            light_overflow: 0,
        })
    }

    /// `lambda = 8`, seven cells per bucket, 3:1 split.
    pub fn with_memory(memory_bytes: usize, seed: u64) -> Result<Self> {
        Self::new(
            memory_bytes,
            DEFAULT_LAMBDA,
            buckets::CACHE_LINE_CELLS,
            HeavyLightRatio::default(),
            seed,
        )
    }

    pub fn bucket_count(&self) -> usize {
        self.heavy.len()
    }

    pub fn cells_per_bucket(&self) -> usize {
        self.heavy.cells()
    }

    pub fn light_counters(&self) -> usize {
        self.light.len()
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn light_overflow(&self) -> u64 {
        self.light_overflow
    }

    #[inline]
    pub fn bucket_index(&self, key: FlowKey) -> usize {
        self.hash.index_in(HEAVY_ROW, key, &self.heavy_range)
    }

    #[inline]
    pub fn light_index(&self, key: FlowKey) -> usize {
        self.hash.index_in(LIGHT_ROW, key, &self.light_range)
    }

    pub fn light_value(&self, key: FlowKey) -> u8 {
        self.light[self.light_index(key)]
    }

    pub fn vote_minus(&self, bucket: usize) -> u32 {
        self.heavy.get(bucket).vote_minus
    }

    pub fn cell(&self, bucket: usize, index: usize) -> StdCell {
        let b = self.heavy.get(bucket);
        decode_cell(b.keys[index], b.counters[index])
    }

    pub fn cells(&self, bucket: usize) -> impl Iterator<Item = StdCell> + '_ {
        let b = self.heavy.get(bucket);
        b.keys
            .iter()
            .zip(b.counters)
            .map(|(&k, &c)| decode_cell(k, c))
    }

    pub fn heavy_votes(&self) -> u64 {
        (0..self.bucket_count())
            .flat_map(|b| self.cells(b))
            .map(|c| u64::from(c.vote_plus))
            .sum()
    }

    pub fn light_votes(&self) -> u64 {
        self.light.iter().map(|&c| u64::from(c)).sum()
    }

    #[inline]
    pub fn insert(&mut self, key: FlowKey) -> StdInsertOutcome {
        let index = self.bucket_index(key);
        let lambda = self.lambda;
        let cell = self.heavy.probe(index, key.get());
        let BucketMut {
            keys,
            counters,
            vote_minus,
        } = self.heavy.get_mut(index);

        if let Some(i) = cell {
            return if keys[i] == key.get() {
                if counters[i] & VOTE_MASK != VOTE_MASK {
                    counters[i] += 1;
                }
                StdInsertOutcome::Hit
            } else {
                keys[i] = key.get();
                counters[i] = 1;
                StdInsertOutcome::EmptyInsert
            };
        }

        *vote_minus = vote_minus.saturating_add(1);
        let (min_index, min_votes) = buckets::min_cell(counters.iter().map(|&c| c & VOTE_MASK));
        if lambda.reached_by(*vote_minus, min_votes) {
            let evicted = FlowKey::new(keys[min_index]).expect("full bucket has no empty cell");
            keys[min_index] = key.get();
            counters[min_index] = FLAG_BIT | 1;
            *vote_minus = 0;
            self.add_light(evicted, min_votes);
            StdInsertOutcome::Eviction
        } else {
            self.add_light(key, 1);
            StdInsertOutcome::ToLight
        }
    }

    #[inline]
    fn add_light(&mut self, key: FlowKey, votes: u32) {
        let i = self.light_index(key);
        let counter = &mut self.light[i];
        let room = u32::from(u8::MAX - *counter);
        let added = votes.min(room);
        *counter += added as u8;
        self.light_overflow += u64::from(votes - added);
    }

    /// Heavy value, plus the light counter when the cell is flagged; the light
    /// counter alone when the flow is not in the heavy part.
    pub fn query(&self, key: FlowKey) -> u64 {
        let b = self.heavy.get(self.bucket_index(key));
        let light = || u64::from(self.light_value(key));
        match b.keys.iter().position(|&k| k == key.get()) {
            Some(i) => {
                let cell = decode_cell(b.keys[i], b.counters[i]);
                u64::from(cell.vote_plus) + if cell.flag { light() } else { 0 }
            }
            None => light(),
        }
    }

    pub fn report(&self, threshold: u64) -> HeavyHitterReport {
        let mut report = HeavyHitterReport::default();
        for b in 0..self.bucket_count() {
            for cell in self.cells(b) {
                let Some(id) = cell.id else { break };
                let estimate = self.query(id);
                if estimate >= threshold {
                    report.push(id, estimate);
                }
            }
        }
        report
    }
}

#[inline]
fn decode_cell(key: u32, counter: u32) -> StdCell {
    StdCell {
        id: FlowKey::new(key),
        vote_plus: counter & VOTE_MASK,
        flag: counter & FLAG_BIT != 0,
    }
}

impl HeavyHitterSketch for ElasticStd {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        ElasticStd::insert(self, key);
    }

    fn query(&self, key: FlowKey) -> u64 {
        ElasticStd::query(self, key)
    }

    fn report(&self, threshold: u64) -> HeavyHitterReport {
        ElasticStd::report(self, threshold)
    }

    fn name(&self) -> &'static str {
        "elastic"
    }
}

impl fmt::Debug for ElasticStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ElasticStd")
            .field("buckets", &self.bucket_count())
            .field("light_counters", &self.light_counters())
            .field("lambda", &self.lambda)
            .finish()
    }
}
