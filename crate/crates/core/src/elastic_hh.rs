//! Elastic sketch tailored for heavy hitters.
//!
//! Only the heavy part of Elastic is kept. Every bucket holds a few
//! `(flow, vote+)` cells and one `vote-` counter. An arriving packet either
//! increments its flow's cell, takes the first empty cell, or, when the
//! bucket is full, adds a negative vote. Once the negative votes exceed
//! `lambda` times the smallest cell, that cell is handed to the arriving flow
//! with the old count plus one, and the negative votes are cleared. Otherwise
//! the packet is dropped.
//!
//! ```
//! use hhsketch::{ElasticHh, FlowKey, HeavyHitterSketch};
//!
//! let mut sketch = ElasticHh::with_memory(300 * 1024, 1).unwrap();
//! let key = FlowKey::new(0x0a00_0001).unwrap();
//! for _ in 0..150 {
//!     sketch.insert(key);
//! }
//! assert_eq!(sketch.query(key), 150);
//! assert_eq!(sketch.report(100).len(), 1);
//! ```

use crate::buckets::{self, BucketArray, BucketMut};
use crate::error::Result;
use crate::hash::{HashFamily, Modulus};
use crate::sketch::{HeavyHitterReport, HeavyHitterSketch, Lambda};
use crate::trace::FlowKey;

pub const DEFAULT_CELLS_PER_BUCKET: usize = buckets::CACHE_LINE_CELLS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InsertOutcome {
    /// The flow was resident; its count went up by one.
    Hit,
    /// The flow took the first empty cell with count 1.
    EmptyInsert,
    /// The flow replaced the bucket minimum and inherited its count plus one.
    Replacement,
    /// Only the bucket's negative votes changed.
    Discard,
}

/// Running totals of insertion outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InsertTally {
    pub hits: u64,
    pub empty_inserts: u64,
    pub replacements: u64,
    pub discards: u64,
}

impl InsertTally {
    pub fn total(&self) -> u64 {
        self.hits + self.empty_inserts + self.replacements + self.discards
    }

    /// Packets that added a vote to some cell.
    pub fn accepted(&self) -> u64 {
        self.hits + self.empty_inserts + self.replacements
    }

    #[inline]
    fn record(&mut self, outcome: InsertOutcome) {
        let slot = match outcome {
            InsertOutcome::Hit => &mut self.hits,
            InsertOutcome::EmptyInsert => &mut self.empty_inserts,
            InsertOutcome::Replacement => &mut self.replacements,
            InsertOutcome::Discard => &mut self.discards,
        };
        *slot += 1;
    }
}

/// One cell of a bucket. `id` is `None` for an empty cell, in which case
/// `vote_plus` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HhCell {
    pub id: Option<FlowKey>,
    pub vote_plus: u32,
}

/// Read-only view of one bucket.
#[derive(Debug, Clone, Copy)]
pub struct HhBucket<'a> {
    keys: &'a [u32],
    counters: &'a [u32],
    vote_minus: u32,
}

impl<'a> HhBucket<'a> {
    pub fn vote_minus(&self) -> u32 {
        self.vote_minus
    }

    pub fn cell(&self, index: usize) -> HhCell {
        HhCell {
            id: FlowKey::new(self.keys[index]),
            vote_plus: self.counters[index],
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = HhCell> + 'a {
        let (keys, counters) = (self.keys, self.counters);
        keys.iter().zip(counters).map(|(&k, &c)| HhCell {
            id: FlowKey::new(k),
            vote_plus: c,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Clone)]
pub struct ElasticHh {
    buckets: BucketArray,
    lambda: Lambda,
    hash: HashFamily,
    range: Modulus,
    tally: InsertTally,
}

impl ElasticHh {
    /// Builds a sketch holding as many buckets as fit in `memory_bytes`.
    pub fn new(
        memory_bytes: usize,
        lambda: Lambda,
        cells_per_bucket: usize,
        seed: u64,
    ) -> Result<Self> {
        let buckets = BucketArray::with_budget(memory_bytes, cells_per_bucket)?;
        Ok(Self {
            range: Modulus::new(buckets.len()),
            buckets,
            lambda,
            hash: HashFamily::new(seed, 1)?,
            tally: InsertTally::default(),
        })
    }

    /// Seven cells per bucket and `lambda = 1`.
    pub fn with_memory(memory_bytes: usize, seed: u64) -> Result<Self> {
        Self::new(memory_bytes, Lambda::ONE, DEFAULT_CELLS_PER_BUCKET, seed)
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn cells_per_bucket(&self) -> usize {
        self.buckets.cells()
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn tally(&self) -> InsertTally {
        self.tally
    }

    /// Accounted memory of the bucket array.
    pub fn footprint_bytes(&self) -> usize {
        self.bucket_count() * buckets::bucket_footprint_bytes(self.cells_per_bucket())
    }

    #[inline]
    pub fn bucket_index(&self, key: FlowKey) -> usize {
        self.hash.index_in(0, key, &self.range)
    }

    pub fn bucket(&self, index: usize) -> HhBucket<'_> {
        if index >= self.bucket_count() {
            panic!(
                "bucket {index} out of range for {} buckets",
                self.bucket_count()
            );
        }
        let b = self.buckets.get(index);
        HhBucket {
            keys: b.keys,
            counters: b.counters,
            vote_minus: b.vote_minus,
        }
    }

    /// Sum of `vote+` over every cell.
    pub fn total_votes(&self) -> u64 {
        (0..self.bucket_count())
            .flat_map(|b| self.bucket(b).cells())
            .map(|c| u64::from(c.vote_plus))
            .sum()
    }

    #[inline]
    pub fn insert(&mut self, key: FlowKey) -> InsertOutcome {
        let index = self.bucket_index(key);
        let cell = self.buckets.probe(index, key.get());
        let outcome = insert_into(self.buckets.get_mut(index), cell, key.get(), self.lambda);
        self.tally.record(outcome);
        outcome
    }

    pub fn query(&self, key: FlowKey) -> u64 {
        let b = self.buckets.get(self.bucket_index(key));
        b.keys
            .iter()
            .position(|&k| k == key.get())
            .map_or(0, |i| u64::from(b.counters[i]))
    }

    /// Every resident flow with `vote+ >= threshold`, in bucket then cell order.
    pub fn report(&self, threshold: u64) -> HeavyHitterReport {
        let mut report = HeavyHitterReport::default();
        for index in 0..self.bucket_count() {
            for cell in self.bucket(index).cells() {
                match cell.id {
                    Some(id) if u64::from(cell.vote_plus) >= threshold => {
                        report.push(id, u64::from(cell.vote_plus))
                    }
                    Some(_) => {}
                    None => break,
                }
            }
        }
        report
    }
}

#[inline]
fn insert_into(
    bucket: BucketMut<'_>,
    cell: Option<usize>,
    key: u32,
    lambda: Lambda,
) -> InsertOutcome {
    let BucketMut {
        keys,
        counters,
        vote_minus,
    } = bucket;
    if let Some(i) = cell {
        return if keys[i] == key {
            counters[i] = counters[i].saturating_add(1);
            InsertOutcome::Hit
        } else {
            keys[i] = key;
            counters[i] = 1;
            InsertOutcome::EmptyInsert
        };
    }

    *vote_minus = vote_minus.saturating_add(1);
    let (min_index, min_votes) = buckets::min_cell(counters.iter().copied());
    if lambda.exceeded_by(*vote_minus, min_votes) {
        keys[min_index] = key;
        counters[min_index] = min_votes.saturating_add(1);
        *vote_minus = 0;
        InsertOutcome::Replacement
    } else {
        InsertOutcome::Discard
    }
}

impl HeavyHitterSketch for ElasticHh {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        ElasticHh::insert(self, key);
    }

    fn query(&self, key: FlowKey) -> u64 {
        ElasticHh::query(self, key)
    }

    fn report(&self, threshold: u64) -> HeavyHitterReport {
        ElasticHh::report(self, threshold)
    }

    fn name(&self) -> &'static str {
        "elastic-hh"
    }
}

impl std::fmt::Debug for ElasticHh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ElasticHh")
            .field("buckets", &self.bucket_count())
            .field("cells_per_bucket", &self.cells_per_bucket())
            .field("lambda", &self.lambda)
            .field("tally", &self.tally)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn key(v: u32) -> FlowKey {
        FlowKey::new(v).unwrap()
    }

    fn single_bucket() -> ElasticHh {
        ElasticHh::with_memory(64, 5).unwrap()
    }

    /// Fills the single bucket of `sketch` with keys 1..=7 at `sizes`.
    fn fill(sketch: &mut ElasticHh, sizes: [u32; 7]) {
        for (i, &n) in sizes.iter().enumerate() {
            for _ in 0..n {
                sketch.insert(key(i as u32 + 1));
            }
        }
    }

    /// Adds `n` negative votes without triggering a replacement; each noise
    /// key is used once so it never becomes resident.
    fn add_negative_votes(sketch: &mut ElasticHh, n: u32) {
        for i in 0..n {
            assert_eq!(sketch.insert(key(1_000_000 + i)), InsertOutcome::Discard);
        }
    }

    #[test]
    fn construction_sizes() {
        assert_eq!(
            ElasticHh::with_memory(300 * 1024, 0)
                .unwrap()
                .bucket_count(),
            4800
        );
        assert_eq!(ElasticHh::with_memory(64, 0).unwrap().bucket_count(), 1);
        assert!(matches!(
            ElasticHh::with_memory(63, 0),
            Err(Error::MemoryTooSmall { .. })
        ));
        let s = ElasticHh::new(360, Lambda::ONE, 4, 0).unwrap();
        assert_eq!(s.bucket_count(), 10);
        assert_eq!(s.footprint_bytes(), 360);
    }

    #[test]
    fn fresh_sketch_is_empty() {
        let s = ElasticHh::with_memory(4096, 1).unwrap();
        for b in 0..s.bucket_count() {
            let bucket = s.bucket(b);
            assert_eq!(bucket.vote_minus(), 0);
            assert!(bucket.cells().all(|c| c.id.is_none() && c.vote_plus == 0));
        }
        assert!(s.report(1).is_empty());
        assert_eq!(s.query(key(3)), 0);
    }

    #[test]
    fn first_packet_takes_first_empty_cell() {
        let mut s = single_bucket();
        assert_eq!(s.insert(key(1)), InsertOutcome::EmptyInsert);
        assert_eq!(
            s.bucket(0).cell(0),
            HhCell {
                id: Some(key(1)),
                vote_plus: 1
            }
        );
        assert_eq!(s.insert(key(2)), InsertOutcome::EmptyInsert);
        assert_eq!(s.bucket(0).cell(1).id, Some(key(2)));
    }

    #[test]
    fn resident_flow_is_incremented() {
        let mut s = single_bucket();
        for _ in 0..5 {
            s.insert(key(9));
        }
        assert_eq!(s.insert(key(9)), InsertOutcome::Hit);
        assert_eq!(s.query(key(9)), 6);
    }

    #[test]
    fn replacement_inherits_minimum_plus_one() {
        // Smallest resident is flow 6 with 11 packets; vote- stands at 11.
        let mut s = single_bucket();
        fill(&mut s, [20, 30, 25, 40, 18, 11, 50]);
        add_negative_votes(&mut s, 11);
        assert_eq!(s.bucket(0).vote_minus(), 11);

        let f8 = key(8);
        assert_eq!(s.insert(f8), InsertOutcome::Replacement);
        let bucket = s.bucket(0);
        assert_eq!(
            bucket.cell(5),
            HhCell {
                id: Some(f8),
                vote_plus: 12
            }
        );
        assert_eq!(bucket.vote_minus(), 0);
        assert_eq!(s.query(f8), 12);
        assert_eq!(s.query(key(6)), 0);
    }

    #[test]
    fn equal_votes_do_not_replace() {
        // Smallest resident is flow 4 with 7 packets; vote- stands at 6.
        let mut s = single_bucket();
        fill(&mut s, [9, 12, 30, 7, 8, 10, 15]);
        add_negative_votes(&mut s, 6);
        let before: Vec<_> = s.bucket(0).cells().collect();

        assert_eq!(s.insert(key(9)), InsertOutcome::Discard);
        let bucket = s.bucket(0);
        assert_eq!(bucket.vote_minus(), 7);
        assert_eq!(bucket.cells().collect::<Vec<_>>(), before);
        assert_eq!(s.query(key(9)), 0);
    }

    #[test]
    fn minimum_ties_use_lowest_index() {
        let mut s = single_bucket();
        fill(&mut s, [5, 3, 3, 9, 9, 9, 9]);
        add_negative_votes(&mut s, 3);
        assert_eq!(s.insert(key(77)), InsertOutcome::Replacement);
        assert_eq!(s.bucket(0).cell(1).id, Some(key(77)));
        assert_eq!(s.bucket(0).cell(2).id, Some(key(3)));
    }

    #[test]
    fn fractional_lambda_replaces_earlier() {
        let mut s = ElasticHh::new(64, Lambda::new(1, 4).unwrap(), 7, 0).unwrap();
        fill(&mut s, [8; 7]);
        // 1 > 2, 2 > 2 are false; 3 > 2 replaces.
        assert_eq!(s.insert(key(100)), InsertOutcome::Discard);
        assert_eq!(s.insert(key(101)), InsertOutcome::Discard);
        assert_eq!(s.insert(key(102)), InsertOutcome::Replacement);
        assert_eq!(s.query(key(102)), 9);
    }

    #[test]
    fn vote_minus_saturates() {
        let mut s = ElasticHh::new(64, Lambda::from_integer(u32::MAX), 7, 0).unwrap();
        fill(&mut s, [3; 7]);
        let bucket = s.buckets.get_mut(0);
        *bucket.vote_minus = u32::MAX - 1;
        s.insert(key(500));
        s.insert(key(501));
        assert_eq!(s.bucket(0).vote_minus(), u32::MAX);
    }

    #[test]
    fn report_uses_inclusive_threshold() {
        let mut s = ElasticHh::with_memory(4096, 2).unwrap();
        for _ in 0..10 {
            s.insert(key(42));
        }
        s.insert(key(43));
        let report = s.report(10);
        assert_eq!(report.len(), 1);
        assert_eq!(report.estimate(key(42)), Some(10));
        assert!(s.report(11).is_empty());
    }

    #[test]
    fn size_one_flow_is_evicted_after_min_plus_one_misses() {
        let mut s = single_bucket();
        fill(&mut s, [10, 10, 10, 10, 10, 10, 1]);
        let v = 1;
        let holder = s.bucket(0).cell(6);
        assert_eq!(
            holder,
            HhCell {
                id: Some(key(7)),
                vote_plus: v
            }
        );
        for i in 0..=v {
            s.insert(key(2_000 + i));
        }
        assert_ne!(s.bucket(0).cell(6).id, Some(key(7)));
    }

    fn arb_trace() -> impl Strategy<Value = Vec<u32>> {
        prop::collection::vec(1u32..200, 0..3000)
    }

    proptest! {
        #[test]
        fn size_one_newcomer_is_evicted(min in 1u32..20, offsets in prop::array::uniform6(2u32..40)) {
            // Cell 6 is the unique minimum; every other cell exceeds min + 1.
            let mut s = single_bucket();
            let mut sizes = [0u32; 7];
            for (size, off) in sizes.iter_mut().zip(offsets) {
                *size = min + off;
            }
            sizes[6] = min;
            fill(&mut s, sizes);
            add_negative_votes(&mut s, min);
            let newcomer = key(20_000);
            prop_assert_eq!(s.insert(newcomer), InsertOutcome::Replacement);
            let v = s.query(newcomer) as u32;
            prop_assert_eq!(v, min + 1);
            prop_assert_eq!(buckets::min_cell(s.bucket(0).cells().map(|c| c.vote_plus)), (6, v));
            for j in 0..v {
                s.insert(key(40_000 + j));
                prop_assert_eq!(s.bucket(0).cell(6).id, Some(newcomer));
            }
            s.insert(key(40_000 + v));
            prop_assert_ne!(s.bucket(0).cell(6).id, Some(newcomer));
        }

        #[test]
        fn conservation_holds(trace in arb_trace(), memory in 64usize..2048, seed: u64) {
            let mut s = ElasticHh::with_memory(memory, seed).unwrap();
            let mut replaced_buckets_ok = true;
            for &v in &trace {
                let k = key(v);
                if s.insert(k) == InsertOutcome::Replacement {
                    replaced_buckets_ok &= s.bucket(s.bucket_index(k)).vote_minus() == 0;
                }
            }
            let tally = s.tally();
            prop_assert!(replaced_buckets_ok);
            prop_assert_eq!(tally.total(), trace.len() as u64);
            prop_assert_eq!(s.total_votes(), trace.len() as u64 - tally.discards);
        }

        #[test]
        fn only_the_hashed_bucket_changes(trace in arb_trace(), seed: u64) {
            let mut s = ElasticHh::with_memory(64 * 16, seed).unwrap();
            for &v in &trace {
                let before = s.buckets.clone();
                let k = key(v);
                s.buckets.take_accesses();
                s.insert(k);
                let target = s.bucket_index(k);
                let touched = s.buckets.take_accesses();
                prop_assert!(!touched.is_empty() && touched.iter().all(|&b| b == target));
                for b in 0..s.bucket_count() {
                    if b != target {
                        let (x, y) = (before.get(b), s.buckets.get(b));
                        prop_assert!(x.keys == y.keys && x.counters == y.counters && x.vote_minus == y.vote_minus);
                    }
                }
            }
        }

        #[test]
        fn cells_stay_consistent(trace in arb_trace(), seed: u64) {
            let mut s = ElasticHh::with_memory(64 * 4, seed).unwrap();
            for &v in &trace {
                let k = key(v);
                let b = s.bucket_index(k);
                let before: Vec<_> = s.bucket(b).cells().collect();
                s.insert(k);
                let after: Vec<_> = s.bucket(b).cells().collect();
                for (x, y) in before.iter().zip(&after) {
                    // counts only drop when the resident changes
                    prop_assert!(y.vote_plus >= x.vote_plus || y.id != x.id);
                    prop_assert_eq!(y.id.is_none(), y.vote_plus == 0);
                }
                let ids: Vec<_> = after.iter().filter_map(|c| c.id).collect();
                let mut dedup = ids.clone();
                dedup.sort();
                dedup.dedup();
                prop_assert_eq!(ids.len(), dedup.len());
            }
        }

        #[test]
        fn single_flow_is_exact(count in 1usize..5000, memory in 64usize..100_000, seed: u64) {
            let mut s = ElasticHh::with_memory(memory, seed).unwrap();
            for _ in 0..count {
                s.insert(key(0xC0A8_0001));
            }
            prop_assert_eq!(s.query(key(0xC0A8_0001)), count as u64);
        }

        #[test]
        fn exact_when_every_flow_fits(trace in prop::collection::vec(1u32..=7, 1..2000), seed: u64) {
            // Seven flows into a single seven-cell bucket never collide.
            let mut s = ElasticHh::with_memory(64, seed).unwrap();
            let mut truth: HashMap<u32, u64> = HashMap::new();
            for &v in &trace {
                s.insert(key(v));
                *truth.entry(v).or_default() += 1;
            }
            for (&v, &n) in &truth {
                prop_assert_eq!(s.query(key(v)), n);
            }
            prop_assert_eq!(s.report(1).len(), truth.len());
        }
    }
}
