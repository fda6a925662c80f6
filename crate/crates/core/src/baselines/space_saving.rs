use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::sketch::{HeavyHitterReport, HeavyHitterSketch};
use crate::trace::FlowKey;

/// Accounted bytes per monitored entry: key, count and error, 4 bytes each.
pub const SS_ENTRY_BYTES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SsEntry {
    pub key: FlowKey,
    pub count: u64,
    /// Count inherited from the entry this one replaced.
    pub error: u64,
}

/// Space-Saving over `k` counters.
///
/// Entries are kept in a map for lookup and an ordered set of
/// `(count, key)` for the minimum, giving O(log k) updates. Among equal
/// minimum counts the smallest key is replaced.
#[derive(Debug, Clone)]
pub struct SpaceSaving {
    capacity: usize,
    entries: FxHashMap<FlowKey, (u64, u64)>,
    by_count: BTreeSet<(u64, FlowKey)>,
    total: u64,
}

impl SpaceSaving {
    pub fn with_capacity(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be positive"));
        }
        Ok(Self {
            capacity: k,
            entries: FxHashMap::default(),
            by_count: BTreeSet::new(),
            total: 0,
        })
    }

    /// `k = memory_bytes / 12`.
    pub fn with_memory(memory_bytes: usize) -> Result<Self> {
        let k = memory_bytes / SS_ENTRY_BYTES;
        if k == 0 {
            return Err(Error::MemoryTooSmall {
                memory_bytes,
                message: format!("one entry needs {SS_ENTRY_BYTES} bytes"),
            });
        }
        Self::with_capacity(k)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Smallest counter, counting unused slots as 0.
    pub fn min_count(&self) -> u64 {
        if self.entries.len() < self.capacity {
            return 0;
        }
        self.by_count.first().map_or(0, |&(c, _)| c)
    }

    pub fn entry(&self, key: FlowKey) -> Option<SsEntry> {
        self.entries
            .get(&key)
            .map(|&(count, error)| SsEntry { key, count, error })
    }

    /// Entries in ascending `(count, key)` order.
    pub fn entries(&self) -> impl Iterator<Item = SsEntry> + '_ {
        self.by_count.iter().map(|&(count, key)| SsEntry {
            key,
            count,
            error: self.entries[&key].1,
        })
    }

    pub fn insert(&mut self, key: FlowKey) {
        self.total += 1;
        if let Some((count, _)) = self.entries.get_mut(&key) {
            self.by_count.remove(&(*count, key));
            *count += 1;
            self.by_count.insert((*count, key));
            return;
        }
        if self.entries.len() < self.capacity {
            self.entries.insert(key, (1, 0));
            self.by_count.insert((1, key));
            return;
        }
        let (min_count, victim) = self.by_count.pop_first().expect("full table is non-empty");
        self.entries.remove(&victim);
        self.entries.insert(key, (min_count + 1, min_count));
        self.by_count.insert((min_count + 1, key));
    }

    pub fn query(&self, key: FlowKey) -> u64 {
        self.entries.get(&key).map_or(0, |&(count, _)| count)
    }

    /// Entries with `count >= threshold`, largest first.
    pub fn report(&self, threshold: u64) -> HeavyHitterReport {
        self.by_count
            .range((threshold, FlowKey::new(1).unwrap())..)
            .rev()
            .map(|&(count, key)| (key, count))
            .collect()
    }
}

impl HeavyHitterSketch for SpaceSaving {
    #[inline]
    fn insert(&mut self, key: FlowKey) {
        SpaceSaving::insert(self, key)
    }

    fn query(&self, key: FlowKey) -> u64 {
        SpaceSaving::query(self, key)
    }

    fn report(&self, threshold: u64) -> HeavyHitterReport {
        SpaceSaving::report(self, threshold)
    }

    fn name(&self) -> &'static str {
        "ss"
    }
}
