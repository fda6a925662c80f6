//! Bounded min-heap of `(estimate, key)` with a key index for in-place updates.

use rustc_hash::FxHashMap;

use crate::trace::FlowKey;

#[derive(Debug, Clone)]
pub(crate) struct TopKHeap {
    nodes: Vec<(u64, FlowKey)>,
    position: FxHashMap<FlowKey, usize>,
    capacity: usize,
}

impl TopKHeap {
    pub fn new(capacity: usize) -> Self {
        Self {
            nodes: Vec::with_capacity(capacity),
            position: FxHashMap::default(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_full(&self) -> bool {
        self.nodes.len() >= self.capacity
    }

    pub fn min(&self) -> Option<(u64, FlowKey)> {
        self.nodes.first().copied()
    }

    pub fn contains(&self, key: FlowKey) -> bool {
        self.position.contains_key(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, FlowKey)> + '_ {
        self.nodes.iter().copied()
    }

    /// Admits `key` with `estimate`: updates it when present, appends while
    /// there is room, otherwise replaces the minimum if `estimate` is larger.
    pub fn offer(&mut self, key: FlowKey, estimate: u64) {
        if let Some(&i) = self.position.get(&key) {
            let old = self.nodes[i].0;
            self.nodes[i].0 = estimate;
            if estimate >= old {
                self.sift_down(i);
            } else {
                self.sift_up(i);
            }
        } else if !self.is_full() {
            self.nodes.push((estimate, key));
            let i = self.nodes.len() - 1;
            self.position.insert(key, i);
            self.sift_up(i);
        } else if self.capacity > 0 && estimate > self.nodes[0].0 {
            let (_, evicted) = self.nodes[0];
            self.position.remove(&evicted);
            self.nodes[0] = (estimate, key);
            self.position.insert(key, 0);
            self.sift_down(0);
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.nodes.swap(a, b);
        self.position.insert(self.nodes[a].1, a);
        self.position.insert(self.nodes[b].1, b);
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if self.nodes[i] >= self.nodes[parent] {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.nodes.len();
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut smallest = i;
            if l < n && self.nodes[l] < self.nodes[smallest] {
                smallest = l;
            }
            if r < n && self.nodes[r] < self.nodes[smallest] {
                smallest = r;
            }
            if smallest == i {
                break;
            }
            self.swap(i, smallest);
            i = smallest;
        }
    }

    #[cfg(test)]
    fn check(&self) -> bool {
        (1..self.nodes.len()).all(|i| self.nodes[(i - 1) / 2] <= self.nodes[i])
            && self.position.len() == self.nodes.len()
            && self.position.iter().all(|(k, &i)| self.nodes[i].1 == *k)
    }
}
