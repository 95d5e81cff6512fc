//! FIFO queue of negative keys, decoupling negative count from batch size.

use std::collections::VecDeque;

use crate::numerics::EmbeddingVec;

/// Fixed-capacity FIFO of stored mean-key vectors. Pushing past capacity
/// evicts exactly enough of the oldest entries to stay at capacity, so once
/// warm the size is always the capacity and eviction count equals insertion
/// count.
#[derive(Debug, Clone)]
pub struct NegativeQueue {
    buffer: VecDeque<EmbeddingVec>,
    capacity: usize,
}

impl NegativeQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            buffer: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Enqueues a batch in order, evicting the oldest entries as needed.
    pub fn push_batch<I: IntoIterator<Item = EmbeddingVec>>(&mut self, means: I) {
        for mean in means {
            if self.buffer.len() == self.capacity {
                self.buffer.pop_front();
            }
            self.buffer.push_back(mean);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingVec> {
        self.buffer.iter()
    }

    pub fn to_vec(&self) -> Vec<EmbeddingVec> {
        self.buffer.iter().cloned().collect()
    }

    pub fn from_parts(capacity: usize, entries: Vec<EmbeddingVec>) -> Self {
        let mut q = Self::new(capacity);
        q.push_batch(entries);
        q
    }
}
