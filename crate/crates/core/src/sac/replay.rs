use crate::rng::RngStream;

use super::STATE_DIM;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: [f64; STATE_DIM],
    /// Transmit power, W.
    pub action: f64,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<T = Transition> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T: Clone> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> Option<&T> {
        self.items.get(idx)
    }

    /// Uniform sample with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut RngStream) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.index(self.items.len())).collect()
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Vec<T> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| self.items[i].clone())
            .collect()
    }
}
