use rand::seq::SliceRandom;

use crate::rng::StreamRng;

/// A labelled (query, item) pair by index: `task` indexes the dataset list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairRef {
    pub task: usize,
    pub example: usize,
    pub item: usize,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub pairs: Vec<PairRef>,
    pub pos_count: usize,
    pub neg_count: usize,
}

/// Number of positives in a batch of `batch_size` at `pos_ratio`.
pub fn positive_count(batch_size: usize, pos_ratio: f64) -> usize {
    ((pos_ratio * batch_size as f64).round() as usize).min(batch_size)
}

/// Draws ratio-controlled batches without replacement from two pools.
/// Pools are reshuffled by [`BatchSampler::start_epoch`]; an epoch ends
/// when a pool can no longer supply its share.
#[derive(Debug)]
pub struct BatchSampler {
    positives: Vec<PairRef>,
    negatives: Vec<PairRef>,
    batch_size: usize,
    pos_ratio: f64,
    next_pos: usize,
    next_neg: usize,
    done: bool,
    rng: StreamRng,
}

impl BatchSampler {
    pub fn new(
        positives: Vec<PairRef>,
        negatives: Vec<PairRef>,
        batch_size: usize,
        pos_ratio: f64,
        rng: StreamRng,
    ) -> Self {
        assert!(batch_size >= 1, "batch size must be positive");
        assert!((0.0..=1.0).contains(&pos_ratio), "pos_ratio outside [0, 1]");
        let mut s = BatchSampler {
            positives,
            negatives,
            batch_size,
            pos_ratio,
            next_pos: 0,
            next_neg: 0,
            done: true,
            rng,
        };
        s.start_epoch();
        s
    }

    pub fn start_epoch(&mut self) {
        self.positives.shuffle(&mut self.rng);
        self.negatives.shuffle(&mut self.rng);
        self.next_pos = 0;
        self.next_neg = 0;
        self.done = false;
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// The largest batch not exceeding the configured size whose split
    /// under the rounding rule fits the remaining pools.
    fn fitting_size(&self, pos_left: usize, neg_left: usize) -> usize {
        (1..=self.batch_size)
            .rev()
            .find(|&b| {
                let p = positive_count(b, self.pos_ratio);
                p <= pos_left && b - p <= neg_left
            })
            .unwrap_or(0)
    }
}

impl Iterator for BatchSampler {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.done {
            return None;
        }
        let pos_left = self.positives.len() - self.next_pos;
        let neg_left = self.negatives.len() - self.next_neg;
        let size = self.fitting_size(pos_left, neg_left);
        if size < self.batch_size {
            self.done = true;
        }
        if size == 0 {
            return None;
        }
        let pos_count = positive_count(size, self.pos_ratio);
        let neg_count = size - pos_count;
        let mut pairs = Vec::with_capacity(size);
        pairs.extend_from_slice(&self.positives[self.next_pos..self.next_pos + pos_count]);
        pairs.extend_from_slice(&self.negatives[self.next_neg..self.next_neg + neg_count]);
        self.next_pos += pos_count;
        self.next_neg += neg_count;
        pairs.shuffle(&mut self.rng);
        Some(Batch { pairs, pos_count, neg_count })
    }
}
