//! Fixed-capacity experience replay.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::encoder::Features;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Arc<Features>,
    pub a: usize,
    pub r: f64,
    /// Elimination signal observed for `a` at `s`.
    pub e: f64,
    pub s_next: Arc<Features>,
    /// True terminal; horizon cut-offs still bootstrap.
    pub done: bool,
}

/// Ring buffer; once full, each push overwrites the oldest transition.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    pushed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayMeta {
    pub capacity: usize,
    pub len: usize,
    pub pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            pushed: 0,
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

    /// Total pushes, including overwritten ones.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn meta(&self) -> ReplayMeta {
        ReplayMeta {
            capacity: self.capacity,
            len: self.len(),
            pushed: self.pushed,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Slot `i` in storage order (not insertion order once wrapped).
    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::index;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        let f = Arc::new(Features::from_dense(&[1.0]));
        Transition {
            s: f.clone(),
            a: 0,
            r,
            e: 0.0,
            s_next: f,
            done: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rs: Vec<f64> = b.iter().map(|x| x.r).collect();
        rs.sort_by(f64::total_cmp);
        assert_eq!(rs, vec![2.0, 3.0, 4.0]);
        assert_eq!(b.pushed(), 5);
    }

    #[test]
    fn minibatch_has_no_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let mut v = index::sample(&mut rng, 40, 32).into_vec();
            v.sort();
            v.dedup();
            assert_eq!(v.len(), 32);
        }
    }
}
