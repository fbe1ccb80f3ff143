use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::MdpState;

/// `(s_t, a_t, s_{t+1}, r_t)` with the action as an index into the action
/// space active when it was stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: MdpState,
    pub action: usize,
    pub s_next: MdpState,
    pub reward: f64,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMemory {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot the next store overwrites once full.
    head: usize,
    /// Transitions stored since creation; gates sampling.
    stored: u64,
    warmup: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, warmup: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
            stored: 0,
            warmup,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn stored(&self) -> u64 {
        self.stored
    }

    /// Whether [`ReplayMemory::sample`] of `batch` items would succeed.
    pub fn ready(&self, batch: usize) -> bool {
        self.stored >= self.warmup as u64 && self.items.len() >= batch
    }

    pub fn store(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.stored += 1;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `batch` distinct transitions drawn uniformly. Fails until `warmup`
    /// transitions have been stored and while fewer than `batch` are held.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if !self.ready(batch) {
            let (fill, needed) = if self.stored < self.warmup as u64 {
                (self.stored as usize, self.warmup)
            } else {
                (self.items.len(), batch)
            };
            return Err(Error::InsufficientFill { fill, needed });
        }
        Ok(index::sample(rng, self.items.len(), batch)
            .into_iter()
            .map(|i| self.items[i])
            .collect())
    }

    /// Re-indexes actions after an action-space swap; transitions whose
    /// action has no counterpart are discarded. Order is kept.
    pub fn remap_actions(&mut self, old_to_new: &[Option<usize>]) {
        let kept: Vec<Transition> = self
            .iter()
            .filter_map(|t| {
                old_to_new
                    .get(t.action)
                    .copied()
                    .flatten()
                    .map(|a| Transition { action: a, ..*t })
            })
            .collect();
        // kept is oldest-first, so a full buffer overwrites from slot 0
        self.items = kept;
        self.head = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(i: usize) -> Transition {
        Transition {
            s: [i as f64; 3],
            action: i,
            s_next: [0.0; 3],
            reward: i as f64,
            terminal: false,
        }
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut m = ReplayMemory::new(3, 0);
        for i in 0..4 {
            m.store(t(i));
        }
        assert_eq!(m.len(), 3);
        let actions: Vec<usize> = m.iter().map(|x| x.action).collect();
        assert_eq!(actions, vec![1, 2, 3]);
    }

    #[test]
    fn full_batch_is_a_permutation() {
        let mut m = ReplayMemory::new(10, 0);
        for i in 0..10 {
            m.store(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut got: Vec<usize> = m.sample(10, &mut rng).unwrap().iter().map(|x| x.action).collect();
        got.sort();
        assert_eq!(got, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn warmup_gates_sampling() {
        let mut m = ReplayMemory::new(1000, 200);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..199 {
            m.store(t(i));
        }
        assert!(matches!(m.sample(32, &mut rng), Err(Error::InsufficientFill { .. })));
        m.store(t(199));
        assert_eq!(m.sample(32, &mut rng).unwrap().len(), 32);
    }

    #[test]
    fn sampling_is_uniform() {
        let n = 20;
        let mut m = ReplayMemory::new(n, 0);
        for i in 0..n {
            m.store(t(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0u32; n];
        let draws = 100_000;
        for _ in 0..draws {
            counts[m.sample(1, &mut rng).unwrap()[0].action] += 1;
        }
        let p = 1.0 / n as f64;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sd + 1.0, "count {c}");
        }
    }

    #[test]
    fn same_seed_same_batches() {
        let mut m = ReplayMemory::new(50, 0);
        for i in 0..50 {
            m.store(t(i));
        }
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            m.sample(8, &mut rng).unwrap()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn remap_drops_missing_actions() {
        let mut m = ReplayMemory::new(3, 0);
        for i in 0..5 {
            m.store(t(i % 3));
        }
        // held actions, oldest first: 2, 0, 1
        m.remap_actions(&[Some(0), None, Some(1)]);
        let actions: Vec<usize> = m.iter().map(|x| x.action).collect();
        assert_eq!(actions, vec![1, 0]);
        m.store(t(0));
        m.store(t(0));
        assert_eq!(m.len(), 3);
    }
}
