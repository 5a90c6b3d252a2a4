//! Prioritized replay with loss-aware eviction.

use rand::Rng;

use crate::error::DqnError;
use crate::sumtree::SumTree;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f32>,
    pub action: usize,
    pub reward: f32,
    pub next_state: Vec<f32>,
    /// True when `next_state` ends the episode by failure or a stop rule;
    /// truncation at the time limit is not terminal.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityConfig {
    pub alpha: f64,
    pub beta_start: f64,
    pub beta_step: f64,
    pub p_epsilon: f64,
    pub loss_cap: f64,
    /// Probability of evicting from the low-loss pool instead of uniformly.
    pub replace_low_loss: f64,
    /// Fraction of the buffer sorted into the low-loss pool at a time.
    pub low_loss_fraction: f64,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta_start: 0.2,
            beta_step: 0.001,
            p_epsilon: 0.001,
            loss_cap: 10.0,
            replace_low_loss: 0.9,
            low_loss_fraction: 0.01,
        }
    }
}

impl PriorityConfig {
    /// p = (min(|L|, L_max) + p_ε)^α
    pub fn priority(&self, loss: f64) -> f64 {
        (loss.abs().min(self.loss_cap) + self.p_epsilon).powf(self.alpha)
    }
}

/// Importance weights (N·P(i))^(−β) normalized by their maximum.
pub fn importance_weights(probabilities: &[f64], n: usize, beta: f64) -> Vec<f64> {
    let raw: Vec<f64> = probabilities.iter().map(|&p| (n as f64 * p).powf(-beta)).collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    raw.iter().map(|w| w / max).collect()
}

#[derive(Debug, Clone)]
struct Entry {
    transition: Transition,
    loss: f64,
    generation: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    config: PriorityConfig,
    entries: Vec<Entry>,
    tree: SumTree,
    beta: f64,
    /// Lowest-loss slots (with the generation they were sorted at), popped from the back.
    pool: Vec<(usize, u64)>,
    generation: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, config: PriorityConfig) -> Self {
        Self {
            capacity,
            config,
            entries: Vec::with_capacity(capacity.min(1 << 20)),
            tree: SumTree::new(capacity),
            beta: config.beta_start,
            pool: Vec::new(),
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn config(&self) -> &PriorityConfig {
        &self.config
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.entries[index].transition
    }

    pub fn loss(&self, index: usize) -> f64 {
        self.entries[index].loss
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    /// Stores a transition with the loss cap as its initial loss, so that new
    /// experience is sampled with maximal priority. Returns the slot used.
    pub fn insert<R: Rng + ?Sized>(&mut self, transition: Transition, rng: &mut R) -> usize {
        self.insert_with_loss(transition, self.config.loss_cap, rng)
    }

    pub fn insert_with_loss<R: Rng + ?Sized>(&mut self, transition: Transition, loss: f64, rng: &mut R) -> usize {
        self.generation += 1;
        let entry = Entry {
            transition,
            loss,
            generation: self.generation,
        };
        let slot = if self.entries.len() < self.capacity {
            self.entries.push(entry);
            self.entries.len() - 1
        } else {
            let slot = if rng.random::<f64>() < self.config.replace_low_loss {
                self.pop_low_loss()
            } else {
                rng.random_range(0..self.capacity)
            };
            self.entries[slot] = entry;
            slot
        };
        self.tree.update(slot, self.config.priority(loss));
        slot
    }

    fn pop_low_loss(&mut self) -> usize {
        loop {
            while let Some((slot, generation)) = self.pool.pop() {
                if self.entries[slot].generation == generation {
                    return slot;
                }
            }
            self.refill_pool();
        }
    }

    /// Sorts out the lowest-loss fraction of the buffer.
    fn refill_pool(&mut self) {
        let n = ((self.entries.len() as f64 * self.config.low_loss_fraction).ceil() as usize).max(1);
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.select_nth_unstable_by(n - 1, |&a, &b| self.entries[a].loss.total_cmp(&self.entries[b].loss));
        order.truncate(n);
        order.sort_by(|&a, &b| self.entries[b].loss.total_cmp(&self.entries[a].loss));
        self.pool = order.into_iter().map(|i| (i, self.entries[i].generation)).collect();
    }

    /// Proportional sampling, one draw per equal-mass stratum.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<SampledBatch, DqnError> {
        if self.entries.is_empty() {
            return Err(DqnError::Config("cannot sample an empty replay buffer".into()));
        }
        let total = self.tree.total();
        let seg = total / batch as f64;
        let mut indices = Vec::with_capacity(batch);
        let mut probabilities = Vec::with_capacity(batch);
        for k in 0..batch {
            let u = ((k as f64 + rng.random::<f64>()) * seg).min(total * (1.0 - 1e-12));
            let i = self.tree.sample(u)?;
            indices.push(i);
            probabilities.push(self.tree.priority(i) / total);
        }
        let weights = importance_weights(&probabilities, self.entries.len(), self.beta);
        Ok(SampledBatch {
            indices,
            probabilities,
            weights,
        })
    }

    pub fn update_loss(&mut self, index: usize, loss: f64) {
        self.entries[index].loss = loss.abs();
        self.tree.update(index, self.config.priority(loss));
    }

    pub fn anneal_beta(&mut self) {
        self.beta = (self.beta + self.config.beta_step).min(1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(i: usize) -> Transition {
        Transition {
            state: vec![i as f32],
            action: 0,
            reward: 0.0,
            next_state: vec![i as f32],
            terminal: false,
        }
    }

    #[test]
    fn priority_examples() {
        let c = PriorityConfig::default();
        assert!((c.priority(0.0) - 0.001f64.powf(0.4)).abs() < 1e-15);
        assert!((c.priority(0.0) - 0.0631).abs() < 1e-4);
        assert_eq!(c.priority(50.0), c.priority(10.0));
        assert_eq!(c.priority(-3.0), c.priority(3.0));
    }

    #[test]
    fn zero_beta_gives_unit_weights() {
        let w = importance_weights(&[0.1, 0.5, 0.4], 3, 0.0);
        assert!(w.iter().all(|&x| x == 1.0));
        let w = importance_weights(&[0.1, 0.5, 0.4], 3, 1.0);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn append_below_capacity() {
        let mut b = ReplayBuffer::new(4, PriorityConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..3 {
            assert_eq!(b.insert(tr(i), &mut rng), i);
        }
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn forced_low_loss_eviction_takes_smallest_losses() {
        let cfg = PriorityConfig {
            replace_low_loss: 1.0,
            low_loss_fraction: 0.05,
            ..PriorityConfig::default()
        };
        let n = 200;
        let mut b = ReplayBuffer::new(n, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        for i in 0..n {
            b.insert_with_loss(tr(i), losses[i], &mut rng);
        }
        let mut evicted = Vec::new();
        for k in 0..10 {
            let slot = b.insert_with_loss(tr(1000 + k), 100.0, &mut rng);
            evicted.push(losses[slot]);
        }
        let mut sorted = losses.clone();
        sorted.sort_by(f64::total_cmp);
        let max_evicted = evicted.iter().copied().fold(0.0, f64::max);
        let survivors: Vec<f64> = (0..n).filter(|&i| b.loss(i) < 100.0).map(|i| b.loss(i)).collect();
        assert!(survivors.iter().all(|&s| s >= max_evicted));
        assert_eq!(evicted.len(), 10);
        let mut e = evicted.clone();
        e.sort_by(f64::total_cmp);
        assert_eq!(e, sorted[..10].to_vec());
    }

    #[test]
    fn insertion_is_deterministic_under_seed() {
        let run = || {
            let mut b = ReplayBuffer::new(16, PriorityConfig::default());
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            (0..64).map(|i| b.insert_with_loss(tr(i), (i % 7) as f64, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn alpha_zero_is_uniform() {
        let cfg = PriorityConfig {
            alpha: 0.0,
            ..PriorityConfig::default()
        };
        let mut b = ReplayBuffer::new(8, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..8 {
            b.insert_with_loss(tr(i), i as f64, &mut rng);
        }
        let mut counts = [0usize; 8];
        let draws = 4000;
        for _ in 0..draws {
            for i in b.sample(16, &mut rng).unwrap().indices {
                counts[i] += 1;
            }
        }
        let expect = (draws * 16 / 8) as f64;
        for c in counts {
            assert!(((c as f64) - expect).abs() / expect < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn beta_anneals_to_one() {
        let mut b = ReplayBuffer::new(2, PriorityConfig::default());
        for _ in 0..2000 {
            b.anneal_beta();
        }
        assert_eq!(b.beta(), 1.0);
    }
}
