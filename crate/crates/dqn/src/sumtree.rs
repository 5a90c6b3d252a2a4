//! Binary partial-sum tree over leaf priorities.

use crate::error::DqnError;

#[derive(Debug, Clone, PartialEq)]
pub struct SumTree {
    capacity: usize,
    /// Power-of-two leaf count; node 1 is the root, leaves start at `base`.
    base: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "sum tree needs at least one leaf");
        let base = capacity.next_power_of_two();
        Self {
            capacity,
            base,
            nodes: vec![0.0; 2 * base],
        }
    }

    pub fn from_priorities(priorities: &[f64]) -> Self {
        let mut t = Self::new(priorities.len());
        for (i, &p) in priorities.iter().enumerate() {
            t.nodes[t.base + i] = p;
        }
        t.rebuild();
        t
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn priority(&self, index: usize) -> f64 {
        self.nodes[self.base + index]
    }

    pub fn update(&mut self, index: usize, priority: f64) {
        assert!(index < self.capacity, "leaf {index} out of range");
        assert!(priority >= 0.0 && priority.is_finite(), "priority must be finite and non-negative");
        let mut i = self.base + index;
        self.nodes[i] = priority;
        i /= 2;
        while i >= 1 {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
            i /= 2;
        }
    }

    /// Recomputes every internal node from the leaves, clearing drift from
    /// many incremental updates.
    pub fn rebuild(&mut self) {
        for i in (1..self.base).rev() {
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// The leaf whose prefix-sum interval [S_{i−1}, S_i) contains `u`.
    pub fn sample(&self, u: f64) -> Result<usize, DqnError> {
        let total = self.total();
        if !(0.0..total).contains(&u) {
            return Err(DqnError::DrawOutOfRange { u, total });
        }
        let mut i = 1;
        let mut u = u;
        while i < self.base {
            let left = self.nodes[2 * i];
            if u < left {
                i *= 2;
            } else {
                u -= left;
                i = 2 * i + 1;
            }
        }
        // Round-off can push a draw just past the last non-empty leaf.
        let mut leaf = (i - self.base).min(self.capacity - 1);
        while self.nodes[self.base + leaf] <= 0.0 && leaf > 0 {
            leaf -= 1;
        }
        Ok(leaf)
    }

    /// Largest |node − (left + right)| over internal nodes.
    pub fn max_inconsistency(&self) -> f64 {
        (1..self.base)
            .map(|i| (self.nodes[i] - self.nodes[2 * i] - self.nodes[2 * i + 1]).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn prefix_interval_lookup() {
        let t = SumTree::from_priorities(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.total(), 10.0);
        assert_eq!(t.sample(6.5).unwrap(), 3);
        assert_eq!(t.sample(0.0).unwrap(), 0);
        assert_eq!(t.sample(1.0).unwrap(), 1);
        assert_eq!(t.sample(5.999).unwrap(), 2);
        assert!(t.sample(10.0).is_err());
        assert!(t.sample(-0.1).is_err());
    }

    #[test]
    fn update_propagates_to_root() {
        let mut t = SumTree::from_priorities(&[1.0, 2.0, 3.0, 4.0]);
        t.update(0, 5.0);
        assert_eq!(t.total(), 14.0);
    }

    #[test]
    fn zero_priority_leaves_never_drawn() {
        let t = SumTree::from_priorities(&[0.0, 1.0, 0.0, 0.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let i = t.sample(rng.random::<f64>() * t.total()).unwrap();
            assert!(i == 1 || i == 4);
        }
    }

    proptest! {
        #[test]
        fn nodes_stay_consistent(init in prop::collection::vec(0.0f64..10.0, 1..64),
                                 updates in prop::collection::vec((0usize..64, 0.0f64..10.0), 0..200)) {
            let mut t = SumTree::from_priorities(&init);
            for (i, p) in updates {
                t.update(i % init.len(), p);
            }
            prop_assert!(t.max_inconsistency() <= 1e-9);
            let leaves: f64 = (0..init.len()).map(|i| t.priority(i)).sum();
            prop_assert!((leaves - t.total()).abs() <= 1e-9);
        }

        #[test]
        fn sample_lands_in_its_interval(p in prop::collection::vec(0.01f64..5.0, 1..40), frac in 0.0f64..1.0) {
            let t = SumTree::from_priorities(&p);
            let u = frac * t.total();
            prop_assume!(u < t.total());
            let i = t.sample(u).unwrap();
            let lo: f64 = p[..i].iter().sum();
            let hi = lo + p[i];
            prop_assert!(u >= lo - 1e-9 && u < hi + 1e-9);
        }
    }
}
