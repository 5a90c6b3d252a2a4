//! RMSprop with momentum and global gradient-norm clipping.
//!
//! Same recursion as the common deep-learning implementation:
//!
//! ```text
//! v ← ρ v + (1 − ρ) g²
//! b ← μ b + g / (√v + ε)
//! θ ← θ − lr · b
//! ```

use crate::tensor::{ParamSet, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsPropConfig {
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            decay: 0.99,
            momentum: 0.9,
            epsilon: 1e-5,
            clip_norm: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RmsProp<T> {
    pub config: RmsPropConfig,
    square_avg: ParamSet<T>,
    buffer: ParamSet<T>,
    steps: usize,
}

/// Scales `grads` so its global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<T: Real>(grads: &mut ParamSet<T>, max_norm: f64) -> T {
    let norm = grads.norm();
    let max = T::of(max_norm);
    if norm > max {
        grads.scale(max / norm);
    }
    norm
}

impl<T: Real> RmsProp<T> {
    pub fn new(params: &ParamSet<T>, config: RmsPropConfig) -> Self {
        Self {
            config,
            square_avg: params.zeros_like(),
            buffer: params.zeros_like(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Clips `grads` in place and applies one update; returns the pre-clip norm.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &mut ParamSet<T>, lr: f64) -> T {
        let norm = clip_grad_norm(grads, self.config.clip_norm);
        let rho = T::of(self.config.decay);
        let mu = T::of(self.config.momentum);
        let eps = T::of(self.config.epsilon);
        let lr = T::of(lr);
        for (((p, g), v), b) in params
            .tensors
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.square_avg.tensors)
            .zip(&mut self.buffer.tensors)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                v.data[i] = rho * v.data[i] + (T::one() - rho) * gi * gi;
                b.data[i] = mu * b.data[i] + gi / (v.data[i].sqrt() + eps);
                p.data[i] = p.data[i] - lr * b.data[i];
            }
        }
        self.steps += 1;
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar(v: f64) -> ParamSet<f64> {
        ParamSet {
            tensors: vec![Tensor {
                name: "w".into(),
                shape: vec![1],
                data: vec![v],
            }],
        }
    }

    #[test]
    fn two_hand_computed_steps() {
        let cfg = RmsPropConfig {
            clip_norm: 1e9,
            ..RmsPropConfig::default()
        };
        let mut p = scalar(1.0);
        let mut opt = RmsProp::new(&p, cfg);
        let lr = 0.01;
        opt.step(&mut p, &mut scalar(0.5), lr);
        let v1: f64 = 0.01 * 0.25;
        let b1 = 0.5 / (v1.sqrt() + 1e-5);
        let p1 = 1.0 - lr * b1;
        assert!((p.tensors[0].data[0] - p1).abs() < 1e-10);
        opt.step(&mut p, &mut scalar(-0.2), lr);
        let v2: f64 = 0.99 * v1 + 0.01 * 0.04;
        let b2 = 0.9 * b1 - 0.2 / (v2.sqrt() + 1e-5);
        assert!((p.tensors[0].data[0] - (p1 - lr * b2)).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_only_carries_momentum() {
        let mut p = scalar(0.0);
        let mut opt = RmsProp::new(&p, RmsPropConfig::default());
        opt.step(&mut p, &mut scalar(0.3), 0.1);
        let after_first = p.tensors[0].data[0];
        let b1 = -after_first / 0.1;
        opt.step(&mut p, &mut scalar(0.0), 0.1);
        let delta = p.tensors[0].data[0] - after_first;
        assert!((delta + 0.1 * 0.9 * b1).abs() < 1e-12);
    }

    #[test]
    fn large_gradient_clipped_to_unit_norm() {
        let mut g = ParamSet {
            tensors: vec![Tensor {
                name: "w".into(),
                shape: vec![2],
                data: vec![6.0f64, 8.0],
            }],
        };
        let before = clip_grad_norm(&mut g, 1.0);
        assert_eq!(before, 10.0);
        assert!((g.norm() - 1.0).abs() < 1e-12);
        assert!((g.tensors[0].data[0] - 0.6).abs() < 1e-12);
    }
}
