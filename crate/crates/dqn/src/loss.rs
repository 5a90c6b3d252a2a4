//! Double-Q temporal-difference loss with Huber shaping.

use crate::error::DqnError;
use crate::net::{argmax, NoiseDraw, QNetwork};
use crate::tensor::{ParamSet, Real};

/// ½L² for |L| < 1, |L| − ½ otherwise.
pub fn huber<T: Real>(l: T) -> T {
    let a = l.abs();
    if a < T::one() {
        T::of(0.5) * l * l
    } else {
        a - T::of(0.5)
    }
}

pub fn huber_derivative<T: Real>(l: T) -> T {
    l.max(-T::one()).min(T::one())
}

/// r + γ·Q_target(s', argmax_a Q_online(s', a)); just r for terminal s'.
pub fn double_q_target<T: Real>(reward: T, gamma: T, terminal: bool, online_next: &[T], target_next: &[T]) -> T {
    if terminal {
        return reward;
    }
    let (a, _) = argmax(online_next);
    reward + gamma * target_next[a]
}

/// r + γ·max_a Q(s', a), the single-network target.
pub fn max_q_target<T: Real>(reward: T, gamma: T, terminal: bool, next: &[T]) -> T {
    if terminal {
        return reward;
    }
    reward + gamma * argmax(next).1
}

#[derive(Debug, Clone, Copy)]
pub struct TdSample<'a, T> {
    pub state: &'a [T],
    pub action: usize,
    pub reward: T,
    pub next_state: &'a [T],
    pub terminal: bool,
    pub weight: T,
}

#[derive(Debug, Clone)]
pub struct TdOutput<T> {
    /// L = Q_online(s, a) − target, per sample.
    pub errors: Vec<T>,
    pub targets: Vec<T>,
    /// Importance-weighted mean Huber loss.
    pub loss: T,
    /// Gradient of `loss` with respect to the online parameters.
    pub grads: ParamSet<T>,
}

/// Sample `i` uses online draw `i % online_noise.len()` for both s and s'
/// and target draw `i % target_noise.len()`.
pub fn td_loss<T: Real>(
    online: &QNetwork<T>,
    target: &QNetwork<T>,
    samples: &[TdSample<'_, T>],
    gamma: T,
    online_noise: &[NoiseDraw<T>],
    target_noise: &[NoiseDraw<T>],
) -> Result<TdOutput<T>, DqnError> {
    if samples.is_empty() || online_noise.is_empty() || target_noise.is_empty() {
        return Err(DqnError::Config("empty batch or noise set".into()));
    }
    let fo = online.freeze();
    let ft = target.freeze();
    let n = T::of(samples.len() as f64);
    let mut acc = online.accumulator();
    let mut errors = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    let mut loss = T::zero();
    for (i, s) in samples.iter().enumerate() {
        let on = &online_noise[i % online_noise.len()];
        let tn = &target_noise[i % target_noise.len()];
        let (q, trace) = fo.forward(s.state, on, i % online_noise.len())?;
        let y = if s.terminal {
            s.reward
        } else {
            let q_next_online = fo.q_values(s.next_state, on)?;
            let q_next_target = ft.q_values(s.next_state, tn)?;
            double_q_target(s.reward, gamma, false, &q_next_online, &q_next_target)
        };
        if s.action >= q.len() {
            return Err(DqnError::Shape {
                expected: q.len(),
                got: s.action,
            });
        }
        let l = q[s.action] - y;
        loss += s.weight * huber(l) / n;
        let mut dq = vec![T::zero(); q.len()];
        dq[s.action] = s.weight * huber_derivative(l) / n;
        fo.backward(&trace, &dq, on, &mut acc);
        errors.push(l);
        targets.push(y);
    }
    Ok(TdOutput {
        errors,
        targets,
        loss,
        grads: online.parameter_gradients(&acc),
    })
}
