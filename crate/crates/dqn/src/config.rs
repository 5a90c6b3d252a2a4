//! Training hyperparameters and their schedules.

use crate::error::DqnError;
use crate::optim::RmsPropConfig;
use crate::replay::PriorityConfig;

/// Piecewise-constant schedule over training progress in [0, 1]; each
/// stage starts at a fraction of the planned episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub stages: Vec<(f64, f64)>,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Self { stages: vec![(0.0, v)] }
    }

    pub fn value(&self, progress: f64) -> f64 {
        let mut v = self.stages[0].1;
        for &(start, value) in &self.stages {
            if progress >= start {
                v = value;
            }
        }
        v
    }

    fn validate(&self, what: &str) -> Result<(), DqnError> {
        if self.stages.is_empty() || self.stages[0].0 != 0.0 {
            return Err(DqnError::Config(format!("{what} schedule must start at progress 0")));
        }
        if self.stages.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(DqnError::Config(format!("{what} schedule stages must increase")));
        }
        Ok(())
    }
}

/// How candidate checkpoints are picked during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tracking {
    /// Re-evaluate a record-breaking episode twice more; keep it if the
    /// three-run average is still a record.
    BestAverage,
    /// After an episode survives to the time limit, test twice more; keep
    /// every `every`-th network that passes all three.
    Successes { every: usize },
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub discount: f64,
    pub batch_size: usize,
    pub noise_groups: usize,
    pub learning_rate: Schedule,
    pub optimizer: RmsPropConfig,
    pub epsilon: Schedule,
    /// Target-network sync periods (learning steps) before, between and after the milestones.
    pub target_periods: [usize; 3],
    /// Longest survival time (in environment time units) unlocking the next period.
    pub target_milestones: [f64; 2],
    pub priority: PriorityConfig,
    pub replay_capacity: usize,
    /// Average number of times each stored transition is learned from.
    pub replays_per_experience: f64,
    pub episodes: usize,
    /// Transitions stored before learning starts.
    pub learn_start: usize,
    /// Learning steps between snapshot refreshes sent to threaded actors.
    pub snapshot_period: usize,
    pub tracking: Tracking,
}

/// The three problem families with their replay settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    Cooling,
    Inverted,
    Quartic,
}

impl TrainConfig {
    /// Settings shared by all problems; replay size and priority exponent
    /// come from the problem preset.
    fn base(problem: Problem, episodes: usize, capacity_episodes: usize, steps_per_episode: usize, replays: f64) -> Self {
        let (alpha, replace) = match problem {
            Problem::Cooling => (0.4, 0.9),
            Problem::Inverted => (0.8, 0.9),
            Problem::Quartic => (0.4, 0.8),
        };
        Self {
            discount: 0.99,
            batch_size: 512,
            noise_groups: 32,
            learning_rate: Schedule {
                stages: vec![(0.0, 2e-4), (0.4, 4e-5), (0.6, 8e-6), (0.8, 2e-6), (0.9, 1e-6)],
            },
            optimizer: RmsPropConfig::default(),
            epsilon: Schedule {
                stages: vec![(0.0, 0.4), (0.02, 0.02), (0.5, 0.005), (0.75, 0.001), (0.9, 0.0001)],
            },
            target_periods: [30, 150, 300],
            target_milestones: [20.0, 50.0],
            priority: PriorityConfig {
                alpha,
                replace_low_loss: replace,
                ..PriorityConfig::default()
            },
            replay_capacity: capacity_episodes * steps_per_episode,
            replays_per_experience: replays,
            episodes,
            learn_start: 512,
            snapshot_period: 50,
            tracking: if problem == Problem::Inverted {
                Tracking::Successes { every: 8 }
            } else {
                Tracking::BestAverage
            },
        }
    }

    /// Cooling presets; `input_case` 1 (moments), 2 (wavefunction) or
    /// 3 (measurement history) selects replay size and replay ratio.
    pub fn cooling(input_case: usize, steps_per_episode: usize) -> Self {
        let (cap, replays) = match input_case {
            1 => (6000, 8.0),
            2 => (4000, 16.0),
            _ => (400, 16.0),
        };
        Self::base(Problem::Cooling, 10_000, cap, steps_per_episode, replays)
    }

    pub fn inverted(input_case: usize, steps_per_episode: usize) -> Self {
        let (cap, replays) = match input_case {
            1 => (6000, 8.0),
            2 => (4000, 16.0),
            _ => (400, 16.0),
        };
        Self::base(Problem::Inverted, 30_000, cap, steps_per_episode, replays)
    }

    /// Quartic presets: case 1 (moment vector) or 2 (wavefunction).
    pub fn quartic(input_case: usize, steps_per_episode: usize) -> Self {
        let cap = if input_case == 1 { 6000 } else { 2000 };
        Self::base(Problem::Quartic, 12_000, cap, steps_per_episode, 8.0)
    }

    pub fn target_period(&self, longest_survival: f64) -> usize {
        if longest_survival >= self.target_milestones[1] {
            self.target_periods[2]
        } else if longest_survival >= self.target_milestones[0] {
            self.target_periods[1]
        } else {
            self.target_periods[0]
        }
    }

    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |m: &str| Err(DqnError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.noise_groups == 0 || self.replay_capacity == 0 || self.episodes == 0 {
            return bad("batch size, noise groups, replay capacity and episodes must be positive");
        }
        if self.target_periods.contains(&0) {
            return bad("target periods must be positive");
        }
        if self.replays_per_experience < 0.0 {
            return bad("replays per experience must be non-negative");
        }
        let p = &self.priority;
        if p.alpha < 0.0 || !(0.0..=1.0).contains(&p.replace_low_loss) || p.low_loss_fraction <= 0.0 || p.low_loss_fraction > 1.0 {
            return bad("invalid priority settings");
        }
        self.learning_rate.validate("learning-rate")?;
        self.epsilon.validate("epsilon")
    }
}
