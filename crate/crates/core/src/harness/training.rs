//! DQN training runs assembled from an experiment configuration.

use std::path::PathBuf;
use std::sync::Arc;

use qctrl_dqn::{train, train_threaded, Agent, EpisodeStats, Environment, QNetwork, TrainConfig, TrainOptions, TrainOutcome};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::osc::OscSimulator;
use crate::quartic::QuarticSimulator;

use super::config::{ExperimentConfig, Problem};
use super::env::{self, OscEnv, QuarticEnv};
use super::HarnessError;

/// Training hyperparameters for the configured problem and input with the
/// overrides applied.
pub fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    let case = cfg.input.number();
    let steps = match cfg.problem {
        Problem::Quartic => cfg.quartic.control_steps(),
        _ => cfg.quadratic.control_steps(),
    };
    let mut t = match cfg.problem {
        Problem::Cooling => TrainConfig::cooling(case, steps),
        Problem::Inverted => TrainConfig::inverted(case, steps),
        Problem::Quartic => TrainConfig::quartic(case, steps),
    };
    let o = &cfg.train;
    if let Some(n) = o.episodes {
        t.episodes = n;
    }
    if let Some(b) = o.batch_size {
        t.batch_size = b;
        t.learn_start = t.learn_start.max(b);
    }
    if let Some(r) = o.replays {
        t.replays_per_experience = r;
    }
    if let Some(c) = o.capacity_episodes {
        t.replay_capacity = c * steps;
    }
    t
}

enum Sim {
    Osc(Arc<OscSimulator>),
    Quartic(Arc<QuarticSimulator>),
}

fn make_sim(cfg: &ExperimentConfig) -> Result<Sim, HarnessError> {
    Ok(match cfg.problem {
        Problem::Quartic => Sim::Quartic(Arc::new(QuarticSimulator::new(cfg.quartic.clone())?)),
        _ => Sim::Osc(Arc::new(OscSimulator::new(cfg.quadratic.clone())?)),
    })
}

/// Either environment behind one type, so threaded training can build one
/// per worker.
pub enum AnyEnv {
    Osc(OscEnv),
    Quartic(QuarticEnv),
}

impl AnyEnv {
    fn normalizer(&self) -> qctrl_dqn::Normalizer<f32> {
        match self {
            AnyEnv::Osc(e) => e.normalizer(),
            AnyEnv::Quartic(e) => e.normalizer(),
        }
    }
}

impl Environment for AnyEnv {
    fn observation_len(&self) -> usize {
        match self {
            AnyEnv::Osc(e) => e.observation_len(),
            AnyEnv::Quartic(e) => e.observation_len(),
        }
    }

    fn action_count(&self) -> usize {
        match self {
            AnyEnv::Osc(e) => e.action_count(),
            AnyEnv::Quartic(e) => e.action_count(),
        }
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f32>, qctrl_dqn::DqnError> {
        match self {
            AnyEnv::Osc(e) => e.reset(seed),
            AnyEnv::Quartic(e) => e.reset(seed),
        }
    }

    fn step(&mut self, action: usize) -> Result<qctrl_dqn::StepResult, qctrl_dqn::DqnError> {
        match self {
            AnyEnv::Osc(e) => e.step(action),
            AnyEnv::Quartic(e) => e.step(action),
        }
    }

    fn step_duration(&self) -> f64 {
        match self {
            AnyEnv::Osc(e) => e.step_duration(),
            AnyEnv::Quartic(e) => e.step_duration(),
        }
    }
}

fn env_for(sim: &Sim, cfg: &ExperimentConfig) -> AnyEnv {
    match sim {
        Sim::Osc(s) => AnyEnv::Osc(OscEnv::new(Arc::clone(s), cfg.problem, cfg.input, cfg.policy.levels)),
        Sim::Quartic(s) => AnyEnv::Quartic(QuarticEnv::new(Arc::clone(s), cfg.input, cfg.policy.levels)),
    }
}

/// A freshly initialized network for the configuration.
pub fn initial_network(cfg: &ExperimentConfig) -> Result<QNetwork<f32>, HarnessError> {
    let sim = make_sim(cfg)?;
    let env = env_for(&sim, cfg);
    let spec = env::network_spec(cfg.input, env.observation_len(), env.action_count(), cfg.train.hidden);
    let mut rng = ChaCha8Rng::seed_from_u64(qctrl_dqn::derive_seed(cfg.seed, 3, 0));
    let mut net = QNetwork::new(spec, &mut rng)?;
    net.normalizer = env.normalizer();
    Ok(net)
}

pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub network: QNetwork<f32>,
}

/// Trains from scratch. Saves tracked networks to `save_dir` and per-episode
/// metrics to `metrics` when given.
pub fn run_training(
    cfg: &ExperimentConfig,
    save_dir: Option<PathBuf>,
    metrics: Option<PathBuf>,
    on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainRun, HarnessError> {
    let tc = train_config(cfg);
    tc.validate()?;
    let net = initial_network(cfg)?;
    let mut agent = Agent::new(net, tc, cfg.seed)?;
    let opts = TrainOptions {
        seed: cfg.seed,
        save_dir,
        metrics,
        episodes: None,
    };
    let sim = make_sim(cfg)?;
    let outcome = if cfg.workers <= 1 {
        let mut env = env_for(&sim, cfg);
        train(&mut agent, &mut env, &opts, on_episode)?
    } else {
        train_threaded(&mut agent, |_| env_for(&sim, cfg), cfg.workers, &opts, on_episode)?
    };
    Ok(TrainRun {
        outcome,
        network: agent.network().clone(),
    })
}
