//! Environments, the learning agent and the training loops.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use crossbeam_channel::{bounded, unbounded};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint;
use crate::config::{TrainConfig, Tracking};
use crate::error::DqnError;
use crate::loss::{td_loss, TdSample};
use crate::net::{argmax, QNetwork};
use crate::optim::RmsProp;
use crate::replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f32>,
    pub reward: f64,
    /// Failure or a stop rule; the next state has no future value.
    pub terminal: bool,
    /// Time limit reached; the next state still bootstraps.
    pub truncated: bool,
}

/// An episodic control problem. Implementations own their random source,
/// which `reset` reseeds.
pub trait Environment: Send {
    fn observation_len(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Vec<f32>, DqnError>;
    fn step(&mut self, action: usize) -> Result<StepResult, DqnError>;
    /// Physical time covered by one step.
    fn step_duration(&self) -> f64 {
        1.0
    }
}

/// SplitMix64 finalizer over (master, stream, index).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub mean_reward: f64,
    /// Steps × step duration.
    pub duration: f64,
    pub terminal: bool,
    pub epsilon: f64,
    /// Mean training loss of the learning steps that followed this episode.
    pub loss: Option<f64>,
    pub learn_steps: usize,
}

/// Plays one episode. With `noisy` the parameter noise is redrawn every
/// step; otherwise the mean network acts.
pub fn play_episode<E: Environment + ?Sized, R: Rng + ?Sized>(
    env: &mut E,
    net: &QNetwork<f32>,
    epsilon: f64,
    seed: u64,
    noisy: bool,
    rng: &mut R,
) -> Result<(Vec<Transition>, EpisodeStats), DqnError> {
    if env.observation_len() != net.spec().input || env.action_count() != net.actions() {
        return Err(DqnError::Shape {
            expected: net.spec().input,
            got: env.observation_len(),
        });
    }
    let frozen = net.freeze();
    let zero = net.zero_noise();
    let mut obs = env.reset(seed)?;
    let mut transitions = Vec::new();
    let mut total = 0.0;
    let terminal;
    loop {
        let action = if rng.random::<f64>() < epsilon {
            rng.random_range(0..net.actions())
        } else if noisy {
            frozen.greedy(&obs, &net.sample_noise(rng))?.0
        } else {
            frozen.greedy(&obs, &zero)?.0
        };
        let step = env.step(action)?;
        total += step.reward;
        transitions.push(Transition {
            state: std::mem::take(&mut obs),
            action,
            reward: step.reward as f32,
            next_state: step.observation.clone(),
            terminal: step.terminal,
        });
        obs = step.observation;
        if step.terminal || step.truncated {
            terminal = step.terminal;
            break;
        }
    }
    let steps = transitions.len();
    Ok((
        transitions,
        EpisodeStats {
            episode: 0,
            steps,
            total_reward: total,
            mean_reward: total / steps.max(1) as f64,
            duration: steps as f64 * env.step_duration(),
            terminal,
            epsilon,
            loss: None,
            learn_steps: 0,
        },
    ))
}

pub struct Agent {
    pub config: TrainConfig,
    online: QNetwork<f32>,
    target: QNetwork<f32>,
    optimizer: RmsProp<f32>,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    learn_steps: usize,
    since_sync: usize,
    longest_survival: f64,
    pending: f64,
}

impl Agent {
    pub fn new(network: QNetwork<f32>, config: TrainConfig, seed: u64) -> Result<Self, DqnError> {
        config.validate()?;
        Ok(Self {
            optimizer: RmsProp::new(network.params(), config.optimizer),
            replay: ReplayBuffer::new(config.replay_capacity, config.priority),
            target: network.clone(),
            online: network,
            rng: ChaCha8Rng::seed_from_u64(seed),
            learn_steps: 0,
            since_sync: 0,
            longest_survival: 0.0,
            pending: 0.0,
            config,
        })
    }

    pub fn network(&self) -> &QNetwork<f32> {
        &self.online
    }

    pub fn target_network(&self) -> &QNetwork<f32> {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn learn_steps(&self) -> usize {
        self.learn_steps
    }

    pub fn longest_survival(&self) -> f64 {
        self.longest_survival
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        self.config.epsilon.value(episode as f64 / self.config.episodes as f64)
    }

    pub fn learning_rate(&self, episode: usize) -> f64 {
        self.config.learning_rate.value(episode as f64 / self.config.episodes as f64)
    }

    pub fn remember(&mut self, transition: Transition) {
        self.replay.insert(transition, &mut self.rng);
    }

    /// One prioritized double-Q update; returns the batch loss.
    pub fn learn_step(&mut self, lr: f64) -> Result<f64, DqnError> {
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng)?;
        let groups = self.config.noise_groups;
        let online_noise: Vec<_> = (0..groups).map(|_| self.online.sample_noise(&mut self.rng)).collect();
        let target_noise: Vec<_> = (0..groups).map(|_| self.target.sample_noise(&mut self.rng)).collect();
        let samples: Vec<TdSample<'_, f32>> = batch
            .indices
            .iter()
            .zip(&batch.weights)
            .map(|(&i, &w)| {
                let t = self.replay.get(i);
                TdSample {
                    state: &t.state,
                    action: t.action,
                    reward: t.reward,
                    next_state: &t.next_state,
                    terminal: t.terminal,
                    weight: w as f32,
                }
            })
            .collect();
        let gamma = self.config.discount as f32;
        let mut out = td_loss(&self.online, &self.target, &samples, gamma, &online_noise, &target_noise)?;
        drop(samples);
        if !out.loss.is_finite() || !out.grads.all_finite() {
            return Err(DqnError::Divergence {
                step: self.learn_steps,
                detail: format!("non-finite loss {}", out.loss),
            });
        }
        for (&i, &l) in batch.indices.iter().zip(&out.errors) {
            self.replay.update_loss(i, l as f64);
        }
        self.optimizer.step(self.online.params_mut(), &mut out.grads, lr);
        if !self.online.params().all_finite() {
            return Err(DqnError::Divergence {
                step: self.learn_steps,
                detail: "non-finite parameters after update".into(),
            });
        }
        self.replay.anneal_beta();
        self.learn_steps += 1;
        self.since_sync += 1;
        if self.since_sync >= self.config.target_period(self.longest_survival) {
            self.target = self.online.clone();
            self.since_sync = 0;
        }
        Ok(out.loss as f64)
    }

    /// Stores an episode and runs the learning steps it pays for.
    pub fn absorb(&mut self, transitions: Vec<Transition>, stats: &mut EpisodeStats) -> Result<(), DqnError> {
        self.longest_survival = self.longest_survival.max(stats.duration);
        let n = transitions.len();
        for t in transitions {
            self.remember(t);
        }
        if self.replay.len() < self.config.learn_start {
            return Ok(());
        }
        self.pending += n as f64 * self.config.replays_per_experience / self.config.batch_size as f64;
        let lr = self.learning_rate(stats.episode);
        let mut sum = 0.0;
        let mut count = 0;
        while self.pending >= 1.0 {
            sum += self.learn_step(lr)?;
            count += 1;
            self.pending -= 1.0;
        }
        if count > 0 {
            stats.loss = Some(sum / count as f64);
        }
        stats.learn_steps = self.learn_steps;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SavedNetwork {
    pub episode: usize,
    pub score: f64,
    pub network: QNetwork<f32>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub seed: u64,
    /// Directory receiving selected checkpoints.
    pub save_dir: Option<PathBuf>,
    /// Per-episode metrics CSV.
    pub metrics: Option<PathBuf>,
    /// Overrides the configured episode count when set.
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub episodes: Vec<EpisodeStats>,
    pub saved: Vec<SavedNetwork>,
    pub best_score: f64,
}

const METRICS_HEADER: &str = "episode,steps,total_reward,mean_reward,duration,terminal,epsilon,loss,learn_steps";

fn metrics_row(s: &EpisodeStats) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        s.episode,
        s.steps,
        s.total_reward,
        s.mean_reward,
        s.duration,
        s.terminal as u8,
        s.epsilon,
        s.loss.map(|l| l.to_string()).unwrap_or_default(),
        s.learn_steps
    )
}

struct Tracker {
    mode: Tracking,
    best: f64,
    successes: usize,
    evaluations: u64,
}

impl Tracker {
    fn new(mode: Tracking) -> Self {
        Self {
            mode,
            best: f64::NEG_INFINITY,
            successes: 0,
            evaluations: 0,
        }
    }

    /// Re-evaluations use the mean network without ε exploration.
    fn consider<E: Environment + ?Sized>(
        &mut self,
        net: &QNetwork<f32>,
        env: &mut E,
        stats: &EpisodeStats,
        opts: &TrainOptions,
    ) -> Result<Option<SavedNetwork>, DqnError> {
        let mut rerun = |tracker: &mut Self| -> Result<EpisodeStats, DqnError> {
            tracker.evaluations += 1;
            let seed = derive_seed(opts.seed, 2, tracker.evaluations);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(play_episode(env, net, 0.0, seed, false, &mut rng)?.1)
        };
        let keep = match self.mode {
            Tracking::Off => None,
            Tracking::BestAverage => {
                if stats.mean_reward <= self.best {
                    return Ok(None);
                }
                let a = rerun(self)?.mean_reward;
                let b = rerun(self)?.mean_reward;
                let avg = (stats.mean_reward + a + b) / 3.0;
                if avg > self.best {
                    self.best = avg;
                    Some(avg)
                } else {
                    None
                }
            }
            Tracking::Successes { every } => {
                if stats.terminal {
                    return Ok(None);
                }
                if rerun(self)?.terminal || rerun(self)?.terminal {
                    return Ok(None);
                }
                self.successes += 1;
                self.best = self.best.max(self.successes as f64);
                (self.successes % every.max(1) == 0).then_some(self.successes as f64)
            }
        };
        let Some(score) = keep else { return Ok(None) };
        let path = match &opts.save_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let p = dir.join(format!("episode_{:06}.qdqn", stats.episode));
                checkpoint::save(net, &p)?;
                Some(p)
            }
            None => None,
        };
        Ok(Some(SavedNetwork {
            episode: stats.episode,
            score,
            network: net.clone(),
            path,
        }))
    }
}

fn open_metrics(opts: &TrainOptions) -> Result<Option<BufWriter<File>>, DqnError> {
    match &opts.metrics {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            writeln!(w, "{METRICS_HEADER}")?;
            Ok(Some(w))
        }
        None => Ok(None),
    }
}

/// Single-threaded training: act, store, learn, track, repeat.
pub fn train<E: Environment + ?Sized>(
    agent: &mut Agent,
    env: &mut E,
    opts: &TrainOptions,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome, DqnError> {
    let episodes = opts.episodes.unwrap_or(agent.config.episodes);
    let mut metrics = open_metrics(opts)?;
    let mut tracker = Tracker::new(agent.config.tracking);
    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, 1, 0));
    let mut outcome = TrainOutcome {
        episodes: Vec::with_capacity(episodes),
        saved: Vec::new(),
        best_score: f64::NEG_INFINITY,
    };
    for episode in 0..episodes {
        let eps = agent.epsilon(episode);
        let seed = derive_seed(opts.seed, 0, episode as u64);
        let (transitions, mut stats) = play_episode(env, &agent.online, eps, seed, true, &mut act_rng)?;
        stats.episode = episode;
        agent.absorb(transitions, &mut stats)?;
        if let Some(saved) = tracker.consider(&agent.online, env, &stats, opts)? {
            outcome.saved.push(saved);
        }
        if let Some(w) = metrics.as_mut() {
            writeln!(w, "{}", metrics_row(&stats))?;
        }
        on_episode(&stats);
        outcome.episodes.push(stats);
    }
    if let Some(mut w) = metrics {
        w.flush()?;
    }
    outcome.best_score = tracker.best;
    Ok(outcome)
}

struct Job {
    episode: usize,
    seed: u64,
    epsilon: f64,
    network: Arc<QNetwork<f32>>,
}

type JobResult = Result<(usize, Vec<Transition>, EpisodeStats), DqnError>;

/// Actors play episodes on network snapshots in `workers` threads while
/// the calling thread learns. Episodes are absorbed in completion order,
/// so runs are not reproducible across thread schedules.
pub fn train_threaded<E, F>(
    agent: &mut Agent,
    make_env: F,
    workers: usize,
    opts: &TrainOptions,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainOutcome, DqnError>
where
    E: Environment,
    F: Fn(usize) -> E + Sync,
{
    let workers = workers.max(1);
    let episodes = opts.episodes.unwrap_or(agent.config.episodes);
    let mut metrics = open_metrics(opts)?;
    let mut tracker = Tracker::new(agent.config.tracking);
    let mut eval_env = make_env(workers);
    let mut outcome = TrainOutcome {
        episodes: Vec::with_capacity(episodes),
        saved: Vec::new(),
        best_score: f64::NEG_INFINITY,
    };
    let (job_tx, job_rx) = bounded::<Job>(workers);
    let (res_tx, res_rx) = unbounded::<JobResult>();
    std::thread::scope(|scope| -> Result<(), DqnError> {
        for w in 0..workers {
            let job_rx = job_rx.clone();
            let res_tx = res_tx.clone();
            let make_env = &make_env;
            scope.spawn(move || {
                let mut env = make_env(w);
                while let Ok(job) = job_rx.recv() {
                    let mut rng = ChaCha8Rng::seed_from_u64(job.seed ^ 0xA5A5_A5A5);
                    let r = play_episode(&mut env, &job.network, job.epsilon, job.seed, true, &mut rng)
                        .map(|(t, s)| (job.episode, t, s));
                    if res_tx.send(r).is_err() {
                        break;
                    }
                }
            });
        }
        drop(res_tx);
        let mut snapshot = Arc::new(agent.online.clone());
        let mut snapshot_step = agent.learn_steps;
        let mut dispatched = 0;
        let dispatch = |agent: &Agent, snapshot: &Arc<QNetwork<f32>>, dispatched: &mut usize| {
            let job = Job {
                episode: *dispatched,
                seed: derive_seed(opts.seed, 0, *dispatched as u64),
                epsilon: agent.epsilon(*dispatched),
                network: Arc::clone(snapshot),
            };
            *dispatched += 1;
            let _ = job_tx.send(job);
        };
        while dispatched < episodes.min(workers) {
            dispatch(agent, &snapshot, &mut dispatched);
        }
        let mut result = Ok(());
        for _ in 0..episodes {
            let step = (|| -> Result<(), DqnError> {
                let (episode, transitions, mut stats) = res_rx
                    .recv()
                    .map_err(|_| DqnError::Env("actor threads stopped".into()))??;
                stats.episode = episode;
                agent.absorb(transitions, &mut stats)?;
                if agent.learn_steps >= snapshot_step + agent.config.snapshot_period {
                    snapshot = Arc::new(agent.online.clone());
                    snapshot_step = agent.learn_steps;
                }
                if let Some(saved) = tracker.consider(&agent.online, &mut eval_env, &stats, opts)? {
                    outcome.saved.push(saved);
                }
                if let Some(w) = metrics.as_mut() {
                    writeln!(w, "{}", metrics_row(&stats))?;
                }
                on_episode(&stats);
                outcome.episodes.push(stats);
                if dispatched < episodes {
                    dispatch(agent, &snapshot, &mut dispatched);
                }
                Ok(())
            })();
            if let Err(e) = step {
                result = Err(e);
                break;
            }
        }
        drop(job_tx);
        // Drain so blocked actors can exit.
        while res_rx.recv().is_ok() {}
        result
    })?;
    if let Some(mut w) = metrics {
        w.flush()?;
    }
    outcome.best_score = tracker.best;
    Ok(outcome)
}

/// Greedy action of the mean network.
pub fn greedy_action(net: &QNetwork<f32>, obs: &[f32]) -> Result<usize, DqnError> {
    Ok(argmax(&net.q_values(obs, &net.zero_noise())?).0)
}
