//! Evaluation protocols and episode CSV output.
//!
//! Episode `i` of a run with master seed `s` draws its noise from
//! `ChaCha8Rng::seed_from_u64(derive_seed(s, stream, i))`, where the stream
//! is 0 for quadratic and 1 for quartic runs. Controllers evaluated with the
//! same seed therefore see the same noise realizations.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use qctrl_dqn::{derive_seed, train::greedy_action, QNetwork};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{ControlPolicy, PolicyKind, QuarticSummary};
use crate::error::SimError;
use crate::qstate::GaussianMoments;
use crate::osc::{EpisodeOptions, EpisodeRecord, OscObservation, OscSimulator};
use crate::quartic::{QuarticEpisode, QuarticEpisodeOptions, QuarticObservation, QuarticSimulator};

use super::config::{InputCase, Problem};
use super::env::{self, SIGNAL_BINS};
use super::HarnessError;

pub const QUADRATIC_STREAM: u64 = 0;
pub const QUARTIC_STREAM: u64 = 1;

/// Time discarded before the first sample and the sampling periods.
pub const WARMUP: f64 = 40.0;
pub const COOLING_PERIOD: f64 = 15.0;
pub const QUARTIC_PERIOD: f64 = 20.0;

#[derive(Debug, Clone)]
pub enum Controller {
    Policy(ControlPolicy),
    /// Greedy actions of the mean network.
    Network { net: Arc<QNetwork<f32>>, input: InputCase },
}

impl Controller {
    pub fn name(&self) -> String {
        match self {
            Controller::Policy(p) => p.kind.name().to_string(),
            Controller::Network { input, .. } => format!("dqn-{}", input.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub episodes: usize,
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4} ({} episodes)", self.mean, self.se, self.episodes)
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        f64::NAN
    };
    Estimate { mean, se, episodes: n }
}

/// warmup + period·j for j = 1, 2, … up to t_max; just t_max for episodes
/// too short to reach the first sample.
pub fn sample_times(warmup: f64, period: f64, t_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 1;
    loop {
        let t = warmup + period * j as f64;
        if t > t_max + 1e-9 {
            break;
        }
        out.push(t);
        j += 1;
    }
    if out.is_empty() {
        out.push(t_max);
    }
    out
}

fn episode_rng(master: u64, stream: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream, index as u64))
}

fn dqn_force(net: &QNetwork<f32>, obs: &[f32], bound: f64) -> Result<f64, SimError> {
    let a = greedy_action(net, obs).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(crate::control::ForceLevels::new(bound, net.actions()).level(a))
}

/// One quadratic episode from the ground state.
pub fn quadratic_episode(
    sim: &OscSimulator,
    problem: Problem,
    controller: &Controller,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeRecord, SimError> {
    let p = sim.params();
    let (k, m, tau, bound) = (p.k, p.m, p.control_dt(), p.force_bound);
    match controller {
        Controller::Policy(policy) => {
            let probe = GaussianMoments {
                mean_x: 0.0,
                mean_p: 0.0,
                var_x: 0.5,
                var_p: 0.5,
                cov_c: 0.0,
            };
            if policy.quadratic_force(&probe, k, m, tau).is_none() {
                return Err(SimError::Config(format!("controller '{}' needs the quartic problem", policy.kind.name())));
            }
            let mut c = |o: &OscObservation<'_>| policy.quadratic_force(&o.moments, k, m, tau).unwrap_or(0.0);
            let options = EpisodeOptions {
                levels: (policy.kind == PolicyKind::DiscretizedOptimal).then(|| policy.force_levels()),
                signal_bins: 1,
                ..Default::default()
            };
            sim.run_episode(&mut c, rng, &options)
        }
        Controller::Network { net, input } => {
            let window = env::window_steps(problem, p.controls_per_unit_time);
            let mut c = |o: &OscObservation<'_>| -> f64 {
                let x = env::osc_observation(*input, o.state, &o.moments, o.history, window);
                dqn_force(net, &x, bound).unwrap_or(f64::NAN)
            };
            let options = EpisodeOptions {
                signal_bins: if *input == InputCase::Measurement { SIGNAL_BINS } else { 1 },
                ..Default::default()
            };
            sim.run_episode(&mut c, rng, &options)
        }
    }
}

pub fn quartic_episode(sim: &QuarticSimulator, controller: &Controller, rng: &mut ChaCha8Rng) -> Result<QuarticEpisode, SimError> {
    let p = sim.params();
    let (lambda, m, tau, bound) = (p.lambda, p.m, p.control_dt(), p.force_bound);
    match controller {
        Controller::Policy(policy) => {
            let probe = QuarticSummary {
                mean_x: 0.0,
                mean_p: 0.0,
                var_x: 1.0,
                x3: 0.0,
            };
            if policy.quartic_force(&probe, lambda, m, tau).is_none() {
                return Err(SimError::Config(format!("controller '{}' needs a quadratic problem", policy.kind.name())));
            }
            let mut c = |o: &QuarticObservation<'_>| {
                let s = QuarticSummary {
                    mean_x: o.moments.mean_x,
                    mean_p: o.moments.mean_p,
                    var_x: o.moments.var_x,
                    x3: o.x3,
                };
                policy.quartic_force(&s, lambda, m, tau).unwrap_or(0.0)
            };
            sim.run_episode(&mut c, rng, &QuarticEpisodeOptions::default())
        }
        Controller::Network { net, input } => {
            let mut c = |o: &QuarticObservation<'_>| -> f64 {
                match env::quartic_observation(*input, o.state) {
                    Ok(x) => dqn_force(net, &x, bound).unwrap_or(f64::NAN),
                    Err(_) => 0.0,
                }
            };
            sim.run_episode(&mut c, rng, &QuarticEpisodeOptions::default())
        }
    }
}

/// Runs `episodes` quadratic episodes in parallel; results are in episode order.
pub fn run_quadratic(
    sim: &OscSimulator,
    problem: Problem,
    controller: &Controller,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeRecord>, SimError> {
    (0..episodes)
        .into_par_iter()
        .map(|i| quadratic_episode(sim, problem, controller, &mut episode_rng(seed, QUADRATIC_STREAM, i)))
        .collect()
}

pub fn run_quartic(sim: &QuarticSimulator, controller: &Controller, episodes: usize, seed: u64) -> Result<Vec<QuarticEpisode>, SimError> {
    (0..episodes)
        .into_par_iter()
        .map(|i| quartic_episode(sim, controller, &mut episode_rng(seed, QUARTIC_STREAM, i)))
        .collect()
}

/// Value at time `t`; an episode that ended earlier contributes its last value.
fn sampled<T>(steps: &[T], time: impl Fn(&T) -> f64, value: impl Fn(&T) -> f64, t: f64) -> Option<f64> {
    steps
        .iter()
        .find(|s| (time(s) - t).abs() < 1e-6)
        .or_else(|| steps.last().filter(|s| time(s) < t))
        .map(value)
}

/// Per-episode average of ⟨n⟩ over the sampling times.
pub fn cooling_samples(record: &EpisodeRecord, times: &[f64]) -> Option<f64> {
    let v: Vec<f64> = times
        .iter()
        .filter_map(|&t| sampled(&record.steps, |s| s.time, |s| s.phonon, t))
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn quartic_samples(ep: &QuarticEpisode, times: &[f64]) -> Option<f64> {
    let v: Vec<f64> = times
        .iter()
        .filter_map(|&t| sampled(&ep.steps, |s| s.time, |s| s.energy, t))
        .collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean ⟨n⟩ sampled every 15 time units after the warm-up.
pub fn evaluate_cooling(records: &[EpisodeRecord], t_max: f64) -> Estimate {
    let times = sample_times(WARMUP, COOLING_PERIOD, t_max);
    let per: Vec<f64> = records.iter().filter_map(|r| cooling_samples(r, &times)).collect();
    mean_se(&per)
}

/// Success rate with its binomial standard error.
pub fn evaluate_inverted(records: &[EpisodeRecord]) -> Estimate {
    let n = records.len();
    let ok = records.iter().filter(|r| !r.failed).count();
    let p = ok as f64 / n.max(1) as f64;
    Estimate {
        mean: p,
        se: (p * (1.0 - p) / n.max(1) as f64).sqrt(),
        episodes: n,
    }
}

/// Mean energy sampled every 20 time units after the warm-up.
pub fn evaluate_quartic(episodes: &[QuarticEpisode], t_max: f64) -> Estimate {
    let times = sample_times(WARMUP, QUARTIC_PERIOD, t_max);
    let per: Vec<f64> = episodes.iter().filter_map(|e| quartic_samples(e, &times)).collect();
    mean_se(&per)
}

pub const EPISODES_HEADER: &str = "episode,t,x_mean,p_mean,vx,vp,c,n_or_energy,force,reward,failed";

pub fn write_quadratic_csv<W: Write>(w: &mut W, records: &[EpisodeRecord]) -> std::io::Result<()> {
    writeln!(w, "# qctrl episodes v1")?;
    writeln!(w, "{EPISODES_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        let last = r.steps.len().saturating_sub(1);
        for (j, s) in r.steps.iter().enumerate() {
            let m = &s.moments;
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{},{},{},{}",
                s.time,
                m.mean_x,
                m.mean_p,
                m.var_x,
                m.var_p,
                m.cov_c,
                s.phonon,
                s.force,
                s.reward,
                (r.failed && j == last) as u8
            )?;
        }
    }
    Ok(())
}

pub fn write_quartic_csv<W: Write>(w: &mut W, episodes: &[QuarticEpisode]) -> std::io::Result<()> {
    writeln!(w, "# qctrl episodes v1")?;
    writeln!(w, "{EPISODES_HEADER}")?;
    for (i, e) in episodes.iter().enumerate() {
        let last = e.steps.len().saturating_sub(1);
        for (j, s) in e.steps.iter().enumerate() {
            let m = &s.moments;
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{},{},{},{}",
                s.time,
                m.mean_x,
                m.mean_p,
                m.var_x,
                m.var_p,
                m.cov_c,
                s.energy,
                s.force,
                s.reward,
                (e.failed && j == last) as u8
            )?;
        }
    }
    Ok(())
}

/// Outcome of an evaluation run.
#[derive(Debug, Clone)]
pub enum Runs {
    Quadratic(Vec<EpisodeRecord>),
    Quartic(Vec<QuarticEpisode>),
}

impl Runs {
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        match self {
            Runs::Quadratic(r) => write_quadratic_csv(&mut w, r)?,
            Runs::Quartic(e) => write_quartic_csv(&mut w, e)?,
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs and scores a controller with the protocol of its problem.
pub fn evaluate(
    problem: Problem,
    quadratic: &crate::osc::QuadraticParams,
    quartic: &crate::quartic::QuarticParams,
    controller: &Controller,
    episodes: usize,
    seed: u64,
) -> Result<(Estimate, Runs), HarnessError> {
    match problem {
        Problem::Quartic => {
            let sim = QuarticSimulator::new(quartic.clone())?;
            let runs = run_quartic(&sim, controller, episodes, seed)?;
            Ok((evaluate_quartic(&runs, quartic.t_max), Runs::Quartic(runs)))
        }
        _ => {
            let sim = OscSimulator::new(quadratic.clone())?;
            let runs = run_quadratic(&sim, problem, controller, episodes, seed)?;
            let est = if problem == Problem::Inverted {
                evaluate_inverted(&runs)
            } else {
                evaluate_cooling(&runs, quadratic.t_max)
            };
            Ok((est, Runs::Quadratic(runs)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osc::QuadraticParams;

    #[test]
    fn sampling_schedules() {
        assert_eq!(sample_times(WARMUP, COOLING_PERIOD, 100.0), vec![55.0, 70.0, 85.0, 100.0]);
        assert_eq!(sample_times(WARMUP, QUARTIC_PERIOD, 100.0), vec![60.0, 80.0, 100.0]);
        assert_eq!(sample_times(WARMUP, COOLING_PERIOD, 10.0), vec![10.0]);
    }

    #[test]
    fn standard_errors() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    fn small() -> QuadraticParams {
        let mut p = QuadraticParams::cooling();
        p.n_max = 40;
        p.fail_index = 35;
        p.t_max = 2.0;
        p
    }

    #[test]
    fn csv_is_reproducible() {
        let p = small();
        let sim = OscSimulator::new(p).unwrap();
        let c = Controller::Policy(ControlPolicy::new(PolicyKind::OptimalTrajectory, sim.params().force_bound));
        let render = || {
            let runs = run_quadratic(&sim, Problem::Cooling, &c, 3, 17).unwrap();
            let mut buf = Vec::new();
            write_quadratic_csv(&mut buf, &runs).unwrap();
            buf
        };
        let a = render();
        assert_eq!(a, render());
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# qctrl episodes v1"));
        assert_eq!(lines.next(), Some(EPISODES_HEADER));
        assert_eq!(lines.count(), 3 * 36);
    }

    #[test]
    fn early_end_contributes_last_value() {
        let p = small();
        let sim = OscSimulator::new(p).unwrap();
        let c = Controller::Policy(ControlPolicy::new(PolicyKind::Zero, sim.params().force_bound));
        let mut r = run_quadratic(&sim, Problem::Cooling, &c, 1, 1).unwrap().remove(0);
        r.steps.truncate(10);
        let last = r.steps[9].phonon;
        assert_eq!(cooling_samples(&r, &[1.5]), Some(last));
    }

    #[test]
    fn quartic_kind_rejected_on_quadratic_problem() {
        let sim = OscSimulator::new(small()).unwrap();
        let c = Controller::Policy(ControlPolicy::new(PolicyKind::Damping, 1.0));
        assert!(run_quadratic(&sim, Problem::Cooling, &c, 1, 0).is_err());
    }
}
