//! Network inputs and the simulators wrapped as learning environments.

use std::sync::Arc;

use qctrl_dqn::{DqnError, Environment, NetworkSpec, Normalizer, StepResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::ForceLevels;
use crate::osc::{EpisodeStep, OscSimulator};
use crate::qstate::{self, GaussianMoments, GridState, HarmonicBasisState, MomentVector};
use crate::quartic::QuarticSimulator;
use crate::reward::RewardShaping;

use super::config::{InputCase, Problem};

/// Basis amplitudes fed to the network in the wavefunction case.
pub const BASIS_INPUT: usize = 40;
/// Grid points dropped at each border in the quartic wavefunction case.
pub const BORDER_DISCARD: usize = 15;
/// Signal samples per control step in the measurement case.
pub const SIGNAL_BINS: usize = 10;

/// Length of the measurement history window in time units.
pub fn history_window(problem: Problem) -> f64 {
    match problem {
        Problem::Inverted => 4.0,
        _ => 6.0,
    }
}

/// Reward and early-stop rule per problem and input case.
pub fn shaping(problem: Problem, input: InputCase) -> (RewardShaping, Option<f64>) {
    match (problem, input) {
        (Problem::Cooling, InputCase::Moments) => (RewardShaping::CoolingMoments, None),
        (Problem::Cooling, InputCase::Wavefunction) => (RewardShaping::CoolingScaled, Some(10.0)),
        (Problem::Cooling, InputCase::Measurement) => (RewardShaping::CoolingScaled, Some(20.0)),
        (Problem::Inverted, _) => (RewardShaping::Inverted, None),
        (Problem::Quartic, _) => (RewardShaping::QuarticEnergy, None),
    }
}

/// Control steps covered by the measurement window.
pub fn window_steps(problem: Problem, controls_per_unit_time: usize) -> usize {
    (history_window(problem) * controls_per_unit_time as f64).round() as usize
}

pub fn osc_input_len(input: InputCase, n_max: usize, window: usize) -> usize {
    match input {
        InputCase::Moments => 5,
        InputCase::Wavefunction => 2 * BASIS_INPUT.min(n_max + 1),
        InputCase::Measurement => 2 * window * SIGNAL_BINS,
    }
}

pub fn quartic_input_len(input: InputCase, grid_len: usize) -> usize {
    match input {
        InputCase::Wavefunction => 2 * grid_len.saturating_sub(2 * BORDER_DISCARD),
        _ => MomentVector::LEN,
    }
}

pub fn moments_input(m: &GaussianMoments) -> Vec<f32> {
    [m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_c].iter().map(|&v| v as f32).collect()
}

/// Real parts then imaginary parts of the lowest basis amplitudes.
pub fn basis_input(state: &HarmonicBasisState) -> Vec<f32> {
    let n = BASIS_INPUT.min(state.amplitudes.len());
    let a = &state.amplitudes[..n];
    a.iter().map(|c| c.re as f32).chain(a.iter().map(|c| c.im as f32)).collect()
}

/// Grid amplitudes without the border points, real parts then imaginary parts.
pub fn grid_input(state: &GridState) -> Vec<f32> {
    let n = state.amplitudes.len();
    let a = &state.amplitudes[BORDER_DISCARD.min(n)..n.saturating_sub(BORDER_DISCARD)];
    a.iter().map(|c| c.re as f32).chain(a.iter().map(|c| c.im as f32)).collect()
}

/// Two channels, force then signal, oldest first; steps before the start
/// of the episode are zero.
pub fn measurement_input(history: &[EpisodeStep], window: usize) -> Vec<f32> {
    let len = window * SIGNAL_BINS;
    let mut out = vec![0.0f32; 2 * len];
    let recent = &history[history.len().saturating_sub(window)..];
    let offset = window - recent.len();
    for (i, step) in recent.iter().enumerate() {
        for b in 0..SIGNAL_BINS {
            let t = (offset + i) * SIGNAL_BINS + b;
            out[t] = step.force as f32;
            out[len + t] = step.signal_bins.get(b).copied().unwrap_or(step.signal) as f32;
        }
    }
    out
}

pub fn osc_observation(
    input: InputCase,
    state: &HarmonicBasisState,
    moments: &GaussianMoments,
    history: &[EpisodeStep],
    window: usize,
) -> Vec<f32> {
    match input {
        InputCase::Moments => moments_input(moments),
        InputCase::Wavefunction => basis_input(state),
        InputCase::Measurement => measurement_input(history, window),
    }
}

pub fn quartic_observation(input: InputCase, state: &GridState) -> Result<Vec<f32>, DqnError> {
    match input {
        InputCase::Wavefunction => Ok(grid_input(state)),
        _ => qstate::moment_vector(state)
            .map(|m| m.0.iter().map(|&v| v as f32).collect())
            .map_err(|e| DqnError::Env(e.to_string())),
    }
}

/// Network layout for a problem: dense for moment and wavefunction
/// inputs, convolutional for measurement histories.
pub fn network_spec(input: InputCase, input_len: usize, actions: usize, hidden: Option<(usize, usize)>) -> NetworkSpec {
    let mut spec = match input {
        InputCase::Measurement => NetworkSpec::paper_conv(2, input_len / 2),
        _ => NetworkSpec::paper_dense(input_len),
    };
    spec.actions = actions;
    if let Some((trunk, branch)) = hidden {
        let n = spec.hidden.len();
        spec.hidden = vec![trunk; n];
        spec.advantage_hidden = branch;
        spec.value_hidden = branch;
    }
    spec
}

/// Input scaling: forces by the bound and signals by the per-bin noise
/// amplitude; the other inputs are left as they are.
pub fn default_normalizer(input: InputCase, len: usize, force_bound: f64, signal_scale: f64) -> Normalizer<f32> {
    let mut n = Normalizer::identity(len);
    if input == InputCase::Measurement {
        let half = len / 2;
        n.scale[..half].iter_mut().for_each(|s| *s = (1.0 / force_bound) as f32);
        n.scale[half..].iter_mut().for_each(|s| *s = (1.0 / signal_scale) as f32);
    }
    n
}

/// The quadratic-potential simulator as an environment.
pub struct OscEnv {
    sim: Arc<OscSimulator>,
    problem: Problem,
    input: InputCase,
    levels: ForceLevels,
    reward: RewardShaping,
    stop_above: Option<f64>,
    window: usize,
    rng: ChaCha8Rng,
    state: HarmonicBasisState,
    moments: GaussianMoments,
    history: Vec<EpisodeStep>,
}

impl OscEnv {
    pub fn new(sim: Arc<OscSimulator>, problem: Problem, input: InputCase, levels: usize) -> Self {
        let p = sim.params();
        let (reward, stop_above) = shaping(problem, input);
        let state = sim.ground_state();
        let moments = qstate::observables(&state).expect("ground state is normalized");
        Self {
            levels: ForceLevels::new(p.force_bound, levels),
            window: window_steps(problem, p.controls_per_unit_time),
            sim,
            problem,
            input,
            reward,
            stop_above,
            rng: ChaCha8Rng::seed_from_u64(0),
            state,
            moments,
            history: Vec::new(),
        }
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    pub fn history(&self) -> &[EpisodeStep] {
        &self.history
    }

    /// Per-bin standard deviation of the measurement noise.
    pub fn signal_scale(&self) -> f64 {
        let p = self.sim.params();
        let per_step = 1.0 / ((2.0 * p.gamma).sqrt() * p.dt.sqrt());
        let per_bin = self.sim.steps_per_control() as f64 / SIGNAL_BINS as f64;
        per_step / per_bin.max(1.0).sqrt()
    }

    pub fn normalizer(&self) -> Normalizer<f32> {
        default_normalizer(self.input, self.observation_len(), self.levels.bound, self.signal_scale())
    }

    fn observe(&self) -> Vec<f32> {
        osc_observation(self.input, &self.state, &self.moments, &self.history, self.window)
    }
}

fn env_err(e: impl std::fmt::Display) -> DqnError {
    DqnError::Env(e.to_string())
}

impl Environment for OscEnv {
    fn observation_len(&self) -> usize {
        osc_input_len(self.input, self.sim.params().n_max, self.window)
    }

    fn action_count(&self) -> usize {
        self.levels.count
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f32>, DqnError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = self.sim.ground_state();
        self.moments = qstate::observables(&self.state).map_err(env_err)?;
        self.history.clear();
        Ok(self.observe())
    }

    fn step(&mut self, action: usize) -> Result<StepResult, DqnError> {
        if action >= self.levels.count {
            return Err(DqnError::Shape {
                expected: self.levels.count,
                got: action,
            });
        }
        let force = self.levels.level(action);
        let bins = if self.input == InputCase::Measurement { SIGNAL_BINS } else { 1 };
        let out = self.sim.advance(&mut self.state, force, &mut self.rng, bins).map_err(env_err)?;
        let failed = self.sim.is_failed(&self.state);
        self.moments = qstate::observables(&self.state).map_err(env_err)?;
        let phonon = qstate::phonon_number(&self.state);
        let reward = self.reward.reward(phonon, failed);
        let p = self.sim.params();
        let time = (self.history.len() + 1) as f64 * p.control_dt();
        self.history.push(EpisodeStep {
            time,
            moments: self.moments,
            phonon,
            force,
            signal: out.signal_sum,
            signal_bins: out.signal_bins,
            reward,
        });
        let stopped = self.stop_above.is_some_and(|l| phonon > l);
        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminal: failed || stopped,
            truncated: self.history.len() >= p.control_steps(),
        })
    }

    fn step_duration(&self) -> f64 {
        self.sim.params().control_dt()
    }
}

/// The quartic grid simulator as an environment.
pub struct QuarticEnv {
    sim: Arc<QuarticSimulator>,
    input: InputCase,
    levels: ForceLevels,
    rng: ChaCha8Rng,
    state: GridState,
    steps: usize,
    energies: Vec<f64>,
}

impl QuarticEnv {
    pub fn new(sim: Arc<QuarticSimulator>, input: InputCase, levels: usize) -> Self {
        let p = sim.params();
        let (_, state) = crate::quartic::ground_state(p);
        Self {
            levels: ForceLevels::new(p.force_bound, levels),
            sim,
            input,
            rng: ChaCha8Rng::seed_from_u64(0),
            state,
            steps: 0,
            energies: Vec::new(),
        }
    }

    /// Energies after each step of the current episode.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn normalizer(&self) -> Normalizer<f32> {
        Normalizer::identity(self.observation_len())
    }
}

impl Environment for QuarticEnv {
    fn observation_len(&self) -> usize {
        quartic_input_len(self.input, self.sim.grid().len)
    }

    fn action_count(&self) -> usize {
        self.levels.count
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f32>, DqnError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = self.sim.init_state(&mut self.rng).map_err(env_err)?;
        self.steps = 0;
        self.energies.clear();
        quartic_observation(self.input, &self.state)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, DqnError> {
        if action >= self.levels.count {
            return Err(DqnError::Shape {
                expected: self.levels.count,
                got: action,
            });
        }
        let force = self.levels.level(action);
        self.sim.advance(&mut self.state, force, &mut self.rng, 1).map_err(env_err)?;
        self.steps += 1;
        let failed = self.sim.failure_check(&self.state);
        let energy = self.sim.energy(&self.state);
        self.energies.push(energy);
        let observation = if failed {
            vec![0.0; self.observation_len()]
        } else {
            quartic_observation(self.input, &self.state)?
        };
        Ok(StepResult {
            observation,
            reward: RewardShaping::QuarticEnergy.reward(energy, failed),
            terminal: failed,
            truncated: self.steps >= self.sim.params().control_steps(),
        })
    }

    fn step_duration(&self) -> f64 {
        self.sim.params().control_dt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::osc::QuadraticParams;
    use crate::quartic::QuarticParams;

    fn short_osc(problem: Problem) -> Arc<OscSimulator> {
        let mut p = if problem == Problem::Inverted {
            QuadraticParams::inverted()
        } else {
            QuadraticParams::cooling()
        };
        p.n_max = 40;
        p.fail_index = 35;
        p.t_max = 1.0;
        Arc::new(OscSimulator::new(p).unwrap())
    }

    #[test]
    fn input_sizes() {
        assert_eq!(osc_input_len(InputCase::Moments, 130, 108), 5);
        assert_eq!(osc_input_len(InputCase::Wavefunction, 130, 108), 80);
        assert_eq!(window_steps(Problem::Cooling, 18), 108);
        assert_eq!(osc_input_len(InputCase::Measurement, 130, 108), 2160);
        assert_eq!(window_steps(Problem::Inverted, 18), 72);
        assert_eq!(quartic_input_len(InputCase::Wavefunction, 161), 262);
        assert_eq!(quartic_input_len(InputCase::Moments, 161), 20);
        let spec = network_spec(InputCase::Measurement, 2160, 21, None);
        assert_eq!(spec.conv_lengths().unwrap(), vec![1080, 214, 51, 11]);
        network_spec(InputCase::Measurement, 2 * 720, 21, None).validate().unwrap();
    }

    #[test]
    fn measurement_window_is_right_aligned() {
        let step = |f: f64| EpisodeStep {
            time: 0.0,
            moments: GaussianMoments {
                mean_x: 0.0,
                mean_p: 0.0,
                var_x: 0.5,
                var_p: 0.5,
                cov_c: 0.0,
            },
            phonon: 0.0,
            force: f,
            signal: 0.0,
            signal_bins: (0..SIGNAL_BINS).map(|b| f + b as f64).collect(),
            reward: 0.0,
        };
        let h = vec![step(1.0), step(2.0)];
        let v = measurement_input(&h, 3);
        let len = 3 * SIGNAL_BINS;
        assert!(v[..SIGNAL_BINS].iter().all(|&x| x == 0.0));
        assert_eq!(v[SIGNAL_BINS], 1.0);
        assert_eq!(v[len - 1], 2.0);
        assert_eq!(v[len + 2 * SIGNAL_BINS + 3], 5.0);
    }

    #[test]
    fn osc_env_episode_runs_to_truncation() {
        for input in [InputCase::Moments, InputCase::Wavefunction, InputCase::Measurement] {
            let mut env = OscEnv::new(short_osc(Problem::Cooling), Problem::Cooling, input, 21);
            let obs = env.reset(7).unwrap();
            assert_eq!(obs.len(), env.observation_len());
            let mut n = 0;
            loop {
                let r = env.step(10).unwrap();
                n += 1;
                assert_eq!(r.observation.len(), env.observation_len());
                if r.terminal || r.truncated {
                    assert!(r.truncated && !r.terminal);
                    break;
                }
            }
            assert_eq!(n, 18);
            assert!(env.step(21).is_err());
        }
    }

    #[test]
    fn osc_env_is_deterministic_per_seed() {
        let run = |seed| {
            let mut env = OscEnv::new(short_osc(Problem::Inverted), Problem::Inverted, InputCase::Moments, 21);
            env.reset(seed).unwrap();
            (0..5).map(|i| env.step(i * 4).unwrap().observation).collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn quartic_env_observations() {
        let mut p = QuarticParams::default();
        p.t_max = 0.5;
        p.init.evolve_time = 0.5;
        let sim = Arc::new(QuarticSimulator::new(p).unwrap());
        for input in [InputCase::Moments, InputCase::Wavefunction] {
            let mut env = QuarticEnv::new(sim.clone(), input, 21);
            let obs = env.reset(5).unwrap();
            assert_eq!(obs.len(), env.observation_len());
            let r = env.step(10).unwrap();
            assert!(r.reward.is_finite());
        }
    }
}
