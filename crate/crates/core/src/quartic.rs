//! Finite-difference simulation of a measured particle in V = λx⁴.
//!
//! Each step first applies the measurement part of the SSE with the
//! explicit order-1.5 scheme, then the coherent part through a truncated
//! Taylor series of exp(−iH dt), and finally renormalizes. Derivatives use
//! nine-point stencils with zero padding outside the grid.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

use crate::control::policy::ForceLevels;
use crate::error::{NumericError, SimError};
use crate::qstate::{self, GaussianMoments, Grid, GridState, PotentialSpec};
use crate::reward::RewardShaping;
use crate::sde::{self, DriftDiffusion, IncrementPair, SchemeOptions};
use crate::stencil;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticInit {
    /// Position standard deviation of the initial packet.
    pub sigma: f64,
    /// Wavenumbers are drawn uniformly from [−k_range, k_range].
    pub k_range: f64,
    /// Measured, uncontrolled evolution before the state is accepted.
    pub evolve_time: f64,
    pub accept_energy: f64,
    pub max_rejections: usize,
}

impl Default for QuarticInit {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            k_range: 0.4,
            evolve_time: 15.0,
            accept_energy: 18.0,
            max_rejections: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticParams {
    pub lambda: f64,
    pub m: f64,
    pub d: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub dt: f64,
    pub gamma: f64,
    pub eta: f64,
    pub force_bound: f64,
    pub controls_per_unit_time: usize,
    pub t_max: f64,
    pub fail_energy: f64,
    /// 1-based distance from each border of the point whose amplitude signals failure.
    pub border_offset: usize,
    pub border_threshold: f64,
    /// Truncation order of the time-evolution series. Order 5 amplifies the
    /// highest grid modes (|R₅(iy)| > 1 for small y) and the resulting border
    /// noise ends episodes early; order 4 is contractive on this grid.
    pub taylor_order: usize,
    pub init: QuarticInit,
}

impl Default for QuarticParams {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            lambda: pi / 25.0,
            m: 1.0 / pi,
            d: 0.1,
            x_min: -8.0,
            x_max: 8.0,
            dt: 1.0 / 1440.0,
            gamma: 0.01 * pi,
            eta: 1.0,
            force_bound: 5.0 * pi,
            controls_per_unit_time: 18,
            t_max: 100.0,
            fail_energy: 20.0,
            border_offset: 5,
            border_threshold: 1e-5,
            taylor_order: 4,
            init: QuarticInit::default(),
        }
    }
}

impl QuarticParams {
    pub fn grid(&self) -> Grid {
        Grid::from_range(self.x_min, self.x_max, self.d)
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.controls_per_unit_time as f64
    }

    pub fn steps_per_control(&self) -> Result<usize, SimError> {
        let r = self.control_dt() / self.dt;
        let n = r.round();
        if (r - n).abs() > 1e-9 || n < 1.0 {
            return Err(SimError::Config(format!("dt = {} does not divide the control step", self.dt)));
        }
        Ok(n as usize)
    }

    pub fn control_steps(&self) -> usize {
        (self.t_max * self.controls_per_unit_time as f64).round() as usize
    }

    pub fn potential(&self) -> PotentialSpec {
        PotentialSpec::Quartic { lambda: self.lambda }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        let cells = (self.x_max - self.x_min) / self.d;
        if !(self.d > 0.0) || (cells - cells.round()).abs() > 1e-9 || cells < 16.0 {
            return bad("grid range must be a whole number (≥ 16) of spacings");
        }
        if (cells.round() as usize) % 2 != 0 {
            return bad("grid must have an odd number of points");
        }
        if (self.eta - 1.0).abs() > 1e-12 {
            return bad("the wavefunction simulator requires eta = 1");
        }
        if !(self.m > 0.0) || !(self.dt > 0.0) || !(self.gamma >= 0.0) {
            return bad("need m > 0, dt > 0, gamma ≥ 0");
        }
        if self.taylor_order == 0 {
            return bad("taylor_order must be at least 1");
        }
        if self.border_offset == 0 || 2 * self.border_offset > cells as usize {
            return bad("border_offset out of range");
        }
        if self.controls_per_unit_time == 0 || !(self.t_max > 0.0) {
            return bad("need controls_per_unit_time > 0 and t_max > 0");
        }
        self.steps_per_control()?;
        Ok(())
    }
}

/// Dense Hamiltonian matrix on the grid (force included).
pub fn hamiltonian_matrix(params: &QuarticParams, force: f64) -> nalgebra::DMatrix<f64> {
    let grid = params.grid();
    let mut h = stencil::second_derivative_matrix(grid.len, params.d).to_dense() * (-0.5 / params.m);
    for j in 0..grid.len {
        let x = grid.x(j);
        h[(j, j)] += params.lambda * x.powi(4) + force * x;
    }
    h
}

/// The lowest `count` eigenvalues of the grid Hamiltonian without force.
pub fn spectrum(params: &QuarticParams, count: usize) -> Vec<f64> {
    let eig = SymmetricEigen::new(hamiltonian_matrix(params, 0.0));
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

/// Lowest eigenpair of the grid Hamiltonian, normalized on the grid with a
/// positive value at the center.
pub fn ground_state(params: &QuarticParams) -> (f64, GridState) {
    let grid = params.grid();
    let eig = SymmetricEigen::new(hamiltonian_matrix(params, 0.0));
    let (idx, e0) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let col = eig.eigenvectors.column(idx);
    let sign = if col[grid.len / 2] < 0.0 { -1.0 } else { 1.0 };
    let amplitudes = col.iter().map(|&v| Complex64::new(sign * v, 0.0)).collect();
    let mut s = GridState {
        amplitudes,
        grid,
        mass: params.m,
    };
    s.normalize();
    (e0, s)
}

/// Measurement part of the SSE, pointwise on the grid.
struct Measurement<'a> {
    x: &'a [f64],
    gamma: f64,
}

impl Measurement<'_> {
    fn mean(&self, y: &[Complex64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (c, x) in y.iter().zip(self.x) {
            let w = c.norm_sqr();
            num += w * x;
            den += w;
        }
        num / den
    }
}

impl DriftDiffusion<Vec<Complex64>> for Measurement<'_> {
    fn drift(&self, y: &Vec<Complex64>, out: &mut Vec<Complex64>) {
        let mean = self.mean(y);
        let g = -0.25 * self.gamma;
        for ((o, c), x) in out.iter_mut().zip(y).zip(self.x) {
            let s = x - mean;
            *o = c * (g * s * s);
        }
    }

    fn diffusion(&self, y: &Vec<Complex64>, out: &mut Vec<Complex64>) {
        let mean = self.mean(y);
        let g = (0.5 * self.gamma).sqrt();
        for ((o, c), x) in out.iter_mut().zip(y).zip(self.x) {
            *o = c * (g * (x - mean));
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuarticSimulator {
    params: QuarticParams,
    grid: Grid,
    x: Vec<f64>,
    potential: Vec<f64>,
    steps_per_control: usize,
}

impl QuarticSimulator {
    pub fn new(params: QuarticParams) -> Result<Self, SimError> {
        params.validate()?;
        let grid = params.grid();
        let x = grid.points();
        let potential = x.iter().map(|x| params.lambda * x.powi(4)).collect();
        let steps_per_control = params.steps_per_control()?;
        Ok(Self {
            params,
            grid,
            x,
            potential,
            steps_per_control,
        })
    }

    pub fn params(&self) -> &QuarticParams {
        &self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn steps_per_control(&self) -> usize {
        self.steps_per_control
    }

    /// out = H ψ with H = −(1/2m)∂² + λx⁴ + F x.
    pub fn apply_hamiltonian(&self, psi: &[Complex64], force: f64, out: &mut [Complex64]) {
        stencil::second_derivative(psi, self.params.d, out);
        let kin = -0.5 / self.params.m;
        for j in 0..psi.len() {
            out[j] = out[j] * kin + psi[j] * (self.potential[j] + force * self.x[j]);
        }
    }

    /// ψ ← Σ_{n ≤ order} (−i dt H)ⁿ/n! ψ
    pub fn taylor_propagate(&self, psi: &mut [Complex64], force: f64, dt: f64) {
        let n = psi.len();
        let mut term = psi.to_vec();
        let mut next = vec![ZERO; n];
        for k in 1..=self.params.taylor_order {
            self.apply_hamiltonian(&term, force, &mut next);
            let c = -I * (dt / k as f64);
            for j in 0..n {
                term[j] = next[j] * c;
                psi[j] += term[j];
            }
        }
    }

    /// One step with given increments; returns the measurement signal.
    pub fn step_with(&self, state: &mut GridState, force: f64, inc: IncrementPair) -> Result<f64, NumericError> {
        let dt = self.params.dt;
        let meas = Measurement {
            x: &self.x,
            gamma: self.params.gamma,
        };
        let mean = meas.mean(&state.amplitudes);
        if self.params.gamma > 0.0 {
            state.amplitudes = sde::step_explicit_15(&meas, &state.amplitudes, dt, inc, SchemeOptions::default())?;
        }
        self.taylor_propagate(&mut state.amplitudes, force, dt);
        let norm = state.norm_sq();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(NumericError::NonFinite { context: "grid renormalization" });
        }
        state.normalize();
        Ok(if self.params.gamma > 0.0 {
            mean + inc.dw / ((2.0 * self.params.gamma).sqrt() * dt)
        } else {
            mean
        })
    }

    pub fn step<R: Rng + ?Sized>(&self, state: &mut GridState, force: f64, rng: &mut R) -> Result<f64, SimError> {
        self.check_force(force)?;
        let inc = sde::sample_increments(rng, self.params.dt);
        self.step_with(state, force, inc)
            .map_err(|source| SimError::Diverged { time: f64::NAN, source })
    }

    fn check_force(&self, force: f64) -> Result<(), SimError> {
        let bound = self.params.force_bound;
        if !force.is_finite() || force.abs() > bound * (1.0 + 1e-12) {
            return Err(SimError::ForceOutOfBounds { force, bound });
        }
        Ok(())
    }

    /// Holds `force` for one control interval; returns the signal sum and
    /// per-bin signal means.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        state: &mut GridState,
        force: f64,
        rng: &mut R,
        bins: usize,
    ) -> Result<(f64, Vec<f64>), SimError> {
        self.check_force(force)?;
        let bins = bins.max(1);
        let mut sums = vec![0.0; bins];
        let mut counts = vec![0usize; bins];
        let mut total = 0.0;
        for s in 0..self.steps_per_control {
            let inc = sde::sample_increments(rng, self.params.dt);
            let signal = self
                .step_with(state, force, inc)
                .map_err(|source| SimError::Diverged { time: f64::NAN, source })?;
            total += signal;
            let b = s * bins / self.steps_per_control;
            sums[b] += signal;
            counts[b] += 1;
        }
        for (v, c) in sums.iter_mut().zip(&counts) {
            if *c > 0 {
                *v /= *c as f64;
            }
        }
        Ok((total, sums))
    }

    pub fn energy(&self, state: &GridState) -> f64 {
        qstate::grid_energy(state, self.params.potential())
    }

    /// Energy above the limit, or amplitude above threshold at the
    /// `border_offset`-th point from either end.
    pub fn failure_check(&self, state: &GridState) -> bool {
        let n = state.amplitudes.len();
        let i = self.params.border_offset - 1;
        let edge = state.amplitudes[i].norm().max(state.amplitudes[n - 1 - i].norm());
        let e = self.energy(state);
        !e.is_finite() || e > self.params.fail_energy || edge > self.params.border_threshold
    }

    /// Gaussian packet with a random wavenumber, evolved under measurement
    /// without control; resampled until its energy is below the limit.
    pub fn init_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GridState, SimError> {
        let init = &self.params.init;
        let steps = (init.evolve_time / self.params.dt).round() as usize;
        for _ in 0..=init.max_rejections {
            let k0 = if init.k_range > 0.0 {
                rng.random_range(-init.k_range..=init.k_range)
            } else {
                0.0
            };
            let mut s = GridState::gaussian_packet(self.grid, self.params.m, 0.0, init.sigma, k0);
            let mut ok = true;
            for _ in 0..steps {
                let inc = sde::sample_increments(rng, self.params.dt);
                if self.step_with(&mut s, 0.0, inc).is_err() {
                    ok = false;
                    break;
                }
            }
            if ok && self.energy(&s) < init.accept_energy && s.border_amplitude(self.params.border_offset) <= self.params.border_threshold {
                return Ok(s);
            }
        }
        Err(SimError::Config(format!(
            "no initial state accepted after {} attempts",
            init.max_rejections + 1
        )))
    }

    pub fn summary(state: &GridState) -> Result<(GaussianMoments, f64), SimError> {
        let moments = qstate::observables(state)?;
        let x3 = state.position_expectation(|x| x * x * x);
        Ok((moments, x3))
    }

    pub fn run_episode<C, R>(&self, controller: &mut C, rng: &mut R, options: &QuarticEpisodeOptions) -> Result<QuarticEpisode, SimError>
    where
        C: QuarticController + ?Sized,
        R: Rng + ?Sized,
    {
        let state = self.init_state(rng)?;
        self.run_from(state, controller, rng, options)
    }

    /// Runs an episode from a given initial state.
    pub fn run_from<C, R>(&self, mut state: GridState, controller: &mut C, rng: &mut R, options: &QuarticEpisodeOptions) -> Result<QuarticEpisode, SimError>
    where
        C: QuarticController + ?Sized,
        R: Rng + ?Sized,
    {
        let p = &self.params;
        let initial = state.clone();
        let mut steps: Vec<QuarticStep> = Vec::with_capacity(p.control_steps());
        let (mut moments, mut x3) = Self::summary(&state)?;
        let mut energy = self.energy(&state);
        let mut failed = false;
        let mut end_time = 0.0;
        for i in 0..p.control_steps() {
            let time = i as f64 * p.control_dt();
            let obs = QuarticObservation {
                time,
                state: &state,
                moments,
                x3,
                energy,
                history: &steps,
            };
            let force = controller.force(&obs)?;
            if let Some(levels) = &options.levels {
                if !levels.contains(force) {
                    return Err(SimError::ForceNotAllowed { force });
                }
            }
            let (signal, signal_bins) = self
                .advance(&mut state, force, rng, options.signal_bins)
                .map_err(|e| match e {
                    SimError::Diverged { source, .. } => SimError::Diverged { time, source },
                    other => other,
                })?;
            end_time = (i + 1) as f64 * p.control_dt();
            failed = self.failure_check(&state);
            energy = self.energy(&state);
            (moments, x3) = match Self::summary(&state) {
                Ok(v) => v,
                Err(_) if failed => (moments, x3),
                Err(e) => return Err(e),
            };
            steps.push(QuarticStep {
                time: end_time,
                moments,
                x3,
                energy,
                force,
                signal,
                signal_bins,
                reward: options.reward.reward(energy, failed),
            });
            if failed {
                break;
            }
        }
        Ok(QuarticEpisode {
            initial,
            steps,
            failed,
            end_time,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuarticObservation<'a> {
    pub time: f64,
    pub state: &'a GridState,
    pub moments: GaussianMoments,
    pub x3: f64,
    pub energy: f64,
    pub history: &'a [QuarticStep],
}

pub trait QuarticController {
    fn force(&mut self, obs: &QuarticObservation<'_>) -> Result<f64, SimError>;
}

impl<F> QuarticController for F
where
    F: FnMut(&QuarticObservation<'_>) -> f64,
{
    fn force(&mut self, obs: &QuarticObservation<'_>) -> Result<f64, SimError> {
        Ok(self(obs))
    }
}

#[derive(Debug, Clone)]
pub struct QuarticEpisodeOptions {
    pub levels: Option<ForceLevels>,
    pub reward: RewardShaping,
    pub signal_bins: usize,
}

impl Default for QuarticEpisodeOptions {
    fn default() -> Self {
        Self {
            levels: None,
            reward: RewardShaping::QuarticEnergy,
            signal_bins: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticStep {
    pub time: f64,
    pub moments: GaussianMoments,
    pub x3: f64,
    pub energy: f64,
    pub force: f64,
    pub signal: f64,
    pub signal_bins: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticEpisode {
    pub initial: GridState,
    pub steps: Vec<QuarticStep>,
    pub failed: bool,
    pub end_time: f64,
}

impl QuarticEpisode {
    pub fn at_time(&self, t: f64) -> Option<&QuarticStep> {
        self.steps
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .filter(|s| (s.time - t).abs() < 1e-6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn default_grid() {
        let p = QuarticParams::default();
        p.validate().unwrap();
        assert_eq!(p.grid().len, 161);
        assert_eq!(p.steps_per_control().unwrap(), 80);
    }

    #[test]
    fn ground_state_is_even_and_low() {
        let p = QuarticParams::default();
        let (e0, s) = ground_state(&p);
        assert!((e0 - 0.7177).abs() < 1e-3);
        let n = s.amplitudes.len();
        for j in 0..n {
            assert!((s.amplitudes[j] - s.amplitudes[n - 1 - j]).norm() <= 1e-8);
        }
        let sim = QuarticSimulator::new(p).unwrap();
        assert!(!sim.failure_check(&s));
        assert!((sim.energy(&s) - e0).abs() < 1e-10);
    }

    #[test]
    fn failure_rules() {
        let p = QuarticParams::default();
        let sim = QuarticSimulator::new(p.clone()).unwrap();
        let (_, g) = ground_state(&p);
        let mut spiked = g.clone();
        spiked.amplitudes[4] = Complex64::new(2e-5, 0.0);
        assert!(sim.failure_check(&spiked));
        let mut right = g.clone();
        let n = right.amplitudes.len();
        right.amplitudes[n - 5] = Complex64::new(0.0, 2e-5);
        assert!(sim.failure_check(&right));
        // A packet displaced far up the potential is above 20.
        let hot = GridState::gaussian_packet(p.grid(), p.m, 3.5, 0.5, 0.0);
        assert!(sim.energy(&hot) > 20.0);
        assert!(sim.failure_check(&hot));
    }

    #[test]
    fn hamiltonian_matches_dense() {
        let p = QuarticParams::default();
        let sim = QuarticSimulator::new(p.clone()).unwrap();
        let s = GridState::gaussian_packet(p.grid(), p.m, 0.5, 1.0, 0.2);
        let mut out = vec![ZERO; s.amplitudes.len()];
        sim.apply_hamiltonian(&s.amplitudes, 1.5, &mut out);
        let h = hamiltonian_matrix(&p, 1.5);
        for i in 0..out.len() {
            let want: Complex64 = (0..out.len()).map(|j| s.amplitudes[j] * h[(i, j)]).sum();
            assert!((want - out[i]).norm() < 1e-9);
        }
    }

    fn series_gain(order: usize, y: f64) -> f64 {
        let z = Complex64::new(0.0, -y);
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..=order {
            term = term * z / k as f64;
            sum += term;
        }
        sum.norm()
    }

    #[test]
    fn default_propagator_is_contractive_on_grid_spectrum() {
        let p = QuarticParams::default();
        let eig = nalgebra::SymmetricEigen::new(hamiltonian_matrix(&p, p.force_bound)).eigenvalues;
        let worst = |order| eig.iter().map(|&e| series_gain(order, p.dt * e)).fold(0.0, f64::max);
        assert!(worst(p.taylor_order) <= 1.0 + 1e-12);
        assert!(worst(5) > 1.0 + 1e-4);
    }

    #[test]
    fn free_evolution_conserves_energy() {
        let p = QuarticParams {
            gamma: 0.0,
            ..QuarticParams::default()
        };
        let sim = QuarticSimulator::new(p.clone()).unwrap();
        let mut s = GridState::gaussian_packet(p.grid(), p.m, 0.3, 1.0, 0.2);
        s.normalize();
        let e0 = sim.energy(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            sim.step(&mut s, 0.0, &mut rng).unwrap();
        }
        assert!((sim.energy(&s) - e0).abs() < 1e-6 * e0.abs().max(1.0));
        assert!(!sim.failure_check(&s));
    }

    #[test]
    fn zero_wavenumber_initial_energy() {
        let p = QuarticParams::default();
        let sim = QuarticSimulator::new(p.clone()).unwrap();
        let s = GridState::gaussian_packet(p.grid(), p.m, 0.0, 1.0, 0.0);
        // ⟨p²⟩ = 1/(4σ²), ⟨x⁴⟩ = 3σ⁴
        let want = 0.25 / (2.0 * p.m) + p.lambda * 3.0;
        assert!((sim.energy(&s) - want).abs() < 1e-6);
        assert!((want - (PI / 8.0 + 3.0 * PI / 25.0)).abs() < 1e-12);
    }

    #[test]
    fn init_is_deterministic() {
        let p = QuarticParams {
            init: QuarticInit {
                evolve_time: 0.5,
                ..QuarticInit::default()
            },
            ..QuarticParams::default()
        };
        let sim = QuarticSimulator::new(p).unwrap();
        let a = sim.init_state(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sim.init_state(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
