//! Quadratic potentials (harmonic k > 0, inverted k < 0) under continuous
//! position measurement, simulated in a truncated number basis.
//!
//! The state obeys the pure-state stochastic Schrödinger equation
//!
//! ```text
//! dψ = [−iH − γ/4 (x − ⟨x⟩)²] ψ dt + √(γ/2) (x − ⟨x⟩) ψ dW
//! H  = p²/2m + k x²/2 + F x
//! ```
//!
//! stepped with the mixed order-1.5 scheme (−iH implicit). The measured
//! signal per step is ⟨x⟩ + dW / (√(2γ)·dt).

use num_complex::Complex64;
use rand::Rng;

use crate::banded::{BandLu, BandMatrix};
use crate::control::policy::ForceLevels;
use crate::error::{NumericError, SimError};
use crate::qstate::{self, GaussianMoments, HarmonicBasisState};
use crate::reward::RewardShaping;
use crate::sde::{self, DriftDiffusion, IncrementPair, LinearDrift, SchemeOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticParams {
    pub k: f64,
    pub m: f64,
    pub gamma: f64,
    pub eta: f64,
    pub dt: f64,
    pub n_max: usize,
    pub fail_index: usize,
    pub fail_threshold: f64,
    /// Forces are restricted to [−force_bound, force_bound].
    pub force_bound: f64,
    pub controls_per_unit_time: usize,
    pub t_max: f64,
    pub scheme: SchemeOptions,
}

impl QuadraticParams {
    /// Harmonic cooling configuration.
    pub fn cooling() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            k: pi,
            m: 1.0 / pi,
            gamma: pi,
            eta: 1.0,
            dt: 1.0 / 720.0,
            n_max: 130,
            fail_index: 120,
            fail_threshold: 1e-5,
            force_bound: 5.0 * pi,
            controls_per_unit_time: 18,
            t_max: 100.0,
            scheme: SchemeOptions::default(),
        }
    }

    /// Inverted-potential stabilization configuration.
    pub fn inverted() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            k: -pi,
            gamma: 2.0 * pi,
            dt: 1.0 / 1440.0,
            force_bound: 10.0 * pi,
            ..Self::cooling()
        }
    }

    /// Frequency of the reference oscillator, √(|k|/m).
    pub fn omega(&self) -> f64 {
        (self.k.abs() / self.m).sqrt()
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.controls_per_unit_time as f64
    }

    /// Simulation steps per control step; the ratio must be integral.
    pub fn steps_per_control(&self) -> Result<usize, SimError> {
        let r = self.control_dt() / self.dt;
        let n = r.round();
        if (r - n).abs() > 1e-9 || n < 1.0 {
            return Err(SimError::Config(format!(
                "dt = {} does not divide the control step {}",
                self.dt,
                self.control_dt()
            )));
        }
        Ok(n as usize)
    }

    pub fn control_steps(&self) -> usize {
        (self.t_max * self.controls_per_unit_time as f64).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_string()));
        if self.n_max < 2 {
            return bad("n_max must be at least 2");
        }
        if self.fail_index > self.n_max {
            return bad("fail_index exceeds n_max");
        }
        if !(self.m > 0.0) || self.k == 0.0 || !(self.dt > 0.0) {
            return bad("need m > 0, k ≠ 0, dt > 0");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if (self.eta - 1.0).abs() > 1e-12 {
            return bad("the wavefunction simulator requires eta = 1");
        }
        if self.controls_per_unit_time == 0 || !(self.t_max > 0.0) {
            return bad("need controls_per_unit_time > 0 and t_max > 0");
        }
        self.steps_per_control()?;
        Ok(())
    }
}

/// Banded operators on the truncated basis, computed by ladder algebra.
#[derive(Debug, Clone)]
pub struct OscOperators {
    pub x: BandMatrix<f64>,
    pub x2: BandMatrix<f64>,
    pub p2: BandMatrix<f64>,
    pub number: Vec<f64>,
    /// H without the force term.
    pub h0: BandMatrix<f64>,
    // Fused-kernel coefficients.
    x_off: Vec<f64>,
    x2_diag: Vec<f64>,
    x2_off: Vec<f64>,
    h_diag: Vec<f64>,
    h_off: Vec<f64>,
}

pub fn build_operators(params: &QuadraticParams) -> OscOperators {
    let n = params.n_max + 1;
    let mw = params.m * params.omega();
    let s2 = 0.5 / mw;
    let nf = |i: usize| i as f64;
    let x = BandMatrix::from_fn(n, 1, |i, j| {
        if i.abs_diff(j) == 1 {
            (s2 * nf(i.max(j))).sqrt()
        } else {
            0.0
        }
    });
    let quad = |i: usize, j: usize, sign: f64, scale: f64| -> f64 {
        if i == j {
            scale * (2.0 * nf(i) + 1.0)
        } else if i.abs_diff(j) == 2 {
            let lo = i.min(j);
            sign * scale * (nf(lo + 1) * nf(lo + 2)).sqrt()
        } else {
            0.0
        }
    };
    let x2 = BandMatrix::from_fn(n, 2, |i, j| quad(i, j, 1.0, s2));
    let p2 = BandMatrix::from_fn(n, 2, |i, j| quad(i, j, -1.0, 0.5 * mw));
    let h0 = BandMatrix::from_fn(n, 2, |i, j| p2.get(i, j) / (2.0 * params.m) + 0.5 * params.k * x2.get(i, j));
    let x_off = (0..n).map(|i| x.get(i, i + 1)).collect();
    let x2_diag = (0..n).map(|i| x2.get(i, i)).collect();
    let x2_off = (0..n).map(|i| x2.get(i, i + 2)).collect();
    let h_diag = (0..n).map(|i| h0.get(i, i)).collect();
    let h_off = (0..n).map(|i| h0.get(i, i + 2)).collect();
    OscOperators {
        number: (0..n).map(nf).collect(),
        x,
        x2,
        p2,
        h0,
        x_off,
        x2_diag,
        x2_off,
        h_diag,
        h_off,
    }
}

impl OscOperators {
    pub fn dim(&self) -> usize {
        self.number.len()
    }

    /// xψ, x²ψ and (H₀ + F x)ψ in one pass.
    fn fused(&self, y: &[Complex64], force: f64, xy: &mut [Complex64], x2y: &mut [Complex64], hy: &mut [Complex64]) {
        let n = y.len();
        for i in 0..n {
            let mut xv = ZERO;
            if i > 0 {
                xv += y[i - 1] * self.x_off[i - 1];
            }
            if i + 1 < n {
                xv += y[i + 1] * self.x_off[i];
            }
            let mut q = y[i] * self.x2_diag[i];
            let mut h = y[i] * self.h_diag[i];
            if i >= 2 {
                q += y[i - 2] * self.x2_off[i - 2];
                h += y[i - 2] * self.h_off[i - 2];
            }
            if i + 2 < n {
                q += y[i + 2] * self.x2_off[i];
                h += y[i + 2] * self.h_off[i];
            }
            xy[i] = xv;
            x2y[i] = q;
            hy[i] = h + xv * force;
        }
    }

    fn apply_h(&self, y: &[Complex64], force: f64, out: &mut [Complex64]) {
        let n = y.len();
        for i in 0..n {
            let mut h = y[i] * self.h_diag[i];
            if i >= 2 {
                h += y[i - 2] * self.h_off[i - 2];
            }
            if i + 2 < n {
                h += y[i + 2] * self.h_off[i];
            }
            if force != 0.0 {
                let mut xv = ZERO;
                if i > 0 {
                    xv += y[i - 1] * self.x_off[i - 1];
                }
                if i + 1 < n {
                    xv += y[i + 1] * self.x_off[i];
                }
                h += xv * force;
            }
            out[i] = h;
        }
    }

    fn apply_x(&self, y: &[Complex64], out: &mut [Complex64]) {
        let n = y.len();
        for i in 0..n {
            let mut xv = ZERO;
            if i > 0 {
                xv += y[i - 1] * self.x_off[i - 1];
            }
            if i + 1 < n {
                xv += y[i + 1] * self.x_off[i];
            }
            out[i] = xv;
        }
    }

    /// The full Hamiltonian including the force term.
    pub fn hamiltonian(&self, force: f64) -> BandMatrix<f64> {
        let n = self.dim();
        BandMatrix::from_fn(n, 2, |i, j| self.h0.get(i, j) + force * self.x.get(i, j))
    }
}

fn mean_of(y: &[Complex64], xy: &[Complex64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in y.iter().zip(xy) {
        num += (a.conj() * b).re;
        den += a.norm_sqr();
    }
    num / den
}

/// −iH with the implicit solve factored for one force and step size.
struct Coherent<'a> {
    ops: &'a OscOperators,
    force: f64,
    dt: f64,
    lu: BandLu,
}

impl LinearDrift<Vec<Complex64>> for Coherent<'_> {
    fn apply(&self, y: &Vec<Complex64>, out: &mut Vec<Complex64>) {
        self.ops.apply_h(y, self.force, out);
        for o in out.iter_mut() {
            *o *= -I;
        }
    }

    fn solve_implicit(&self, dt: f64, rhs: &Vec<Complex64>, out: &mut Vec<Complex64>) -> Result<(), NumericError> {
        if dt != self.dt {
            return Err(NumericError::NoSolution(format!(
                "factored for dt = {}, asked for {dt}",
                self.dt
            )));
        }
        out.copy_from_slice(rhs);
        self.lu.solve_in_place(out);
        Ok(())
    }
}

/// The measurement SSE for a fixed force: a₁ = −iH, a₂ = −γ/4 (x − ⟨x⟩)²,
/// b = √(γ/2)(x − ⟨x⟩).
pub struct QuadraticSse<'a> {
    coherent: Coherent<'a>,
    gamma: f64,
}

impl<'a> QuadraticSse<'a> {
    pub fn new(ops: &'a OscOperators, force: f64, gamma: f64, dt: f64) -> Result<Self, NumericError> {
        let h = ops.hamiltonian(force);
        let a = h.map(|v| Complex64::new(0.0, 0.5 * dt * v));
        let mut a = a;
        for i in 0..ops.dim() {
            a.add(i, i, Complex64::new(1.0, 0.0));
        }
        let lu = BandLu::factor(&a)?;
        Ok(Self {
            coherent: Coherent { ops, force, dt, lu },
            gamma,
        })
    }
}

impl DriftDiffusion<Vec<Complex64>> for QuadraticSse<'_> {
    fn drift(&self, y: &Vec<Complex64>, out: &mut Vec<Complex64>) {
        let mut a1 = y.clone();
        self.split_drift(y, &mut a1, out);
        for (o, v) in out.iter_mut().zip(&a1) {
            *o += v;
        }
    }

    fn diffusion(&self, y: &Vec<Complex64>, out: &mut Vec<Complex64>) {
        self.coherent.ops.apply_x(y, out);
        let mean = mean_of(y, out);
        let s = (0.5 * self.gamma).sqrt();
        for (o, v) in out.iter_mut().zip(y) {
            *o = (*o - v * mean) * s;
        }
    }

    fn linear_part(&self) -> Option<&dyn LinearDrift<Vec<Complex64>>> {
        Some(&self.coherent)
    }

    fn split_drift(&self, y: &Vec<Complex64>, linear: &mut Vec<Complex64>, nonlinear: &mut Vec<Complex64>) {
        let n = y.len();
        let mut xy = vec![ZERO; n];
        self.coherent
            .ops
            .fused(y, self.coherent.force, &mut xy, nonlinear, linear);
        let mean = mean_of(y, &xy);
        let g = -0.25 * self.gamma;
        for i in 0..n {
            linear[i] *= -I;
            // (x − m)² y = x²y − 2m·xy + m²y
            nonlinear[i] = (nonlinear[i] - xy[i] * (2.0 * mean) + y[i] * (mean * mean)) * g;
        }
    }
}

/// Per-step outcome of one control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStepOutcome {
    /// Sum of the per-step measurement signals.
    pub signal_sum: f64,
    /// Mean signal within each of the requested bins.
    pub signal_bins: Vec<f64>,
}

/// Full-state simulator for one parameter set.
#[derive(Debug, Clone)]
pub struct OscSimulator {
    params: QuadraticParams,
    ops: OscOperators,
    steps_per_control: usize,
}

impl OscSimulator {
    pub fn new(params: QuadraticParams) -> Result<Self, SimError> {
        params.validate()?;
        let ops = build_operators(&params);
        let steps_per_control = params.steps_per_control()?;
        Ok(Self {
            params,
            ops,
            steps_per_control,
        })
    }

    pub fn params(&self) -> &QuadraticParams {
        &self.params
    }

    pub fn operators(&self) -> &OscOperators {
        &self.ops
    }

    pub fn steps_per_control(&self) -> usize {
        self.steps_per_control
    }

    pub fn ground_state(&self) -> HarmonicBasisState {
        HarmonicBasisState::ground(self.params.n_max, self.params.m, self.params.omega())
    }

    /// The SSE problem for a fixed force, with its implicit solve factored.
    pub fn problem(&self, force: f64) -> Result<QuadraticSse<'_>, SimError> {
        Ok(QuadraticSse::new(&self.ops, force, self.params.gamma, self.params.dt)?)
    }

    /// Advances one simulation step with given increments and renormalizes.
    /// Returns the measurement signal.
    pub fn step_with(
        &self,
        problem: &QuadraticSse<'_>,
        state: &mut HarmonicBasisState,
        inc: IncrementPair,
    ) -> Result<f64, NumericError> {
        let dt = self.params.dt;
        let mut xy = vec![ZERO; state.amplitudes.len()];
        self.ops.apply_x(&state.amplitudes, &mut xy);
        let mean = mean_of(&state.amplitudes, &xy);
        let next = sde::step_mixed_implicit_15(problem, &state.amplitudes, dt, inc, self.params.scheme)?;
        state.amplitudes = next;
        state.normalize();
        if !state.norm_sq().is_finite() {
            return Err(NumericError::NonFinite { context: "renormalization" });
        }
        let signal = if self.params.gamma > 0.0 {
            mean + inc.dw / ((2.0 * self.params.gamma).sqrt() * dt)
        } else {
            mean
        };
        Ok(signal)
    }

    /// One simulation step at the given force.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut HarmonicBasisState, force: f64, rng: &mut R) -> Result<f64, SimError> {
        self.check_force(force)?;
        let problem = self.problem(force)?;
        let inc = sde::sample_increments(rng, self.params.dt);
        self.step_with(&problem, state, inc)
            .map_err(|source| SimError::Diverged { time: f64::NAN, source })
    }

    fn check_force(&self, force: f64) -> Result<(), SimError> {
        let bound = self.params.force_bound;
        if !force.is_finite() || force.abs() > bound * (1.0 + 1e-12) {
            return Err(SimError::ForceOutOfBounds { force, bound });
        }
        Ok(())
    }

    /// Holds `force` for one control interval.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        state: &mut HarmonicBasisState,
        force: f64,
        rng: &mut R,
        bins: usize,
    ) -> Result<ControlStepOutcome, SimError> {
        self.check_force(force)?;
        let problem = self.problem(force)?;
        let bins = bins.max(1);
        let mut signal_bins = vec![0.0; bins];
        let mut counts = vec![0usize; bins];
        let mut signal_sum = 0.0;
        for s in 0..self.steps_per_control {
            let inc = sde::sample_increments(rng, self.params.dt);
            let signal = self
                .step_with(&problem, state, inc)
                .map_err(|source| SimError::Diverged { time: f64::NAN, source })?;
            signal_sum += signal;
            let b = s * bins / self.steps_per_control;
            signal_bins[b] += signal;
            counts[b] += 1;
        }
        for (v, c) in signal_bins.iter_mut().zip(&counts) {
            if *c > 0 {
                *v /= *c as f64;
            }
        }
        Ok(ControlStepOutcome { signal_sum, signal_bins })
    }

    /// |c_fail_index| above the threshold.
    pub fn is_failed(&self, state: &HarmonicBasisState) -> bool {
        state.amplitudes[self.params.fail_index].norm() > self.params.fail_threshold
    }

    pub fn run_episode<C, R>(&self, controller: &mut C, rng: &mut R, options: &EpisodeOptions) -> Result<EpisodeRecord, SimError>
    where
        C: OscController + ?Sized,
        R: Rng + ?Sized,
    {
        let p = &self.params;
        let mut state = self.ground_state();
        let mut steps: Vec<EpisodeStep> = Vec::with_capacity(p.control_steps());
        let mut moments = qstate::observables(&state)?;
        let mut phonon = qstate::phonon_number(&state);
        let mut failed = false;
        let mut end_time = 0.0;
        for i in 0..p.control_steps() {
            let time = i as f64 * p.control_dt();
            let obs = OscObservation {
                time,
                state: &state,
                moments,
                phonon,
                history: &steps,
            };
            let force = controller.force(&obs)?;
            if let Some(levels) = &options.levels {
                if !levels.contains(force) {
                    return Err(SimError::ForceNotAllowed { force });
                }
            }
            let out = self
                .advance(&mut state, force, rng, options.signal_bins)
                .map_err(|e| match e {
                    SimError::Diverged { source, .. } => SimError::Diverged { time, source },
                    other => other,
                })?;
            end_time = (i + 1) as f64 * p.control_dt();
            failed = self.is_failed(&state);
            moments = qstate::observables(&state)?;
            phonon = qstate::phonon_number(&state);
            let reward = options.reward.reward(phonon, failed);
            steps.push(EpisodeStep {
                time: end_time,
                moments,
                phonon,
                force,
                signal: out.signal_sum,
                signal_bins: out.signal_bins,
                reward,
            });
            if failed {
                break;
            }
            if options.stop_above.is_some_and(|limit| phonon > limit) {
                break;
            }
        }
        Ok(EpisodeRecord {
            steps,
            failed,
            end_time,
        })
    }
}

/// What a controller sees before choosing the force for the next interval.
#[derive(Debug, Clone, Copy)]
pub struct OscObservation<'a> {
    pub time: f64,
    pub state: &'a HarmonicBasisState,
    pub moments: GaussianMoments,
    pub phonon: f64,
    pub history: &'a [EpisodeStep],
}

pub trait OscController {
    fn force(&mut self, obs: &OscObservation<'_>) -> Result<f64, SimError>;
}

impl<F> OscController for F
where
    F: FnMut(&OscObservation<'_>) -> f64,
{
    fn force(&mut self, obs: &OscObservation<'_>) -> Result<f64, SimError> {
        Ok(self(obs))
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions {
    /// When set, forces outside these levels are rejected.
    pub levels: Option<ForceLevels>,
    pub reward: RewardShaping,
    /// Ends the episode (not as a failure) once ⟨n⟩ exceeds this.
    pub stop_above: Option<f64>,
    /// Signal bins recorded per control step.
    pub signal_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    /// Time at the end of the control interval.
    pub time: f64,
    pub moments: GaussianMoments,
    pub phonon: f64,
    pub force: f64,
    pub signal: f64,
    pub signal_bins: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub steps: Vec<EpisodeStep>,
    pub failed: bool,
    pub end_time: f64,
}

impl EpisodeRecord {
    /// The recorded step whose end time is closest to `t`.
    pub fn at_time(&self, t: f64) -> Option<&EpisodeStep> {
        self.steps
            .iter()
            .min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs()))
            .filter(|s| (s.time - t).abs() < 1e-6)
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn presets_are_consistent() {
        for p in [QuadraticParams::cooling(), QuadraticParams::inverted()] {
            p.validate().unwrap();
            assert!((p.omega() - PI).abs() < 1e-12);
        }
        assert_eq!(QuadraticParams::cooling().steps_per_control().unwrap(), 40);
        assert_eq!(QuadraticParams::inverted().steps_per_control().unwrap(), 80);
        assert_eq!(QuadraticParams::cooling().control_steps(), 1800);
    }

    #[test]
    fn position_operator_entries() {
        let ops = build_operators(&QuadraticParams::cooling());
        assert!((ops.x.get(0, 1) - 0.5f64.sqrt()).abs() < 1e-15);
        for i in 0..ops.dim() {
            for j in 0..ops.dim() {
                assert_eq!(ops.x.get(i, j), ops.x.get(j, i));
            }
        }
    }

    #[test]
    fn harmonic_hamiltonian_is_diagonal() {
        let p = QuadraticParams::cooling();
        let ops = build_operators(&p);
        for n in 0..ops.dim() {
            assert!((ops.h0.get(n, n) - PI * (n as f64 + 0.5)).abs() < 1e-10);
            if n + 2 < ops.dim() {
                assert!(ops.h0.get(n, n + 2).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn canonical_commutator_on_interior() {
        let p = QuadraticParams::cooling();
        let ops = build_operators(&p);
        let n = ops.dim();
        let mw = p.m * p.omega();
        // p = i√(mω/2)(a† − a) is i times a real antisymmetric matrix.
        let x = ops.x.to_dense();
        let pr = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            if i == j + 1 {
                (0.5 * mw * i as f64).sqrt()
            } else if j == i + 1 {
                -(0.5 * mw * j as f64).sqrt()
            } else {
                0.0
            }
        });
        // [x, p] = i (x·pr − pr·x)
        let comm = &x * &pr - &pr * &x;
        for i in 0..=p.n_max - 2 {
            for j in 0..=p.n_max - 2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_drift_is_consistent() {
        let sim = OscSimulator::new(QuadraticParams::cooling()).unwrap();
        let problem = sim.problem(1.3).unwrap();
        let mut y = vec![ZERO; 131];
        for (i, v) in y.iter_mut().enumerate().take(6) {
            *v = Complex64::new(1.0 / (i + 1) as f64, 0.2 * i as f64);
        }
        let mut a1 = y.clone();
        let mut a2 = y.clone();
        problem.split_drift(&y, &mut a1, &mut a2);
        let mut lin = y.clone();
        problem.linear_part().unwrap().apply(&y, &mut lin);
        let mut full = y.clone();
        problem.drift(&y, &mut full);
        for i in 0..131 {
            assert!((a1[i] - lin[i]).norm() < 1e-12);
            assert!((a1[i] + a2[i] - full[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn unmeasured_ground_state_is_stationary() {
        let p = QuadraticParams {
            gamma: 0.0,
            ..QuadraticParams::cooling()
        };
        let sim = OscSimulator::new(p).unwrap();
        let mut s = sim.ground_state();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            sim.advance(&mut s, 0.0, &mut rng, 1).unwrap();
        }
        assert!((s.amplitudes[0].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn force_bounds_enforced() {
        let sim = OscSimulator::new(QuadraticParams::cooling()).unwrap();
        let mut s = sim.ground_state();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sim.advance(&mut s, 100.0, &mut rng, 1),
            Err(SimError::ForceOutOfBounds { .. })
        ));
    }

    #[test]
    fn eta_below_one_rejected() {
        let p = QuadraticParams {
            eta: 0.5,
            ..QuadraticParams::cooling()
        };
        assert!(matches!(OscSimulator::new(p), Err(SimError::Config(_))));
    }

    #[test]
    fn discrete_levels_enforced() {
        let sim = OscSimulator::new(QuadraticParams {
            t_max: 1.0,
            ..QuadraticParams::cooling()
        })
        .unwrap();
        let opts = EpisodeOptions {
            levels: Some(ForceLevels::new(5.0 * PI, 21)),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = |_: &OscObservation<'_>| 0.3;
        assert!(matches!(
            sim.run_episode(&mut c, &mut rng, &opts),
            Err(SimError::ForceNotAllowed { .. })
        ));
    }

    #[test]
    fn episode_is_deterministic() {
        let sim = OscSimulator::new(QuadraticParams {
            t_max: 1.0,
            ..QuadraticParams::cooling()
        })
        .unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = |o: &OscObservation<'_>| -o.moments.mean_p;
            sim.run_episode(&mut c, &mut rng, &EpisodeOptions::default()).unwrap()
        };
        let a = run(5);
        assert_eq!(a, run(5));
        assert_eq!(a.steps.len(), 18);
        assert!((a.end_time - 1.0).abs() < 1e-12);
        assert!(a.at_time(0.5).is_some());
    }
}
