//! Wavefunction representations and the observables extracted from them.
//!
//! ħ = 1 throughout. Two representations are supported: amplitudes in the
//! number basis of a reference oscillator, and samples on a uniform grid.
//! Both implement [`PhaseSpace`], so moment extraction is written once.

use num_complex::Complex64;

use crate::error::StateError;
use crate::stencil;

/// Tolerance on |⟨ψ|ψ⟩ − 1| accepted by the extraction routines.
pub const NORM_TOLERANCE: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Uniform grid `x_j = x_min + j·spacing`, `j = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub spacing: f64,
    pub len: usize,
}

impl Grid {
    /// Grid covering `[x_min, x_max]` inclusive. The range must be a whole
    /// number of spacings within 1e-9.
    pub fn from_range(x_min: f64, x_max: f64, spacing: f64) -> Self {
        let cells = (x_max - x_min) / spacing;
        let rounded = cells.round();
        assert!(
            (cells - rounded).abs() < 1e-9 && rounded >= 1.0,
            "range [{x_min}, {x_max}] is not a multiple of {spacing}"
        );
        Self {
            x_min,
            spacing,
            len: rounded as usize + 1,
        }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + self.spacing * j as f64
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.x(j)).collect()
    }
}

/// Amplitudes in the eigenbasis of an oscillator with mass `mass` and
/// frequency `omega`; index n runs over 0..=n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasisState {
    pub amplitudes: Vec<Complex64>,
    pub mass: f64,
    pub omega: f64,
}

impl HarmonicBasisState {
    pub fn number_state(n: usize, n_max: usize, mass: f64, omega: f64) -> Self {
        assert!(n <= n_max);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_max + 1];
        amplitudes[n] = Complex64::new(1.0, 0.0);
        Self {
            amplitudes,
            mass,
            omega,
        }
    }

    pub fn ground(n_max: usize, mass: f64, omega: f64) -> Self {
        Self::number_state(0, n_max, mass, omega)
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>, mass: f64, omega: f64) -> Self {
        let mut s = Self {
            amplitudes,
            mass,
            omega,
        };
        s.normalize();
        s
    }

    pub fn n_max(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sq().sqrt();
        for c in &mut self.amplitudes {
            *c *= s;
        }
    }

    /// Samples the state on a grid using Hermite functions.
    pub fn to_grid(&self, grid: Grid) -> GridState {
        let mw = self.mass * self.omega;
        let scale = mw.powf(0.25);
        let n = self.amplitudes.len();
        let amplitudes = (0..grid.len)
            .map(|j| {
                let xi = mw.sqrt() * grid.x(j);
                let mut acc = Complex64::new(0.0, 0.0);
                let mut prev = 0.0;
                let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
                for (k, c) in self.amplitudes.iter().enumerate().take(n) {
                    acc += c * (scale * cur);
                    let next = (2.0 / (k as f64 + 1.0)).sqrt() * xi * cur
                        - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
                    prev = cur;
                    cur = next;
                }
                acc
            })
            .collect();
        GridState {
            amplitudes,
            grid,
            mass: self.mass,
        }
    }
}

/// Samples ψ(x_j) on a uniform grid; ⟨ψ|ψ⟩ = Σ|ψ_j|²·d.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub amplitudes: Vec<Complex64>,
    pub grid: Grid,
    pub mass: f64,
}

impl GridState {
    /// ψ ∝ exp(−(x−x0)²/(4σ²) + i k0 x), normalized on the grid.
    pub fn gaussian_packet(grid: Grid, mass: f64, x0: f64, sigma: f64, k0: f64) -> Self {
        let amplitudes = (0..grid.len)
            .map(|j| {
                let x = grid.x(j);
                let env = (-(x - x0).powi(2) / (4.0 * sigma * sigma)).exp();
                Complex64::from_polar(env, k0 * x)
            })
            .collect();
        let mut s = Self {
            amplitudes,
            grid,
            mass,
        };
        s.normalize();
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.spacing
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm_sq().sqrt();
        for c in &mut self.amplitudes {
            *c *= s;
        }
    }

    /// ⟨f(x̂)⟩ for a pointwise function.
    pub fn position_expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, c)| f(self.grid.x(j)) * c.norm_sqr())
            .sum::<f64>()
            * self.grid.spacing
    }

    /// Largest |ψ_j| among the `width` outermost points on each side.
    pub fn border_amplitude(&self, width: usize) -> f64 {
        let n = self.amplitudes.len();
        let w = width.min(n);
        self.amplitudes[..w]
            .iter()
            .chain(&self.amplitudes[n - w..])
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Minimal operator algebra needed for moment extraction.
pub trait PhaseSpace {
    fn amplitudes(&self) -> &[Complex64];
    /// out = x̂ v
    fn apply_x(&self, v: &[Complex64], out: &mut [Complex64]);
    /// out = p̂ v
    fn apply_p(&self, v: &[Complex64], out: &mut [Complex64]);
    /// ⟨a|b⟩ with the representation's measure.
    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64;

    fn norm_sq(&self) -> f64 {
        let a = self.amplitudes();
        self.inner(a, a).re
    }
}

impl PhaseSpace for HarmonicBasisState {
    fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    fn apply_x(&self, v: &[Complex64], out: &mut [Complex64]) {
        let s = (0.5 / (self.mass * self.omega)).sqrt();
        let n = v.len();
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            if k > 0 {
                acc += v[k - 1] * (k as f64).sqrt();
            }
            if k + 1 < n {
                acc += v[k + 1] * ((k + 1) as f64).sqrt();
            }
            out[k] = acc * s;
        }
    }

    fn apply_p(&self, v: &[Complex64], out: &mut [Complex64]) {
        let s = (0.5 * self.mass * self.omega).sqrt();
        let n = v.len();
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            if k > 0 {
                acc += v[k - 1] * (k as f64).sqrt();
            }
            if k + 1 < n {
                acc -= v[k + 1] * ((k + 1) as f64).sqrt();
            }
            out[k] = I * acc * s;
        }
    }

    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }
}

impl PhaseSpace for GridState {
    fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    fn apply_x(&self, v: &[Complex64], out: &mut [Complex64]) {
        for (j, (o, c)) in out.iter_mut().zip(v).enumerate() {
            *o = c * self.grid.x(j);
        }
    }

    fn apply_p(&self, v: &[Complex64], out: &mut [Complex64]) {
        stencil::first_derivative(v, self.grid.spacing, out);
        for o in out.iter_mut() {
            *o *= -I;
        }
    }

    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.grid.spacing
    }
}

/// Means and second central moments of x̂ and p̂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    /// ½⟨x̂p̂ + p̂x̂⟩ − ⟨x̂⟩⟨p̂⟩
    pub cov_c: f64,
}

impl GaussianMoments {
    /// Vx·Vp − C², which is ≥ 1/4 for any state and = 1/4 for pure Gaussians.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_p - self.cov_c * self.cov_c
    }
}

fn check_norm<S: PhaseSpace + ?Sized>(state: &S) -> Result<(), StateError> {
    let norm_sq = state.norm_sq();
    if (norm_sq - 1.0).abs() > NORM_TOLERANCE || !norm_sq.is_finite() {
        return Err(StateError::NotNormalized { norm_sq });
    }
    Ok(())
}

/// (⟨x⟩, ⟨p⟩, Vx, Vp, C) of a normalized state.
pub fn observables<S: PhaseSpace + ?Sized>(state: &S) -> Result<GaussianMoments, StateError> {
    check_norm(state)?;
    let psi = state.amplitudes();
    let n = psi.len();
    let mut xp = vec![Complex64::new(0.0, 0.0); n];
    let mut pp = vec![Complex64::new(0.0, 0.0); n];
    state.apply_x(psi, &mut xp);
    state.apply_p(psi, &mut pp);
    let mean_x = state.inner(psi, &xp).re;
    let mean_p = state.inner(psi, &pp).re;
    let x2 = state.inner(&xp, &xp).re;
    let p2 = state.inner(&pp, &pp).re;
    let sym = state.inner(&xp, &pp).re;
    Ok(GaussianMoments {
        mean_x,
        mean_p,
        var_x: x2 - mean_x * mean_x,
        var_p: p2 - mean_p * mean_p,
        cov_c: sym - mean_x * mean_p,
    })
}

/// ⟨x̂ᵏ⟩ by repeated application of x̂.
pub fn position_moment<S: PhaseSpace + ?Sized>(state: &S, k: u32) -> Result<f64, StateError> {
    check_norm(state)?;
    let psi = state.amplitudes();
    let mut v = psi.to_vec();
    let mut w = vec![Complex64::new(0.0, 0.0); psi.len()];
    for _ in 0..k {
        state.apply_x(&v, &mut w);
        std::mem::swap(&mut v, &mut w);
    }
    Ok(state.inner(psi, &v).re)
}

/// Means plus symmetrized central moments of orders two to five.
///
/// Layout: `[⟨x⟩, ⟨p⟩]`, then for each order n = 2..=5 the n+1 moments with
/// j = 0..=n momentum factors, each the average over all orderings of
/// (n−j) copies of x̂−⟨x⟩ and j copies of p̂−⟨p⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentVector(pub [f64; 20]);

impl MomentVector {
    pub const LEN: usize = 20;

    /// Offset of the order-`n` block, n ≥ 2.
    pub fn offset(order: usize) -> usize {
        assert!((2..=5).contains(&order));
        2 + (2..order).map(|m| m + 1).sum::<usize>()
    }

    /// Central moment of the given order with `p_count` momentum factors.
    pub fn central(&self, order: usize, p_count: usize) -> f64 {
        assert!(p_count <= order);
        self.0[Self::offset(order) + p_count]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn moment_vector<S: PhaseSpace + ?Sized>(state: &S) -> Result<MomentVector, StateError> {
    let g = observables(state)?;
    let psi = state.amplitudes();
    let n = psi.len();
    // vectors[len][bits] = O_{b_1} … O_{b_len} ψ, bit i set meaning p̃.
    let mut vectors: Vec<Vec<Vec<Complex64>>> = vec![vec![psi.to_vec()]];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    for len in 1..=5 {
        let mut level = Vec::with_capacity(1 << len);
        for bits in 0..(1usize << len) {
            let rest = &vectors[len - 1][bits >> 1];
            let out: Vec<Complex64> = if bits & 1 == 0 {
                state.apply_x(rest, &mut tmp);
                tmp.iter().zip(rest).map(|(a, b)| a - b * g.mean_x).collect()
            } else {
                state.apply_p(rest, &mut tmp);
                tmp.iter().zip(rest).map(|(a, b)| a - b * g.mean_p).collect()
            };
            level.push(out);
        }
        vectors.push(level);
    }
    let mut out = [0.0; 20];
    out[0] = g.mean_x;
    out[1] = g.mean_p;
    for order in 2..=5 {
        let base = MomentVector::offset(order);
        let mut counts = [0usize; 6];
        let mut sums = [0.0f64; 6];
        for (bits, v) in vectors[order].iter().enumerate() {
            let j = bits.count_ones() as usize;
            sums[j] += state.inner(psi, v).re;
            counts[j] += 1;
        }
        for j in 0..=order {
            out[base + j] = sums[j] / counts[j] as f64;
        }
    }
    Ok(MomentVector(out))
}

/// Σ n |c_n|² / Σ |c_n|².
pub fn phonon_number(state: &HarmonicBasisState) -> f64 {
    let w: f64 = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(n, c)| n as f64 * c.norm_sqr())
        .sum();
    w / state.norm_sq()
}

/// Potential part of the Hamiltonian whose energy is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    /// V = λ x⁴
    Quartic { lambda: f64 },
    /// V = k x² / 2
    Quadratic { k: f64 },
}

impl PotentialSpec {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            PotentialSpec::Quartic { lambda } => lambda * x.powi(4),
            PotentialSpec::Quadratic { k } => 0.5 * k * x * x,
        }
    }
}

/// Points at each border whose amplitude makes the kinetic stencil unreliable.
pub const ENERGY_BORDER_WIDTH: usize = stencil::HALF_WIDTH;
pub const ENERGY_BORDER_THRESHOLD: f64 = 1e-3;

/// ⟨p̂²/2m + V⟩ without border validation.
pub fn grid_energy(state: &GridState, potential: PotentialSpec) -> f64 {
    let d = state.grid.spacing;
    let mut lap = vec![Complex64::new(0.0, 0.0); state.amplitudes.len()];
    stencil::second_derivative(&state.amplitudes, d, &mut lap);
    let kinetic = -0.5 / state.mass * state.inner(&state.amplitudes, &lap).re;
    let potential = state.position_expectation(|x| potential.value(x));
    (kinetic + potential) / state.norm_sq()
}

/// ⟨p̂²/2m + V⟩ with the kinetic term from the second-derivative stencil.
pub fn energy(state: &GridState, potential: PotentialSpec) -> Result<f64, StateError> {
    let amplitude = state.border_amplitude(ENERGY_BORDER_WIDTH);
    if amplitude > ENERGY_BORDER_THRESHOLD {
        return Err(StateError::BorderAmplitude { amplitude });
    }
    check_norm(state)?;
    Ok(grid_energy(state, potential))
}
