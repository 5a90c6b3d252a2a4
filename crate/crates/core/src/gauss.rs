//! The five-variable Gaussian model of a measured particle in a quadratic
//! potential.
//!
//! ```text
//! d⟨x⟩ = ⟨p⟩/m dt + √(2γη) Vx dW
//! d⟨p⟩ = (−k⟨x⟩ − F) dt + √(2γη) C dW
//! dVx  = (2C/m − 2γηVx²) dt
//! dVp  = (−2kC − 2γηC² + γ/2) dt
//! dC   = (Vp/m − kVx − 2γηVxC) dt
//! ```

use crate::qstate::GaussianMoments;
use crate::sde::IncrementPair;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentModelParams {
    pub k: f64,
    pub m: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl MomentModelParams {
    pub fn omega(&self) -> f64 {
        (self.k.abs() / self.m).sqrt()
    }
}

/// Stationary (Vx, Vp, C) of the covariance equations.
pub fn steady_covariances(k: f64, m: f64, gamma: f64, eta: f64) -> (f64, f64, f64) {
    let ge = gamma * eta;
    let root = (k * k + gamma * gamma * eta).sqrt();
    // Rationalized form avoids cancellation for weak measurement when k > 0.
    let c = if k > 0.0 {
        gamma / (2.0 * (root + k))
    } else {
        (root - k) / (2.0 * ge)
    };
    let vx = (c / (m * ge)).sqrt();
    let vp = 2.0 * c * (m * ge * c).sqrt() + k * (m * c / ge).sqrt();
    (vx, vp, c)
}

/// Time derivatives of (Vx, Vp, C).
pub fn covariance_rates(params: &MomentModelParams, vx: f64, vp: f64, c: f64) -> (f64, f64, f64) {
    let MomentModelParams { k, m, gamma, eta } = *params;
    let ge = gamma * eta;
    (
        2.0 * c / m - 2.0 * ge * vx * vx,
        -2.0 * k * c - 2.0 * ge * c * c + 0.5 * gamma,
        vp / m - k * vx - 2.0 * ge * vx * c,
    )
}

fn rk4_covariances(params: &MomentModelParams, v: (f64, f64, f64), dt: f64) -> (f64, f64, f64) {
    let f = |s: (f64, f64, f64)| covariance_rates(params, s.0, s.1, s.2);
    let add = |s: (f64, f64, f64), d: (f64, f64, f64), h: f64| (s.0 + h * d.0, s.1 + h * d.1, s.2 + h * d.2);
    let k1 = f(v);
    let k2 = f(add(v, k1, 0.5 * dt));
    let k3 = f(add(v, k2, 0.5 * dt));
    let k4 = f(add(v, k3, dt));
    (
        v.0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        v.1 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        v.2 + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    )
}

/// One step of the reduced model under constant force `force`.
///
/// The means are linear with additive (time-dependent) noise, so they are
/// advanced with the order-1.5 Itô–Taylor expansion (including the dZ
/// coupling and the dt³ drift term); the deterministic covariances use RK4.
/// With the same increments this tracks the full wavefunction simulation.
pub fn moment_step(moments: &GaussianMoments, params: &MomentModelParams, force: f64, dt: f64, inc: IncrementPair) -> GaussianMoments {
    let MomentModelParams { k, m, gamma, eta } = *params;
    let s = (2.0 * gamma * eta).sqrt();
    let (x, p) = (moments.mean_x, moments.mean_p);
    let (vx, vp, c) = (moments.var_x, moments.var_p, moments.cov_c);

    // Drift a = A Y + u with A = [[0, 1/m], [−k, 0]], u = (0, −F).
    let apply_a = |u: f64, v: f64| (v / m, -k * u);
    let a = (p / m, -k * x - force);
    let aa = apply_a(a.0, a.1);
    let aaa = apply_a(aa.0, aa.1);
    // Diffusion b = s·(Vx, C) and its time derivative ḃ.
    let b = (s * vx, s * c);
    let (dvx, _, dc) = covariance_rates(params, vx, vp, c);
    let bdot = (s * dvx, s * dc);
    let ab = apply_a(b.0, b.1);

    let IncrementPair { dw, dz } = inc;
    let new_x = x + a.0 * dt + b.0 * dw + ab.0 * dz + 0.5 * aa.0 * dt * dt + bdot.0 * (dw * dt - dz) + aaa.0 * dt.powi(3) / 6.0;
    let new_p = p + a.1 * dt + b.1 * dw + ab.1 * dz + 0.5 * aa.1 * dt * dt + bdot.1 * (dw * dt - dz) + aaa.1 * dt.powi(3) / 6.0;
    let (nvx, nvp, nc) = rk4_covariances(params, (vx, vp, c), dt);
    GaussianMoments {
        mean_x: new_x,
        mean_p: new_p,
        var_x: nvx,
        var_p: nvp,
        cov_c: nc,
    }
}

/// Deterministic part of ⟨n⟩ carried by the covariances:
/// (Vp/2m + |k|Vx/2)/ω − ½.
pub fn phonon_offset(var_x: f64, var_p: f64, k: f64, m: f64) -> f64 {
    let omega = (k.abs() / m).sqrt();
    (var_p / (2.0 * m) + 0.5 * k.abs() * var_x) / omega - 0.5
}

/// ⟨n⟩ of a Gaussian state from its five moments.
pub fn energy_from_means(moments: &GaussianMoments, k: f64, m: f64) -> f64 {
    let omega = (k.abs() / m).sqrt();
    phonon_offset(moments.var_x, moments.var_p, k, m)
        + (moments.mean_p * moments.mean_p / (2.0 * m) + 0.5 * k.abs() * moments.mean_x * moments.mean_x) / omega
}

/// Lowest average ⟨n⟩ reachable by keeping the means on p = −√(mk)x.
///
/// On that line ⟨x⟩ is an Ornstein–Uhlenbeck process with rate θ = √(k/m)
/// and noise intensity σ² = 2γηVx², so E[⟨x⟩²] = σ²/(2θ) and the mean
/// energy contributes k·E[⟨x⟩²]/ω phonons on top of the covariance offset.
pub fn cooling_floor(k: f64, m: f64, gamma: f64, eta: f64) -> f64 {
    assert!(k > 0.0, "cooling floor is defined for harmonic potentials");
    let (vx, vp, _) = steady_covariances(k, m, gamma, eta);
    let omega = (k / m).sqrt();
    let theta = omega;
    let sigma2 = 2.0 * gamma * eta * vx * vx;
    let ex2 = sigma2 / (2.0 * theta);
    phonon_offset(vx, vp, k, m) + k * ex2 / omega
}
