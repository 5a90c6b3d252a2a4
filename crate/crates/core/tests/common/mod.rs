//! Test problems with exact solutions for the SDE steppers.

#![allow(dead_code)]

use qctrl::error::NumericError;
use qctrl::sde::{
    sample_increments, step_euler_maruyama, step_explicit_15, step_mixed_implicit_15, DriftDiffusion, IncrementPair,
    LinearDrift, SchemeOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// dY = μY dt + σY dW with a₁ = μY.
pub struct Gbm {
    pub mu: f64,
    pub sigma: f64,
}

impl LinearDrift<Vec<f64>> for Gbm {
    fn apply(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = self.mu * y[0];
    }

    fn solve_implicit(&self, dt: f64, rhs: &Vec<f64>, out: &mut Vec<f64>) -> Result<(), NumericError> {
        out[0] = rhs[0] / (1.0 - 0.5 * dt * self.mu);
        Ok(())
    }
}

impl DriftDiffusion<Vec<f64>> for Gbm {
    fn drift(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = self.mu * y[0];
    }

    fn diffusion(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = self.sigma * y[0];
    }

    fn linear_part(&self) -> Option<&dyn LinearDrift<Vec<f64>>> {
        Some(self)
    }
}

/// dY = −θY dt + σ dW.
pub struct Ou {
    pub theta: f64,
    pub sigma: f64,
}

impl LinearDrift<Vec<f64>> for Ou {
    fn apply(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = -self.theta * y[0];
    }

    fn solve_implicit(&self, dt: f64, rhs: &Vec<f64>, out: &mut Vec<f64>) -> Result<(), NumericError> {
        out[0] = rhs[0] / (1.0 + 0.5 * dt * self.theta);
        Ok(())
    }
}

impl DriftDiffusion<Vec<f64>> for Ou {
    fn drift(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = -self.theta * y[0];
    }

    fn diffusion(&self, _y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = self.sigma;
    }

    fn linear_part(&self) -> Option<&dyn LinearDrift<Vec<f64>>> {
        Some(self)
    }
}

/// Sums fine increments into one coarse pair: ΔZ = Σ (h·W_i + dZ_i) with W_i
/// the Brownian displacement accumulated before sub-step i.
pub fn coarsen(fine: &[IncrementPair], h: f64) -> IncrementPair {
    let mut w = 0.0;
    let mut z = 0.0;
    for inc in fine {
        z += h * w + inc.dz;
        w += inc.dw;
    }
    IncrementPair { dw: w, dz: z }
}

pub fn slope(dts: &[f64], errs: &[f64]) -> f64 {
    let n = dts.len() as f64;
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub type Stepper = fn(&dyn DriftDiffusion<Vec<f64>>, &Vec<f64>, f64, IncrementPair) -> Vec<f64>;

pub fn explicit(p: &dyn DriftDiffusion<Vec<f64>>, y: &Vec<f64>, dt: f64, inc: IncrementPair) -> Vec<f64> {
    step_explicit_15(p, y, dt, inc, SchemeOptions::default()).unwrap()
}

pub fn mixed(p: &dyn DriftDiffusion<Vec<f64>>, y: &Vec<f64>, dt: f64, inc: IncrementPair) -> Vec<f64> {
    step_mixed_implicit_15(p, y, dt, inc, SchemeOptions::default()).unwrap()
}

pub fn euler(p: &dyn DriftDiffusion<Vec<f64>>, y: &Vec<f64>, dt: f64, inc: IncrementPair) -> Vec<f64> {
    step_euler_maruyama(p, y, dt, inc.dw).unwrap()
}

pub const FINE_LOG2: u32 = 10;
pub const LEVELS: [u32; 5] = [6, 7, 8, 9, 10];
pub const PATHS: usize = 1500;

/// Mean |Y_T − exact| at T = 1 for each coarse level.
pub fn gbm_errors(step: Stepper) -> Vec<f64> {
    let p = Gbm { mu: 1.5, sigma: 0.1 };
    let fine_n = 1usize << FINE_LOG2;
    let h = 1.0 / fine_n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut errs = vec![0.0; LEVELS.len()];
    for _ in 0..PATHS {
        let fine: Vec<IncrementPair> = (0..fine_n).map(|_| sample_increments(&mut rng, h)).collect();
        let w_t: f64 = fine.iter().map(|i| i.dw).sum();
        let exact = ((p.mu - 0.5 * p.sigma * p.sigma) + p.sigma * w_t).exp();
        for (e, &lev) in errs.iter_mut().zip(&LEVELS) {
            let n = 1usize << lev;
            let ratio = fine_n / n;
            let dt = 1.0 / n as f64;
            let mut y = vec![1.0];
            for c in fine.chunks(ratio) {
                y = step(&p, &y, dt, coarsen(c, h));
            }
            *e += (y[0] - exact).abs() / PATHS as f64;
        }
    }
    errs
}

/// Exact OU increments over a fine step from the joint Gaussian of
/// (∫e^{−θ(h−s)}dW, ΔW, ΔZ).
pub fn ou_errors(step: Stepper) -> Vec<f64> {
    let p = Ou { theta: 2.0, sigma: 0.8 };
    let fine_n = 1usize << FINE_LOG2;
    let h = 1.0 / fine_n as f64;
    let th = p.theta;
    let e1 = (-th * h).exp();
    let cov = nalgebra::Matrix3::new(
        (1.0 - e1 * e1) / (2.0 * th),
        (1.0 - e1) / th,
        (1.0 - e1 * (1.0 + th * h)) / (th * th),
        (1.0 - e1) / th,
        h,
        h * h / 2.0,
        (1.0 - e1 * (1.0 + th * h)) / (th * th),
        h * h / 2.0,
        h * h * h / 3.0,
    );
    let l = cov.cholesky().expect("joint covariance is positive definite").l();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut errs = vec![0.0; LEVELS.len()];
    for _ in 0..PATHS {
        let mut exact = 1.0;
        let mut fine = Vec::with_capacity(fine_n);
        for _ in 0..fine_n {
            let xi = nalgebra::Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            let v = l * xi;
            exact = e1 * exact + p.sigma * v[0];
            fine.push(IncrementPair { dw: v[1], dz: v[2] });
        }
        for (e, &lev) in errs.iter_mut().zip(&LEVELS) {
            let n = 1usize << lev;
            let ratio = fine_n / n;
            let dt = 1.0 / n as f64;
            let mut y = vec![1.0];
            for c in fine.chunks(ratio) {
                y = step(&p, &y, dt, coarsen(c, h));
            }
            *e += (y[0] - exact).abs() / PATHS as f64;
        }
    }
    errs
}

pub fn dts() -> Vec<f64> {
    LEVELS.iter().map(|&l| 1.0 / (1u64 << l) as f64).collect()
}

/// A problem whose linear part is identically zero.
pub struct ZeroLinear(pub Gbm);

impl LinearDrift<Vec<f64>> for ZeroLinear {
    fn apply(&self, _y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = 0.0;
    }

    fn solve_implicit(&self, _dt: f64, rhs: &Vec<f64>, out: &mut Vec<f64>) -> Result<(), NumericError> {
        out[0] = rhs[0];
        Ok(())
    }
}

impl DriftDiffusion<Vec<f64>> for ZeroLinear {
    fn drift(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = self.0.mu * y[0] * (1.0 - y[0]);
    }

    fn diffusion(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = self.0.sigma * y[0].sin();
    }

    fn linear_part(&self) -> Option<&dyn LinearDrift<Vec<f64>>> {
        Some(self)
    }
}

