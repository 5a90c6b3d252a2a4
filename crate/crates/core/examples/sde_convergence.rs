//! Strong error of the order-1.5 scheme on geometric Brownian motion.

use qctrl::error::NumericError;
use qctrl::sde::{sample_increments, step_euler_maruyama, step_explicit_15, DriftDiffusion, IncrementPair, SchemeOptions};
use rand::SeedableRng;

struct Gbm;

impl DriftDiffusion<Vec<f64>> for Gbm {
    fn drift(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = 1.5 * y[0];
    }

    fn diffusion(&self, y: &Vec<f64>, out: &mut Vec<f64>) {
        out[0] = 0.1 * y[0];
    }
}

fn main() -> Result<(), NumericError> {
    let fine = 1usize << 10;
    let h = 1.0 / fine as f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let paths = 500;
    let levels = [3u32, 4, 5, 6, 7];
    let mut err15 = vec![0.0; levels.len()];
    let mut err_em = vec![0.0; levels.len()];
    for _ in 0..paths {
        let incs: Vec<IncrementPair> = (0..fine).map(|_| sample_increments(&mut rng, h)).collect();
        let w: f64 = incs.iter().map(|i| i.dw).sum();
        let exact = (1.5 - 0.005 + 0.1 * w).exp();
        for (l, &lev) in levels.iter().enumerate() {
            let ratio = fine >> lev;
            let dt = ratio as f64 * h;
            let (mut a, mut b) = (vec![1.0], vec![1.0]);
            for chunk in incs.chunks(ratio) {
                let (mut dw, mut dz) = (0.0, 0.0);
                for i in chunk {
                    dz += h * dw + i.dz;
                    dw += i.dw;
                }
                a = step_explicit_15(&Gbm, &a, dt, IncrementPair { dw, dz }, SchemeOptions::default())?;
                b = step_euler_maruyama(&Gbm, &b, dt, dw)?;
            }
            err15[l] += (a[0] - exact).abs() / paths as f64;
            err_em[l] += (b[0] - exact).abs() / paths as f64;
        }
    }
    for (l, &lev) in levels.iter().enumerate() {
        println!("dt = 2^-{lev}: order-1.5 error {:.3e}, Euler-Maruyama error {:.3e}", err15[l], err_em[l]);
    }
    Ok(())
}
