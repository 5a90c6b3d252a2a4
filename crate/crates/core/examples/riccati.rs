//! LQ gains for the oscillator means and random Riccati residuals.

use nalgebra::DMatrix;
use qctrl::control::{care_residual, solve_care, RiccatiProblem};
use qctrl::harness::cli::oscillator_lq;
use rand::{Rng, SeedableRng};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pi = std::f64::consts::PI;
    for k in [pi, -pi] {
        let (cont, _) = oscillator_lq(k, 1.0 / pi, 1e-2, 1.0 / 18.0)?;
        let p = solve_care(&cont)?;
        let gain = cont.gain(&p).k;
        println!("k = {k:+.4}: K = [{:.4}, {:.4}], residual {:.2e}", gain[(0, 0)], gain[(0, 1)], care_residual(&cont, &p).amax());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for n in 2..=6 {
        let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let prob = RiccatiProblem::new(f, g, DMatrix::identity(1, 1), DMatrix::identity(n, n))?;
        let p = solve_care(&prob)?;
        println!("random {n}x{n}: residual {:.2e}", care_residual(&prob, &p).amax());
    }
    Ok(())
}
