//! Invariants and independent oracles for states, controllers and solvers.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use qctrl::control::{clip_discretize, solve_care, solve_dare, trajectory_force, ExpansionOrder, ForceLevels, RiccatiProblem};
use qctrl::control::{care_residual, dare_residual};
use qctrl::gauss::{moment_step, steady_covariances, MomentModelParams};
use qctrl::osc::{build_operators, QuadraticParams, QuadraticSse};
use qctrl::qstate::{moment_vector, observables, Grid, GridState, HarmonicBasisState, MomentVector};
use qctrl::quartic::{QuarticParams, QuarticSimulator};
use qctrl::sde::{DriftDiffusion, IncrementPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

proptest! {
    #[test]
    fn clip_discretize_is_idempotent_and_odd(f in -100.0f64..100.0, bound in 0.5f64..40.0, half in 1usize..20) {
        let levels = 2 * half + 1;
        let once = clip_discretize(f, bound, levels);
        prop_assert_eq!(clip_discretize(once, bound, levels), once);
        prop_assert!(once.abs() <= bound);
        prop_assert!(ForceLevels::new(bound, levels).contains(once));
        prop_assert_eq!(clip_discretize(-f, bound, levels), -once);
    }

    #[test]
    fn snapped_force_is_nearest_level(f in -30.0f64..30.0) {
        let l = ForceLevels::new(10.0 * PI, 21);
        let s = clip_discretize(f, l.bound, l.count);
        let clipped = f.clamp(-l.bound, l.bound);
        for v in l.levels() {
            prop_assert!((s - clipped).abs() <= (v - clipped).abs() + 1e-12);
        }
    }

    #[test]
    fn trajectory_force_is_linear_and_odd(x in -3.0f64..3.0, p in -3.0f64..3.0, a in -2.0f64..2.0) {
        let (k, m, tau) = (PI, 1.0 / PI, 1.0 / 18.0);
        for order in [ExpansionOrder::First, ExpansionOrder::Second] {
            let f = trajectory_force(x, p, k, m, tau, order);
            prop_assert!((trajectory_force(-x, -p, k, m, tau, order) + f).abs() < 1e-9);
            let g = trajectory_force(a * x, a * p, k, m, tau, order);
            prop_assert!((g - a * f).abs() < 1e-9 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn gaussian_packets_satisfy_isserlis(x0 in -2.0f64..2.0, sigma in 0.6f64..1.4, k0 in -1.5f64..1.5, chirp in -0.3f64..0.3) {
        let grid = Grid::from_range(-12.0, 12.0, 0.05);
        let mut s = GridState::gaussian_packet(grid, 1.0 / PI, x0, sigma, k0);
        for (j, a) in s.amplitudes.iter_mut().enumerate() {
            let dx = grid.x(j) - x0;
            *a *= Complex64::from_polar(1.0, chirp * dx * dx);
        }
        let m = moment_vector(&s).unwrap();
        prop_assert!(gaussianity_defect(&m) < 1e-5, "defect {}", gaussianity_defect(&m));
        let g = observables(&s).unwrap();
        prop_assert!((g.uncertainty_product() - 0.25).abs() < 1e-6);
    }
}

/// Largest deviation of orders three to five from the Gaussian values.
fn gaussianity_defect(m: &MomentVector) -> f64 {
    let (vx, c, vp) = (m.central(2, 0), m.central(2, 1), m.central(2, 2));
    let fourth = [3.0 * vx * vx, 3.0 * vx * c, vx * vp + 2.0 * c * c, 3.0 * vp * c, 3.0 * vp * vp];
    let mut worst = 0.0f64;
    for j in 0..=3 {
        worst = worst.max(m.central(3, j).abs());
    }
    for j in 0..=5 {
        worst = worst.max(m.central(5, j).abs());
    }
    for (j, f) in fourth.iter().enumerate() {
        worst = worst.max((m.central(4, j) - f).abs());
    }
    worst
}

/// Dense x̂ and p̂ of a truncated harmonic basis.
fn dense_xp(n: usize, mass: f64, omega: f64) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let a = DMatrix::from_fn(n, n, |i, j| if j == i + 1 { c((j as f64).sqrt(), 0.0) } else { c(0.0, 0.0) });
    let ad = a.adjoint();
    let x = (&a + &ad) * c((0.5 / (mass * omega)).sqrt(), 0.0);
    let p = (&ad - &a) * c(0.0, (0.5 * mass * omega).sqrt());
    (x, p)
}

#[test]
fn moment_vector_matches_dense_orderings() {
    let (mass, omega) = (1.0 / PI, PI);
    let n = 24;
    // a superposition well inside the truncation
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let amps: Vec<Complex64> = (0..n)
        .map(|k| if k < 6 { c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) } else { c(0.0, 0.0) })
        .collect();
    let mut state = HarmonicBasisState::from_amplitudes(amps, mass, omega);
    state.normalize();
    let got = moment_vector(&state).unwrap();

    let (x, p) = dense_xp(n + 6, mass, omega);
    let mut psi = DVector::from_element(n + 6, c(0.0, 0.0));
    for (k, a) in state.amplitudes.iter().enumerate() {
        psi[k] = *a;
    }
    let expect = |op: &DMatrix<Complex64>| (psi.adjoint() * op * &psi)[(0, 0)].re;
    let mx = expect(&x);
    let mp = expect(&p);
    let id = DMatrix::<Complex64>::identity(n + 6, n + 6);
    let dx = &x - &id * c(mx, 0.0);
    let dp = &p - &id * c(mp, 0.0);
    assert!((got.0[0] - mx).abs() < 1e-12 && (got.0[1] - mp).abs() < 1e-12);
    for order in 2..=5usize {
        let mut sums = vec![0.0; order + 1];
        let mut counts = vec![0usize; order + 1];
        for bits in 0..(1usize << order) {
            let mut prod = id.clone();
            for b in 0..order {
                prod = if bits >> b & 1 == 1 { &prod * &dp } else { &prod * &dx };
            }
            let j = bits.count_ones() as usize;
            sums[j] += expect(&prod);
            counts[j] += 1;
        }
        for j in 0..=order {
            let want = sums[j] / counts[j] as f64;
            assert!((got.central(order, j) - want).abs() < 1e-10, "order {order} j {j}: {} vs {want}", got.central(order, j));
        }
    }
}

#[test]
fn cayley_step_is_unitary() {
    let mut p = QuadraticParams::cooling();
    p.n_max = 60;
    let ops = build_operators(&p);
    let sse = QuadraticSse::new(&ops, 3.7, p.gamma, p.dt).unwrap();
    let lin = sse.linear_part().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y: Vec<Complex64> = (0..ops.dim()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut ay = vec![c(0.0, 0.0); y.len()];
    lin.apply(&y, &mut ay);
    let rhs: Vec<Complex64> = y.iter().zip(&ay).map(|(a, b)| a + b * (0.5 * p.dt)).collect();
    let mut out = vec![c(0.0, 0.0); y.len()];
    lin.solve_implicit(p.dt, &rhs, &mut out).unwrap();
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    assert!((norm(&out) / norm(&y) - 1.0).abs() < 1e-13);
}

/// Cost tr(P_K) of the closed loop ż = (F − GK)z with running cost
/// zᵀQz + uᵀRu, from the Lyapunov equation solved by Kronecker products.
fn closed_loop_cost(prob: &RiccatiProblem, k: &DMatrix<f64>) -> Option<f64> {
    let a = &prob.f - &prob.g * k;
    let cst = &prob.q + k.transpose() * &prob.r * k;
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let big = id.kronecker(&a.transpose()) + a.transpose().kronecker(&id);
    let rhs = -DVector::from_column_slice(cst.as_slice());
    let sol = big.lu().solve(&rhs)?;
    let eig = a.complex_eigenvalues();
    if eig.iter().any(|z| z.re >= 0.0) {
        return None;
    }
    Some((0..n).map(|i| sol[i * n + i]).sum())
}

#[test]
fn care_gain_beats_scaled_gains() {
    for &k in &[PI, -PI] {
        let m = 1.0 / PI;
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 1.0 / m, -k, 0.0]);
        let g = DMatrix::from_column_slice(2, 1, &[0.0, -1.0]);
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![k.abs() / 2.0, 1.0 / (2.0 * m)]));
        let prob = RiccatiProblem::new(f, g, DMatrix::from_element(1, 1, 0.01), q).unwrap();
        let p = solve_care(&prob).unwrap();
        let gain = prob.gain(&p).k;
        let best = closed_loop_cost(&prob, &gain).unwrap();
        assert!((best - p.trace()).abs() < 1e-8 * best);
        for s in [0.9, 1.1] {
            let other = closed_loop_cost(&prob, &(&gain * s)).unwrap();
            assert!(other > best, "k = {k}, scale {s}: {other} <= {best}");
        }
    }
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize) -> RiccatiProblem {
    let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let g = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let lq = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let lr = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let q = &lq * lq.transpose() + DMatrix::identity(n, n) * 0.1;
    let r = &lr * lr.transpose() + DMatrix::identity(m, m) * 0.5;
    RiccatiProblem::new(f, g, r, q).unwrap()
}

#[test]
fn random_riccati_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in 1..=6 {
        for m in 1..=n.min(3) {
            for _ in 0..4 {
                let prob = random_problem(&mut rng, n, m);
                let p = solve_care(&prob).unwrap();
                let scale = 1.0 + p.amax();
                assert!(care_residual(&prob, &p).amax() <= 1e-10 * scale, "CARE n={n} m={m}");
                assert!((&p - p.transpose()).amax() < 1e-10 * scale);
                // discrete problem with a contractive-ish transition
                let mut d = prob.clone();
                d.f *= 0.5;
                let s = solve_dare(&d).unwrap();
                assert!(dare_residual(&d, &s).amax() <= 1e-10 * (1.0 + s.amax()), "DARE n={n} m={m}");
            }
        }
    }
}

#[test]
fn noise_free_trajectory_control_converges() {
    for (k, bound) in [(PI, 5.0 * PI), (-PI, 10.0 * PI)] {
        let params = MomentModelParams { k, m: 1.0 / PI, gamma: PI, eta: 1.0 };
        let (vx, vp, cc) = steady_covariances(k, params.m, params.gamma, params.eta);
        let mut g = qctrl::qstate::GaussianMoments { mean_x: 0.8, mean_p: -0.5, var_x: vx, var_p: vp, cov_c: cc };
        let tau = 1.0 / 18.0;
        let steps = 40;
        for _ in 0..(18 * 10) {
            let f = trajectory_force(g.mean_x, g.mean_p, k, params.m, tau, ExpansionOrder::Second).clamp(-bound, bound);
            for _ in 0..steps {
                g = moment_step(&g, &params, f, tau / steps as f64, IncrementPair::zero());
            }
        }
        assert!(g.mean_x.abs() < 1e-6 && g.mean_p.abs() < 1e-6, "k = {k}: {g:?}");
    }
}

#[test]
fn quartic_unmeasured_evolution_conserves_norm() {
    let p = QuarticParams::default();
    let sim = QuarticSimulator::new(p.clone()).unwrap();
    let mut state = GridState::gaussian_packet(p.grid(), p.m, 0.5, 1.0, 0.3);
    for _ in 0..5000 {
        sim.taylor_propagate(&mut state.amplitudes, 1.0, p.dt);
    }
    assert!((state.norm_sq() - 1.0).abs() < 1e-6, "norm² = {}", state.norm_sq());
}

#[test]
fn cubic_quadratic_cross_moment_of_gaussians() {
    let grid = Grid::from_range(-12.0, 12.0, 0.05);
    for (x0, sigma) in [(0.7, 0.8), (-1.2, 1.0), (1.5, 0.6), (0.0, 1.1)] {
        let s = GridState::gaussian_packet(grid, 1.0 / PI, x0, sigma, 0.4);
        let mu = s.position_expectation(|x| x);
        let vx = s.position_expectation(|x| (x - mu).powi(2));
        let x3 = s.position_expectation(|x| x.powi(3));
        assert!((x3 - mu.powi(3) - 3.0 * mu * vx).abs() < 1e-8);
        let cross = s.position_expectation(|x| (x.powi(3) - x3) * (x - mu).powi(2));
        assert!((cross - 6.0 * mu * vx * vx).abs() < 1e-8, "cross {cross}, 6μV² {}", 6.0 * mu * vx * vx);
    }
}
