//! Algebraic and differential Riccati equations for linear-quadratic control.
//!
//! Plant dx = (F x + G u) dt, cost ∫ (uᵀR u + xᵀQ x) dt with terminal xᵀA x.
//! The optimal feedback is u = −K x with K = R⁻¹GᵀP.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("R is not symmetric positive definite")]
    RNotPositiveDefinite,
    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),
    #[error("iteration did not converge after {iterations} sweeps (last change {change:.3e})")]
    NotConverged { iterations: usize, change: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiProblem {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Terminal weight; only used by the finite-horizon equation.
    pub a: DMatrix<f64>,
}

/// u = −K x
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGain {
    pub k: DMatrix<f64>,
}

impl LinearGain {
    pub fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        -(&self.k * x)
    }
}

impl RiccatiProblem {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>, r: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self, RiccatiError> {
        let n = f.nrows();
        let a = DMatrix::zeros(n, n);
        let p = Self { f, g, r, q, a };
        p.validate()?;
        Ok(p)
    }

    pub fn scalar(f: f64, g: f64, r: f64, q: f64) -> Result<Self, RiccatiError> {
        let m = |v| DMatrix::from_element(1, 1, v);
        Self::new(m(f), m(g), m(r), m(q))
    }

    pub fn with_terminal(mut self, a: DMatrix<f64>) -> Result<Self, RiccatiError> {
        self.a = a;
        self.validate()?;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn validate(&self) -> Result<(), RiccatiError> {
        let n = self.f.nrows();
        let m = self.g.ncols();
        let dim = |what: &str| Err(RiccatiError::Dimension(what.to_string()));
        if self.f.ncols() != n {
            return dim("F must be square");
        }
        if self.g.nrows() != n {
            return dim("G must have as many rows as F");
        }
        if self.r.shape() != (m, m) {
            return dim("R must be m×m with m the column count of G");
        }
        if self.q.shape() != (n, n) || self.a.shape() != (n, n) {
            return dim("Q and A must be n×n");
        }
        let sym = |x: &DMatrix<f64>| (x - x.transpose()).amax() <= 1e-12 * (1.0 + x.amax());
        if !sym(&self.q) || !sym(&self.a) {
            return dim("Q and A must be symmetric");
        }
        if !sym(&self.r) || self.r.clone().cholesky().is_none() {
            return Err(RiccatiError::RNotPositiveDefinite);
        }
        Ok(())
    }

    fn r_inv(&self) -> DMatrix<f64> {
        self.r.clone().cholesky().expect("validated").inverse()
    }

    /// G R⁻¹ Gᵀ
    fn s_matrix(&self) -> DMatrix<f64> {
        &self.g * self.r_inv() * self.g.transpose()
    }

    pub fn gain(&self, p: &DMatrix<f64>) -> LinearGain {
        LinearGain {
            k: self.r_inv() * self.g.transpose() * p,
        }
    }
}

/// PF + FᵀP − PGR⁻¹GᵀP + Q
pub fn care_residual(problem: &RiccatiProblem, p: &DMatrix<f64>) -> DMatrix<f64> {
    p * &problem.f + problem.f.transpose() * p - p * problem.s_matrix() * p + &problem.q
}

/// Fᵀ[S − SG(GᵀSG + R)⁻¹GᵀS]F + Q − S
pub fn dare_residual(problem: &RiccatiProblem, s: &DMatrix<f64>) -> DMatrix<f64> {
    dare_map(problem, s) - s
}

fn dare_map(problem: &RiccatiProblem, s: &DMatrix<f64>) -> DMatrix<f64> {
    let g = &problem.g;
    let inner = g.transpose() * s * g + &problem.r;
    let inner_inv = inner
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| inner.try_inverse().expect("GᵀSG + R is invertible"));
    let mid = s - s * g * inner_inv * g.transpose() * s;
    problem.f.transpose() * mid * &problem.f + &problem.q
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// True when every eigenvalue has negative real part.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.complex_eigenvalues().iter().all(|z| z.re < 0.0)
}

/// Solves AᵀX + XA + C = 0 through the Kronecker-product linear system.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>, RiccatiError> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    // vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X (column-major vec).
    let big = id.kronecker(&a.transpose()) + a.transpose().kronecker(&id);
    let rhs = DVector::from_iterator(n * n, c.iter().map(|v| -v));
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| RiccatiError::NoStabilizingSolution("singular Lyapunov operator".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign(m: &DMatrix<f64>) -> Result<DMatrix<f64>, RiccatiError> {
    let dim = m.nrows();
    let mut z = m.clone();
    for _ in 0..100 {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| RiccatiError::NoStabilizingSolution("Hamiltonian has an eigenvalue on the imaginary axis".into()))?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 {
            det.powf(1.0 / dim as f64)
        } else {
            1.0
        };
        let next = (&z / c + inv * c) * 0.5;
        let change = (&next - &z).norm() / next.norm().max(1.0);
        z = next;
        if change < 1e-14 {
            return Ok(z);
        }
    }
    // Scaling stalls near convergence; an unscaled polish settles it.
    for _ in 0..20 {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| RiccatiError::NoStabilizingSolution("sign iteration broke down".into()))?;
        let next = (&z + inv) * 0.5;
        let change = (&next - &z).norm() / next.norm().max(1.0);
        z = next;
        if change < 1e-13 {
            return Ok(z);
        }
    }
    Err(RiccatiError::NoStabilizingSolution(
        "sign iteration did not converge; Hamiltonian may have imaginary-axis eigenvalues".into(),
    ))
}

/// Stabilizing solution of the continuous-time algebraic Riccati equation.
///
/// The stable invariant subspace of the Hamiltonian
/// `[[F, −GR⁻¹Gᵀ], [−Q, −Fᵀ]]` is found with the matrix sign function, and
/// the result is polished with Newton–Kleinman sweeps.
pub fn solve_care(problem: &RiccatiProblem) -> Result<DMatrix<f64>, RiccatiError> {
    problem.validate()?;
    let n = problem.state_dim();
    let s = problem.s_matrix();
    let mut ham = DMatrix::<f64>::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(&problem.f);
    ham.view_mut((0, n), (n, n)).copy_from(&(-&s));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-&problem.q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-problem.f.transpose()));
    let w = matrix_sign(&ham)?;
    let id = DMatrix::<f64>::identity(n, n);
    let w11 = w.view((0, 0), (n, n)).into_owned();
    let w12 = w.view((0, n), (n, n)).into_owned();
    let w21 = w.view((n, 0), (n, n)).into_owned();
    let w22 = w.view((n, n), (n, n)).into_owned();
    let mut lhs = DMatrix::<f64>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &id));
    let mut rhs = DMatrix::<f64>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &id)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| RiccatiError::NoStabilizingSolution(e.to_string()))?;
    let mut p = symmetrize(&p);

    for _ in 0..8 {
        let k = problem.gain(&p).k;
        let closed = &problem.f - &problem.g * &k;
        if !is_hurwitz(&closed) {
            break;
        }
        let c = &problem.q + k.transpose() * &problem.r * &k;
        let next = solve_lyapunov(&closed, &c)?;
        let change = (&next - &p).norm();
        p = next;
        if change <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    let k = problem.gain(&p).k;
    let closed = &problem.f - &problem.g * &k;
    if !is_hurwitz(&closed) {
        return Err(RiccatiError::NoStabilizingSolution(
            "closed loop is not stable; (F, G) may not be stabilizable".into(),
        ));
    }
    Ok(p)
}

/// Stabilizing solution of the discrete-time algebraic Riccati equation by
/// fixed-point iteration from S = Q, symmetrizing every sweep.
pub fn solve_dare(problem: &RiccatiProblem) -> Result<DMatrix<f64>, RiccatiError> {
    problem.validate()?;
    let mut s = problem.q.clone();
    let max_iter = 200_000;
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let next = symmetrize(&dare_map(problem, &s));
        change = (&next - &s).norm();
        s = next;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(RiccatiError::NoStabilizingSolution("iteration diverged".into()));
        }
        if change <= 1e-15 * (1.0 + s.norm()) {
            return Ok(s);
        }
    }
    Err(RiccatiError::NotConverged {
        iterations: max_iter,
        change,
    })
}

/// Integrates −dP/dt = PF + FᵀP − PGR⁻¹GᵀP + Q backwards from P(T) = A and
/// returns P(0).
pub fn riccati_ode(problem: &RiccatiProblem, horizon: f64, steps: usize) -> Result<DMatrix<f64>, RiccatiError> {
    problem.validate()?;
    let h = horizon / steps.max(1) as f64;
    // In reversed time τ = T − t, dP/dτ = residual(P).
    let rhs = |p: &DMatrix<f64>| care_residual(problem, p);
    let mut p = problem.a.clone();
    for _ in 0..steps.max(1) {
        let k1 = rhs(&p);
        let k2 = rhs(&(&p + &k1 * (0.5 * h)));
        let k3 = rhs(&(&p + &k2 * (0.5 * h)));
        let k4 = rhs(&(&p + &k3 * h));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        p = symmetrize(&p);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_care_roots() {
        let p = solve_care(&RiccatiProblem::scalar(0.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        let prob = RiccatiProblem::scalar(1.0, 1.0, 1.0, 0.0).unwrap();
        let p = solve_care(&prob).unwrap();
        assert!((p[(0, 0)] - 2.0).abs() < 1e-12);
        let k = prob.gain(&p).k;
        assert!((prob.f[(0, 0)] - k[(0, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_dare_root() {
        let s = solve_dare(&RiccatiProblem::scalar(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((s[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let s = solve_dare(&RiccatiProblem::scalar(0.0, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(s[(0, 0)], 0.0);
    }

    #[test]
    fn unstabilizable_rejected() {
        // Unstable mode with no actuation.
        let prob = RiccatiProblem::scalar(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(solve_care(&prob).is_err());
    }

    #[test]
    fn bad_r_rejected() {
        assert_eq!(
            RiccatiProblem::scalar(0.0, 1.0, -1.0, 1.0).unwrap_err(),
            RiccatiError::RNotPositiveDefinite
        );
    }

    #[test]
    fn lyapunov_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let c = DMatrix::identity(2, 2);
        let x = solve_lyapunov(&a, &c).unwrap();
        let r = a.transpose() * &x + &x * &a + c;
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn finite_horizon_approaches_care() {
        let prob = RiccatiProblem::scalar(1.0, 1.0, 1.0, 1.0).unwrap();
        let p_inf = solve_care(&prob).unwrap();
        let p0 = riccati_ode(&prob, 20.0, 4000).unwrap();
        assert!((p0[(0, 0)] - p_inf[(0, 0)]).abs() < 1e-9);
        assert!((p_inf[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    }
}
