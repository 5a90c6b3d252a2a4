//! Strong order-1.5 Itô–Taylor steppers for dY = a(Y)dt + b(Y)dW with a
//! single Wiener channel.
//!
//! Two schemes are provided. [`step_explicit_15`] is the derivative-free
//! explicit scheme built from the supporting values Y± = Y + a·dt ± b·√dt and
//! Φ± = Y₊ ± b(Y₊)·√dt. [`step_mixed_implicit_15`] treats a linear drift part
//! a₁ with the trapezoidal rule while keeping the remaining drift a₂
//! explicit, which is what makes stiff Hamiltonians tractable.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::NumericError;

/// Vector-space operations the steppers need.
pub trait SdeVector: Clone {
    /// self += alpha · x
    fn axpy(&mut self, alpha: f64, x: &Self);
    fn scale(&mut self, alpha: f64);
    fn zeros_like(&self) -> Self;
    fn all_finite(&self) -> bool;
}

impl SdeVector for Vec<f64> {
    fn axpy(&mut self, alpha: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += alpha * v;
        }
    }
    fn scale(&mut self, alpha: f64) {
        for s in self.iter_mut() {
            *s *= alpha;
        }
    }
    fn zeros_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl SdeVector for Vec<Complex64> {
    fn axpy(&mut self, alpha: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * alpha;
        }
    }
    fn scale(&mut self, alpha: f64) {
        for s in self.iter_mut() {
            *s *= alpha;
        }
    }
    fn zeros_like(&self) -> Self {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// The linear drift part a₁(Y) = A₁Y together with its trapezoidal solve.
pub trait LinearDrift<V> {
    fn apply(&self, y: &V, out: &mut V);
    /// out = (I − (dt/2)·A₁)⁻¹ rhs
    fn solve_implicit(&self, dt: f64, rhs: &V, out: &mut V) -> Result<(), NumericError>;
}

/// A drift/diffusion pair, optionally split as a = a₁ + a₂.
pub trait DriftDiffusion<V: SdeVector> {
    fn drift(&self, y: &V, out: &mut V);
    fn diffusion(&self, y: &V, out: &mut V);

    fn linear_part(&self) -> Option<&dyn LinearDrift<V>> {
        None
    }

    /// Writes a₁(Y) and a₂(Y). The default derives a₂ = a − a₁ from
    /// [`drift`](Self::drift); problems that can produce both more cheaply
    /// should override it.
    fn split_drift(&self, y: &V, linear: &mut V, nonlinear: &mut V) {
        self.drift(y, nonlinear);
        match self.linear_part() {
            Some(l) => {
                l.apply(y, linear);
                nonlinear.axpy(-1.0, linear);
            }
            None => linear.scale(0.0),
        }
    }
}

/// Wiener increment dW and the correlated double integral dZ = ∫∫dW ds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementPair {
    pub dw: f64,
    pub dz: f64,
}

impl IncrementPair {
    /// Builds the pair from two independent standard normals:
    /// dW = √dt·ξ₁, dZ = ½dt(dW + χ/√3) with χ = √dt·ξ₂.
    pub fn from_normals(dt: f64, xi1: f64, xi2: f64) -> Self {
        let sq = dt.sqrt();
        let dw = sq * xi1;
        let chi = sq * xi2;
        Self {
            dw,
            dz: 0.5 * dt * (dw + chi / 3f64.sqrt()),
        }
    }

    pub fn zero() -> Self {
        Self { dw: 0.0, dz: 0.0 }
    }
}

pub fn sample_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> IncrementPair {
    let xi1: f64 = rng.sample(StandardNormal);
    let xi2: f64 = rng.sample(StandardNormal);
    IncrementPair::from_normals(dt, xi1, xi2)
}

/// Options shared by both steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    /// Adds the deterministic dt³ term built from A₁²a when a linear part is
    /// available (+1/6 for the explicit scheme, −1/12 for the mixed one).
    pub third_order_correction: bool,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            third_order_correction: true,
        }
    }
}

fn finite<V: SdeVector>(v: V, context: &'static str) -> Result<V, NumericError> {
    if v.all_finite() {
        Ok(v)
    } else {
        Err(NumericError::NonFinite { context })
    }
}

struct Support<V> {
    a: V,
    b: V,
    y_plus: V,
    y_minus: V,
    b_plus: V,
    b_minus: V,
    b_phi_plus: V,
    b_phi_minus: V,
}

fn supporting_values<V, P>(problem: &P, y: &V, a: V, dt: f64) -> Support<V>
where
    V: SdeVector,
    P: DriftDiffusion<V> + ?Sized,
{
    let sq = dt.sqrt();
    let mut b = y.zeros_like();
    problem.diffusion(y, &mut b);
    let mut y_plus = y.clone();
    y_plus.axpy(dt, &a);
    let mut y_minus = y_plus.clone();
    y_plus.axpy(sq, &b);
    y_minus.axpy(-sq, &b);
    let mut b_plus = y.zeros_like();
    let mut b_minus = y.zeros_like();
    problem.diffusion(&y_plus, &mut b_plus);
    problem.diffusion(&y_minus, &mut b_minus);
    let mut phi_plus = y_plus.clone();
    let mut phi_minus = y_plus.clone();
    phi_plus.axpy(sq, &b_plus);
    phi_minus.axpy(-sq, &b_plus);
    let mut b_phi_plus = y.zeros_like();
    let mut b_phi_minus = y.zeros_like();
    problem.diffusion(&phi_plus, &mut b_phi_plus);
    problem.diffusion(&phi_minus, &mut b_phi_minus);
    Support {
        a,
        b,
        y_plus,
        y_minus,
        b_plus,
        b_minus,
        b_phi_plus,
        b_phi_minus,
    }
}

/// Adds every diffusion-related term of the scheme to `out`.
fn add_noise_terms<V: SdeVector>(out: &mut V, s: &Support<V>, dt: f64, inc: IncrementPair) {
    let sq = dt.sqrt();
    let IncrementPair { dw, dz } = inc;
    out.axpy(dw, &s.b);
    // (b₊ − b₋)/(4√dt)·(dW² − dt)
    let c1 = (dw * dw - dt) / (4.0 * sq);
    out.axpy(c1, &s.b_plus);
    out.axpy(-c1, &s.b_minus);
    // (b₊ − 2b + b₋)/(2dt)·(dW·dt − dZ)
    let c2 = (dw * dt - dz) / (2.0 * dt);
    out.axpy(c2, &s.b_plus);
    out.axpy(-2.0 * c2, &s.b);
    out.axpy(c2, &s.b_minus);
    // (b(Φ₊) − b(Φ₋) − b₊ + b₋)/(4dt)·dW(dW²/3 − dt)
    let c3 = dw * (dw * dw / 3.0 - dt) / (4.0 * dt);
    out.axpy(c3, &s.b_phi_plus);
    out.axpy(-c3, &s.b_phi_minus);
    out.axpy(-c3, &s.b_plus);
    out.axpy(c3, &s.b_minus);
}

/// One step of the explicit order-1.5 scheme.
pub fn step_explicit_15<V, P>(
    problem: &P,
    y: &V,
    dt: f64,
    inc: IncrementPair,
    options: SchemeOptions,
) -> Result<V, NumericError>
where
    V: SdeVector,
    P: DriftDiffusion<V> + ?Sized,
{
    let sq = dt.sqrt();
    let mut a = y.zeros_like();
    problem.drift(y, &mut a);
    let s = supporting_values(problem, y, a, dt);
    let mut a_plus = y.zeros_like();
    let mut a_minus = y.zeros_like();
    problem.drift(&s.y_plus, &mut a_plus);
    problem.drift(&s.y_minus, &mut a_minus);

    let mut out = y.clone();
    out.axpy(0.25 * dt, &a_plus);
    out.axpy(0.5 * dt, &s.a);
    out.axpy(0.25 * dt, &a_minus);
    let cz = inc.dz / (2.0 * sq);
    out.axpy(cz, &a_plus);
    out.axpy(-cz, &a_minus);
    add_noise_terms(&mut out, &s, dt, inc);

    if options.third_order_correction {
        if let Some(lin) = problem.linear_part() {
            let mut t1 = y.zeros_like();
            let mut t2 = y.zeros_like();
            lin.apply(&s.a, &mut t1);
            lin.apply(&t1, &mut t2);
            out.axpy(dt.powi(3) / 6.0, &t2);
        }
    }
    finite(out, "explicit order-1.5 step")
}

/// One step of the mixed scheme: trapezoidal in a₁, explicit order-1.5 in a₂.
///
/// With a₁ = 0 this is identical to [`step_explicit_15`].
pub fn step_mixed_implicit_15<V, P>(
    problem: &P,
    y: &V,
    dt: f64,
    inc: IncrementPair,
    options: SchemeOptions,
) -> Result<V, NumericError>
where
    V: SdeVector,
    P: DriftDiffusion<V> + ?Sized,
{
    let lin = problem
        .linear_part()
        .ok_or_else(|| NumericError::NoSolution("mixed scheme needs a linear drift part".into()))?;
    let sq = dt.sqrt();
    let mut a1 = y.zeros_like();
    let mut a2 = y.zeros_like();
    problem.split_drift(y, &mut a1, &mut a2);
    let mut a = a1.clone();
    a.axpy(1.0, &a2);
    let s = supporting_values(problem, y, a, dt);

    let mut a1_plus = y.zeros_like();
    let mut a2_plus = y.zeros_like();
    let mut a1_minus = y.zeros_like();
    let mut a2_minus = y.zeros_like();
    problem.split_drift(&s.y_plus, &mut a1_plus, &mut a2_plus);
    problem.split_drift(&s.y_minus, &mut a1_minus, &mut a2_minus);

    let mut rhs = y.clone();
    rhs.axpy(0.5 * dt, &s.a);
    rhs.axpy(0.25 * dt, &a2_plus);
    rhs.axpy(0.25 * dt, &a2_minus);
    // Full-drift dZ term.
    let cz = inc.dz / (2.0 * sq);
    rhs.axpy(cz, &a1_plus);
    rhs.axpy(cz, &a2_plus);
    rhs.axpy(-cz, &a1_minus);
    rhs.axpy(-cz, &a2_minus);
    // Removes the ½·A₁b·dW·dt that the implicit a₁(Y_{n+1}) picks up.
    let cw = -inc.dw * dt / (4.0 * sq);
    rhs.axpy(cw, &a1_plus);
    rhs.axpy(-cw, &a1_minus);
    add_noise_terms(&mut rhs, &s, dt, inc);

    if options.third_order_correction {
        let mut t1 = y.zeros_like();
        let mut t2 = y.zeros_like();
        lin.apply(&s.a, &mut t1);
        lin.apply(&t1, &mut t2);
        rhs.axpy(-dt.powi(3) / 12.0, &t2);
    }
    let rhs = finite(rhs, "mixed order-1.5 step")?;
    let mut out = y.zeros_like();
    lin.solve_implicit(dt, &rhs, &mut out)?;
    finite(out, "implicit solve")
}

/// Euler–Maruyama step, used as a low-order reference.
pub fn step_euler_maruyama<V, P>(problem: &P, y: &V, dt: f64, dw: f64) -> Result<V, NumericError>
where
    V: SdeVector,
    P: DriftDiffusion<V> + ?Sized,
{
    let mut a = y.zeros_like();
    let mut b = y.zeros_like();
    problem.drift(y, &mut a);
    problem.diffusion(y, &mut b);
    let mut out = y.clone();
    out.axpy(dt, &a);
    out.axpy(dw, &b);
    finite(out, "Euler–Maruyama step")
}
