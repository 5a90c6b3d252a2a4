//! Non-learning control laws for the quadratic and quartic problems.

use crate::qstate::GaussianMoments;

/// Equispaced force levels on [−bound, bound].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceLevels {
    pub bound: f64,
    pub count: usize,
}

impl ForceLevels {
    pub fn new(bound: f64, count: usize) -> Self {
        assert!(count >= 2 && bound > 0.0);
        Self { bound, count }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.bound / (self.count - 1) as f64
    }

    pub fn level(&self, index: usize) -> f64 {
        assert!(index < self.count);
        if index == 0 {
            return -self.bound;
        }
        if index == self.count - 1 {
            return self.bound;
        }
        // Symmetric construction keeps level(i) = −level(count−1−i) exactly.
        let half = (self.count - 1) as f64 / 2.0;
        (index as f64 - half) * self.spacing()
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.level(i)).collect()
    }

    /// Index of the level nearest to `force` after clamping; exact ties go
    /// to the level closer to zero.
    pub fn nearest_index(&self, force: f64) -> usize {
        let f = force.clamp(-self.bound, self.bound);
        let u = (f + self.bound) / self.spacing();
        let lo = (u.floor() as usize).min(self.count - 1);
        let hi = (lo + 1).min(self.count - 1);
        let dl = (f - self.level(lo)).abs();
        let dh = (f - self.level(hi)).abs();
        let tol = 1e-12 * self.spacing();
        if (dl - dh).abs() <= tol {
            if self.level(lo).abs() <= self.level(hi).abs() {
                lo
            } else {
                hi
            }
        } else if dl < dh {
            lo
        } else {
            hi
        }
    }

    pub fn snap(&self, force: f64) -> f64 {
        self.level(self.nearest_index(force))
    }

    /// Whether `force` is one of the levels (within round-off).
    pub fn contains(&self, force: f64) -> bool {
        force.is_finite() && (self.snap(force) - force).abs() <= 1e-9 * self.bound.max(1.0)
    }
}

/// Clamps to ±bound and snaps to the nearest of `levels` equispaced values.
pub fn clip_discretize(force: f64, bound: f64, levels: usize) -> f64 {
    ForceLevels::new(bound, levels).snap(force)
}

/// ±bound by the sign of `force`; zero maps to +bound.
pub fn bang_bang(force: f64, bound: f64) -> f64 {
    if force < 0.0 {
        -bound
    } else {
        bound
    }
}

/// Order of the short-time expansion used to place the end of a control
/// step on the target trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpansionOrder {
    First,
    #[default]
    Second,
}

/// The constant force over `step_dt` that brings the deterministic
/// (⟨x⟩, ⟨p⟩) dynamics onto p = −√(m|k|)·x, before clipping.
///
/// With s = √(m|k|) and τ = step_dt the second-order solve is
/// `F = [p + s x + (s p/m − k x)τ − k(p + s x)τ²/(2m)] / (τ(1 + sτ/(2m)))`.
pub fn trajectory_force(mean_x: f64, mean_p: f64, k: f64, m: f64, step_dt: f64, order: ExpansionOrder) -> f64 {
    let s = (m * k.abs()).sqrt();
    let tau = step_dt;
    let on = mean_p + s * mean_x;
    let first = on + (s * mean_p / m - k * mean_x) * tau;
    match order {
        ExpansionOrder::First => first / tau,
        ExpansionOrder::Second => {
            (first - k * on * tau * tau / (2.0 * m)) / (tau * (1.0 + s * tau / (2.0 * m)))
        }
    }
}

/// Moments the quartic controllers need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticSummary {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    /// ⟨x̂³⟩ (raw, not central).
    pub x3: f64,
}

/// Removes a fraction ζ of the momentum per step through the control
/// impulse alone: ⟨p⟩ − Fτ = (1 − ζ)⟨p⟩.
///
/// With `cancel_potential` the potential impulse −4λ⟨x³⟩τ is included in the
/// endpoint condition as well. That variant also cancels the restoring force,
/// so nothing pulls the packet back to the center and it heats up.
pub fn damping_force(summary: &QuarticSummary, lambda: f64, zeta: f64, step_dt: f64, cancel_potential: bool) -> f64 {
    let f = zeta * summary.mean_p / step_dt;
    if cancel_potential {
        f - 4.0 * lambda * summary.x3
    } else {
        f
    }
}

/// Target momentum of the classical particle in V = 6λVx x² + λx⁴ that
/// comes to rest exactly at the origin.
pub fn gaussian_target_momentum(x: f64, var_x: f64, lambda: f64, m: f64) -> f64 {
    -(2.0 * m * (6.0 * lambda * var_x + lambda * x * x)).sqrt() * x
}

/// Places the end of the step on the Gaussian-approximation trajectory using
/// a second-order expansion of dx/dt = p/m, dp/dt = −12λVx x − 4λx³ − F.
/// The endpoint residual is decreasing in F, so bisection on the bounds is
/// exact up to round-off; the result lies in [−bound, bound].
pub fn gaussian_approx_force(summary: &QuarticSummary, lambda: f64, m: f64, step_dt: f64, bound: f64) -> f64 {
    let QuarticSummary {
        mean_x: x,
        mean_p: p,
        var_x: vx,
        ..
    } = *summary;
    let tau = step_dt;
    let residual = |f: f64| {
        let acc = -12.0 * lambda * vx * x - 4.0 * lambda * x.powi(3) - f;
        let jerk = -(12.0 * lambda * vx + 12.0 * lambda * x * x) * p / m;
        let x1 = x + p / m * tau + acc * tau * tau / (2.0 * m);
        let p1 = p + acc * tau + jerk * tau * tau / 2.0;
        p1 - gaussian_target_momentum(x1, vx, lambda, m)
    };
    let (mut lo, mut hi) = (-bound, bound);
    if residual(lo) <= 0.0 {
        return lo;
    }
    if residual(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Zero,
    OptimalTrajectory,
    DiscretizedOptimal,
    BangBang,
    Damping,
    Quadratic,
    GaussianApprox,
    Dqn,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::Zero,
        PolicyKind::OptimalTrajectory,
        PolicyKind::DiscretizedOptimal,
        PolicyKind::BangBang,
        PolicyKind::Damping,
        PolicyKind::Quadratic,
        PolicyKind::GaussianApprox,
        PolicyKind::Dqn,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Zero => "zero",
            PolicyKind::OptimalTrajectory => "optimal",
            PolicyKind::DiscretizedOptimal => "discretized",
            PolicyKind::BangBang => "bang-bang",
            PolicyKind::Damping => "damping",
            PolicyKind::Quadratic => "quadratic",
            PolicyKind::GaussianApprox => "gaussian",
            PolicyKind::Dqn => "dqn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }

    pub fn is_quartic(&self) -> bool {
        matches!(self, PolicyKind::Damping | PolicyKind::Quadratic | PolicyKind::GaussianApprox)
    }
}

/// A configured classical controller.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolicy {
    pub kind: PolicyKind,
    pub bound: f64,
    pub levels: usize,
    pub zeta: f64,
    pub damping_cancels_potential: bool,
    /// Spring constant assumed by the quartic quadratic controller.
    pub quadratic_k: f64,
    pub order: ExpansionOrder,
}

impl ControlPolicy {
    pub fn new(kind: PolicyKind, bound: f64) -> Self {
        let lambda = std::f64::consts::PI / 25.0;
        Self {
            kind,
            bound,
            levels: 21,
            zeta: 0.5,
            damping_cancels_potential: false,
            quadratic_k: 2.0 * lambda,
            order: ExpansionOrder::Second,
        }
    }

    pub fn force_levels(&self) -> ForceLevels {
        ForceLevels::new(self.bound, self.levels)
    }

    /// Force for a quadratic potential with spring constant `k`.
    /// Returns `None` for kinds that do not apply to quadratic problems.
    pub fn quadratic_force(&self, moments: &GaussianMoments, k: f64, m: f64, step_dt: f64) -> Option<f64> {
        let raw = || trajectory_force(moments.mean_x, moments.mean_p, k, m, step_dt, self.order);
        Some(match self.kind {
            PolicyKind::Zero => 0.0,
            PolicyKind::OptimalTrajectory => raw().clamp(-self.bound, self.bound),
            PolicyKind::DiscretizedOptimal => clip_discretize(raw(), self.bound, self.levels),
            PolicyKind::BangBang => bang_bang(raw(), self.bound),
            _ => return None,
        })
    }

    /// Force for the quartic potential, snapped to the level grid.
    pub fn quartic_force(&self, summary: &QuarticSummary, lambda: f64, m: f64, step_dt: f64) -> Option<f64> {
        let raw = match self.kind {
            PolicyKind::Zero => 0.0,
            PolicyKind::Damping => damping_force(summary, lambda, self.zeta, step_dt, self.damping_cancels_potential),
            PolicyKind::Quadratic => trajectory_force(
                summary.mean_x,
                summary.mean_p,
                self.quadratic_k,
                m,
                step_dt,
                ExpansionOrder::First,
            ),
            PolicyKind::GaussianApprox => gaussian_approx_force(summary, lambda, m, step_dt, self.bound),
            _ => return None,
        };
        Some(clip_discretize(raw, self.bound, self.levels))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn discretize_examples() {
        let b = 5.0 * PI;
        assert!((clip_discretize(0.8, b, 21) - PI / 2.0).abs() < 1e-12);
        assert_eq!(clip_discretize(100.0, b, 21), b);
        assert_eq!(clip_discretize(PI / 4.0, b, 21), 0.0);
        assert_eq!(clip_discretize(-PI / 4.0, b, 21), 0.0);
        assert!((ForceLevels::new(b, 21).spacing() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn level_grid_is_symmetric() {
        let l = ForceLevels::new(10.0 * PI, 21);
        for i in 0..21 {
            assert_eq!(l.level(i), -l.level(20 - i));
        }
        assert_eq!(l.level(10), 0.0);
    }

    #[test]
    fn bang_bang_ties() {
        assert_eq!(bang_bang(-0.1, 3.0), -3.0);
        assert_eq!(bang_bang(2.0, 3.0), 3.0);
        assert_eq!(bang_bang(0.0, 3.0), 3.0);
    }

    #[test]
    fn trajectory_force_small_step_limit() {
        let (k, m) = (PI, 1.0 / PI);
        for order in [ExpansionOrder::First, ExpansionOrder::Second] {
            let f = trajectory_force(1.0, -1.0, k, m, 1e-7, order);
            assert!((f + 2.0 * PI).abs() < 1e-5, "{order:?}: {f}");
            assert_eq!(trajectory_force(0.0, 0.0, k, m, 1.0 / 18.0, order), 0.0);
        }
    }

    #[test]
    fn second_order_solve_hits_trajectory() {
        // The quadratic expansion of the flow is exact to τ², so the endpoint
        // condition must hold to that order.
        let (k, m, tau) = (PI, 1.0 / PI, 1e-3);
        let (x, p) = (0.7, 0.4);
        let f = trajectory_force(x, p, k, m, tau, ExpansionOrder::Second);
        let acc = -k * x - f;
        let x1 = x + p / m * tau + acc * tau * tau / (2.0 * m);
        let p1 = p + acc * tau - k * p / m * tau * tau / 2.0;
        assert!((p1 + (m * k).sqrt() * x1).abs() < 1e-12);
    }

    #[test]
    fn gaussian_target_example() {
        let p = gaussian_target_momentum(1.0, 1.0, PI / 25.0, 1.0 / PI);
        assert!((p + (14.0f64 / 25.0).sqrt()).abs() < 1e-12);
        assert!((p + 0.74833).abs() < 1e-5);
    }

    #[test]
    fn damping_examples() {
        let lam = PI / 25.0;
        let s = QuarticSummary {
            mean_x: 0.3,
            mean_p: 0.0,
            var_x: 1.0,
            x3: 0.0,
        };
        assert_eq!(damping_force(&s, lam, 0.5, 1.0 / 18.0, false), 0.0);
        let s = QuarticSummary { mean_p: 1.0, ..s };
        assert!((damping_force(&s, lam, 0.5, 1.0 / 18.0, false) - 9.0).abs() < 1e-12);
        assert!((damping_force(&s, lam, 0.5, 1.0 / 18.0, true) - 9.0).abs() < 1e-12);
        let s = QuarticSummary { x3: 2.0, ..s };
        assert!((damping_force(&s, lam, 0.5, 1.0 / 18.0, true) - 9.0 + 8.0 * lam).abs() < 1e-12);
    }

    #[test]
    fn gaussian_force_rests_on_trajectory() {
        let lam = PI / 25.0;
        let m = 1.0 / PI;
        let s = QuarticSummary {
            mean_x: 0.5,
            mean_p: -0.1,
            var_x: 0.3,
            x3: 0.0,
        };
        let f = gaussian_approx_force(&s, lam, m, 1.0 / 18.0, 5.0 * PI);
        assert!(f.abs() < 5.0 * PI * 0.99);
        assert!(f > 0.0);
        let zero = QuarticSummary {
            mean_x: 0.0,
            mean_p: 0.0,
            ..s
        };
        assert!(gaussian_approx_force(&zero, lam, m, 1.0 / 18.0, 5.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(PolicyKind::parse(k.name()), Some(k));
        }
    }
}
