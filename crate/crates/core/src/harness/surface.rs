//! Controller response surfaces: the force chosen at each (⟨x⟩, ⟨p⟩) with the
//! covariances held at their steady values.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::control::{ControlPolicy, ForceLevels, QuarticSummary};
use crate::gauss::steady_covariances;
use crate::osc::QuadraticParams;
use crate::qstate::GaussianMoments;
use crate::quartic::QuarticParams;

use super::config::{InputCase, Problem, Range};
use super::env;
use super::eval::Controller;
use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// Row-major over p: `force[j * xs.len() + i]` is at (xs[i], ps[j]).
    pub force: Vec<f64>,
    pub bound: f64,
}

impl Surface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.force[j * self.xs.len() + i]
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "x,p,force")?;
        for (j, &p) in self.ps.iter().enumerate() {
            for (i, &x) in self.xs.iter().enumerate() {
                writeln!(w, "{x},{p},{}", self.at(i, j))?;
            }
        }
        Ok(())
    }

    /// Heat map, blue for negative and red for positive forces.
    pub fn to_svg(&self, title: &str) -> String {
        let (nx, np) = (self.xs.len(), self.ps.len());
        let cell = (480.0 / nx.max(np) as f64).max(1.0);
        let (w, h) = (cell * nx as f64, cell * np as f64);
        let (left, top) = (60.0, 30.0);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" font-family="sans-serif" font-size="12">"#,
            w + left + 20.0,
            h + top + 50.0
        );
        let _ = writeln!(s, r#"<text x="{left}" y="18">{}</text>"#, escape(title));
        for j in 0..np {
            for i in 0..nx {
                let v = (self.at(i, j) / self.bound).clamp(-1.0, 1.0);
                let (r, g, b) = if v >= 0.0 {
                    (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
                } else {
                    (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
                };
                // p increases upwards
                let y = top + (np - 1 - j) as f64 * cell;
                let x = left + i as f64 * cell;
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="rgb({:.0},{:.0},{:.0})"/>"#,
                    cell + 0.05,
                    cell + 0.05,
                    r,
                    g,
                    b
                );
            }
        }
        let (x0, x1) = (self.xs[0], self.xs[nx - 1]);
        let (p0, p1) = (self.ps[0], self.ps[np - 1]);
        let _ = writeln!(s, r#"<text x="{left}" y="{:.0}">{x0}</text>"#, top + h + 16.0);
        let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" text-anchor="end">{x1}</text>"#, left + w, top + h + 16.0);
        let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" text-anchor="middle">⟨x⟩</text>"#, left + w / 2.0, top + h + 34.0);
        let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" text-anchor="end">{p0}</text>"#, left - 6.0, top + h);
        let _ = writeln!(s, r#"<text x="{:.0}" y="{:.0}" text-anchor="end">{p1}</text>"#, left - 6.0, top + 12.0);
        let _ = writeln!(s, r#"<text x="14" y="{:.0}">⟨p⟩</text>"#, top + h / 2.0);
        s.push_str("</svg>\n");
        s
    }

    pub fn save(&self, dir: &Path, title: &str) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("surface.csv"))?);
        self.write_csv(&mut w)?;
        w.flush()?;
        std::fs::write(dir.join("surface.svg"), self.to_svg(title))?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Force map over a grid of means.
///
/// Quadratic problems fix the covariances at the steady values of the
/// measured oscillator. Quartic controllers see a Gaussian with the steady
/// position variance of the harmonic potential they assume. Network
/// controllers are supported for the moment input on quadratic problems.
pub fn response_surface(
    problem: Problem,
    quadratic: &QuadraticParams,
    quartic: &QuarticParams,
    controller: &Controller,
    xs: &Range,
    ps: &Range,
) -> Result<Surface, HarnessError> {
    let (xv, pv) = (xs.points(), ps.points());
    if xv.len() < 2 || pv.len() < 2 {
        return Err(HarnessError::Config("surface ranges need at least two points".into()));
    }
    let mut force = Vec::with_capacity(xv.len() * pv.len());
    let bound;
    match (problem, controller) {
        (Problem::Quartic, Controller::Policy(policy)) => {
            let q = quartic;
            bound = policy.bound;
            let (vx, _, _) = steady_covariances(policy.quadratic_k, q.m, q.gamma, q.eta);
            for &p in &pv {
                for &x in &xv {
                    let s = QuarticSummary {
                        mean_x: x,
                        mean_p: p,
                        var_x: vx,
                        x3: x * x * x + 3.0 * x * vx,
                    };
                    force.push(quartic_policy(policy, &s, q)?);
                }
            }
        }
        (Problem::Quartic, Controller::Network { .. }) => {
            return Err(HarnessError::Config("network surfaces need a quadratic problem".into()));
        }
        (_, controller) => {
            let q = quadratic;
            let (vx, vp, c) = steady_covariances(q.k, q.m, q.gamma, q.eta);
            let moments = |x, p| GaussianMoments {
                mean_x: x,
                mean_p: p,
                var_x: vx,
                var_p: vp,
                cov_c: c,
            };
            match controller {
                Controller::Policy(policy) => {
                    bound = policy.bound;
                    for &p in &pv {
                        for &x in &xv {
                            let f = policy
                                .quadratic_force(&moments(x, p), q.k, q.m, q.control_dt())
                                .ok_or_else(|| HarnessError::Config(format!("controller '{}' needs the quartic problem", policy.kind.name())))?;
                            force.push(f);
                        }
                    }
                }
                Controller::Network { net, input } => {
                    if *input != InputCase::Moments {
                        return Err(HarnessError::Config("network surfaces need the moments input".into()));
                    }
                    bound = q.force_bound;
                    let levels = ForceLevels::new(bound, net.actions());
                    for &p in &pv {
                        for &x in &xv {
                            let obs = env::moments_input(&moments(x, p));
                            let a = qctrl_dqn::train::greedy_action(net, &obs)?;
                            force.push(levels.level(a));
                        }
                    }
                }
            }
        }
    }
    Ok(Surface { xs: xv, ps: pv, force, bound })
}

fn quartic_policy(policy: &ControlPolicy, s: &QuarticSummary, q: &QuarticParams) -> Result<f64, HarnessError> {
    policy
        .quartic_force(s, q.lambda, q.m, q.control_dt())
        .ok_or_else(|| HarnessError::Config(format!("controller '{}' needs a quadratic problem", policy.kind.name())))
}

/// Least-squares plane f ≈ a + b·x + c·p over the points with |f| below the
/// bound, returning (a, b, c, R²).
pub fn plane_fit(surface: &Surface) -> Option<(f64, f64, f64, f64)> {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (j, &p) in surface.ps.iter().enumerate() {
        for (i, &x) in surface.xs.iter().enumerate() {
            let f = surface.at(i, j);
            if f.abs() < surface.bound * (1.0 - 1e-9) {
                rows.push([1.0, x, p]);
                ys.push(f);
            }
        }
    }
    if rows.len() < 3 {
        return None;
    }
    let a = nalgebra::DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]);
    let y = nalgebra::DVector::from_vec(ys);
    let coef = a.clone().svd(true, true).solve(&y, 1e-14).ok()?;
    let fitted = &a * &coef;
    let mean = y.mean();
    let ss_res = (&y - fitted).norm_squared();
    let ss_tot = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some((coef[0], coef[1], coef[2], r2))
}

/// Largest |f(x, p) + f(−x, −p)| over a grid symmetric about the origin.
pub fn antisymmetry_defect(surface: &Surface) -> f64 {
    let (nx, np) = (surface.xs.len(), surface.ps.len());
    let mut worst = 0.0f64;
    for j in 0..np {
        for i in 0..nx {
            worst = worst.max((surface.at(i, j) + surface.at(nx - 1 - i, np - 1 - j)).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::PolicyKind;
    use qctrl_dqn::{NetworkSpec, QNetwork};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn grid(span: f64, n: usize) -> Range {
        Range { lo: -span, hi: span, count: n }
    }

    #[test]
    fn optimal_surface_is_planar_where_unclipped() {
        let q = QuadraticParams::cooling();
        let c = Controller::Policy(ControlPolicy::new(PolicyKind::OptimalTrajectory, q.force_bound));
        let s = response_surface(Problem::Cooling, &q, &QuarticParams::default(), &c, &grid(2.0, 41), &grid(2.0, 41)).unwrap();
        let (a, _, _, r2) = plane_fit(&s).unwrap();
        assert!(r2 >= 1.0 - 1e-9, "R² = {r2}");
        assert!(a.abs() < 1e-9);
        assert!(antisymmetry_defect(&s) < 1e-12);
    }

    #[test]
    fn quartic_surfaces_are_antisymmetric() {
        let q = QuarticParams::default();
        for kind in [PolicyKind::Damping, PolicyKind::Quadratic, PolicyKind::GaussianApprox] {
            let c = Controller::Policy(ControlPolicy::new(kind, q.force_bound));
            let s = response_surface(Problem::Quartic, &QuadraticParams::cooling(), &q, &c, &grid(3.0, 31), &grid(3.0, 31)).unwrap();
            assert!(antisymmetry_defect(&s) < 1e-9, "{kind:?}");
        }
    }

    #[test]
    fn network_surface_renders_on_full_grid() {
        let q = QuadraticParams::cooling();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let net = QNetwork::<f32>::new(NetworkSpec::small(5, &[16], 8, 21), &mut rng).unwrap();
        let c = Controller::Network {
            net: Arc::new(net),
            input: InputCase::Moments,
        };
        let s = response_surface(Problem::Cooling, &q, &QuarticParams::default(), &c, &grid(2.0, 101), &grid(2.0, 101)).unwrap();
        assert_eq!(s.force.len(), 101 * 101);
        let levels = ForceLevels::new(q.force_bound, 21);
        assert!(s.force.iter().all(|&f| levels.contains(f)));
        let svg = s.to_svg("dqn");
        assert_eq!(svg.matches("<rect").count(), 101 * 101);
        let dir = tempfile::tempdir().unwrap();
        s.save(dir.path(), "dqn").unwrap();
        let csv = std::fs::read_to_string(dir.path().join("surface.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 101 * 101);
    }
}
