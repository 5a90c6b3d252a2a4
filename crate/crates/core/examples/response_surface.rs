//! Force maps of the classical controllers, written as CSV and SVG.
//!
//! Usage: cargo run --release --example response_surface [out dir]

use std::path::PathBuf;

use qctrl::control::{ControlPolicy, PolicyKind};
use qctrl::harness::config::{ExperimentConfig, Problem};
use qctrl::harness::eval::Controller;
use qctrl::harness::surface::{antisymmetry_defect, plane_fit, response_surface};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "surfaces".into()));
    let cases = [
        (Problem::Cooling, PolicyKind::OptimalTrajectory),
        (Problem::Inverted, PolicyKind::BangBang),
        (Problem::Quartic, PolicyKind::GaussianApprox),
    ];
    for (problem, kind) in cases {
        let cfg = ExperimentConfig::preset(problem);
        let c = Controller::Policy(ControlPolicy::new(kind, cfg.policy.bound));
        let s = response_surface(problem, &cfg.quadratic, &cfg.quartic, &c, &cfg.surface_x, &cfg.surface_p)?;
        let dir = out.join(format!("{}-{}", problem.name(), kind.name()));
        s.save(&dir, &format!("{} {}", problem.name(), kind.name()))?;
        let fit = plane_fit(&s).map(|f| format!("R² = {:.10}", f.3)).unwrap_or_else(|| "no unclipped points".into());
        println!("{}: {fit}, antisymmetry defect {:.1e}", dir.display(), antisymmetry_defect(&s));
    }
    Ok(())
}
