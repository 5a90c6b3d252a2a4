//! Keeping a measured particle at the top of an inverted harmonic potential.
//!
//! Usage: cargo run --release --example inverted_stabilization [episodes]

use qctrl::control::{ControlPolicy, PolicyKind};
use qctrl::harness::config::Problem;
use qctrl::harness::eval::{evaluate_inverted, run_quadratic, Controller};
use qctrl::osc::{OscSimulator, QuadraticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let sim = OscSimulator::new(QuadraticParams::inverted())?;
    for kind in [PolicyKind::OptimalTrajectory, PolicyKind::DiscretizedOptimal, PolicyKind::BangBang] {
        let c = Controller::Policy(ControlPolicy::new(kind, sim.params().force_bound));
        let runs = run_quadratic(&sim, Problem::Inverted, &c, episodes, 0)?;
        let failed: Vec<String> = runs.iter().filter(|r| r.failed).map(|r| format!("{:.1}", r.end_time)).collect();
        println!("{:12} success = {}  failure times {:?}", kind.name(), evaluate_inverted(&runs), failed);
    }
    Ok(())
}
