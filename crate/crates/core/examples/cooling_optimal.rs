//! Cooling a measured harmonic oscillator with the trajectory controller.
//!
//! Usage: cargo run --release --example cooling_optimal [episodes] [controls per unit time]

use qctrl::control::{ControlPolicy, PolicyKind};
use qctrl::harness::config::Problem;
use qctrl::harness::eval::{evaluate_cooling, run_quadratic, Controller};
use qctrl::osc::{OscSimulator, QuadraticParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let mut params = QuadraticParams::cooling();
    if let Some(c) = args.next() {
        params.controls_per_unit_time = c.parse()?;
    }
    let t_max = params.t_max;
    let sim = OscSimulator::new(params)?;
    for kind in [PolicyKind::OptimalTrajectory, PolicyKind::DiscretizedOptimal, PolicyKind::Zero] {
        let c = Controller::Policy(ControlPolicy::new(kind, sim.params().force_bound));
        let runs = run_quadratic(&sim, Problem::Cooling, &c, episodes, 0)?;
        println!("{:12} <n> = {}", kind.name(), evaluate_cooling(&runs, t_max));
    }
    Ok(())
}
