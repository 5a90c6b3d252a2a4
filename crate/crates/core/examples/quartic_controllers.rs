//! The classical quartic-potential controllers side by side.
//!
//! Usage: cargo run --release --example quartic_controllers [episodes]

use qctrl::control::{ControlPolicy, PolicyKind};
use qctrl::harness::eval::{evaluate_quartic, run_quartic, Controller};
use qctrl::quartic::{QuarticParams, QuarticSimulator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let params = QuarticParams::default();
    let t_max = params.t_max;
    let sim = QuarticSimulator::new(params)?;
    for kind in [PolicyKind::GaussianApprox, PolicyKind::Damping, PolicyKind::Quadratic] {
        let c = Controller::Policy(ControlPolicy::new(kind, sim.params().force_bound));
        let runs = run_quartic(&sim, &c, episodes, 0)?;
        let start: f64 = runs.iter().map(|r| sim.energy(&r.initial)).sum::<f64>() / runs.len() as f64;
        println!("{:9} energy = {}  (initial mean {start:.3})", kind.name(), evaluate_quartic(&runs, t_max));
    }
    Ok(())
}
