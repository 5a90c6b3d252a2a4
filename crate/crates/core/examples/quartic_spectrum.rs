//! Lowest eigenvalues of the quartic potential on the simulation grid.

use qctrl::quartic::{spectrum, QuarticParams};

fn main() {
    let p = QuarticParams::default();
    let g = p.grid();
    println!("grid [{}, {}] with {} points, lambda = {:.5}", g.x_min, g.x_max(), g.len, p.lambda);
    for (n, e) in spectrum(&p, 4).iter().enumerate() {
        println!("E{n} = {e:.6}");
    }
}
