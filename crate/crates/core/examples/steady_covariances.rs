//! Stationary covariances and the cooling floor of the measured oscillator.

use qctrl::gauss::{cooling_floor, steady_covariances};
use qctrl::osc::QuadraticParams;

fn main() {
    for (name, p) in [("harmonic", QuadraticParams::cooling()), ("inverted", QuadraticParams::inverted())] {
        let (vx, vp, c) = steady_covariances(p.k, p.m, p.gamma, p.eta);
        println!("{name:9} Vx = {vx:.5}  Vp = {vp:.5}  C = {c:.5}  sqrt(Vx) = {:.3}  VxVp - C^2 = {:.5}", vx.sqrt(), vx * vp - c * c);
    }
    let p = QuadraticParams::cooling();
    println!("cooling floor <n> = {:.4}", cooling_floor(p.k, p.m, p.gamma, p.eta));
}
