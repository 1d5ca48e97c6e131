//! Prints `E₀` against physical mass for k = 1 on the admissible side.

use nvpoly::radial_ode::{find_threshold, SolverConfig};
use nvpoly::steady_state::mass_curve;

fn main() -> nvpoly::Result<()> {
    let cfg = SolverConfig::default();
    let th = find_threshold(1.0, (-3.0, -0.05), &cfg)?;
    println!("# a* = {:.6}", th.a_star);
    let a: Vec<f64> = (0..25).map(|i| th.a_star + 0.01 + (-0.05 - th.a_star - 0.01) * i as f64 / 24.0).collect();
    let sweep = mass_curve(1.0, &a, 1.0, &cfg)?;
    println!("a,e0,mass");
    for r in &sweep.rows {
        println!("{:.6},{:.8},{:.8e}", r.a, r.e0, r.physical_mass);
    }
    Ok(())
}
