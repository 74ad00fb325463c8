//! Loops that feel the boundary: odd-winding mass between two disks, and the
//! probability that shrinking the domain leaves the spin unchanged.
//!
//! cargo run --example boundary_perturbation

use loopsoup::analysis::boundary_perturbation_probability;
use loopsoup::exact::boundary_mass_difference;

fn main() -> loopsoup::Result<()> {
    let mesh = 1.0 / 32.0;
    for r in [0.5, 0.7, 0.9] {
        let m = boundary_mass_difference(r, mesh)?;
        println!("r = {r}: mass {:.5}, -(1/8) log r = {:.5}", m.value, m.predicted);
    }
    let p = boundary_perturbation_probability(0.5, 0.5, mesh, 4000, 3)?;
    println!(
        "P(σ unchanged) ≈ {:.4} ± {:.4}; exact {:.4}; r^(λ/8) = {:.4}",
        p.estimate.mean, p.estimate.std_error, p.exact, p.first_order
    );
    Ok(())
}
