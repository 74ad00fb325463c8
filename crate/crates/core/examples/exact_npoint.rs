//! Exact spin correlations from twisted determinants.
//!
//! cargo run --example exact_npoint

use loopsoup::exact::{n_point_function, parity_constrained_mass, ParityRule};
use loopsoup::lattice::{DiscreteDomain, Face};

fn main() -> loopsoup::Result<()> {
    let d = DiscreteDomain::square(8, 1.0 / 8.0)?;
    let z = Face::new(3, 3);
    let w = Face::new(5, 4);
    let odd = parity_constrained_mass(&d, &[z], &ParityRule::SumOdd, 0.0)?;
    println!("mass of loops winding oddly around {z}: {:.6}", odd.value);
    for lambda in [0.25, 0.5, 1.0] {
        let one = n_point_function(&d, &[z], lambda, 0.0)?;
        let two = n_point_function(&d, &[z, w], lambda, 0.0)?;
        let massive = n_point_function(&d, &[z, w], lambda, 0.5)?;
        println!("λ = {lambda:<4}  ⟨σ(z)⟩ = {one:.6}  ⟨σ(z)σ(w)⟩ = {two:.6}  with κ = 0.5: {massive:.6}");
    }
    Ok(())
}
