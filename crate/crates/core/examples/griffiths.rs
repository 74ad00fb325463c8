//! Griffiths inequalities for the spin field, evaluated exactly.
//!
//! cargo run --example griffiths

use loopsoup::exact::griffiths_check;
use loopsoup::lattice::{DiscreteDomain, Face};

fn main() -> loopsoup::Result<()> {
    let big = DiscreteDomain::square(6, 1.0)?;
    let small = DiscreteDomain::rectangle(4, 3, 1.0)?;
    let a = [Face::new(1, 1)];
    let b = [Face::new(2, 1), Face::new(3, 2)];
    for lambda in [0.25, 0.5, 1.0, 2.0] {
        let g = griffiths_check(&big, &small, &a, &b, lambda)?;
        println!(
            "λ = {lambda:<4} ⟨σ_A⟩ = {:.5}  monotonicity slack {:.5}  correlation slack {:.5}",
            g.positivity, g.monotonicity, g.correlation
        );
    }
    Ok(())
}
