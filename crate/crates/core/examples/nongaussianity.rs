//! The Wick residual of three symmetric points in the disk.
//!
//! cargo run --example nongaussianity

use loopsoup::exact::nongaussianity_residual;

fn main() -> loopsoup::Result<()> {
    for rho in [0.4, 0.2, 0.1] {
        let g = nongaussianity_residual(0.5, rho, 1.0 / 32.0)?;
        println!("ρ = {rho:<4} a = {:.5}  b = {:.5?}  residual {:+.5}", g.a, g.b, g.residual);
    }
    Ok(())
}
