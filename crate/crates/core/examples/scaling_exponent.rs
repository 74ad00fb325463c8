//! Log-log slope of the exact one-point function at the center of the unit square.
//!
//! cargo run --example scaling_exponent

use loopsoup::analysis::scaling_exponent_fit;
use loopsoup::exact::Shape;

fn main() -> loopsoup::Result<()> {
    let meshes = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    for lambda in [0.5, 1.0] {
        let fit = scaling_exponent_fit(Shape::UnitSquare, [0.5, 0.5], lambda, &meshes)?;
        println!("λ = {lambda}");
        for (a, v) in fit.meshes.iter().zip(&fit.values) {
            println!("  a = 1/{:<4} ⟨σ⟩ = {v:.6}", (1.0 / a).round());
        }
        println!(
            "  slope {:.4} ± {:.4}, local slopes {:.4?}, with an O(a) term {:.4}, predicted {:.4}",
            fit.fit.slope, fit.fit.slope_ci, fit.local_slopes, fit.corrected_slope, fit.expected
        );
    }
    Ok(())
}
