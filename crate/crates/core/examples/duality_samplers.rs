//! The λ = 1/2 spin field three ways: loop soup, DGFF + Ising, DGFF + coins.
//!
//! cargo run --example duality_samplers

use loopsoup::experiments::{run_experiment, ExperimentConfig};

fn main() -> loopsoup::Result<()> {
    let cfg = ExperimentConfig {
        n: Some(20_000),
        ..Default::default()
    };
    let out = run_experiment("duality", &cfg)?;
    for row in out.rows.iter().take(16) {
        println!("{:<11} {:<24} {:.4}", row.quantity, row.params, row.value);
    }
    for c in &out.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
