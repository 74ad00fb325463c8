//! Draw one random walk loop soup and summarize it.
//!
//! cargo run --example sample_soup

use loopsoup::fields::{spin_field, winding_field};
use loopsoup::io::write_loops_jsonl;
use loopsoup::lattice::DiscreteDomain;
use loopsoup::sampler::{SoupMethod, SoupSampler};

fn main() -> loopsoup::Result<()> {
    let d = DiscreteDomain::rectangle(10, 6, 1.0)?;
    for method in [SoupMethod::Bridge, SoupMethod::Excursion] {
        let sampler = SoupSampler::new(&d, 0.0, method)?;
        let soup = sampler.sample(2.0, 11, 0)?;
        let longest = soup.loops.iter().map(|l| l.len()).max().unwrap_or(0);
        println!(
            "{method:?}: {} loops (expected {:.3}), longest {longest} steps",
            soup.len(),
            2.0 * sampler.total_mass()
        );
        let winding = winding_field(&d, &soup.loops);
        let spins = spin_field(&d, &soup);
        let flipped = spins.values.iter().filter(|&&s| s < 0).count();
        println!("  nonzero windings {}, faces with σ = -1: {flipped}", winding.values.iter().filter(|&&k| k != 0).count());
    }
    let soup = SoupSampler::new(&d, 0.0, SoupMethod::Auto)?.sample(2.0, 11, 0)?;
    println!("first loops as JSON lines:");
    write_loops_jsonl(std::io::stdout().lock(), &soup.loops[..soup.len().min(3)])?;
    Ok(())
}
