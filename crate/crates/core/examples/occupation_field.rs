//! Occupation times of the λ = 1/2 soup against half the squared DGFF.
//!
//! cargo run --example occupation_field

use loopsoup::analysis::replicate_moments;
use loopsoup::exact::greens_function;
use loopsoup::fields::occupation_field;
use loopsoup::lattice::DiscreteDomain;
use loopsoup::sampler::{DgffSampler, SoupMethod, SoupSampler};

fn main() -> loopsoup::Result<()> {
    let d = DiscreteDomain::square(3, 1.0)?;
    let g = greens_function(&d)?;
    let soups = SoupSampler::new(&d, 0.0, SoupMethod::Auto)?;
    let dgff = DgffSampler::new(&d)?;
    let n = 20_000;
    let seed = 5;
    let occ = replicate_moments(0, n, d.vertex_count(), |r, out| {
        let soup = soups.sample(0.5, seed, r)?;
        out.copy_from_slice(&occupation_field(&d, &soup, seed)?.values);
        Ok(())
    })?;
    let sq = replicate_moments(0, n, d.vertex_count(), |r, out| {
        for (o, phi) in out.iter_mut().zip(dgff.sample(seed, r, 0).values) {
            *o = 0.5 * phi * phi;
        }
        Ok(())
    })?;
    println!("{:>8} {:>10} {:>10} {:>10}", "vertex", "E T", "E φ²/2", "G/2");
    for (x, site) in d.vertices().iter().enumerate().take(8) {
        println!(
            "{:>8} {:>10.4} {:>10.4} {:>10.4}",
            format!("{},{}", site.x, site.y),
            occ[x].mean(),
            sq[x].mean(),
            0.5 * g.get(x, x)
        );
    }
    Ok(())
}
