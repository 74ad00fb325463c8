use std::f64::consts::PI;

use serde::Serialize;

use super::estimate::{check_samples, replicate_moments, Estimate};
use crate::error::{Error, Result};
use crate::fields::{check_beta, covers, winding_number};
use crate::lattice::{DiscreteDomain, Face};
use crate::sampler::{SoupMethod, SoupSampler};

/// `Δ = λβ(2π - β) / 8π²`.
pub fn scaling_dimension(lambda: f64, beta: f64) -> f64 {
    lambda * beta * (2.0 * PI - beta) / (8.0 * PI * PI)
}

/// Loop masses splitting `⟨V^δ(z) conj V^{δ'}(w)⟩ = exp(-λ Σ)`, where Σ is the
/// sum of the four masses below. "Covers" means the face lies in the loop's hull.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoPointDecomposition {
    pub z: Face,
    pub w: Face,
    pub delta: f64,
    pub delta_prime: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Diameter `> δ`, covers both, weight `1 - cos((k - l)β)`.
    pub kappa_delta: Estimate,
    /// Diameter `> δ`, covers `z` but not `w`, weight `1 - cos(kβ)`.
    pub tau_delta_zw: Estimate,
    /// Diameter `> δ'`, covers `w` but not `z`, weight `1 - cos(lβ)`.
    pub tau_delta_prime_wz: Estimate,
    /// Diameter in `(δ', δ]`, covers both, weight `1 - cos(lβ)`.
    pub tau_between_wz: Estimate,
    /// `exp(-λ Σ)` from the four masses, with delta-method error.
    pub reconstructed: Estimate,
    /// Mean of `cos(β (N^δ(z) - N^{δ'}(w)))` over the same soups.
    pub direct: Estimate,
    /// `(δ δ')^{-2Δ}`, the factor that turns both routes into the rescaled correlation.
    pub normalization: f64,
}

/// `k` and `l` are the windings of a loop around `z` and `w`.
pub fn twopoint_decomposition(
    domain: &DiscreteDomain,
    z: Face,
    w: Face,
    delta: f64,
    delta_prime: f64,
    lambda: f64,
    beta: f64,
    n: u64,
    seed: u64,
) -> Result<TwoPointDecomposition> {
    if !(delta_prime > 0.0 && delta > delta_prime) {
        return Err(Error::param(format!("need δ > δ' > 0, got δ = {delta}, δ' = {delta_prime}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::param("masses are read off Poisson means and need λ > 0"));
    }
    check_beta(beta)?;
    check_samples(n, 2)?;
    domain.require_face(z)?;
    domain.require_face(w)?;
    let mesh = domain.mesh();
    let sampler = SoupSampler::new(domain, 0.0, SoupMethod::Auto)?;
    let inside = |f: Face, b: (i32, i32, i32, i32)| f.x >= b.0 && f.x < b.1 && f.y >= b.2 && f.y < b.3;
    let m = replicate_moments(0, n, 6, |r, out| {
        let soup = sampler.sample(lambda, seed, r)?;
        let (mut nz, mut nw) = (0i64, 0i64);
        for l in &soup.loops {
            let d = l.diameter(mesh);
            if d <= delta_prime {
                continue;
            }
            let b = l.bounding_box();
            if !inside(z, b) && !inside(w, b) {
                continue;
            }
            let c = covers(l, &[z, w]);
            let k = winding_number(l, z);
            let lw = winding_number(l, w);
            let big = d > delta;
            if big {
                nz += k;
            }
            nw += lw;
            let weight = match (c[0], c[1]) {
                (true, true) if big => {
                    out[0] += 1.0 - ((k - lw) as f64 * beta).cos();
                    continue;
                }
                (true, false) if big => (1, k),
                (false, true) => (2, lw),
                (true, true) => (3, lw),
                _ => continue,
            };
            out[weight.0] += 1.0 - (weight.1 as f64 * beta).cos();
        }
        out[4] = out[..4].iter().sum();
        out[5] = ((nz - nw) as f64 * beta).cos();
        Ok(())
    })?;
    let mass = |i: usize| m[i].estimate(seed).scaled(1.0 / lambda);
    let total = m[4].estimate(seed);
    let rec = (-total.mean).exp();
    let dim = scaling_dimension(lambda, beta);
    Ok(TwoPointDecomposition {
        z,
        w,
        delta,
        delta_prime,
        lambda,
        beta,
        kappa_delta: mass(0),
        tau_delta_zw: mass(1),
        tau_delta_prime_wz: mass(2),
        tau_between_wz: mass(3),
        reconstructed: Estimate {
            mean: rec,
            std_error: rec * total.std_error,
            ..total
        },
        direct: m[5].estimate(seed),
        normalization: (delta * delta_prime).powf(-2.0 * dim),
    })
}
