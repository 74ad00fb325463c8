use serde::Serialize;

use super::estimate::{check_samples, replicate_moments, Estimate};
use crate::error::{Error, Result};
use crate::exact::mass_difference;
use crate::fields::winding_number;
use crate::lattice::{DiscreteDomain, Face};
use crate::sampler::{SoupMethod, SoupSampler};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryPerturbation {
    pub r: f64,
    pub lambda: f64,
    pub mesh: f64,
    pub face: Face,
    /// Monte Carlo `P(σ_D(0) = σ_{rD}(0))` under the thinning coupling.
    pub estimate: Estimate,
    /// Odd-winding mass `m` of loops in the unit disk that leave `rD`.
    pub mass_difference: f64,
    /// `(1 + e^{-2λm}) / 2`: the chance that a Poisson(`λm`) count is even.
    pub exact: f64,
    /// `r^{λ/8}`, which agrees with `exact` to first order in `1 - r`.
    pub first_order: f64,
}

/// Couples the spin at the origin in the unit disk and in the disk of radius
/// `r` by keeping, for the smaller disk, only the loops that stay inside it.
pub fn boundary_perturbation_probability(r: f64, lambda: f64, mesh: f64, n: u64, seed: u64) -> Result<BoundaryPerturbation> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::param(format!("radius ratio must lie in (0,1), got {r}")));
    }
    check_samples(n, 2)?;
    let outer = DiscreteDomain::disk(1.0, mesh)?;
    let inner = DiscreteDomain::disk(r, mesh)?;
    let face = inner.nearest_face([0.0, 0.0]);
    let m = mass_difference(&outer, &inner, face)?;
    let sampler = SoupSampler::new(&outer, 0.0, SoupMethod::Auto)?;
    let moments = replicate_moments(0, n, 1, |rep, out| {
        let soup = sampler.sample(lambda, seed, rep)?;
        let w: i64 = soup
            .loops
            .iter()
            .filter(|l| !l.lies_in(&inner))
            .map(|l| winding_number(l, face))
            .sum();
        out[0] = if w % 2 == 0 { 1.0 } else { 0.0 };
        Ok(())
    })?;
    Ok(BoundaryPerturbation {
        r,
        lambda,
        mesh,
        face,
        estimate: moments[0].estimate(seed),
        mass_difference: m,
        exact: 0.5 * (1.0 + (-2.0 * lambda * m).exp()),
        first_order: r.powf(lambda / 8.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agrees_with_poisson_parity() {
        let b = boundary_perturbation_probability(0.5, 1.0, 1.0 / 8.0, 4000, 5).unwrap();
        assert!(b.mass_difference > 0.0);
        assert!(b.estimate.within(b.exact, 4.0), "{b:?}");
        assert!(boundary_perturbation_probability(1.0, 1.0, 0.125, 100, 5).is_err());
    }

    #[test]
    fn tends_to_one_as_r_grows() {
        let near = boundary_perturbation_probability(0.97, 0.5, 1.0 / 16.0, 200, 1).unwrap();
        let far = boundary_perturbation_probability(0.5, 0.5, 1.0 / 16.0, 200, 1).unwrap();
        assert!(near.exact > far.exact && near.exact > 0.99);
        assert!(near.first_order > far.first_order);
    }
}
