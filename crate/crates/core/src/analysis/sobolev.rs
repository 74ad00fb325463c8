use serde::Serialize;

use super::estimate::{check_samples, replicate_moments, Estimate};
use super::spectral::{default_k_max, spectral_basis, SpectralBasis};
use super::twopoint::scaling_dimension;
use crate::error::{Error, Result};
use crate::fields::{check_beta, LoopWinding};
use crate::lattice::DiscreteDomain;
use crate::sampler::{SoupMethod, SoupSampler};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevNorm {
    /// `Σ_i a_i² / λ_i^α` over the computed basis.
    pub squared: f64,
    /// Bound on the omitted modes: `(‖h‖² - Σ a_i²) / λ_k^α`.
    pub tail_bound: f64,
    pub alpha: f64,
}

/// Squared `H^{-α}` norm of a field given on the basis coordinates.
pub fn sobolev_minus_alpha_norm(field: &[f64], basis: &SpectralBasis, alpha: f64) -> Result<SobolevNorm> {
    if !(alpha > 0.0) {
        return Err(Error::param(format!("α must be positive, got {alpha}")));
    }
    let coeff = basis.coefficients(field)?;
    let lambdas = basis.eigenvalues();
    let captured: f64 = coeff.iter().map(|c| c * c).sum();
    let squared = coeff.iter().zip(lambdas).map(|(c, l)| c * c / l.powf(alpha)).sum();
    let a2 = basis.mesh() * basis.mesh();
    let l2: f64 = field.iter().map(|x| x * x).sum::<f64>() * a2;
    let top = *lambdas.last().unwrap();
    Ok(SobolevNorm {
        squared,
        tail_bound: (l2 - captured).max(0.0) / top.powf(alpha),
        alpha,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyRow {
    pub delta: f64,
    pub delta_prime: f64,
    /// Mean of `‖δ^{-2Δ} V^δ - δ'^{-2Δ} V^{δ'}‖²_{H^{-α}}` over soups.
    pub distance: Estimate,
    /// Mean truncation tail bound for the same quantity.
    pub tail_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevCauchy {
    pub lambda: f64,
    pub beta: f64,
    pub alpha: f64,
    pub dimension: f64,
    pub k_max: usize,
    pub rows: Vec<CauchyRow>,
    /// Present when `Δ ≥ 1/2`, where the rescaled field is not expected to converge.
    pub warning: Option<String>,
    /// How face values reach the vertex basis.
    pub interpolation: &'static str,
}

/// Squared `H^{-α}` distances between consecutive rescaled cutoff fields,
/// all built from the same soup. `deltas` must be strictly decreasing.
pub fn sobolev_cauchy_diagnostic(
    domain: &DiscreteDomain,
    lambda: f64,
    beta: f64,
    alpha: f64,
    deltas: &[f64],
    n: u64,
    seed: u64,
) -> Result<SobolevCauchy> {
    check_beta(beta)?;
    check_samples(n, 2)?;
    if !(alpha > 1.5) {
        return Err(Error::param(format!("α must exceed 3/2, got {alpha}")));
    }
    if deltas.len() < 2 || deltas.iter().any(|&d| !(d > 0.0)) || deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("need at least two positive, strictly decreasing cutoffs"));
    }
    let dim = scaling_dimension(lambda, beta);
    let basis = spectral_basis(domain, default_k_max(domain))?;
    let sampler = SoupSampler::new(domain, 0.0, SoupMethod::Auto)?;
    let scale: Vec<f64> = deltas.iter().map(|d| d.powf(-2.0 * dim)).collect();
    let pairs = deltas.len() - 1;
    let moments = replicate_moments(0, n, 2 * pairs, |r, out| {
        let soup = sampler.sample(lambda, seed, r)?;
        // windings[j][face]: loops with diameter > deltas[j]
        let mut windings = vec![vec![0i64; domain.face_count()]; deltas.len()];
        for l in &soup.loops {
            let diam = l.diameter(domain.mesh());
            // the cutoffs decrease, so diameters above deltas[j] are above every later one
            let first = deltas.partition_point(|&d| diam <= d);
            if first == deltas.len() {
                continue;
            }
            for (face, w) in LoopWinding::new(l).iter() {
                if w == 0 {
                    continue;
                }
                if let Some(i) = domain.face_idx(face) {
                    for row in &mut windings[first..] {
                        row[i] += w as i64;
                    }
                }
            }
        }
        for p in 0..pairs {
            let (s0, s1) = (scale[p], scale[p + 1]);
            let mut total = 0.0;
            let mut tail = 0.0;
            for part in [f64::cos, f64::sin] {
                let diff: Vec<f64> = windings[p]
                    .iter()
                    .zip(&windings[p + 1])
                    .map(|(&k0, &k1)| s0 * part(beta * k0 as f64) - s1 * part(beta * k1 as f64))
                    .collect();
                let norm = sobolev_minus_alpha_norm(&basis.faces_to_vertices(domain, &diff), &basis, alpha)?;
                total += norm.squared;
                tail += norm.tail_bound;
            }
            out[2 * p] = total;
            out[2 * p + 1] = tail;
        }
        Ok(())
    })?;
    let rows = (0..pairs)
        .map(|p| CauchyRow {
            delta: deltas[p],
            delta_prime: deltas[p + 1],
            distance: moments[2 * p].estimate(seed),
            tail_bound: moments[2 * p + 1].mean(),
        })
        .collect();
    Ok(SobolevCauchy {
        lambda,
        beta,
        alpha,
        dimension: dim,
        k_max: basis.len(),
        rows,
        warning: (dim >= 0.5).then(|| format!("Δ = {dim:.4} ≥ 1/2: the cutoff family is not expected to be Cauchy")),
        interpolation: "face values averaged onto adjacent interior vertices",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn basis() -> (DiscreteDomain, SpectralBasis) {
        let d = DiscreteDomain::square(8, 0.125).unwrap();
        let b = spectral_basis(&d, 49).unwrap();
        (d, b)
    }

    #[test]
    fn eigenvectors_have_inverse_power_norms() {
        let (_, b) = basis();
        let zero = vec![0.0; b.vertices().len()];
        assert_eq!(sobolev_minus_alpha_norm(&zero, &b, 2.0).unwrap().squared, 0.0);
        let u1 = b.eigenvector(0);
        let l = b.eigenvalues();
        let n1 = sobolev_minus_alpha_norm(&u1, &b, 2.0).unwrap();
        assert!((n1.squared - l[0].powi(-2)).abs() < 1e-10 * l[0].powi(-2));
        let u12: Vec<f64> = u1.iter().zip(b.eigenvector(1)).map(|(x, y)| x + y).collect();
        let n12 = sobolev_minus_alpha_norm(&u12, &b, 2.0).unwrap().squared;
        assert!((n12 - l[0].powi(-2) - l[1].powi(-2)).abs() < 1e-10 * n12);
        // the basis is complete here, so nothing is left over
        assert!(n12 > 0.0 && sobolev_minus_alpha_norm(&u12, &b, 2.0).unwrap().tail_bound < 1e-12);
    }

    #[test]
    fn equal_cutoffs_need_distinct_values() {
        let d = DiscreteDomain::square(4, 0.25).unwrap();
        assert!(sobolev_cauchy_diagnostic(&d, 0.5, std::f64::consts::PI, 2.0, &[0.2, 0.2], 10, 1).is_err());
        assert!(sobolev_cauchy_diagnostic(&d, 0.5, std::f64::consts::PI, 1.0, &[0.4, 0.2], 10, 1).is_err());
    }

    #[test]
    fn large_dimension_is_flagged() {
        let d = DiscreteDomain::square(4, 0.25).unwrap();
        let lambda = 0.6 / scaling_dimension(1.0, std::f64::consts::PI);
        let c = sobolev_cauchy_diagnostic(&d, lambda, std::f64::consts::PI, 2.0, &[0.5, 0.25], 20, 1).unwrap();
        assert!(c.warning.is_some());
        assert!((c.dimension - 0.6).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn homogeneous_and_subadditive(seed in 0u64..1000, c in -3.0f64..3.0) {
            let (_, b) = basis();
            let m = b.vertices().len();
            let f: Vec<f64> = (0..m).map(|i| ((i as u64 * 7919 + seed * 104729) % 211) as f64 / 105.0 - 1.0).collect();
            let g: Vec<f64> = (0..m).map(|i| ((i as u64 * 31 + seed * 17) % 97) as f64 / 48.0 - 1.0).collect();
            let norm = |h: &[f64]| sobolev_minus_alpha_norm(h, &b, 2.0).unwrap().squared;
            let cf: Vec<f64> = f.iter().map(|x| c * x).collect();
            prop_assert!((norm(&cf) - c * c * norm(&f)).abs() <= 1e-10 * norm(&f).max(1e-30));
            let fg: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + y).collect();
            prop_assert!(norm(&fg).sqrt() <= norm(&f).sqrt() + norm(&g).sqrt() + 1e-12);
        }
    }
}
