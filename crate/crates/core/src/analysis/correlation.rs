use super::estimate::{check_samples, replicate_moments, Estimate};
use crate::error::Result;
use crate::fields::{spin_field, winding_number};
use crate::lattice::{DiscreteDomain, Face};
use crate::sampler::{LoopSoup, SoupMethod, SoupSampler};

/// Spins `σ(z)` at selected faces of one soup.
pub(crate) fn spins_at(domain: &DiscreteDomain, soup: &LoopSoup, faces: &[Face], idx: &[usize]) -> Vec<i8> {
    if faces.len() <= 4 {
        faces
            .iter()
            .map(|&f| {
                let odd = soup.loops.iter().map(|l| winding_number(l, f)).sum::<i64>() % 2 != 0;
                if odd {
                    -1
                } else {
                    1
                }
            })
            .collect()
    } else {
        let all = spin_field(domain, soup).values;
        idx.iter().map(|&i| all[i]).collect()
    }
}

/// Monte Carlo estimate of `⟨∏_j σ(z_j)⟩` from `n` independent soups.
pub fn mc_correlation(domain: &DiscreteDomain, faces: &[Face], lambda: f64, kappa: f64, n: u64, seed: u64) -> Result<Estimate> {
    let sampler = SoupSampler::new(domain, kappa, SoupMethod::Auto)?;
    Ok(mc_correlations(&sampler, &[faces.to_vec()], lambda, n, seed)?[0])
}

/// Several correlations estimated from one shared sequence of soups.
pub fn mc_correlations(sampler: &SoupSampler, sets: &[Vec<Face>], lambda: f64, n: u64, seed: u64) -> Result<Vec<Estimate>> {
    check_samples(n, 100)?;
    let domain = sampler.domain();
    let mut faces: Vec<Face> = sets.iter().flatten().copied().collect();
    faces.sort_by_key(|f| (f.y, f.x));
    faces.dedup();
    let idx = faces.iter().map(|&f| domain.require_face(f)).collect::<Result<Vec<_>>>()?;
    let positions: Vec<Vec<usize>> = sets
        .iter()
        .map(|s| s.iter().map(|f| faces.binary_search_by_key(&(f.y, f.x), |g| (g.y, g.x)).unwrap()).collect())
        .collect();
    let moments = replicate_moments(0, n, sets.len(), |r, out| {
        let soup = sampler.sample(lambda, seed, r)?;
        let spins = spins_at(domain, &soup, &faces, &idx);
        for (o, pos) in out.iter_mut().zip(&positions) {
            *o = pos.iter().map(|&p| spins[p] as f64).product();
        }
        Ok(())
    })?;
    Ok(moments.iter().map(|m| m.estimate(seed)).collect())
}
