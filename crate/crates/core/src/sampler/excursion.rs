//! Loop sampling by vertex elimination.
//!
//! Order vertices `0..n`. Loops whose largest vertex is `x` form a Poisson
//! process of mass `-log d_x`, where `d_x = L_xx²` is the Cholesky pivot of
//! `I - P` and `f_x = 1 - d_x` is the probability that a walk from `x` returns
//! to `x` without visiting a larger index or being killed. Each such loop is a
//! Logarithmic(`f_x`) number of independent returning excursions.

use rand::Rng;

use super::{logarithmic, poisson, rng::stream_rng, LatticeLoop};
use crate::error::Result;
use crate::lattice::{DiscreteDomain, Step, TransitionMatrix};
use crate::linalg::EnvelopeCholesky;

pub struct ExcursionTables {
    mass: Vec<f64>,
    returns: Vec<f64>,
    kill: f64,
}

impl ExcursionTables {
    pub fn new(domain: &DiscreteDomain, kappa: f64) -> Result<Self> {
        let p = TransitionMatrix::untwisted(domain, kappa)?;
        let pivots = EnvelopeCholesky::one_minus(&p)?.pivots();
        Ok(ExcursionTables {
            mass: pivots.iter().map(|d| -d.ln()).collect(),
            returns: pivots.iter().map(|d| (1.0 - d).max(0.0)).collect(),
            kill: if kappa.is_infinite() { 1.0 } else { kappa / (4.0 + kappa) },
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass of loops whose largest vertex index is `x`.
    pub fn mass_at(&self, x: usize) -> f64 {
        self.mass[x]
    }

    pub(crate) fn sample_loops(&self, domain: &DiscreteDomain, lambda: f64, seed: u64, replicate: u64) -> Vec<LatticeLoop> {
        let mut loops = Vec::new();
        for x in 0..self.mass.len() {
            if self.mass[x] <= 0.0 {
                continue;
            }
            let mut rng = stream_rng(seed, replicate, x as u64 + 1);
            let count = poisson(lambda * self.mass[x], &mut rng);
            for _ in 0..count {
                loops.push(self.sample_loop(domain, x, &mut rng));
            }
        }
        loops
    }

    fn sample_loop<R: Rng>(&self, domain: &DiscreteDomain, x: usize, rng: &mut R) -> LatticeLoop {
        let k = logarithmic(self.returns[x], rng);
        let mut steps = Vec::new();
        let mut trial = Vec::new();
        for _ in 0..k {
            while !self.excursion(domain, x, rng, &mut trial) {}
            steps.extend_from_slice(&trial);
        }
        let root = domain.vertices()[x];
        let shift = rng.random_range(0..steps.len());
        LatticeLoop { root, steps }.rotated(shift)
    }

    /// One walk from `x`; true if it came back to `x` through vertices `< x`.
    fn excursion<R: Rng>(&self, domain: &DiscreteDomain, x: usize, rng: &mut R, steps: &mut Vec<Step>) -> bool {
        steps.clear();
        let mut v = x;
        loop {
            if self.kill > 0.0 && rng.random::<f64>() < self.kill {
                return false;
            }
            let step = Step::ALL[rng.random_range(0..4)];
            match domain.neighbor(v, step) {
                Some((w, _)) if w <= x => {
                    steps.push(step);
                    if w == x {
                        return true;
                    }
                    v = w;
                }
                _ => return false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::total_loop_mass;

    #[test]
    fn pivot_masses_add_up_to_the_total() {
        for (d, kappa) in [
            (DiscreteDomain::square(3, 1.0).unwrap(), 0.0),
            (DiscreteDomain::disk(3.0, 0.5).unwrap(), 0.7),
        ] {
            let t = ExcursionTables::new(&d, kappa).unwrap();
            let exact = total_loop_mass(&d, kappa).unwrap().value;
            assert!((t.total_mass() - exact).abs() < 1e-12 * exact.max(1.0));
        }
    }
}
