//! Spin fields at `λ = 1/2` built from the DGFF.
//!
//! Given `|φ|`, the spins are an Ising model on the dual graph with `+1` on the
//! outer vertex. Across primal edge `{x,y}` a disagreeing pair of dual spins
//! carries the factor `tanh(|φ_x φ_y| / 4)` relative to an agreeing pair. The
//! coin-flip route reaches the same law through the signs of `φ`: dual edges
//! across sign changes are always open, the rest open with probability
//! `exp(-|φ_x φ_y| / 2)`, and clusters not attached to the outer vertex get fair signs.

use rand::Rng;

use super::dgff::DgffSampler;
use super::rng::{stream_rng, AUX_STREAM};
use super::{SoupMethod, SoupSampler};
use crate::error::{Error, Result};
use crate::lattice::{DiscreteDomain, DualVertex};

/// Largest face count for exhaustive Ising sampling.
pub const MAX_EXACT_ISING_FACES: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IsingMethod {
    /// Full enumeration of `2^faces` configurations.
    #[default]
    Exact,
    /// Wolff cluster updates with `1000 × faces` burn-in updates.
    Wolff,
}

/// `tanh(|φ_x φ_y| / 4)` for every primal edge.
pub fn coupling_tanh(domain: &DiscreteDomain, phi: &[f64]) -> Vec<f64> {
    domain
        .edges()
        .iter()
        .map(|e| ((phi[e.a] * phi[e.b]).abs() / 4.0).tanh())
        .collect()
}

fn slot(v: DualVertex, faces: usize) -> usize {
    match v {
        DualVertex::Face(i) => i,
        DualVertex::Outer => faces,
    }
}

/// Exact draw from the dual Ising model with edge factors `tanh` on disagreement.
pub fn exact_ising<R: Rng>(domain: &DiscreteDomain, tanh: &[f64], rng: &mut R) -> Result<Vec<i8>> {
    let n = domain.face_count();
    if n > MAX_EXACT_ISING_FACES {
        return Err(Error::TooLarge {
            dim: n,
            limit: MAX_EXACT_ISING_FACES,
        });
    }
    let dual = domain.dual();
    let bonds: Vec<(usize, usize, f64)> = (0..dual.edge_count())
        .map(|e| {
            let [u, v] = dual.ends(e);
            (slot(u, n), slot(v, n), tanh[e].ln())
        })
        .collect();
    // bit i set means face i is -1; the outer vertex (bit n) is always +1
    let log_weights: Vec<f64> = (0u64..1 << n)
        .map(|c| {
            bonds
                .iter()
                .filter(|&&(u, v, _)| (c >> u ^ c >> v) & 1 == 1)
                .map(|&(_, _, lw)| lw)
                .sum()
        })
        .collect();
    let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_weights.iter().map(|lw| (lw - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    let mut pick = 0u64;
    for (c, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            pick = c as u64;
            if r < *w {
                break;
            }
            r -= w;
        }
    }
    Ok((0..n).map(|i| if pick >> i & 1 == 1 { -1 } else { 1 }).collect())
}

/// Wolff cluster dynamics for the same model, started from all `+1`.
/// Clusters that would attach to the outer vertex are not flipped.
pub fn wolff_ising<R: Rng>(domain: &DiscreteDomain, tanh: &[f64], rng: &mut R, updates: usize) -> Vec<i8> {
    let n = domain.face_count();
    let dual = domain.dual();
    let mut spins = vec![1i8; n];
    let mut in_cluster = vec![false; n];
    let mut cluster = Vec::new();
    let mut stack = Vec::new();
    for _ in 0..updates {
        let start = rng.random_range(0..n);
        let s = spins[start];
        cluster.clear();
        stack.clear();
        in_cluster[start] = true;
        cluster.push(start);
        stack.push(start);
        let mut anchored = false;
        while let Some(i) = stack.pop() {
            for &(w, e) in dual.neighbors(DualVertex::Face(i)) {
                let open = 1.0 - tanh[e];
                match w {
                    DualVertex::Outer => {
                        if s == 1 && rng.random::<f64>() < open {
                            anchored = true;
                        }
                    }
                    DualVertex::Face(j) => {
                        if !in_cluster[j] && spins[j] == s && rng.random::<f64>() < open {
                            in_cluster[j] = true;
                            cluster.push(j);
                            stack.push(j);
                        }
                    }
                }
            }
        }
        for &i in &cluster {
            in_cluster[i] = false;
            if !anchored {
                spins[i] = -s;
            }
        }
    }
    spins
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Both DGFF-based constructions of the `λ = 1/2` spin field on one domain.
pub struct DualitySampler<'a> {
    domain: &'a DiscreteDomain,
    dgff: DgffSampler,
}

impl<'a> DualitySampler<'a> {
    pub fn new(domain: &'a DiscreteDomain) -> Result<Self> {
        Ok(DualitySampler {
            domain,
            dgff: DgffSampler::new(domain)?,
        })
    }

    /// A field sample with no vanishing product across an edge (redrawn otherwise).
    fn field(&self, seed: u64, replicate: u64) -> Vec<f64> {
        for attempt in 0.. {
            let phi = self.dgff.sample(seed, replicate, attempt).values;
            if self.domain.edges().iter().all(|e| phi[e.a] * phi[e.b] != 0.0) {
                return phi;
            }
        }
        unreachable!()
    }

    pub fn ising(&self, seed: u64, replicate: u64, method: IsingMethod) -> Result<Vec<i8>> {
        let tanh = coupling_tanh(self.domain, &self.field(seed, replicate));
        let mut rng = stream_rng(seed, replicate, AUX_STREAM);
        match method {
            IsingMethod::Exact => exact_ising(self.domain, &tanh, &mut rng),
            IsingMethod::Wolff => Ok(wolff_ising(
                self.domain,
                &tanh,
                &mut rng,
                1000 * self.domain.face_count(),
            )),
        }
    }

    pub fn coins(&self, seed: u64, replicate: u64) -> Vec<i8> {
        let phi = self.field(seed, replicate);
        let n = self.domain.face_count();
        let dual = self.domain.dual();
        let mut rng = stream_rng(seed, replicate, AUX_STREAM);
        let mut uf = UnionFind((0..=n).collect());
        for (e, edge) in self.domain.edges().iter().enumerate() {
            let (x, y) = (phi[edge.a], phi[edge.b]);
            let sign_change = (x > 0.0) != (y > 0.0);
            let coin = rng.random::<f64>() < (-0.5 * (x * y).abs()).exp();
            if sign_change || coin {
                let [u, v] = dual.ends(e);
                uf.union(slot(u, n), slot(v, n));
            }
        }
        let outer = uf.find(n);
        let mut signs = vec![0i8; n + 1];
        (0..n)
            .map(|i| {
                let root = uf.find(i);
                if root == outer {
                    return 1;
                }
                if signs[root] == 0 {
                    signs[root] = if rng.random::<bool>() { 1 } else { -1 };
                }
                signs[root]
            })
            .collect()
    }
}

pub fn sample_spin_via_dgff_ising(domain: &DiscreteDomain, seed: u64, method: IsingMethod) -> Result<Vec<i8>> {
    DualitySampler::new(domain)?.ising(seed, 0, method)
}

pub fn sample_spin_via_dgff_coins(domain: &DiscreteDomain, seed: u64) -> Result<Vec<i8>> {
    Ok(DualitySampler::new(domain)?.coins(seed, 0))
}

/// Spin field of a massive soup in a `width × height` box of unit faces,
/// standing in for the infinite-volume massive field.
pub fn sample_massive_box_field(width: u32, height: u32, kappa: f64, lambda: f64, seed: u64) -> Result<Vec<i8>> {
    if !(kappa > 0.0) {
        return Err(Error::param(format!(
            "the infinite-volume field needs κ > 0, got {kappa}"
        )));
    }
    let domain = DiscreteDomain::rectangle(width, height, 1.0)?;
    let soup = SoupSampler::new(&domain, kappa, SoupMethod::Excursion)?.sample(lambda, seed, 0)?;
    Ok(crate::fields::spin_field(&domain, &soup).values)
}
