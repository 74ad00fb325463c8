//! Random constructions: loop soups, the discrete Gaussian free field, and
//! spin fields built from the field through the Ising and coin-flip routes.

mod bridge;
mod dgff;
mod excursion;
mod ising;
mod rng;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DiscreteDomain, Site, Step};

pub use bridge::{set_power_cache_dir, PowerStack};
pub use dgff::{sample_dgff, DgffSample, DgffSampler};
pub use excursion::ExcursionTables;
pub use ising::{
    coupling_tanh, exact_ising, sample_massive_box_field, sample_spin_via_dgff_coins,
    sample_spin_via_dgff_ising, wolff_ising, DualitySampler, IsingMethod, MAX_EXACT_ISING_FACES,
};
pub use rng::{stream_rng, AUX_STREAM};

/// A rooted nearest-neighbor loop: a root site and the closed sequence of steps from it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LatticeLoop {
    root: Site,
    steps: Vec<Step>,
}

impl LatticeLoop {
    pub fn new(root: Site, steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::param("a loop needs at least one step"));
        }
        let end = steps.iter().fold(root, |s, &d| s.step(d));
        if end != root {
            return Err(Error::param(format!("steps from {root:?} end at {end:?}")));
        }
        Ok(LatticeLoop { root, steps })
    }

    pub fn root(&self) -> Site {
        self.root
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Time length `t`, the number of steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Sites visited at times `0..t` (the return to the root is not repeated).
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.steps.iter().scan(self.root, |s, &d| {
            let here = *s;
            *s = s.step(d);
            Some(here)
        })
    }

    /// True when every site is a domain vertex and every step uses a domain edge.
    pub fn lies_in(&self, domain: &DiscreteDomain) -> bool {
        let Some(mut v) = domain.vertex_idx(self.root) else {
            return false;
        };
        for &d in &self.steps {
            match domain.neighbor(v, d) {
                Some((w, _)) => v = w,
                None => return false,
            }
        }
        true
    }

    /// Same trace traversed backwards.
    pub fn reversed(&self) -> LatticeLoop {
        LatticeLoop {
            root: self.root,
            steps: self.steps.iter().rev().map(|s| s.reverse()).collect(),
        }
    }

    /// Same loop rerooted `k` steps later.
    pub fn rotated(&self, k: usize) -> LatticeLoop {
        let k = k % self.steps.len();
        let root = self.steps[..k].iter().fold(self.root, |s, &d| s.step(d));
        let mut steps = self.steps[k..].to_vec();
        steps.extend_from_slice(&self.steps[..k]);
        LatticeLoop { root, steps }
    }

    /// Representative of the unrooted loop: the rotation with the smallest
    /// `(root.y, root.x, steps)`.
    pub fn canonical(&self) -> LatticeLoop {
        let key = |l: &LatticeLoop| {
            (
                l.root.y,
                l.root.x,
                l.steps.iter().map(|s| s.index()).collect::<Vec<_>>(),
            )
        };
        (0..self.steps.len())
            .map(|k| self.rotated(k))
            .min_by_key(key)
            .expect("loops are nonempty")
    }

    /// Integer bounding box `(xmin, xmax, ymin, ymax)` of the sites.
    pub fn bounding_box(&self) -> (i32, i32, i32, i32) {
        self.sites().fold(
            (i32::MAX, i32::MIN, i32::MAX, i32::MIN),
            |(a, b, c, d), s| (a.min(s.x), b.max(s.x), c.min(s.y), d.max(s.y)),
        )
    }

    /// Physical L∞ diameter of the trace.
    pub fn diameter(&self, mesh: f64) -> f64 {
        let (x0, x1, y0, y1) = self.bounding_box();
        (x1 - x0).max(y1 - y0) as f64 * mesh
    }

    pub fn steps_string(&self) -> String {
        self.steps.iter().map(|s| s.letter()).collect()
    }
}

/// A realization of the Poisson loop soup in a domain.
#[derive(Clone, Debug)]
pub struct LoopSoup {
    pub loops: Vec<LatticeLoop>,
    pub lambda: f64,
    pub kappa: f64,
    pub seed: u64,
    pub replicate: u64,
    pub domain: u64,
}

impl LoopSoup {
    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// Loops whose every vertex lies in `sub` (Poisson thinning to a subdomain).
    pub fn restricted_to(&self, sub: &DiscreteDomain) -> LoopSoup {
        LoopSoup {
            loops: self.loops.iter().filter(|l| l.lies_in(sub)).cloned().collect(),
            domain: sub.fingerprint(),
            ..self.clone()
        }
    }
}

/// How loops are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SoupMethod {
    /// Bridge sampling for small domains, excursions otherwise.
    #[default]
    Auto,
    /// Length ∝ tr(Pᵗ)/t, root ∝ (Pᵗ)ₓₓ, then conditioned bridge steps.
    Bridge,
    /// Vertex-by-vertex elimination: loops whose largest vertex index is `x`
    /// are Logarithmic-many excursions from `x` inside `{0..=x}`.
    Excursion,
}

/// Largest vertex count for which [`SoupMethod::Auto`] chooses bridge sampling.
pub const AUTO_BRIDGE_LIMIT: usize = 144;

enum Engine {
    Bridge(std::sync::Arc<PowerStack>),
    Excursion(ExcursionTables),
}

/// Precomputed tables for repeatedly sampling soups in one domain.
pub struct SoupSampler<'a> {
    domain: &'a DiscreteDomain,
    kappa: f64,
    engine: Engine,
}

impl<'a> SoupSampler<'a> {
    pub fn new(domain: &'a DiscreteDomain, kappa: f64, method: SoupMethod) -> Result<Self> {
        if kappa.is_nan() || kappa < 0.0 {
            return Err(Error::param(format!("mass κ must be ≥ 0, got {kappa}")));
        }
        let bridge = match method {
            SoupMethod::Bridge => true,
            SoupMethod::Excursion => false,
            SoupMethod::Auto => domain.vertex_count() <= AUTO_BRIDGE_LIMIT,
        };
        let engine = if bridge {
            Engine::Bridge(PowerStack::cached(domain, kappa)?)
        } else {
            Engine::Excursion(ExcursionTables::new(domain, kappa)?)
        };
        Ok(SoupSampler {
            domain,
            kappa,
            engine,
        })
    }

    pub fn domain(&self) -> &DiscreteDomain {
        self.domain
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn method(&self) -> SoupMethod {
        match self.engine {
            Engine::Bridge(_) => SoupMethod::Bridge,
            Engine::Excursion(_) => SoupMethod::Excursion,
        }
    }

    /// Total loop mass `-log det(I - P)`.
    pub fn total_mass(&self) -> f64 {
        match &self.engine {
            Engine::Bridge(p) => p.total_mass(),
            Engine::Excursion(e) => e.total_mass(),
        }
    }

    pub fn sample(&self, lambda: f64, seed: u64, replicate: u64) -> Result<LoopSoup> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::param(format!("intensity λ must be ≥ 0, got {lambda}")));
        }
        let loops = if lambda == 0.0 {
            Vec::new()
        } else {
            match &self.engine {
                Engine::Bridge(p) => p.sample_loops(self.domain, lambda, seed, replicate),
                Engine::Excursion(e) => e.sample_loops(self.domain, lambda, seed, replicate),
            }
        };
        Ok(LoopSoup {
            loops,
            lambda,
            kappa: self.kappa,
            seed,
            replicate,
            domain: self.domain.fingerprint(),
        })
    }
}

/// One soup with intensity `λ μ̃^κ` in `domain`.
pub fn sample_loop_soup(domain: &DiscreteDomain, lambda: f64, kappa: f64, seed: u64) -> Result<LoopSoup> {
    SoupSampler::new(domain, kappa, SoupMethod::Auto)?.sample(lambda, seed, 0)
}

pub(crate) fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Logarithmic(p) on `{1, 2, ...}`: `P(k) = -p^k / (k log(1-p))`, by Kemp's
/// mixture of geometric laws.
pub(crate) fn logarithmic<R: Rng>(p: f64, rng: &mut R) -> u64 {
    let v = 1.0 - rng.random::<f64>();
    if v >= p {
        return 1;
    }
    let u = 1.0 - rng.random::<f64>();
    let q = -(u * (-p).ln_1p()).exp_m1();
    if q <= 0.0 {
        return 1;
    }
    let k = 1.0 + (v.ln() / q.ln()).floor();
    if k.is_finite() && k >= 1.0 {
        k as u64
    } else {
        1
    }
}
