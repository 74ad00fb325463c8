//! Exact loop sampling from matrix powers.
//!
//! A rooted loop of length `t` through `x` has weight `(Pᵗ)ₓₓ / t` summed over
//! roots, so the length is drawn ∝ `tr(Pᵗ)/t`, the root ∝ `(Pᵗ)ₓₓ`, and each
//! step from `y` with `r` steps left goes to `y'` with probability
//! `P(y,y') (P^{r-1})(y',x) / (Pʳ)(y,x)`.

use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use rand::Rng;

use super::{poisson, rng::stream_rng, LatticeLoop};
use crate::error::{Error, Result};
use crate::exact::log_det_one_minus;
use crate::lattice::{DiscreteDomain, Step, TransitionMatrix};

/// In-memory budget for cached power stacks.
pub const CACHE_BYTES: usize = 2 << 30;

/// Dense powers `P⁰ … Pᵀ` of the untwisted step matrix, with `T` the first
/// length at which the remaining loop mass drops below `1e-12` of the total.
pub struct PowerStack {
    n: usize,
    powers: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
    neighbors: Vec<Vec<(usize, f64, Step)>>,
}

struct CacheEntry {
    key: (u64, u64),
    stack: Arc<PowerStack>,
    last_used: u64,
}

static MEMORY: Mutex<(u64, Vec<CacheEntry>)> = Mutex::new((0, Vec::new()));
static DISK_DIR: Mutex<Option<PathBuf>> = Mutex::new(None);

/// Directory for persisting power stacks between runs (`None` disables it).
pub fn set_power_cache_dir(dir: Option<PathBuf>) {
    *DISK_DIR.lock().unwrap() = dir;
}

impl PowerStack {
    /// Shared stack for `(domain, κ)`, built on first use and evicted
    /// least-recently-used once the cache exceeds [`CACHE_BYTES`].
    pub fn cached(domain: &DiscreteDomain, kappa: f64) -> Result<Arc<PowerStack>> {
        let key = (domain.fingerprint(), kappa.to_bits());
        {
            let mut guard = MEMORY.lock().unwrap();
            let (clock, entries) = &mut *guard;
            *clock += 1;
            if let Some(e) = entries.iter_mut().find(|e| e.key == key) {
                e.last_used = *clock;
                return Ok(e.stack.clone());
            }
        }
        let stack = Arc::new(Self::load_or_build(domain, kappa)?);
        let mut guard = MEMORY.lock().unwrap();
        let (clock, entries) = &mut *guard;
        if let Some(e) = entries.iter().find(|e| e.key == key) {
            return Ok(e.stack.clone());
        }
        entries.push(CacheEntry {
            key,
            stack: stack.clone(),
            last_used: *clock,
        });
        while entries.iter().map(|e| e.stack.bytes()).sum::<usize>() > CACHE_BYTES && entries.len() > 1 {
            let oldest = (0..entries.len()).min_by_key(|&i| entries[i].last_used).unwrap();
            entries.swap_remove(oldest);
        }
        Ok(stack)
    }

    fn load_or_build(domain: &DiscreteDomain, kappa: f64) -> Result<PowerStack> {
        let dir = DISK_DIR.lock().unwrap().clone();
        let path = dir.map(|d| {
            d.join(format!(
                "powers-{:016x}-{:016x}.bin",
                domain.fingerprint(),
                kappa.to_bits()
            ))
        });
        if let Some(p) = &path {
            if let Ok(stack) = Self::read(p, domain, kappa) {
                return Ok(stack);
            }
        }
        let stack = Self::build(domain, kappa)?;
        if let Some(p) = &path {
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            stack.write(p)?;
        }
        Ok(stack)
    }

    pub fn build(domain: &DiscreteDomain, kappa: f64) -> Result<PowerStack> {
        let p = TransitionMatrix::untwisted(domain, kappa)?;
        let total = -log_det_one_minus(&p)?;
        let n = p.dim();
        let nn = n * n;
        let mut powers = vec![0.0; nn];
        for i in 0..n {
            powers[i * n + i] = 1.0;
        }
        let mut cumulative = vec![0.0];
        let mut t = 0usize;
        while total - cumulative[t] > 1e-12 * total {
            if (t + 2) * nn * 8 > CACHE_BYTES {
                return Err(Error::TooLarge {
                    dim: n,
                    limit: (CACHE_BYTES / (8 * (t + 2))).isqrt(),
                });
            }
            let prev = t * nn;
            powers.resize((t + 2) * nn, 0.0);
            let (head, tail) = powers.split_at_mut((t + 1) * nn);
            let last = &head[prev..prev + nn];
            for i in 0..n {
                let out = &mut tail[i * n..(i + 1) * n];
                for (k, w) in p.row(i) {
                    for (o, x) in out.iter_mut().zip(&last[k * n..(k + 1) * n]) {
                        *o += w * x;
                    }
                }
            }
            t += 1;
            let trace: f64 = (0..n).map(|i| tail[i * n + i]).sum();
            cumulative.push(cumulative[t - 1] + trace / t as f64);
        }
        Ok(PowerStack {
            n,
            powers,
            cumulative,
            total,
            neighbors: Self::neighbors(domain, &p),
        })
    }

    fn neighbors(domain: &DiscreteDomain, p: &TransitionMatrix) -> Vec<Vec<(usize, f64, Step)>> {
        (0..domain.vertex_count())
            .map(|v| {
                Step::ALL
                    .iter()
                    .filter_map(|&s| domain.neighbor(v, s).map(|(w, _)| (w, p.get(v, w), s)))
                    .collect()
            })
            .collect()
    }

    fn write(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 8 * (self.powers.len() + 1));
        buf.extend_from_slice(&(self.n as u64).to_le_bytes());
        buf.extend_from_slice(&((self.cumulative.len() - 1) as u64).to_le_bytes());
        buf.extend_from_slice(&self.total.to_le_bytes());
        for x in &self.powers {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    fn read(path: &std::path::Path, domain: &DiscreteDomain, kappa: f64) -> Result<PowerStack> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
        if bytes.len() < 24 {
            return Err(Error::Numerical("truncated power cache".into()));
        }
        let n = u64::from_le_bytes(word(0)) as usize;
        let t = u64::from_le_bytes(word(1)) as usize;
        let total = f64::from_le_bytes(word(2));
        if n != domain.vertex_count() || bytes.len() != 24 + 8 * (t + 1) * n * n {
            return Err(Error::Numerical("power cache does not match domain".into()));
        }
        let powers: Vec<f64> = (0..(t + 1) * n * n).map(|i| f64::from_le_bytes(word(3 + i))).collect();
        let mut cumulative = vec![0.0];
        for s in 1..=t {
            let trace: f64 = (0..n).map(|i| powers[s * n * n + i * n + i]).sum();
            cumulative.push(cumulative[s - 1] + trace / s as f64);
        }
        let p = TransitionMatrix::untwisted(domain, kappa)?;
        Ok(PowerStack {
            n,
            powers,
            cumulative,
            total,
            neighbors: Self::neighbors(domain, &p),
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Truncation length `T`.
    pub fn max_length(&self) -> usize {
        self.cumulative.len() - 1
    }

    pub fn bytes(&self) -> usize {
        8 * self.powers.len()
    }

    /// `(Pᵗ)(i, j)`.
    pub fn entry(&self, t: usize, i: usize, j: usize) -> f64 {
        self.powers[t * self.n * self.n + i * self.n + j]
    }

    /// `Σ_{s≤t} tr(Pˢ)/s`.
    pub fn mass_up_to(&self, t: usize) -> f64 {
        self.cumulative[t.min(self.max_length())]
    }

    pub(crate) fn sample_loops(&self, domain: &DiscreteDomain, lambda: f64, seed: u64, replicate: u64) -> Vec<LatticeLoop> {
        let count = poisson(lambda * self.total, &mut stream_rng(seed, replicate, 0));
        (0..count)
            .map(|i| self.sample_loop(domain, &mut stream_rng(seed, replicate, i + 1)))
            .collect()
    }

    fn sample_loop<R: Rng>(&self, domain: &DiscreteDomain, rng: &mut R) -> LatticeLoop {
        let top = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * top;
        let t = self.cumulative.partition_point(|&c| c <= u).clamp(1, self.max_length());

        let trace: f64 = (0..self.n).map(|i| self.entry(t, i, i)).sum();
        let mut r = rng.random::<f64>() * trace;
        let mut root = self.n - 1;
        for i in 0..self.n {
            let w = self.entry(t, i, i);
            if r < w {
                root = i;
                break;
            }
            r -= w;
        }

        let mut steps = Vec::with_capacity(t);
        let mut y = root;
        for s in 0..t {
            let left = t - s - 1;
            let opts = &self.neighbors[y];
            let total: f64 = opts.iter().map(|&(w, p, _)| p * self.entry(left, w, root)).sum();
            let mut r = rng.random::<f64>() * total;
            let mut pick = None;
            for &(w, p, step) in opts {
                let weight = p * self.entry(left, w, root);
                if weight <= 0.0 {
                    continue;
                }
                pick = Some((w, step));
                if r < weight {
                    break;
                }
                r -= weight;
            }
            let (w, step) = pick.expect("a loop can always be completed");
            steps.push(step);
            y = w;
        }
        debug_assert_eq!(y, root);
        LatticeLoop {
            root: domain.vertices()[root],
            steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_stack() {
        let d = DiscreteDomain::square(1, 1.0).unwrap();
        let s = PowerStack::build(&d, 0.0).unwrap();
        assert!((s.total_mass() - (4.0f64 / 3.0).ln()).abs() < 1e-14);
        let missing = s.total_mass() - s.mass_up_to(s.max_length());
        assert!(missing >= 0.0 && missing <= 1e-12 * s.total_mass());
        // two inside neighbours, weight 1/4 each
        assert!((s.entry(2, 0, 0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn disk_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = DiscreteDomain::square(2, 1.0).unwrap();
        let s = PowerStack::build(&d, 0.5).unwrap();
        let path = dir.path().join("p.bin");
        s.write(&path).unwrap();
        let r = PowerStack::read(&path, &d, 0.5).unwrap();
        assert_eq!(r.powers, s.powers);
        assert_eq!(r.cumulative, s.cumulative);
    }
}
