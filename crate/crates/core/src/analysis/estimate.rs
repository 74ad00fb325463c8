use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub std_error: f64,
    pub n: u64,
    pub seed: u64,
}

impl Estimate {
    /// `(mean - target) / std_error`, with `0/0` read as zero.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target).abs() <= sigmas
    }

    pub fn scaled(self, factor: f64) -> Estimate {
        Estimate {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            ..self
        }
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.p$} ± {:.p$}", self.mean, self.std_error),
            None => write!(f, "{} ± {}", self.mean, self.std_error),
        }
    }
}

/// Running count, mean and sum of squared deviations, merged pairwise.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let wa = self.n as f64 / n as f64;
        let wb = other.n as f64 / n as f64;
        Moments {
            n,
            mean: wa * self.mean + wb * other.mean,
            m2: self.m2 + other.m2 + d * d * wa * other.n as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self, seed: u64) -> Estimate {
        Estimate {
            mean: self.mean,
            std_error: if self.n == 0 { 0.0 } else { (self.variance() / self.n as f64).sqrt() },
            n: self.n,
            seed,
        }
    }
}

/// Sum by recursive halving, so the rounding does not depend on the caller's loop order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn tree_merge(mut parts: Vec<Vec<Moments>>, dim: usize) -> Vec<Moments> {
    if parts.is_empty() {
        return vec![Moments::default(); dim];
    }
    while parts.len() > 1 {
        parts = parts
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    parts.pop().unwrap()
}

/// Replicates per work unit. Fixed so the merge tree, and thus every rounding
/// step, is the same for any number of threads.
pub const CHUNK: u64 = 256;

/// Moments of `dim` observables over replicates `start..end`.
///
/// `observe(r, out)` writes the observables of replicate `r` into `out`
/// (zeroed beforehand).
pub fn replicate_moments<F>(start: u64, end: u64, dim: usize, observe: F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let chunks: Vec<(u64, u64)> = (start..end)
        .step_by(CHUNK as usize)
        .map(|a| (a, (a + CHUNK).min(end)))
        .collect();
    let parts = chunks
        .into_par_iter()
        .map(|(a, b)| {
            let mut acc = vec![Moments::default(); dim];
            let mut out = vec![0.0; dim];
            for r in a..b {
                out.fill(0.0);
                observe(r, &mut out)?;
                for (m, x) in acc.iter_mut().zip(&out) {
                    if !x.is_finite() {
                        return Err(Error::Numerical(format!("non-finite observable in replicate {r}")));
                    }
                    m.push(*x);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tree_merge(parts, dim))
}

pub(crate) fn check_samples(n: u64, min: u64) -> Result<()> {
    if n < min {
        return Err(Error::param(format!("need at least {min} samples, got {n}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert!((m.mean() - all.mean()).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-9);
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((all.variance() - var).abs() < 1e-9);
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    replicate_moments(0, 5000, 2, |r, out| {
                        out[0] = ((r * 2654435761) % 1000) as f64 * 0.001;
                        out[1] = out[0].sin();
                        Ok(())
                    })
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn constant_observable_has_zero_error() {
        let m = replicate_moments(0, 300, 1, |_, out| {
            out[0] = 1.0;
            Ok(())
        })
        .unwrap();
        let e = m[0].estimate(0);
        assert_eq!((e.mean, e.std_error, e.n), (1.0, 0.0, 300));
        assert_eq!(e.z_score(1.0), 0.0);
    }
}
