//! Gram matrices `M_fg = ⟨f θg⟩` for spin monomials on one side of a reflection line.
//!
//! The box has an odd number of columns, so the vertical line through the
//! centers of column `c = (width - 1) / 2` passes through dual vertices and
//! `θ` maps column `x` to `2c - x`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::correlation::spins_at;
use super::estimate::{check_samples, replicate_moments, Moments};
use crate::error::{Error, Result};
use crate::exact::n_point_function;
use crate::lattice::{DiscreteDomain, Face};
use crate::sampler::{SoupMethod, SoupSampler};

/// A product of spins; the empty product is the constant 1.
pub type Monomial = Vec<Face>;

pub const JACKKNIFE_BLOCKS: u64 = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GramCheck {
    pub size: usize,
    /// Row-major estimate of `⟨f_i θf_j⟩`.
    pub gram: Vec<f64>,
    /// Smallest eigenvalue of the symmetrized estimate.
    pub min_eigenvalue: f64,
    pub jackknife_error: f64,
    /// Largest `|z|` over `⟨f θg⟩ - ⟨g θf⟩`, `f ≠ g`.
    pub max_symmetry_z: f64,
}

impl GramCheck {
    pub fn positive(&self, sigmas: f64) -> bool {
        self.min_eigenvalue >= -sigmas * self.jackknife_error
    }

    pub fn symmetric(&self, sigmas: f64) -> bool {
        self.max_symmetry_z <= sigmas
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReflectionReport {
    pub width: u32,
    pub height: u32,
    pub axis_column: i32,
    pub kappa: f64,
    pub lambda: f64,
    pub n: u64,
    pub seed: u64,
    pub checks: Vec<GramCheck>,
}

/// Three families in a `width × height` box, sized 4, 6 and 12, all in the
/// columns to the right of the axis. The box must be at least 13 × 6.
pub fn standard_families(width: u32, height: u32) -> Result<Vec<Vec<Monomial>>> {
    if width < 13 || height < 6 {
        return Err(Error::param(format!("the standard families need a box of at least 13×6, got {width}×{height}")));
    }
    let c = (width as i32 - 1) / 2;
    let y = height as i32 / 2 - 1;
    let f = |dx: i32, dy: i32| Face::new(c + dx, y + dy);
    let a = vec![vec![], vec![f(1, 0)], vec![f(2, 1)], vec![f(1, 0), f(2, 1)]];
    let (p, q, r) = (f(1, 0), f(3, 1), f(1, 3));
    let b = vec![vec![], vec![p], vec![q], vec![r], vec![p, q], vec![q, r]];
    let s = [f(1, 0), f(2, 1), f(4, 0), f(1, 2), f(6, 1)];
    let mut cfam: Vec<Monomial> = vec![vec![]];
    cfam.extend(s.iter().map(|&x| vec![x]));
    cfam.extend([(0, 1), (0, 2), (1, 3), (2, 4)].map(|(i, j)| vec![s[i], s[j]]));
    cfam.extend([(0, 1, 2), (1, 3, 4)].map(|(i, j, k)| vec![s[i], s[j], s[k]]));
    Ok(vec![a, b, cfam])
}

/// The Gram matrix of one family computed from determinants, with its
/// smallest eigenvalue. Entry `(i, j)` is the n-point function of `f_i θf_j`,
/// with faces that appear twice cancelled.
pub fn exact_gram(kappa: f64, lambda: f64, width: u32, height: u32, family: &[Monomial]) -> Result<(Vec<f64>, f64)> {
    let c = (width as i32 - 1) / 2;
    let domain = DiscreteDomain::rectangle(width, height, 1.0)?;
    let m = family.len();
    let mut gram = vec![0.0; m * m];
    for (i, f) in family.iter().enumerate() {
        for (j, g) in family.iter().enumerate() {
            let mut faces: Vec<Face> = Vec::new();
            for x in f.iter().copied().chain(g.iter().map(|h| Face::new(2 * c - h.x, h.y))) {
                match faces.iter().position(|&y| y == x) {
                    Some(k) => {
                        faces.swap_remove(k);
                    }
                    None => faces.push(x),
                }
            }
            gram[i * m + j] = n_point_function(&domain, &faces, lambda, kappa)?;
        }
    }
    let min = min_eigenvalue(m, |i, j| gram[i * m + j]);
    Ok((gram, min))
}

fn min_eigenvalue(size: usize, entries: impl Fn(usize, usize) -> f64) -> f64 {
    let m = DMatrix::from_fn(size, size, |i, j| 0.5 * (entries(i, j) + entries(j, i)));
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn reflection_positivity_check(
    kappa: f64,
    lambda: f64,
    width: u32,
    height: u32,
    families: &[Vec<Monomial>],
    n: u64,
    seed: u64,
) -> Result<ReflectionReport> {
    if !(kappa > 0.0) {
        return Err(Error::param(format!("reflection positivity is checked for κ > 0, got {kappa}")));
    }
    if width % 2 == 0 {
        return Err(Error::param("the box needs an odd width so the axis runs through dual vertices"));
    }
    check_samples(n, 2 * JACKKNIFE_BLOCKS)?;
    let c = (width as i32 - 1) / 2;
    let domain = DiscreteDomain::rectangle(width, height, 1.0)?;
    let reflect = |f: Face| Face::new(2 * c - f.x, f.y);
    for fam in families {
        for face in fam.iter().flatten() {
            domain.require_face(*face)?;
            if face.x < c {
                return Err(Error::param(format!("face {face} lies left of the reflection axis")));
            }
        }
    }
    let mut faces: Vec<Face> = families.iter().flatten().flatten().flat_map(|&f| [f, reflect(f)]).collect();
    faces.sort_by_key(|f| (f.y, f.x));
    faces.dedup();
    let idx = faces.iter().map(|&f| domain.require_face(f)).collect::<Result<Vec<_>>>()?;
    let pos = |f: Face| faces.binary_search_by_key(&(f.y, f.x), |g| (g.y, g.x)).unwrap();
    // per family: (positions of f, positions of θf)
    let plans: Vec<Vec<(Vec<usize>, Vec<usize>)>> = families
        .iter()
        .map(|fam| {
            fam.iter()
                .map(|mono| (mono.iter().map(|&f| pos(f)).collect(), mono.iter().map(|&f| pos(reflect(f))).collect()))
                .collect()
        })
        .collect();
    let offsets: Vec<usize> = plans
        .iter()
        .scan(0, |acc, p| {
            let start = *acc;
            *acc += p.len() * p.len() + p.len() * (p.len() - 1) / 2;
            Some(start)
        })
        .collect();
    let dim = plans.iter().map(|p| p.len() * p.len() + p.len() * (p.len() - 1) / 2).sum();

    let sampler = SoupSampler::new(&domain, kappa, SoupMethod::Auto)?;
    let observe = |r: u64, out: &mut [f64]| -> Result<()> {
        let soup = sampler.sample(lambda, seed, r)?;
        let spins = spins_at(&domain, &soup, &faces, &idx);
        let value = |p: &[usize]| p.iter().map(|&i| spins[i] as f64).product::<f64>();
        for (plan, &off) in plans.iter().zip(&offsets) {
            let f: Vec<f64> = plan.iter().map(|(a, _)| value(a)).collect();
            let tf: Vec<f64> = plan.iter().map(|(_, b)| value(b)).collect();
            let m = f.len();
            let mut k = off;
            for i in 0..m {
                for j in 0..m {
                    out[k] = f[i] * tf[j];
                    k += 1;
                }
            }
            for i in 0..m {
                for j in i + 1..m {
                    out[k] = f[i] * tf[j] - f[j] * tf[i];
                    k += 1;
                }
            }
        }
        Ok(())
    };
    let blocks: Vec<Vec<Moments>> = (0..JACKKNIFE_BLOCKS)
        .map(|b| replicate_moments(b * n / JACKKNIFE_BLOCKS, (b + 1) * n / JACKKNIFE_BLOCKS, dim, observe))
        .collect::<Result<_>>()?;
    let total: Vec<Moments> = blocks
        .iter()
        .skip(1)
        .fold(blocks[0].clone(), |acc, b| acc.iter().zip(b).map(|(x, y)| x.merge(y)).collect());

    let checks = plans
        .iter()
        .zip(&offsets)
        .map(|(plan, &off)| {
            let m = plan.len();
            let gram: Vec<f64> = (0..m * m).map(|k| total[off + k].mean()).collect();
            let min_eig = min_eigenvalue(m, |i, j| gram[i * m + j]);
            let loo: Vec<f64> = blocks
                .iter()
                .map(|blk| {
                    min_eigenvalue(m, |i, j| {
                        let (t, b) = (&total[off + i * m + j], &blk[off + i * m + j]);
                        let rest = (t.count() - b.count()) as f64;
                        (t.mean() * t.count() as f64 - b.mean() * b.count() as f64) / rest
                    })
                })
                .collect();
            let nb = loo.len() as f64;
            let avg = loo.iter().sum::<f64>() / nb;
            let jk = ((nb - 1.0) / nb * loo.iter().map(|x| (x - avg).powi(2)).sum::<f64>()).sqrt();
            let max_z = (0..m * (m - 1) / 2)
                .map(|k| total[off + m * m + k].estimate(seed).z_score(0.0).abs())
                .fold(0.0, f64::max);
            GramCheck {
                size: m,
                gram,
                min_eigenvalue: min_eig,
                jackknife_error: jk,
                max_symmetry_z: max_z,
            }
        })
        .collect();
    Ok(ReflectionReport {
        width,
        height,
        axis_column: c,
        kappa,
        lambda,
        n,
        seed,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_has_unit_gram() {
        let r = reflection_positivity_check(1.0, 0.5, 5, 4, &[vec![vec![]]], 100, 1).unwrap();
        let c = &r.checks[0];
        assert_eq!((c.gram.clone(), c.min_eigenvalue, c.jackknife_error), (vec![1.0], 1.0, 0.0));
        assert!(c.positive(3.0) && c.symmetric(3.0));
    }

    #[test]
    fn one_spin_family_is_positive() {
        let f = Face::new(4, 1);
        let r = reflection_positivity_check(1.0, 0.5, 7, 4, &[vec![vec![], vec![f]]], 4000, 2).unwrap();
        let c = &r.checks[0];
        assert!(c.positive(3.0), "{c:?}");
        assert!(c.symmetric(4.0), "{c:?}");
        // ⟨σ(z)σ(θz)⟩ sits between 0 and 1
        assert!(c.gram[3] > 0.0 && c.gram[3] < 1.0);
    }

    #[test]
    fn validation() {
        assert!(reflection_positivity_check(0.0, 0.5, 5, 4, &[vec![vec![]]], 100, 1).is_err());
        assert!(reflection_positivity_check(1.0, 0.5, 6, 4, &[vec![vec![]]], 100, 1).is_err());
        assert!(reflection_positivity_check(1.0, 0.5, 5, 4, &[vec![vec![Face::new(0, 0)]]], 100, 1).is_err());
        let fams = standard_families(25, 24).unwrap();
        assert_eq!(fams.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 6, 12]);
        assert!(fams.iter().flatten().flatten().all(|f| f.x > 12 && f.x < 25 && f.y >= 0 && f.y < 24));
        let tight = standard_families(13, 6).unwrap();
        for fam in &tight {
            let (gram, min) = exact_gram(1.0, 0.5, 13, 6, fam).unwrap();
            assert_eq!(gram[0], 1.0);
            // nearly degenerate families, but never negative beyond rounding
            assert!(min > -1e-12, "{min}");
        }
        assert!(tight.iter().flatten().flatten().all(|f| f.x > 6 && f.x < 13 && f.y >= 0 && f.y < 6));
        assert!(standard_families(11, 24).is_err() && standard_families(25, 5).is_err());
    }
}
