//! Loop masses by direct summation over walks, for checking the determinant engine.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{DiscreteDomain, Face, Step, TransitionMatrix};

/// Largest face count for [`enumerated_pattern_masses`].
pub const MAX_ENUMERATED_FACES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnumeratedMasses {
    pub max_length: usize,
    /// Mass of loops up to `max_length` steps, by parity pattern over the faces.
    pub patterns: Vec<f64>,
    /// Upper bound on the mass of all longer loops.
    pub tail_bound: f64,
}

/// Sums `4^{-t} / t` over closed walks of length `t ≤ max_length`, tracking
/// the parity of crossings of the eastward ray from each face center.
pub fn enumerated_pattern_masses(domain: &DiscreteDomain, faces: &[Face], max_length: usize) -> Result<EnumeratedMasses> {
    if faces.len() > MAX_ENUMERATED_FACES {
        return Err(Error::param(format!(
            "at most {MAX_ENUMERATED_FACES} faces can be tracked, got {}",
            faces.len()
        )));
    }
    for f in faces {
        domain.require_face(*f)?;
    }
    let n = domain.vertex_count();
    let states = 1usize << faces.len();
    // toggles[v][step]: parity bits flipped by taking `step` from vertex v
    let toggles: Vec<[usize; 4]> = domain
        .vertices()
        .iter()
        .map(|s| {
            Step::ALL.map(|step| {
                let row = match step {
                    Step::North => s.y,
                    Step::South => s.y - 1,
                    _ => return 0,
                };
                faces
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.y == row && s.x > f.x)
                    .fold(0, |m, (j, _)| m | 1 << j)
            })
        })
        .collect();
    let moves: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|v| {
            Step::ALL
                .iter()
                .filter_map(|&st| domain.neighbor(v, st).map(|(w, _)| (w, toggles[v][st.index()])))
                .collect()
        })
        .collect();
    let mut patterns = vec![0.0; states];
    let mut cur = vec![0.0; n * states];
    let mut next = vec![0.0; n * states];
    for root in 0..n {
        cur.fill(0.0);
        cur[root * states] = 1.0;
        for t in 1..=max_length {
            next.fill(0.0);
            for v in 0..n {
                for b in 0..states {
                    let p = cur[v * states + b];
                    if p == 0.0 {
                        continue;
                    }
                    for &(w, flip) in &moves[v] {
                        next[w * states + (b ^ flip)] += 0.25 * p;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
            if t % 2 == 0 {
                for b in 0..states {
                    patterns[b] += cur[root * states + b] / t as f64;
                }
            }
        }
    }
    let (_, rho) = TransitionMatrix::untwisted(domain, 0.0)?.spectral_radius_bounds(10_000);
    let m = (max_length + 1) as f64;
    Ok(EnumeratedMasses {
        max_length,
        patterns,
        tail_bound: n as f64 * rho.powf(m) / (m * (1.0 - rho)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_series() {
        // tr(Pᵗ) = 2·2^t/4^t for even t on the 4-cycle, zero for odd t
        let d = DiscreteDomain::square(1, 1.0).unwrap();
        let e = enumerated_pattern_masses(&d, &[], 40).unwrap();
        let series: f64 = (1..=20).map(|k| 2.0 * 0.5f64.powi(2 * k) / (2 * k) as f64).sum();
        assert!((e.patterns[0] - series).abs() < 1e-14);
        assert!((e.patterns[0] - (-(0.75f64).ln())).abs() < e.tail_bound + 1e-14);
    }
}
