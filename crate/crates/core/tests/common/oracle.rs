//! Brute-force loop masses built only from a face list.
//!
//! Winding parity around a face is read off a ray going north from the face
//! center, so an East or West step along a horizontal edge above the face
//! flips it. The library enumerator uses an eastward ray instead.

use std::collections::{BTreeSet, HashMap};

pub struct OracleMasses {
    /// Mass of rooted loops with `2 ≤ t ≤ max_length` steps, by parity pattern.
    pub patterns: Vec<f64>,
    /// Bound on the omitted mass of longer loops, summed over all patterns.
    pub tail_bound: f64,
}

struct Graph {
    /// (neighbor, parity bits flipped by the step)
    adj: Vec<Vec<(usize, usize)>>,
}

fn graph(domain: &[(i32, i32)], tracked: &[(i32, i32)]) -> Graph {
    let mut verts = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &(x, y) in domain {
        let c = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
        for k in 0..4 {
            verts.insert(c[k]);
            let (a, b) = (c[k], c[(k + 1) % 4]);
            edges.insert(if a < b { (a, b) } else { (b, a) });
        }
    }
    let index: HashMap<(i32, i32), usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![Vec::new(); verts.len()];
    for &(a, b) in &edges {
        let mut flip = 0;
        if a.1 == b.1 {
            // horizontal edge from (x, y) to (x + 1, y) lies on the ray of face (x, f.y) when y > f.y
            let (x, y) = if a.0 < b.0 { a } else { b };
            for (j, &(fx, fy)) in tracked.iter().enumerate() {
                if fx == x && y > fy {
                    flip |= 1 << j;
                }
            }
        }
        adj[index[&a]].push((index[&b], flip));
        adj[index[&b]].push((index[&a], flip));
    }
    Graph { adj }
}

/// Sums `4^{-t}/t` over closed walks on the closed faces of `domain`.
pub fn pattern_masses(domain: &[(i32, i32)], tracked: &[(i32, i32)], max_length: usize) -> OracleMasses {
    let g = graph(domain, tracked);
    let n = g.adj.len();
    let states = 1usize << tracked.len();
    let mut patterns = vec![0.0; states];
    for root in 0..n {
        let mut cur = vec![0.0; n * states];
        cur[root * states] = 1.0;
        for t in 1..=max_length {
            let mut next = vec![0.0; n * states];
            for v in 0..n {
                for s in 0..states {
                    let p = cur[v * states + s];
                    if p != 0.0 {
                        for &(w, flip) in &g.adj[v] {
                            next[w * states + (s ^ flip)] += p / 4.0;
                        }
                    }
                }
            }
            cur = next;
            if t % 2 == 0 {
                for s in 0..states {
                    patterns[s] += cur[root * states + s] / t as f64;
                }
            }
        }
    }
    // ρ(P)^k ≤ max row sum of P^k, and Σ_{t>m} tr(P^t)/t ≤ n ρ^{m+1} / ((m+1)(1-ρ)).
    let k = 64;
    let mut mass = vec![1.0; n];
    for _ in 0..k {
        mass = (0..n).map(|v| g.adj[v].iter().map(|&(w, _)| mass[w] / 4.0).sum()).collect();
    }
    let rho = mass.iter().cloned().fold(0.0, f64::max).powf(1.0 / k as f64);
    assert!(rho < 1.0, "walk is not killed: ρ bound {rho}");
    let m = (max_length + 1) as f64;
    OracleMasses {
        patterns,
        tail_bound: n as f64 * rho.powf(m) / (m * (1.0 - rho)),
    }
}
