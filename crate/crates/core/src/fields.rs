//! Observables of a loop soup: windings, spins, cutoff winding fields,
//! occupation times and edge-traversal parities.
//!
//! Loops live on primal vertices and windings are measured around face
//! centers, so a loop never passes through the point it winds around.

use std::collections::{HashSet, VecDeque};

use num_complex::Complex64;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::lattice::{DefectLine, DiscreteDomain, Face, Site, Step};
use crate::sampler::{stream_rng, LatticeLoop, LoopSoup, AUX_STREAM};

/// Signed crossings of the eastward ray from the center of `face`.
pub fn winding_number(l: &LatticeLoop, face: Face) -> i64 {
    let mut s = l.root();
    let mut n = 0;
    for &step in l.steps() {
        match step {
            Step::North if s.y == face.y && s.x > face.x => n += 1,
            Step::South if s.y - 1 == face.y && s.x > face.x => n -= 1,
            _ => {}
        }
        s = s.step(step);
    }
    n
}

/// Winding numbers of one loop around every face of its bounding box; zero elsewhere.
#[derive(Clone, Debug)]
pub struct LoopWinding {
    x0: i32,
    y0: i32,
    width: usize,
    height: usize,
    values: Vec<i32>,
}

impl LoopWinding {
    pub fn new(l: &LatticeLoop) -> Self {
        let (x0, x1, y0, y1) = l.bounding_box();
        let width = (x1 - x0) as usize;
        let height = (y1 - y0) as usize;
        let mut values = vec![0i32; width * height];
        if width > 0 && height > 0 {
            // crossings[row][column offset 1..=width]
            let mut crossings = vec![0i32; height * (width + 1)];
            let mut s = l.root();
            for &step in l.steps() {
                match step {
                    Step::North => crossings[(s.y - y0) as usize * (width + 1) + (s.x - x0) as usize] += 1,
                    Step::South => crossings[(s.y - 1 - y0) as usize * (width + 1) + (s.x - x0) as usize] -= 1,
                    _ => {}
                }
                s = s.step(step);
            }
            for row in 0..height {
                let mut acc = 0;
                for col in (1..=width).rev() {
                    acc += crossings[row * (width + 1) + col];
                    values[row * width + col - 1] = acc;
                }
            }
        }
        LoopWinding {
            x0,
            y0,
            width,
            height,
            values,
        }
    }

    pub fn get(&self, face: Face) -> i32 {
        let (dx, dy) = (face.x - self.x0, face.y - self.y0);
        if dx < 0 || dy < 0 || dx as usize >= self.width || dy as usize >= self.height {
            return 0;
        }
        self.values[dy as usize * self.width + dx as usize]
    }

    /// Faces of the bounding box with their winding numbers.
    pub fn iter(&self) -> impl Iterator<Item = (Face, i32)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| {
            (
                Face::new(self.x0 + (k % self.width) as i32, self.y0 + (k / self.width) as i32),
                v,
            )
        })
    }
}

/// Total winding `Ñ(z)` of a collection of loops around each domain face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindingField {
    pub values: Vec<i64>,
}

pub fn winding_field<'a>(domain: &DiscreteDomain, loops: impl IntoIterator<Item = &'a LatticeLoop>) -> WindingField {
    let mut values = vec![0i64; domain.face_count()];
    for l in loops {
        for (face, w) in LoopWinding::new(l).iter() {
            if w != 0 {
                if let Some(i) = domain.face_idx(face) {
                    values[i] += w as i64;
                }
            }
        }
    }
    WindingField { values }
}

/// `σ(z) = (-1)^{Ñ(z)}` on the domain faces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinField {
    pub values: Vec<i8>,
}

pub fn spin_field(domain: &DiscreteDomain, soup: &LoopSoup) -> SpinField {
    SpinField {
        values: winding_field(domain, &soup.loops)
            .values
            .iter()
            .map(|n| if n % 2 == 0 { 1 } else { -1 })
            .collect(),
    }
}

/// `V(z) = exp(iβ N^δ(z))`, where `N^δ` counts only loops of diameter `> δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffWindingField {
    pub beta: f64,
    pub delta: f64,
    pub values: Vec<Complex64>,
}

pub fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=std::f64::consts::PI).contains(&beta) {
        Ok(())
    } else {
        Err(Error::param(format!("β must lie in [0, π], got {beta}")))
    }
}

pub fn cutoff_winding_field(domain: &DiscreteDomain, soup: &LoopSoup, beta: f64, delta: f64) -> Result<CutoffWindingField> {
    check_beta(beta)?;
    if !(delta >= 0.0) {
        return Err(Error::param(format!("cutoff δ must be ≥ 0, got {delta}")));
    }
    let kept = soup.loops.iter().filter(|l| l.diameter(domain.mesh()) > delta);
    let n = winding_field(domain, kept);
    Ok(CutoffWindingField {
        beta,
        delta,
        values: n
            .values
            .iter()
            .map(|&k| Complex64::from_polar(1.0, beta * k as f64))
            .collect(),
    })
}

/// Number of visits of the soup to each vertex (the return to the root is not double counted).
pub fn visit_counts(domain: &DiscreteDomain, soup: &LoopSoup) -> Vec<u64> {
    let mut counts = vec![0u64; domain.vertex_count()];
    for l in &soup.loops {
        for s in l.sites() {
            if let Some(v) = domain.vertex_idx(s) {
                counts[v] += 1;
            }
        }
    }
    counts
}

/// Continuous-time occupation of each vertex: a mean-one exponential holding
/// time per visit plus an independent `Gamma(λ, 1)` from the trivial loops.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationField {
    pub values: Vec<f64>,
}

pub fn occupation_field(domain: &DiscreteDomain, soup: &LoopSoup, seed: u64) -> Result<OccupationField> {
    if !(soup.lambda > 0.0) {
        return Err(Error::param("the occupation field needs a soup with λ > 0"));
    }
    let mut rng = stream_rng(seed, soup.replicate, AUX_STREAM + 1);
    let trivial = Gamma::new(soup.lambda, 1.0).map_err(|e| Error::param(e.to_string()))?;
    let values = visit_counts(domain, soup)
        .into_iter()
        .map(|n| {
            let holding = if n == 0 {
                0.0
            } else {
                Gamma::new(n as f64, 1.0).unwrap().sample(&mut rng)
            };
            holding + trivial.sample(&mut rng)
        })
        .collect();
    Ok(OccupationField { values })
}

/// Parity of the number of unoriented traversals of each primal edge.
pub fn edge_parities(domain: &DiscreteDomain, soup: &LoopSoup) -> Vec<bool> {
    let mut odd = vec![false; domain.edge_count()];
    for l in &soup.loops {
        let Some(mut v) = domain.vertex_idx(l.root()) else {
            continue;
        };
        for &step in l.steps() {
            let (w, e) = domain
                .neighbor(v, step)
                .expect("soup loops stay inside their domain");
            odd[e] ^= true;
            v = w;
        }
    }
    odd
}

/// `(-1)^{number of odd edges crossed by the defect line}`.
pub fn spin_from_parities(parities: &[bool], line: &DefectLine) -> i8 {
    let odd = line.crossed_edges().iter().filter(|&&e| parities[e]).count();
    if odd % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Whether each face lies in the hull of the loop (not in the unbounded
/// component of the complement of its trace).
pub fn covers(l: &LatticeLoop, faces: &[Face]) -> Vec<bool> {
    let (x0, x1, y0, y1) = l.bounding_box();
    // faces x0-1..=x1, y0-1..=y1
    let w = (x1 - x0 + 2) as usize;
    let h = (y1 - y0 + 2) as usize;
    let mut vertical: HashSet<Site> = HashSet::new();
    let mut horizontal: HashSet<Site> = HashSet::new();
    let mut s = l.root();
    for &step in l.steps() {
        let t = s.step(step);
        match step {
            Step::North | Step::South => vertical.insert(Site::new(s.x, s.y.min(t.y))),
            Step::East | Step::West => horizontal.insert(Site::new(s.x.min(t.x), s.y)),
        };
        s = t;
    }
    let idx = |f: Face| (f.y - (y0 - 1)) as usize * w + (f.x - (x0 - 1)) as usize;
    let mut outside = vec![false; w * h];
    let start = Face::new(x0 - 1, y0 - 1);
    outside[idx(start)] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(f) = queue.pop_front() {
        for step in Step::ALL {
            let g = f.neighbor(step);
            if g.x < x0 - 1 || g.x > x1 || g.y < y0 - 1 || g.y > y1 || outside[idx(g)] {
                continue;
            }
            let blocked = match step {
                Step::East => vertical.contains(&Site::new(f.x + 1, f.y)),
                Step::West => vertical.contains(&Site::new(f.x, f.y)),
                Step::North => horizontal.contains(&Site::new(f.x, f.y + 1)),
                Step::South => horizontal.contains(&Site::new(f.x, f.y)),
            };
            if !blocked {
                outside[idx(g)] = true;
                queue.push_back(g);
            }
        }
    }
    faces
        .iter()
        .map(|&f| f.x >= x0 && f.x < x1 && f.y >= y0 && f.y < y1 && !outside[idx(f)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use Step::*;

    fn lp(x: i32, y: i32, s: &str) -> LatticeLoop {
        LatticeLoop::new(Site::new(x, y), s.chars().map(|c| Step::from_letter(c).unwrap()).collect()).unwrap()
    }

    #[test]
    fn elementary_square() {
        let l = lp(0, 0, "ENWS");
        assert_eq!(winding_number(&l, Face::new(0, 0)), 1);
        assert_eq!(winding_number(&l.reversed(), Face::new(0, 0)), -1);
        for f in [Face::new(1, 0), Face::new(-1, 0), Face::new(0, 1), Face::new(0, -1)] {
            assert_eq!(winding_number(&l, f), 0);
        }
        assert_eq!(covers(&l, &[Face::new(0, 0), Face::new(1, 0)]), vec![true, false]);
    }

    #[test]
    fn figure_eight() {
        // counterclockwise around (0,0), then clockwise around (1,0)
        let l2 = LatticeLoop::new(Site::new(1, 0), vec![North, West, South, East, North, East, South, West]).unwrap();
        assert_eq!(winding_number(&l2, Face::new(0, 0)), 1);
        assert_eq!(winding_number(&l2, Face::new(1, 0)), -1);
        let grid = LoopWinding::new(&l2);
        assert_eq!(grid.get(Face::new(0, 0)), 1);
        assert_eq!(grid.get(Face::new(1, 0)), -1);
    }

    #[test]
    fn backtracking_covers_nothing() {
        let l = lp(0, 0, "EEWW");
        assert_eq!(covers(&l, &[Face::new(0, 0), Face::new(0, -1)]), vec![false, false]);
        assert_eq!(LoopWinding::new(&l).iter().count(), 0);
    }

    #[test]
    fn spin_and_parities_for_one_square() {
        let d = DiscreteDomain::square(3, 1.0).unwrap();
        let soup = LoopSoup {
            loops: vec![lp(1, 1, "ENWS")],
            lambda: 0.5,
            kappa: 0.0,
            seed: 0,
            replicate: 0,
            domain: d.fingerprint(),
        };
        let spins = spin_field(&d, &soup);
        let center = d.face_idx(Face::new(1, 1)).unwrap();
        for (i, &s) in spins.values.iter().enumerate() {
            assert_eq!(s, if i == center { -1 } else { 1 });
        }
        let parity = edge_parities(&d, &soup);
        assert_eq!(parity.iter().filter(|&&p| p).count(), 4);
        let line = d.defect_line(Face::new(1, 1), Default::default()).unwrap();
        assert_eq!(spin_from_parities(&parity, &line), -1);
    }
}
