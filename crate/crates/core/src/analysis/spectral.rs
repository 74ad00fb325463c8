//! Lowest Dirichlet eigenpairs of the 5-point Laplacian.
//!
//! The basis lives on the interior vertices (those with all four edges in the
//! domain); every other vertex carries the zero boundary value. Small problems
//! use a dense symmetric eigensolver. Larger ones use a restarted block Krylov
//! method on the inverse Laplacian, followed by Rayleigh-Ritz with the
//! Laplacian itself and an explicit residual check.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{DiscreteDomain, Face, Step};
use crate::linalg::EnvelopeCholesky;
use crate::sampler::stream_rng;

/// Largest interior-vertex count handled by the dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 1200;

/// Relative residual `‖Lu - θu‖ / ‖L‖` accepted from the iterative solver.
const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct SpectralBasis {
    mesh: f64,
    /// Domain vertex index of each basis coordinate.
    vertices: Vec<usize>,
    values: Vec<f64>,
    /// Column `i` is `u_i`, normalized so that `Σ_v u_i(v)² a² = 1`.
    vectors: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub k: usize,
    pub interior_vertices: usize,
    pub smallest: f64,
    pub largest: f64,
}

/// `min(400, m/4)` for `m` interior vertices, and at least one.
pub fn default_k_max(domain: &DiscreteDomain) -> usize {
    let m = interior_vertices(domain).len();
    (m / 4).clamp(1, 400).min(m)
}

fn interior_vertices(domain: &DiscreteDomain) -> Vec<usize> {
    (0..domain.vertex_count()).filter(|&v| domain.is_interior_vertex(v)).collect()
}

/// Sparse `4I - A` on interior vertices, as adjacency lists of lower neighbors
/// and the full neighbor list.
struct Laplacian {
    neighbors: Vec<Vec<usize>>,
}

impl Laplacian {
    fn new(domain: &DiscreteDomain, vertices: &[usize]) -> Self {
        let mut slot = vec![usize::MAX; domain.vertex_count()];
        for (i, &v) in vertices.iter().enumerate() {
            slot[v] = i;
        }
        let neighbors = vertices
            .iter()
            .map(|&v| {
                Step::ALL
                    .iter()
                    .filter_map(|&s| domain.neighbor(v, s))
                    .map(|(w, _)| slot[w])
                    .filter(|&j| j != usize::MAX)
                    .collect()
            })
            .collect();
        Laplacian { neighbors }
    }

    fn dim(&self) -> usize {
        self.neighbors.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, nb) in self.neighbors.iter().enumerate() {
            y[i] = 4.0 * x[i] - nb.iter().map(|&j| x[j]).sum::<f64>();
        }
    }

    fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            self.apply(x.column(c).as_slice(), y.column_mut(c).as_mut_slice());
        }
        y
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, nb) in self.neighbors.iter().enumerate() {
            m[(i, i)] = 4.0;
            for &j in nb {
                m[(i, j)] = -1.0;
            }
        }
        m
    }

    fn factor(&self) -> Result<EnvelopeCholesky> {
        EnvelopeCholesky::factor(self.dim(), |i, row| {
            row.push((i, 4.0));
            row.extend(self.neighbors[i].iter().filter(|&&j| j < i).map(|&j| (j, -1.0)));
        })
    }
}

fn sorted_pairs(h: DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), k, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthonormalize `w` against the orthonormal columns of `q` and itself.
/// Columns that are numerically dependent are dropped.
fn orthonormalize(q: &DMatrix<f64>, mut w: DMatrix<f64>) -> DMatrix<f64> {
    let norms: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    if q.ncols() > 0 {
        for _ in 0..2 {
            let c = q.tr_mul(&w);
            w -= q * c;
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..w.ncols() {
        for _ in 0..2 {
            for &i in &kept {
                let d = w.column(i).dot(&w.column(j));
                let ci = w.column(i).clone_owned();
                w.column_mut(j).axpy(-d, &ci, 1.0);
            }
        }
        let n = w.column(j).norm();
        if n > 1e-12 * norms[j] && n > 0.0 {
            w.column_mut(j).scale_mut(1.0 / n);
            kept.push(j);
        }
    }
    w.select_columns(&kept)
}

fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

fn krylov(lap: &Laplacian, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let m = lap.dim();
    let chol = lap.factor()?;
    let solve = |x: &DMatrix<f64>| {
        let mut y = x.clone();
        for mut c in y.column_iter_mut() {
            chol.solve(c.as_mut_slice());
        }
        y
    };
    let b = (k / 8).clamp(8, 64).min(m);
    let keep = (k + b).min(m);
    let cap = (3 * k + 2 * b).min(m);
    let mut rng = stream_rng(0x5bec, 0, 0);
    let mut q = DMatrix::<f64>::zeros(m, 0);
    let mut block = DMatrix::from_fn(m, b, |_, _| rng.random::<f64>() - 0.5);
    for _ in 0..30 {
        while q.ncols() < cap {
            let fresh = orthonormalize(&q, block);
            if fresh.ncols() == 0 {
                break;
            }
            let take = fresh.ncols().min(cap - q.ncols());
            let fresh = fresh.columns(0, take).clone_owned();
            block = solve(&fresh);
            q = hstack(&q, &fresh);
        }
        let aq = lap.apply_matrix(&q);
        let mut h = q.tr_mul(&aq);
        h = (&h + h.transpose()) * 0.5;
        let (theta, s) = sorted_pairs(h, keep.min(q.ncols()));
        let y = &q * &s;
        let ay = &aq * &s;
        let unconverged: Vec<usize> = (0..k)
            .filter(|&i| (ay.column(i) - y.column(i) * theta[i]).norm() > RESIDUAL_TOL * 8.0)
            .collect();
        if unconverged.is_empty() {
            return Ok((theta[..k].to_vec(), y.columns(0, k).clone_owned()));
        }
        let pick: Vec<usize> = unconverged.iter().copied().take(b).collect();
        let residual = DMatrix::from_fn(m, pick.len(), |r, c| ay[(r, pick[c])] - y[(r, pick[c])] * theta[pick[c]]);
        block = solve(&residual);
        q = y;
    }
    Err(Error::Numerical(format!(
        "block Krylov eigensolver did not converge for {k} eigenpairs of dimension {m}"
    )))
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Domain vertex indices carrying the basis coordinates.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }

    /// `a_i = Σ_v h(v) u_i(v) a²` for a field on the basis coordinates.
    pub fn coefficients(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.vertices.len() {
            return Err(Error::param(format!(
                "field has {} values but the basis has {} coordinates",
                field.len(),
                self.vertices.len()
            )));
        }
        let a2 = self.mesh * self.mesh;
        Ok(self
            .vectors
            .column_iter()
            .map(|u| u.iter().zip(field).map(|(x, y)| x * y).sum::<f64>() * a2)
            .collect())
    }

    /// Largest `|⟨u_i, u_j⟩ - δ_ij|` in the discrete `L²` product.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.tr_mul(&self.vectors) * (self.mesh * self.mesh);
        let n = g.nrows();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Number of computed eigenvalues `≤ ell`.
    pub fn counting_function(&self, ell: f64) -> usize {
        self.values.partition_point(|&v| v <= ell)
    }

    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            k: self.len(),
            interior_vertices: self.vertices.len(),
            smallest: self.values.first().copied().unwrap_or(f64::NAN),
            largest: self.values.last().copied().unwrap_or(f64::NAN),
        }
    }

    /// Moves a face field onto the basis coordinates by averaging, at each
    /// interior vertex, the domain faces that touch it.
    pub fn faces_to_vertices(&self, domain: &DiscreteDomain, face_values: &[f64]) -> Vec<f64> {
        self.vertices
            .iter()
            .map(|&v| {
                let s = domain.vertices()[v];
                let (sum, count) = [(-1, -1), (0, -1), (-1, 0), (0, 0)]
                    .iter()
                    .filter_map(|&(dx, dy)| domain.face_idx(Face::new(s.x + dx, s.y + dy)))
                    .fold((0.0, 0), |(t, c), i| (t + face_values[i], c + 1));
                sum / count as f64
            })
            .collect()
    }
}

/// First `k_max` Dirichlet eigenpairs `(λ_i, u_i)` of `-Δ_a`.
pub fn spectral_basis(domain: &DiscreteDomain, k_max: usize) -> Result<SpectralBasis> {
    let vertices = interior_vertices(domain);
    let m = vertices.len();
    if m == 0 {
        return Err(Error::param("domain has no interior vertices"));
    }
    if k_max == 0 || k_max > m {
        return Err(Error::param(format!("k_max must lie in 1..={m}, got {k_max}")));
    }
    let lap = Laplacian::new(domain, &vertices);
    let (mu, vectors) = if m <= DENSE_EIGEN_LIMIT {
        sorted_pairs(lap.dense(), k_max)
    } else {
        krylov(&lap, k_max)?
    };
    let a = domain.mesh();
    Ok(SpectralBasis {
        mesh: a,
        vertices,
        values: mu.iter().map(|x| x / (a * a)).collect(),
        vectors: vectors / a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Closed-form Dirichlet spectrum of the `w × h` rectangle at mesh `a`.
    fn rectangle_spectrum(w: u32, h: u32, a: f64) -> Vec<f64> {
        let mut v: Vec<f64> = (1..w)
            .flat_map(|j| (1..h).map(move |k| (j, k)))
            .map(|(j, k)| {
                let sj = (PI * j as f64 / (2.0 * w as f64)).sin();
                let sk = (PI * k as f64 / (2.0 * h as f64)).sin();
                4.0 / (a * a) * (sj * sj + sk * sk)
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn dense_rectangle_matches_closed_form() {
        let d = DiscreteDomain::rectangle(9, 6, 0.1).unwrap();
        let b = spectral_basis(&d, 40).unwrap();
        let exact = rectangle_spectrum(9, 6, 0.1);
        for (x, y) in b.eigenvalues().iter().zip(&exact) {
            assert!((x - y).abs() < 1e-8 * y, "{x} {y}");
        }
        assert!(b.orthonormality_error() < 1e-8);
        assert!(b.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn krylov_matches_closed_form_on_a_square() {
        // 39² interior vertices, above the dense limit, with many degenerate pairs
        let d = DiscreteDomain::square(40, 1.0 / 40.0).unwrap();
        let b = spectral_basis(&d, 120).unwrap();
        let exact = rectangle_spectrum(40, 40, 1.0 / 40.0);
        for (x, y) in b.eigenvalues().iter().zip(&exact) {
            assert!((x - y).abs() < 1e-8 * y, "{x} {y}");
        }
        assert!(b.orthonormality_error() < 1e-8);
        assert!((b.eigenvalues()[0] - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI);
    }

    #[test]
    fn rejects_bad_k() {
        let d = DiscreteDomain::square(3, 1.0).unwrap();
        assert!(spectral_basis(&d, 5).is_err());
        assert!(spectral_basis(&d, 0).is_err());
        assert_eq!(default_k_max(&d), 1);
    }
}
