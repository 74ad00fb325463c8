//! Deterministic loop-measure computations.
//!
//! The rooted loop measure gives a loop of `t` steps weight `(4+κ)^{-t}/t`, so
//! its total mass is `Σ_t tr(Pᵗ)/t = -log det(I - P)`. Flipping the sign of the
//! edges crossed by a defect line multiplies each loop's weight by
//! `(-1)^{winding}` around the line's face, which turns parity-constrained masses
//! into differences of log-determinants.

pub mod conformal;
mod enumerate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DefectLine, DefectStrategy, DiscreteDomain, Face, TransitionMatrix};
use crate::linalg::{dense_log_det, EnvelopeCholesky};

pub use conformal::{conformal_radius, Shape};
pub use enumerate::{enumerated_pattern_masses, EnumeratedMasses, MAX_ENUMERATED_FACES};

/// Largest number of marked faces for per-face parity patterns (2ⁿ determinants).
pub const MAX_PATTERN_FACES: usize = 8;

/// `log det(I - P)`.
pub fn log_det_one_minus(p: &TransitionMatrix) -> Result<f64> {
    if let Some((row, col)) = p.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    if p.dim() == 0 {
        return Ok(0.0);
    }
    if p.is_symmetric() {
        return match EnvelopeCholesky::one_minus(p) {
            Ok(c) => Ok(c.log_det()),
            Err(Error::NotPositiveDefinite { .. }) => Err(Error::NonPositiveDeterminant),
            Err(e) => Err(e),
        };
    }
    let n = p.dim();
    let mut a: Vec<f64> = p.to_dense().into_iter().map(|x| -x).collect();
    for i in 0..n {
        a[i * n + i] += 1.0;
    }
    let (log_abs, sign) = dense_log_det(a, n)?;
    if sign <= 0.0 {
        return Err(Error::NonPositiveDeterminant);
    }
    Ok(log_abs)
}

/// Which loops a [`parity_constrained_mass`] counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParityRule {
    /// Total winding around the marked faces is odd.
    SumOdd,
    /// Winding around face `j` is odd exactly when `pattern[j]` is true.
    Pattern(Vec<bool>),
}

/// Mass of a class of loops under the (massive) loop measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopMass {
    pub value: f64,
    pub kappa: f64,
    pub faces: Vec<Face>,
    pub rule: Option<ParityRule>,
}

pub fn total_loop_mass(domain: &DiscreteDomain, kappa: f64) -> Result<LoopMass> {
    let p = TransitionMatrix::untwisted(domain, kappa)?;
    Ok(LoopMass {
        value: -log_det_one_minus(&p)?,
        kappa,
        faces: Vec::new(),
        rule: None,
    })
}

/// `log det(I - P)` for every subset of a list of marked faces, each subset
/// twisted along one defect line per member.
#[derive(Clone, Debug)]
pub struct TwistedDeterminants<'a> {
    domain: &'a DiscreteDomain,
    kappa: f64,
    lines: Vec<DefectLine>,
}

impl<'a> TwistedDeterminants<'a> {
    pub fn new(
        domain: &'a DiscreteDomain,
        faces: &[Face],
        kappa: f64,
        strategy: DefectStrategy,
    ) -> Result<Self> {
        for (i, f) in faces.iter().enumerate() {
            if faces[..i].contains(f) {
                return Err(Error::CoincidentFaces(*f));
            }
        }
        let lines = faces
            .iter()
            .map(|&f| domain.defect_line(f, strategy))
            .collect::<Result<Vec<_>>>()?;
        Ok(TwistedDeterminants {
            domain,
            kappa,
            lines,
        })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// `log det(I - P)` twisted by the faces whose bits are set in `mask`.
    pub fn log_det(&self, mask: usize) -> Result<f64> {
        let twist: Vec<DefectLine> = self
            .lines
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, l)| l.clone())
            .collect();
        log_det_one_minus(&TransitionMatrix::build(self.domain, &twist, self.kappa)?)
    }

    /// All `2ⁿ` log-determinants, indexed by subset mask.
    pub fn all(&self) -> Result<Vec<f64>> {
        if self.lines.len() > MAX_PATTERN_FACES {
            return Err(Error::param(format!(
                "at most {MAX_PATTERN_FACES} marked faces are supported, got {}",
                self.lines.len()
            )));
        }
        (0..1usize << self.lines.len())
            .into_par_iter()
            .map(|m| self.log_det(m))
            .collect()
    }
}

/// Mass of loops with odd winding-sum over `mask`, from `log det` values.
pub fn sum_odd_from(log_dets: &[f64], mask: usize) -> f64 {
    0.5 * (log_dets[mask] - log_dets[0])
}

/// Mass of loops whose per-face parities equal `pattern` (bit `j` set = odd at face `j`),
/// by the character sum `2⁻ⁿ Σ_S (-1)^{|S ∩ pattern|} (-log det(I - P^S))`.
pub fn pattern_from(log_dets: &[f64], pattern: usize) -> f64 {
    let total: f64 = log_dets
        .iter()
        .enumerate()
        .map(|(s, ld)| {
            let sign = if (s & pattern).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            -sign * ld
        })
        .sum();
    total / log_dets.len() as f64
}

fn clamp_mass(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -1e-9 * (1.0 + scale.abs()) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("negative loop mass {value}")))
    }
}

pub fn parity_constrained_mass(
    domain: &DiscreteDomain,
    faces: &[Face],
    rule: &ParityRule,
    kappa: f64,
) -> Result<LoopMass> {
    parity_constrained_mass_with(domain, faces, rule, kappa, DefectStrategy::default())
}

pub fn parity_constrained_mass_with(
    domain: &DiscreteDomain,
    faces: &[Face],
    rule: &ParityRule,
    kappa: f64,
    strategy: DefectStrategy,
) -> Result<LoopMass> {
    let dets = TwistedDeterminants::new(domain, faces, kappa, strategy)?;
    let value = match rule {
        ParityRule::SumOdd => {
            if faces.is_empty() {
                0.0
            } else {
                let base = dets.log_det(0)?;
                let twisted = dets.log_det((1 << faces.len()) - 1)?;
                clamp_mass(0.5 * (twisted - base), base)?
            }
        }
        ParityRule::Pattern(pattern) => {
            if pattern.len() != faces.len() {
                return Err(Error::param(format!(
                    "pattern has {} entries for {} faces",
                    pattern.len(),
                    faces.len()
                )));
            }
            let lds = dets.all()?;
            let mask = pattern
                .iter()
                .enumerate()
                .filter(|(_, &odd)| odd)
                .fold(0usize, |m, (j, _)| m | 1 << j);
            clamp_mass(pattern_from(&lds, mask), lds[0])?
        }
    };
    Ok(LoopMass {
        value,
        kappa,
        faces: faces.to_vec(),
        rule: Some(rule.clone()),
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("intensity λ must be ≥ 0, got {lambda}")))
    }
}

/// `⟨∏ σ(z_j)⟩ = exp(-2λ μ(Σ N(z_j) odd))`.
pub fn n_point_function(domain: &DiscreteDomain, faces: &[Face], lambda: f64, kappa: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let mass = parity_constrained_mass(domain, faces, &ParityRule::SumOdd, kappa)?;
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok((-2.0 * lambda * mass.value).exp())
}

/// Dense Green's function `(I - P)⁻¹`, the expected number of visits
/// (counting time zero) of the walk killed on leaving the domain.
#[derive(Clone, Debug)]
pub struct GreenMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GreenMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n + y]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Factorization of `I - P` for repeated Green's-function solves.
#[derive(Clone, Debug)]
pub struct GreenSolver {
    chol: EnvelopeCholesky,
}

impl GreenSolver {
    pub fn new(domain: &DiscreteDomain, kappa: f64) -> Result<Self> {
        let p = TransitionMatrix::untwisted(domain, kappa)?;
        Ok(GreenSolver {
            chol: EnvelopeCholesky::one_minus(&p)?,
        })
    }

    /// `G(·, x)`.
    pub fn column(&self, x: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.chol.dim()];
        e[x] = 1.0;
        self.chol.solve(&mut e);
        e
    }

    pub fn factor(&self) -> &EnvelopeCholesky {
        &self.chol
    }
}

pub fn greens_function(domain: &DiscreteDomain) -> Result<GreenMatrix> {
    greens_function_massive(domain, 0.0)
}

pub fn greens_function_massive(domain: &DiscreteDomain, kappa: f64) -> Result<GreenMatrix> {
    let solver = GreenSolver::new(domain, kappa)?;
    let n = domain.vertex_count();
    let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(|x| solver.column(x)).collect();
    let mut data = vec![0.0; n * n];
    for (x, col) in cols.into_iter().enumerate() {
        for (y, v) in col.into_iter().enumerate() {
            data[y * n + x] = v;
        }
    }
    Ok(GreenMatrix { n, data })
}

/// Slacks of the three Griffiths inequalities; each is nonnegative when the inequality holds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GriffithsReport {
    /// `⟨σ_A⟩` in the subdomain.
    pub positivity: f64,
    /// `⟨σ_A⟩_sub - ⟨σ_A⟩_domain`.
    pub monotonicity: f64,
    /// `⟨σ_A σ_B⟩ - ⟨σ_A⟩⟨σ_B⟩` in the subdomain.
    pub correlation: f64,
}

impl GriffithsReport {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.positivity >= -tolerance && self.monotonicity >= -tolerance && self.correlation >= -tolerance
    }

    pub fn min_slack(&self) -> f64 {
        self.positivity.min(self.monotonicity).min(self.correlation)
    }
}

/// Products of spins over repeated faces cancel in pairs.
fn symmetric_difference(a: &[Face], b: &[Face]) -> Vec<Face> {
    let mut out: Vec<Face> = Vec::new();
    for f in a.iter().chain(b) {
        if let Some(i) = out.iter().position(|g| g == f) {
            out.swap_remove(i);
        } else {
            out.push(*f);
        }
    }
    out
}

pub fn griffiths_check(
    domain: &DiscreteDomain,
    subdomain: &DiscreteDomain,
    a: &[Face],
    b: &[Face],
    lambda: f64,
) -> Result<GriffithsReport> {
    if !subdomain.is_subdomain_of(domain) {
        return Err(Error::param("subdomain is not contained in the domain"));
    }
    let a = symmetric_difference(a, &[]);
    let b = symmetric_difference(b, &[]);
    for f in a.iter().chain(&b) {
        subdomain.require_face(*f)?;
    }
    let sa = n_point_function(subdomain, &a, lambda, 0.0)?;
    let sa_big = n_point_function(domain, &a, lambda, 0.0)?;
    let sb = n_point_function(subdomain, &b, lambda, 0.0)?;
    let sab = n_point_function(subdomain, &symmetric_difference(&a, &b), lambda, 0.0)?;
    Ok(GriffithsReport {
        positivity: sa,
        monotonicity: sa - sa_big,
        correlation: sab - sa * sb,
    })
}

/// Mass of loops in `domain` with odd winding around `face` that are not
/// contained in `subdomain`.
pub fn mass_difference(domain: &DiscreteDomain, subdomain: &DiscreteDomain, face: Face) -> Result<f64> {
    if !subdomain.is_subdomain_of(domain) {
        return Err(Error::param("subdomain is not contained in the domain"));
    }
    let outer = parity_constrained_mass(domain, &[face], &ParityRule::SumOdd, 0.0)?.value;
    let inner = parity_constrained_mass(subdomain, &[face], &ParityRule::SumOdd, 0.0)?.value;
    clamp_mass(outer - inner, outer)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryMass {
    pub r: f64,
    pub mesh: f64,
    pub face: Face,
    pub value: f64,
    /// Continuum prediction `-(1/8) log r`.
    pub predicted: f64,
}

/// Odd-winding mass around the face nearest the origin of loops in the unit
/// disk that leave the disk of radius `r`, both discretized at `mesh`.
pub fn boundary_mass_difference(r: f64, mesh: f64) -> Result<BoundaryMass> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::param(format!("radius ratio must lie in (0,1), got {r}")));
    }
    let outer = DiscreteDomain::disk(1.0, mesh)?;
    let inner = DiscreteDomain::disk(r, mesh)?;
    let face = inner.nearest_face([0.0, 0.0]);
    Ok(BoundaryMass {
        r,
        mesh,
        face,
        value: mass_difference(&outer, &inner, face)?,
        predicted: -r.ln() / 8.0,
    })
}

/// Three faces nearest the points at radius `rho` and angles `π/2 + 2πk/3`.
pub fn symmetric_triple(domain: &DiscreteDomain, rho: f64) -> Result<[Face; 3]> {
    let faces = [0, 1, 2].map(|k| {
        let t = std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0;
        domain.nearest_face([rho * t.cos(), rho * t.sin()])
    });
    if faces[0] == faces[1] || faces[1] == faces[2] || faces[0] == faces[2] {
        return Err(Error::param(format!(
            "triple at radius {rho} collapses to repeated faces at mesh {}",
            domain.mesh()
        )));
    }
    Ok(faces)
}

/// `e^{4λ(a+b)} (e^{8λb} - 3) + 2`, which vanishes when the three-point
/// function obeys the Gaussian (Wick) factorization.
pub fn nongaussianity_formula(lambda: f64, a: f64, b: f64) -> f64 {
    (4.0 * lambda * (a + b)).exp() * ((8.0 * lambda * b).exp() - 3.0) + 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Nongaussianity {
    pub rho: f64,
    pub mesh: f64,
    pub faces: [Face; 3],
    /// Mass of loops winding oddly around all three faces.
    pub a: f64,
    /// Per pair: odd around the two faces, even around the third.
    pub b: [f64; 3],
    /// [`nongaussianity_formula`] at the mean of `b`.
    pub residual: f64,
    /// The Wick combination of lattice n-point functions, without symmetrization.
    pub direct_residual: f64,
}

pub fn nongaussianity_residual(lambda: f64, rho: f64, mesh: f64) -> Result<Nongaussianity> {
    check_lambda(lambda)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::param(format!("triple radius must lie in (0,1), got {rho}")));
    }
    let domain = DiscreteDomain::disk(1.0, mesh)?;
    let faces = symmetric_triple(&domain, rho)?;
    let lds = TwistedDeterminants::new(&domain, &faces, 0.0, DefectStrategy::default())?.all()?;
    let a = clamp_mass(pattern_from(&lds, 0b111), lds[0])?;
    let b = [0b011, 0b101, 0b110].map(|p| pattern_from(&lds, p).max(0.0));
    let b_mean = b.iter().sum::<f64>() / 3.0;
    let phi = |mask: usize| (lambda * (lds[0] - lds[mask])).exp();
    let ratio = |m1: usize, m2: usize| phi(m1 | m2) / (phi(m1) * phi(m2));
    let direct = phi(0b111) / (phi(0b001) * phi(0b010) * phi(0b100))
        - ratio(0b001, 0b010)
        - ratio(0b010, 0b100)
        - ratio(0b001, 0b100)
        + 2.0;
    Ok(Nongaussianity {
        rho,
        mesh,
        faces,
        a,
        b,
        residual: nongaussianity_formula(lambda, a, b_mean),
        direct_residual: direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> DiscreteDomain {
        DiscreteDomain::square(1, 1.0).unwrap()
    }

    #[test]
    fn unit_square_log_dets() {
        let d = unit();
        let p = TransitionMatrix::untwisted(&d, 0.0).unwrap();
        assert!((log_det_one_minus(&p).unwrap() - 0.75f64.ln()).abs() < 1e-14);
        let line = d.defect_line(Face::new(0, 0), DefectStrategy::StraightEast).unwrap();
        let p = TransitionMatrix::build(&d, &[line], 0.0).unwrap();
        assert!((log_det_one_minus(&p).unwrap() - 2.0 * 0.875f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn unit_square_masses_and_one_point() {
        let d = unit();
        assert!((total_loop_mass(&d, 0.0).unwrap().value - (4.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!(total_loop_mass(&d, f64::INFINITY).unwrap().value.abs() < 1e-300);
        let odd = parity_constrained_mass(&d, &[Face::new(0, 0)], &ParityRule::SumOdd, 0.0).unwrap();
        assert!((odd.value - 0.5 * (49.0f64 / 48.0).ln()).abs() < 1e-14);
        let s = n_point_function(&d, &[Face::new(0, 0)], 0.5, 0.0).unwrap();
        assert!((s - (48.0f64 / 49.0).sqrt()).abs() < 1e-14);
        assert_eq!(n_point_function(&d, &[Face::new(0, 0)], 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(n_point_function(&d, &[], 0.5, 0.0).unwrap(), 1.0);
        assert!(n_point_function(&d, &[], -0.1, 0.0).is_err());
    }

    #[test]
    fn nonsymmetric_matrices_use_lu() {
        let p = TransitionMatrix::from_triplets(2, &[(0, 1, 0.5), (1, 0, 0.2)]).unwrap();
        assert!((log_det_one_minus(&p).unwrap() - 0.9f64.ln()).abs() < 1e-15);
        let p = TransitionMatrix::from_triplets(1, &[(0, 0, 1.5)]).unwrap();
        assert!(matches!(log_det_one_minus(&p), Err(Error::NonPositiveDeterminant)));
        let p = TransitionMatrix::from_triplets(1, &[]).unwrap();
        assert_eq!(log_det_one_minus(&p).unwrap(), 0.0);
    }

    #[test]
    fn coincident_faces_are_rejected() {
        let d = DiscreteDomain::square(2, 1.0).unwrap();
        let f = Face::new(0, 0);
        assert!(matches!(
            parity_constrained_mass(&d, &[f, f], &ParityRule::SumOdd, 0.0),
            Err(Error::CoincidentFaces(_))
        ));
    }

    #[test]
    fn patterns_partition_the_total_mass() {
        let d = DiscreteDomain::square(3, 1.0).unwrap();
        let faces = [Face::new(0, 0), Face::new(1, 1), Face::new(2, 0)];
        let lds = TwistedDeterminants::new(&d, &faces, 0.0, DefectStrategy::default())
            .unwrap()
            .all()
            .unwrap();
        let sum: f64 = (0..8).map(|p| pattern_from(&lds, p)).sum();
        assert!((sum + lds[0]).abs() < 1e-12);
        let odd_first: f64 = (0..8).filter(|p| p & 1 == 1).map(|p| pattern_from(&lds, p)).sum();
        assert!((odd_first - sum_odd_from(&lds, 1)).abs() < 1e-12);
    }

    #[test]
    fn green_function_of_unit_square() {
        let g = greens_function(&unit()).unwrap();
        // I - P on the weighted 4-cycle has eigenvalues 1/2, 1, 3/2, 1
        let lambda = [1.0 - 0.5, 1.0, 1.0 + 0.5, 1.0];
        let expected = lambda.iter().map(|l| 1.0 / l).sum::<f64>() / 4.0;
        for x in 0..4 {
            assert!((g.get(x, x) - expected).abs() < 1e-14);
        }
        assert!(g.max_asymmetry() < 1e-15);
    }

    #[test]
    fn nongaussianity_formula_identity() {
        assert_eq!(nongaussianity_formula(0.5, 0.0, 0.0), 0.0);
        assert!(nongaussianity_formula(0.5, 0.1, 0.0) < 0.0);
    }
}
