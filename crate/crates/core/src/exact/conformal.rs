//! Conformal radii of the unit disk and the unit square.
//!
//! The square `[0,1]²` is the image of the unit disk under the
//! Schwarz–Christoffel map `F(w) = (1/2, 1/2) + c ∫₀^w (1 + t⁴)^{-1/2} dt`,
//! where `c` makes the image side length one. The conformal radius at
//! `z = F(w)` is `|F'(w)| (1 - |w|²)`.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// The open unit disk centered at the origin.
    UnitDisk,
    /// The open square `(0,1)²`.
    UnitSquare,
}

pub fn conformal_radius(shape: Shape, z: [f64; 2]) -> Result<f64> {
    if !(z[0].is_finite() && z[1].is_finite()) {
        return Err(Error::param("point must be finite"));
    }
    match shape {
        Shape::UnitDisk => {
            let r2 = z[0] * z[0] + z[1] * z[1];
            if r2 >= 1.0 {
                return Err(Error::param(format!("{z:?} is not inside the unit disk")));
            }
            Ok(1.0 - r2)
        }
        Shape::UnitSquare => {
            if !(z[0] > 0.0 && z[0] < 1.0 && z[1] > 0.0 && z[1] < 1.0) {
                return Err(Error::param(format!("{z:?} is not inside the unit square")));
            }
            let w = square_preimage(Complex64::new(z[0] - 0.5, z[1] - 0.5))?;
            Ok(square_scale() * (1.0 - w.norm_sqr()) / (Complex64::new(1.0, 0.0) + w.powi(4)).norm().sqrt())
        }
    }
}

const NODES: usize = 16;
const PANELS: usize = 32;

fn gauss_legendre() -> &'static ([f64; NODES], [f64; NODES]) {
    static RULE: OnceLock<([f64; NODES], [f64; NODES])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = NODES;
        let mut x = [0.0; NODES];
        let mut w = [0.0; NODES];
        for i in 0..n {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, t);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
                let dt = p1 / dp;
                t -= dt;
                if dt.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, t);
                    for k in 2..=n {
                        let q2 = ((2 * k - 1) as f64 * t * q1 - (k - 1) as f64 * q0) / k as f64;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = n as f64 * (t * q1 - q0) / (t * t - 1.0);
                    x[i] = t;
                    w[i] = 2.0 / ((1.0 - t * t) * dq * dq);
                    break;
                }
            }
        }
        (x, w)
    })
}

/// `∫₀^w (1 + t⁴)^{-1/2} dt` along the straight segment, by composite Gauss–Legendre.
fn sc_integral(w: Complex64) -> Complex64 {
    let (x, wt) = gauss_legendre();
    let one = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    let h = 1.0 / PANELS as f64;
    for p in 0..PANELS {
        let a = p as f64 * h;
        for k in 0..NODES {
            let s = a + 0.5 * h * (x[k] + 1.0);
            let t = w * s;
            acc += (one + t.powi(4)).sqrt().inv() * (0.5 * h * wt[k]);
        }
    }
    acc * w
}

/// Scale constant `c` so that the image of the disk has side length one.
pub fn square_scale() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 0.5 / sc_integral(Complex64::new(1.0, 0.0)).re)
}

/// The conformal map from the unit disk onto the square centered at the origin.
pub fn square_map(w: Complex64) -> Complex64 {
    sc_integral(w) * square_scale()
}

fn square_map_derivative(w: Complex64) -> Complex64 {
    (Complex64::new(1.0, 0.0) + w.powi(4)).sqrt().inv() * square_scale()
}

fn square_preimage(zeta: Complex64) -> Result<Complex64> {
    let mut w = zeta / square_scale();
    if w.norm() > 0.9 {
        w *= 0.9 / w.norm();
    }
    for _ in 0..200 {
        let residual = square_map(w) - zeta;
        let mut step = residual / square_map_derivative(w);
        let mut next = w - step;
        while next.norm() >= 1.0 {
            step *= 0.5;
            next = w - step;
        }
        w = next;
        if step.norm() < 1e-15 {
            return Ok(w);
        }
    }
    Err(Error::Numerical(format!("square map inversion did not converge at {zeta}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_values() {
        assert_eq!(conformal_radius(Shape::UnitDisk, [0.0, 0.0]).unwrap(), 1.0);
        assert!((conformal_radius(Shape::UnitDisk, [0.5, 0.0]).unwrap() - 0.75).abs() < 1e-15);
        assert!(conformal_radius(Shape::UnitDisk, [1.0, 0.0]).is_err());
    }

    #[test]
    fn map_sends_circle_to_square_sides() {
        for k in 0..16 {
            let theta = 0.07 + k as f64 * std::f64::consts::TAU / 16.0;
            let z = square_map(Complex64::from_polar(0.999_999, theta));
            let side = z.re.abs().max(z.im.abs());
            assert!((side - 0.5).abs() < 2e-3, "theta {theta}: {z}");
        }
    }

    #[test]
    fn inversion_round_trips() {
        for &(x, y) in &[(0.5, 0.5), (0.2, 0.7), (0.9, 0.1), (0.05, 0.5)] {
            let w = square_preimage(Complex64::new(x - 0.5, y - 0.5)).unwrap();
            let back = square_map(w);
            assert!((back.re - (x - 0.5)).abs() < 1e-12 && (back.im - (y - 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn square_is_symmetric_and_shrinks_to_the_edge() {
        let a = conformal_radius(Shape::UnitSquare, [0.3, 0.6]).unwrap();
        let b = conformal_radius(Shape::UnitSquare, [0.6, 0.3]).unwrap();
        let c = conformal_radius(Shape::UnitSquare, [0.7, 0.4]).unwrap();
        assert!((a - b).abs() < 1e-12 && (a - c).abs() < 1e-12);
        let near = conformal_radius(Shape::UnitSquare, [0.5, 0.001]).unwrap();
        // near a straight edge r ≈ 2 × distance, as in a half-plane
        assert!((near / 0.002 - 1.0).abs() < 1e-2, "{near}");
    }
}
