use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::exact::{n_point_function, Shape};
use crate::lattice::DiscreteDomain;

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval for the slope.
    pub slope_ci: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::param(format!("a fit needs at least 3 paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("all abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(LinearFit {
        slope,
        intercept,
        slope_ci: t * (sse / (nf - 2.0) / sxx).sqrt(),
        r_squared: if syy == 0.0 { 1.0 } else { 1.0 - sse / syy },
        points: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub lambda: f64,
    pub meshes: Vec<f64>,
    /// `⟨σ(z)⟩` at each mesh.
    pub values: Vec<f64>,
    /// Fit of `log⟨σ⟩` against `log a`.
    pub fit: LinearFit,
    /// The predicted slope `λ/4`.
    pub expected: f64,
    /// Slopes between consecutive meshes.
    pub local_slopes: Vec<f64>,
    /// Slope of the fit `log⟨σ⟩ ≈ c + s·log a + k·a`, which absorbs a leading lattice correction.
    pub corrected_slope: f64,
}

/// Least squares for `y ≈ c + s·log a + k·a`; returns `s`.
pub fn slope_with_linear_correction(meshes: &[f64], y: &[f64]) -> Result<f64> {
    if meshes.len() != y.len() || meshes.len() < 4 {
        return Err(Error::param("the corrected fit needs at least 4 paired points"));
    }
    let design = DMatrix::from_fn(meshes.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => meshes[i].ln(),
        _ => meshes[i],
    });
    let sol = design
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(sol[1])
}

/// Domain covering `shape` at the given mesh.
pub fn discretize(shape: Shape, mesh: f64) -> Result<DiscreteDomain> {
    match shape {
        Shape::UnitDisk => DiscreteDomain::disk(1.0, mesh),
        Shape::UnitSquare => {
            let n = (1.0 / mesh).round();
            if !(n >= 1.0) || ((n * mesh) - 1.0).abs() > 1e-9 {
                return Err(Error::param(format!("mesh {mesh} does not divide the unit square")));
            }
            DiscreteDomain::square(n as u32, mesh)
        }
    }
}

/// Exact one-point functions at `z` across meshes, with the log-log slope.
pub fn scaling_exponent_fit(shape: Shape, z: [f64; 2], lambda: f64, meshes: &[f64]) -> Result<ScalingFit> {
    if meshes.len() < 4 {
        return Err(Error::param(format!("need at least 4 meshes, got {}", meshes.len())));
    }
    if meshes.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(Error::param("meshes must lie in (0, 1)"));
    }
    let ratios: Vec<f64> = meshes.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    if ratios.iter().any(|r| (r - ratios[0]).abs() > 1e-6 || *r == 0.0) {
        return Err(Error::param("meshes must be geometrically spaced"));
    }
    let values = meshes
        .iter()
        .map(|&a| {
            let d = discretize(shape, a)?;
            let f = d.nearest_face(z);
            n_point_function(&d, &[f], lambda, 0.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = meshes.iter().map(|a| a.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let local_slopes = x.windows(2).zip(y.windows(2)).map(|(u, v)| (v[1] - v[0]) / (u[1] - u[0])).collect();
    Ok(ScalingFit {
        lambda,
        meshes: meshes.to_vec(),
        fit: ols(&x, &y)?,
        expected: lambda / 4.0,
        local_slopes,
        corrected_slope: slope_with_linear_correction(meshes, &y)?,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!(f.slope_ci < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_line_interval() {
        // residuals ±0.1 alternate; t(0.975, 4) = 2.776
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().enumerate().map(|(i, a)| a + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let f = ols(&x, &y).unwrap();
        let sxx = 17.5;
        let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - f.intercept - f.slope * a).powi(2)).sum();
        let expected = 2.776445 * (sse / 4.0 / sxx).sqrt();
        assert!((f.slope_ci - expected).abs() < 1e-5);
    }

    #[test]
    fn corrected_fit_recovers_the_power() {
        let a = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let y: Vec<f64> = a.iter().map(|m: &f64| 0.3 + 0.25 * m.ln() - 0.8 * m).collect();
        assert!((slope_with_linear_correction(&a, &y).unwrap() - 0.25).abs() < 1e-10);
        let x: Vec<f64> = a.iter().map(|m| m.ln()).collect();
        assert!(ols(&x, &y).unwrap().slope < 0.24);
    }

    #[test]
    fn rejects_short_or_irregular_mesh_lists() {
        let z = [0.5, 0.5];
        assert!(scaling_exponent_fit(Shape::UnitSquare, z, 0.5, &[0.25, 0.125, 0.0625]).is_err());
        assert!(scaling_exponent_fit(Shape::UnitSquare, z, 0.5, &[0.5, 0.25, 0.125, 0.1]).is_err());
        assert!(discretize(Shape::UnitSquare, 0.3).is_err());
    }

    #[test]
    fn coarse_slope_is_near_prediction() {
        let s = scaling_exponent_fit(Shape::UnitSquare, [0.5, 0.5], 1.0, &[1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]).unwrap();
        assert!(s.values.windows(2).all(|w| w[1] < w[0]));
        // coarse meshes undershoot, and the local slope climbs toward λ/4
        let local: Vec<f64> = s.values.windows(2).map(|w| (w[0] / w[1]).ln() / 2f64.ln()).collect();
        assert!(local.windows(2).all(|w| w[1] > w[0]), "{local:?}");
        assert!(local[2] < 0.25 && local[2] > 0.2, "{local:?}");
    }
}
