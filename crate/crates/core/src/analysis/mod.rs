//! Estimators, fits and diagnostics built on the samplers and the exact engine.

mod boundary;
mod correlation;
mod estimate;
mod reflection;
mod scaling;
mod sobolev;
mod spectral;
mod twopoint;

pub use boundary::{boundary_perturbation_probability, BoundaryPerturbation};
pub use correlation::{mc_correlation, mc_correlations};
pub use estimate::{pairwise_sum, replicate_moments, Estimate, Moments, CHUNK};
pub use reflection::{exact_gram, reflection_positivity_check, standard_families, GramCheck, Monomial, ReflectionReport, JACKKNIFE_BLOCKS};
pub use scaling::{discretize, ols, scaling_exponent_fit, slope_with_linear_correction, LinearFit, ScalingFit};
pub use sobolev::{sobolev_cauchy_diagnostic, sobolev_minus_alpha_norm, CauchyRow, SobolevCauchy, SobolevNorm};
pub use spectral::{default_k_max, spectral_basis, SpectralBasis, SpectralSummary, DENSE_EIGEN_LIMIT};
pub use twopoint::{scaling_dimension, twopoint_decomposition, TwoPointDecomposition};
