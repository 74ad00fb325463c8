//! Random walk loop soups on the square lattice, their winding spin fields,
//! and exact and Monte Carlo correlation functions.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod fields;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod sampler;

pub use error::{Error, Result};
