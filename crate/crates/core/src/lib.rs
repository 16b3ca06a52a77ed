pub mod config;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod io;
pub mod operators;
pub mod picard;
pub mod pressure;
pub mod spectral;

pub use config::{Model, RunConfig, Shape};
pub use error::{Error, Result};
pub use fields::PerturbationState;
pub use spectral::{make_grid, Axis, ScalarField, SpectralGrid, VectorField};
