pub mod coefficients;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod initial;
pub mod io;
pub mod noise;
pub mod operators;
pub mod spectral;
pub mod stepper;
