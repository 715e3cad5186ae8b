//! Numerical laboratory for strongly critical decomposable multitype
//! Galton-Watson processes.
//!
//! * [`model`]: offspring laws, process specs, moment checks, TOML model files.
//! * [`constants`]: closed-form asymptotic constants.
//! * [`pgf`]: exact generating-function engine (survival tables, extinction
//!   time law, conditional and censored transforms, harmonic function, the
//!   transform of the total type-N progeny of lower types).
//! * [`montecarlo`]: reproducible forward simulation with rejection conditioning.
//! * [`experiments`]: convergence drivers comparing finite-n values with limits.

pub mod constants;
pub mod experiments;
pub mod model;
pub mod montecarlo;
pub mod pgf;
pub mod real;
pub mod sum;
pub mod zoo;
