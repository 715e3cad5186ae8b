//! Exact generating-function engine.
//!
//! All quantities are computed from iterates of the offspring pgf
//! `F = (f_1, ..., f_N)`. Points of `[0,1]^N` are carried together with their
//! complements, since for a critical process every interesting iterate is
//! within `O(1/n)` of one. Differences of iterates such as
//! `P(T = n) = q(n) - q(n-1)` are propagated by a paired recurrence that never
//! subtracts two nearly equal numbers.

mod harmonic;
pub(crate) mod orbit;
mod table;
mod transforms;
mod wtransform;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use harmonic::{harmonic_u, harmonic_u_with, HarmonicEstimate};
pub use table::{extinction_time_pmf, SurvivalTable};
pub use transforms::{
    censored_conditional_transform, censored_difference, censored_transform, conditional_transform, iterate_point, iterate_point_with,
    Censoring,
};
pub use wtransform::{
    w_censored_transform, w_censored_weighted_mean, w_laplace, w_transform, w_transform_monotone, w_weighted_mean,
    WTransform,
    W_MAX_ITER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgfError {
    #[error("precision loss at step {step}: {detail}")]
    PrecisionLoss { step: usize, detail: String },
    #[error("P(T = {n}) is zero; conditioning on T = {n} is undefined")]
    UnreachableEvent { n: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    SlowConvergence { iterations: usize, residual: f64 },
    #[error("step {requested} is beyond the table horizon {horizon}")]
    BeyondHorizon { requested: usize, horizon: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Arithmetic used by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double, about 32 significant digits; roughly 10x slower.
    DoubleDouble,
}

/// A point of `[0,1]^N` stored with its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    value: Vec<f64>,
    complement: Vec<f64>,
}

impl Point {
    pub fn from_values(value: Vec<f64>) -> Result<Self, PgfError> {
        check_unit(&value)?;
        let complement = value.iter().map(|v| 1.0 - v).collect();
        Ok(Self { value, complement })
    }

    /// Exact near one: `complement` is taken as given.
    pub fn from_complements(complement: Vec<f64>) -> Result<Self, PgfError> {
        check_unit(&complement)?;
        let value = complement.iter().map(|c| 1.0 - c).collect();
        Ok(Self { value, complement })
    }

    pub fn ones(n: usize) -> Self {
        Self {
            value: vec![1.0; n],
            complement: vec![0.0; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            value: vec![0.0; n],
            complement: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.value.len()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.value[i]
    }

    pub fn complement(&self, i: usize) -> f64 {
        self.complement[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn complements(&self) -> &[f64] {
        &self.complement
    }
}

fn check_unit(v: &[f64]) -> Result<(), PgfError> {
    for (i, &x) in v.iter().enumerate() {
        if !(0.0..=1.0).contains(&x) {
            return Err(PgfError::InvalidArgument(format!("coordinate {} = {x} is outside [0, 1]", i + 1)));
        }
    }
    Ok(())
}
