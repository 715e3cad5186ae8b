//! Limit values of the conditional theorems.

use crate::model::ProcessSpec;
use crate::pgf::{harmonic_u, HarmonicEstimate, PgfError, SurvivalTable};

/// `((1 + l(1-x)) / (1 + l x(1-x)))^{-1 + 2^{-(N-1)}} / (1 + l x(1-x))^2`.
pub fn limit_finalstage(lambda: f64, x: f64, n_types: usize) -> f64 {
    let a = 1.0 + lambda * (1.0 - x);
    let b = 1.0 + lambda * x * (1.0 - x);
    let e = -1.0 + 2f64.powi(-(n_types as i32 - 1));
    (a / b).powf(e) / (b * b)
}

/// `1 / (1 + l)^2`.
pub fn limit_death(lambda: f64) -> f64 {
    1.0 / ((1.0 + lambda) * (1.0 + lambda))
}

/// `U` of the last type, from the paired iterate at a fixed large `n` with one
/// Richardson step between `n/2` and `n`.
#[derive(Debug, Clone)]
pub struct HarmonicEvaluator {
    last: ProcessSpec,
    n: usize,
}

pub const HARMONIC_N: usize = 1 << 20;

impl HarmonicEvaluator {
    pub fn new(spec: &ProcessSpec, n: usize) -> Self {
        Self {
            last: spec.tail(spec.n_types() - 1),
            n,
        }
    }

    pub fn estimate(&self, s: f64) -> Result<HarmonicEstimate, PgfError> {
        harmonic_u(&self.last, s, self.n)
    }

    pub fn eval(&self, s: f64) -> Result<f64, PgfError> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let e = self.estimate(s)?;
        Ok(2.0 * e.value - e.half_value)
    }
}

/// `U(s h_{k+1}(0)) - U(s h_k(0))`; `h` is read from a table of the last type.
pub fn deathfin_bracket(
    s: f64,
    k: usize,
    u: &dyn Fn(f64) -> Result<f64, PgfError>,
    last_table: &SurvivalTable,
) -> Result<f64, PgfError> {
    let h = |j: usize| last_table.extinction_cdf(0, j);
    Ok(u(s * h(k + 1))? - u(s * h(k))?)
}

/// The stated limit `s (U(s h_{k+1}(0)) - U(s h_k(0)))`.
pub fn limit_deathfin(
    s: f64,
    k: usize,
    u: &dyn Fn(f64) -> Result<f64, PgfError>,
    last_table: &SurvivalTable,
) -> Result<f64, PgfError> {
    if !(0.0..1.0).contains(&s) {
        return Err(PgfError::InvalidArgument(format!("s_N = {s} is outside [0, 1)")));
    }
    Ok(s * deathfin_bracket(s, k, u, last_table)?)
}

/// Limit of `E[s^{Z_N(n-k)} | T = n]` computed directly: `U(s h_k(0)) - U(s h_{k-1}(0))`,
/// and `1` at `k = 0`.
pub fn deathfin_direct(
    s: f64,
    k: usize,
    u: &dyn Fn(f64) -> Result<f64, PgfError>,
    last_table: &SurvivalTable,
) -> Result<f64, PgfError> {
    if k == 0 {
        return Ok(1.0);
    }
    deathfin_bracket(s, k - 1, u, last_table)
}
