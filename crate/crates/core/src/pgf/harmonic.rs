//! Finite-n approximations `b_N n^2 (h_n(s) - h_n(0))` of the harmonic-measure
//! generating function `U(s)` of the last type.

use serde::Serialize;

use super::orbit::Pair;
use super::{PgfError, Precision};
use crate::model::{MomentData, ProcessSpec};
use crate::real::{DoubleDouble, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarmonicEstimate {
    pub n: usize,
    pub value: f64,
    /// Value at `n / 2`.
    pub half_value: f64,
    /// `|value - half_value|`.
    pub convergence: f64,
}

pub fn harmonic_u(spec: &ProcessSpec, s: f64, n: usize) -> Result<HarmonicEstimate, PgfError> {
    harmonic_u_with(spec, s, n, Precision::Double)
}

pub fn harmonic_u_with(spec: &ProcessSpec, s: f64, n: usize, precision: Precision) -> Result<HarmonicEstimate, PgfError> {
    if !(0.0..1.0).contains(&s) {
        return Err(PgfError::InvalidArgument(format!("s = {s} is outside [0, 1)")));
    }
    if n < 2 {
        return Err(PgfError::InvalidArgument("n must be at least 2".into()));
    }
    let last = spec.tail(spec.n_types() - 1);
    let b = MomentData::from_spec(&last).half_variance[0];
    let (g_half, g) = match precision {
        Precision::Double => gaps::<f64>(&last, s, n),
        Precision::DoubleDouble => gaps::<DoubleDouble>(&last, s, n),
    };
    if g == 0.0 && s > 0.0 {
        return Err(PgfError::PrecisionLoss {
            step: n,
            detail: "h_n(s) - h_n(0) underflows".into(),
        });
    }
    let scale = |m: usize| b * (m as f64) * (m as f64);
    let value = scale(n) * g;
    let half_value = scale(n / 2) * g_half;
    Ok(HarmonicEstimate {
        n,
        value,
        half_value,
        convergence: (value - half_value).abs(),
    })
}

fn gaps<R: Real>(last: &ProcessSpec, s: f64, n: usize) -> (f64, f64) {
    let mut pair = Pair {
        upper: vec![R::one() - R::from_f64(s)],
        lower: vec![R::one()],
        gap: vec![R::from_f64(s)],
    };
    let mut half = 0.0;
    for step in 1..=n {
        pair.step(last, 0..1);
        if step == n / 2 {
            half = pair.gap[0].to_f64();
        }
    }
    (half, pair.gap[0].to_f64())
}
