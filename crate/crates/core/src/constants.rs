//! Closed-form asymptotic constants.
//!
//! For a strongly critical process with half-variances `b_i` and link means
//! `m_{i,i+1}` (types labelled `1..=N`):
//!
//! * `gamma_i = 2^{-(N-i)}`
//! * `c_{N,N} = 1/b_N`, `c_{i,N} = (1/b_N)^{2^{-(N-i)}} prod_{j=i}^{N-1} (m_{j,j+1}/b_j)^{2^{-(j-i+1)}}`
//! * `D_i = (b_i m_{i,i+1})^{2^{-i}} c_{1,i}`, with `c_{1,i}` the constant of the
//!   leading sub-process on types `1..=i`
//! * `g_{i,N} = gamma_i c_{i,N}`
//!
//! Survival from a single type-`i` ancestor decays like `c_{i,N} n^{-gamma_i}`,
//! and the extinction-time law like `g_{i,N} n^{-1-gamma_i}`.
//!
//! Products of fractional powers are accumulated as sums of logarithms.

use serde::Serialize;
use thiserror::Error;

use crate::model::MomentData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstantsError {
    #[error("invalid moments: {0}")]
    InvalidMoments(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantSet {
    pub n_types: usize,
    pub gamma: Vec<f64>,
    /// `c[i]` is `c_{i+1,N}`.
    pub c: Vec<f64>,
    /// `d[i]` is `D_{i+1}` for `i < N - 1`.
    pub d: Vec<f64>,
    pub g: Vec<f64>,
    /// `b_N`, kept for the identity check.
    pub b_last: f64,
}

fn exp2_neg(k: usize) -> f64 {
    2f64.powi(-(k as i32))
}

/// `log c_{i,N}` for the process described by `b` and `links` (zero-based `i`).
fn log_c(b: &[f64], links: &[f64], i: usize) -> f64 {
    let n = b.len();
    let mut acc = -exp2_neg(n - 1 - i) * b[n - 1].ln();
    for j in i..n - 1 {
        acc += exp2_neg(j - i + 1) * (links[j].ln() - b[j].ln());
    }
    acc
}

pub fn constant_set(moments: &MomentData) -> Result<ConstantSet, ConstantsError> {
    let n = moments.n_types();
    if n == 0 {
        return Err(ConstantsError::InvalidMoments("no types".into()));
    }
    let b = &moments.half_variance;
    for (i, &bi) in b.iter().enumerate() {
        if !(bi > 0.0 && bi.is_finite()) {
            return Err(ConstantsError::InvalidMoments(format!("b_{} = {bi}", i + 1)));
        }
    }
    let links: Vec<f64> = (0..n.saturating_sub(1)).map(|i| moments.link(i)).collect();
    for (i, &m) in links.iter().enumerate() {
        if !(m > 0.0 && m.is_finite()) {
            return Err(ConstantsError::InvalidMoments(format!("m_{},{} = {m}", i + 1, i + 2)));
        }
    }

    let gamma: Vec<f64> = (0..n).map(|i| exp2_neg(n - 1 - i)).collect();
    let c: Vec<f64> = (0..n).map(|i| log_c(b, &links, i).exp()).collect();
    let d = (0..n.saturating_sub(1))
        .map(|i| {
            // c_{1,i+1} of the leading sub-process ending at type i+1
            let lead = log_c(&b[..=i], &links[..i], 0);
            (exp2_neg(i + 1) * (b[i] * links[i]).ln() + lead).exp()
        })
        .collect();
    let g = gamma.iter().zip(&c).map(|(gm, ci)| gm * ci).collect();
    Ok(ConstantSet {
        n_types: n,
        gamma,
        c,
        d,
        g,
        b_last: b[n - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub holds: bool,
    pub residual: f64,
}

pub const IDENTITY_TOL: f64 = 1e-12;

/// Checks `c_{1,N} = D_{N-1} (1/b_N)^{2^{-(N-1)}}`; relative residual.
pub fn check_identity_c1n(set: &ConstantSet) -> Option<IdentityCheck> {
    let n = set.n_types;
    if n < 2 {
        return None;
    }
    let rhs = set.d[n - 2] * (-exp2_neg(n - 1) * set.b_last.ln()).exp();
    let residual = ((set.c[0] - rhs) / set.c[0]).abs();
    Some(IdentityCheck {
        holds: residual <= IDENTITY_TOL,
        residual,
    })
}
