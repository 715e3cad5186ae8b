use serde::{Deserialize, Serialize};

use super::law::ProcessSpec;
use super::{HypothesisViolation, ModelError};

/// Default tolerance for `m_ii = 1`.
pub const CRITICALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub criticality_tol: f64,
    /// Accept own-type means away from one; for deliberate near-critical studies.
    pub allow_off_critical: bool,
}

impl Default for Validation {
    fn default() -> Self {
        Self {
            criticality_tol: CRITICALITY_TOL,
            allow_off_critical: false,
        }
    }
}

/// First and second moments of the offspring laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentData {
    /// `mean[i][j] = E[eta_ij]`, zero below the diagonal.
    pub mean: Vec<Vec<f64>>,
    /// `b_i = Var[eta_ii] / 2`.
    pub half_variance: Vec<f64>,
    /// `second[i][j][k] = E[eta_ij eta_ik]`.
    pub second: Vec<Vec<Vec<f64>>>,
    /// Second moments are finite for every supported family; never estimated.
    pub moments_certified: bool,
}

impl MomentData {
    pub fn from_spec(spec: &ProcessSpec) -> Self {
        let n = spec.n_types();
        let mean = spec.mean_matrix();
        let second: Vec<Vec<Vec<f64>>> = spec
            .laws()
            .iter()
            .map(|law| (0..n).map(|j| (0..n).map(|k| law.cross_moment(j, k)).collect()).collect())
            .collect();
        let half_variance = (0..n)
            .map(|i| 0.5 * (second[i][i][i] - mean[i][i] * mean[i][i]).max(0.0))
            .collect();
        Self {
            mean,
            half_variance,
            second,
            moments_certified: true,
        }
    }

    pub fn n_types(&self) -> usize {
        self.mean.len()
    }

    /// Moments of the leading sub-process on types `0..end`.
    pub fn leading(&self, end: usize) -> MomentData {
        MomentData {
            mean: self.mean[..end].iter().map(|r| r[..end].to_vec()).collect(),
            half_variance: self.half_variance[..end].to_vec(),
            second: self.second[..end]
                .iter()
                .map(|m| m[..end].iter().map(|r| r[..end].to_vec()).collect())
                .collect(),
            moments_certified: self.moments_certified,
        }
    }

    /// `m_{i,i+1}` for `i < N - 1`.
    pub fn link(&self, i: usize) -> f64 {
        self.mean[i][i + 1]
    }
}

pub fn validate_hypothesis_a(spec: &ProcessSpec) -> Result<MomentData, ModelError> {
    validate_hypothesis_a_with(spec, &Validation::default())
}

/// Checks strong criticality: unit own-type means, positive links to the
/// next type, finite second moments and positive own-type variance.
pub fn validate_hypothesis_a_with(spec: &ProcessSpec, opts: &Validation) -> Result<MomentData, ModelError> {
    let data = MomentData::from_spec(spec);
    let n = data.n_types();
    let mut violations = Vec::new();
    for i in 0..n {
        let label = i + 1;
        let m = data.mean[i][i];
        if !opts.allow_off_critical && (m - 1.0).abs() > opts.criticality_tol {
            violations.push(HypothesisViolation::NonCritical { type_label: label, mean: m });
        }
        if i + 1 < n {
            let link = data.link(i);
            if !(link > 0.0 && link.is_finite()) {
                violations.push(HypothesisViolation::MissingLink { type_label: label });
            }
        }
        let b = data.half_variance[i];
        if !(b > 0.0 && b.is_finite()) {
            violations.push(HypothesisViolation::DegenerateVariance { type_label: label });
        }
    }
    if violations.is_empty() {
        Ok(data)
    } else {
        Err(ModelError::Hypothesis(violations))
    }
}
