//! Offspring laws, process specifications and the strong-criticality check.
//!
//! Types are indexed from zero in code and labelled from one in config files
//! and error messages.

mod config;
mod family;
mod law;
mod moments;

use std::fmt;

use thiserror::Error;

pub use config::ModelConfig;
pub use family::Family;
pub use law::{expectation_matrix, LawKind, OffspringLaw, ProcessSpec, TableRow, TABLE_MASS_TOL};
pub use moments::{validate_hypothesis_a, validate_hypothesis_a_with, MomentData, Validation, CRITICALITY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisViolation {
    NonCritical { type_label: usize, mean: f64 },
    MissingLink { type_label: usize },
    DegenerateVariance { type_label: usize },
}

impl fmt::Display for HypothesisViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonCritical { type_label, mean } => {
                write!(f, "NonCritical({type_label}): own-type mean is {mean}, not 1")
            }
            Self::MissingLink { type_label } => write!(
                f,
                "MissingLink({type_label}): type {type_label} has no children of type {}",
                type_label + 1
            ),
            Self::DegenerateVariance { type_label } => {
                write!(f, "DegenerateVariance({type_label}): own-type offspring variance is zero")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a process needs at least one type")]
    Empty,
    #[error("law at position {position} is for type {found}")]
    LawOrder { position: usize, found: usize },
    #[error("type {type_label}: {detail}")]
    Shape { type_label: usize, detail: String },
    #[error("type {type_label}, child type {child_label}: {detail}")]
    Parameter {
        type_label: usize,
        child_label: usize,
        detail: String,
    },
    #[error("type {type_label}: table probabilities sum to {mass}, not 1")]
    Mass { type_label: usize, mass: f64 },
    #[error("hypothesis A fails: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Hypothesis(Vec<HypothesisViolation>),
    #[error("{}", parse_message(.line, .field, .detail))]
    Parse {
        line: Option<usize>,
        field: Option<String>,
        detail: String,
    },
    #[error("cannot read {path}: {detail}")]
    Io { path: String, detail: String },
}

fn parse_message(line: &Option<usize>, field: &Option<String>, detail: &str) -> String {
    let mut s = String::from("config error");
    if let Some(l) = line {
        s.push_str(&format!(" at line {l}"));
    }
    if let Some(f) = field {
        s.push_str(&format!(" in `{f}`"));
    }
    s.push_str(": ");
    s.push_str(detail.trim_end());
    s
}
