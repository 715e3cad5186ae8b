//! Convergence drivers.
//!
//! Each driver evaluates a finite-`n` quantity with the exact engine and puts
//! it next to its limit. Grid points run in parallel; rows keep grid order.

mod drivers;
mod limits;
mod registry;
mod report;

use thiserror::Error;

pub use drivers::{
    censor_time, fit_line, laplace_points, verify_death, verify_deathfin, verify_finalstage, verify_harmonic,
    verify_harmonic_diff, verify_laplace, verify_local, verify_no_previous, verify_survival, verify_w_mean,
    verify_z_censored, Context, SLOPE_TOL,
};
pub use limits::{deathfin_bracket, deathfin_direct, limit_death, limit_deathfin, limit_finalstage, HarmonicEvaluator, HARMONIC_N};
pub use registry::{
    pilot_bands, pilot_entries, trend_grid, BandedCase, BANDED_CASES, DEATHFIN_KS, DEATHFIN_S, DEATH_K, DEATH_LAMBDAS,
    FINALSTAGE_XS,
};
pub use report::{num, Band, BandEntry, BandFile, BandRule, Check, ConvergenceReport, ReportRow, Verdict};

use crate::constants::ConstantsError;
use crate::model::ModelError;
use crate::pgf::PgfError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Constants(#[from] ConstantsError),
    #[error(transparent)]
    Pgf(#[from] PgfError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o: {0}")]
    Io(String),
}
