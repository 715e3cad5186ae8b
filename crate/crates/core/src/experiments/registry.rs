//! Experiments whose final rows are judged against frozen bands.

use serde::Serialize;

use super::drivers::{
    laplace_points, verify_death, verify_deathfin, verify_finalstage, verify_laplace, verify_local, verify_survival,
    Context,
};
use super::report::{BandEntry, BandFile, BandRule, ConvergenceReport, ReportRow};
use super::ExperimentError;
use crate::zoo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandedCase {
    Survival,
    Local,
    Death,
    FinalStage,
    DeathFin,
    Laplace,
}

pub const BANDED_CASES: [BandedCase; 6] = [
    BandedCase::Survival,
    BandedCase::Local,
    BandedCase::Death,
    BandedCase::FinalStage,
    BandedCase::DeathFin,
    BandedCase::Laplace,
];

pub const DEATH_K: usize = 200;
pub const DEATH_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const FINALSTAGE_XS: [f64; 3] = [0.25, 0.5, 0.75];
pub const DEATHFIN_KS: [usize; 4] = [0, 1, 2, 5];
pub const DEATHFIN_S: [f64; 3] = [0.3, 0.6, 0.9];

impl BandedCase {
    pub fn id(&self) -> &'static str {
        match self {
            BandedCase::Survival => "survival",
            BandedCase::Local => "local",
            BandedCase::Death => "death",
            BandedCase::FinalStage => "finalstage",
            BandedCase::DeathFin => "deathfin",
            BandedCase::Laplace => "laplace",
        }
    }

    pub fn model(&self) -> &'static str {
        "zoo2"
    }

    pub fn target_n(&self) -> usize {
        match self {
            BandedCase::Survival | BandedCase::Local => 10_000,
            BandedCase::Death | BandedCase::FinalStage | BandedCase::DeathFin => 20_000,
            BandedCase::Laplace => 100_000,
        }
    }

    pub fn pilot_n(&self) -> usize {
        self.target_n() / 2
    }

    /// Rows that carry a band.
    pub fn banded(&self, row: &ReportRow, n: usize) -> bool {
        match self {
            BandedCase::Laplace => row.params[0].is_nan(),
            _ => row.n == n,
        }
    }

    /// Runs the experiment at scale `n`. With `full_grid` the trend grid below `n` is included.
    pub fn run(&self, n: usize, full_grid: bool) -> Result<ConvergenceReport, ExperimentError> {
        let ctx = Context::new(&zoo::zoo2(), self.model())?;
        let grid = |lows: &[usize]| -> Vec<usize> {
            let mut g: Vec<usize> = if full_grid { lows.iter().copied().filter(|&x| x < n).collect() } else { vec![] };
            g.push(n);
            g
        };
        match self {
            BandedCase::Survival => verify_survival(&ctx, &grid(&trend_grid())),
            BandedCase::Local => verify_local(&ctx, &grid(&trend_grid())),
            BandedCase::Death => {
                // the pilot halves n and keeps k
                let cases: Vec<(usize, usize)> = grid(&[2_500, 5_000, 10_000]).into_iter().map(|m| (m, DEATH_K)).collect();
                verify_death(&ctx, &cases, &DEATH_LAMBDAS, 1.0)
            }
            BandedCase::FinalStage => verify_finalstage(&ctx, &grid(&[2_500, 5_000, 10_000]), &FINALSTAGE_XS, &[1.0], 1.0),
            BandedCase::DeathFin => verify_deathfin(&ctx, &grid(&[2_500, 5_000, 10_000]), &DEATHFIN_KS, &DEATHFIN_S),
            BandedCase::Laplace => verify_laplace(&ctx, n, &laplace_points()),
        }
    }
}

/// `{10^2, 10^2.5, 10^3, 10^3.5}` rounded.
pub fn trend_grid() -> Vec<usize> {
    vec![100, 316, 1000, 3162]
}

/// Runs every banded case at its pilot scale and freezes the bands.
pub fn pilot_bands(rule: BandRule) -> Result<BandFile, ExperimentError> {
    let mut bands = Vec::new();
    for case in BANDED_CASES {
        bands.extend(pilot_entries(case, rule)?);
    }
    Ok(BandFile { rule, bands })
}

pub fn pilot_entries(case: BandedCase, rule: BandRule) -> Result<Vec<BandEntry>, ExperimentError> {
    let pilot_n = case.pilot_n();
    let rep = case.run(pilot_n, false)?;
    Ok(rep
        .rows
        .iter()
        .filter(|r| case.banded(r, pilot_n))
        .map(|r| BandEntry {
            key: rep.row_key(r),
            target_n: case.target_n(),
            pilot_n,
            pilot_ratio: r.ratio,
            half_width: rule.half_width(r.ratio),
        })
        .collect())
}
