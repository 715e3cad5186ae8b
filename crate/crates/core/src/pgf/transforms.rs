//! Iterates of `F`, conditional transforms given `T = n`, and censored transforms.

use super::orbit::{step_complements, Pair};
use super::{PgfError, Point, Precision, SurvivalTable};
use crate::model::ProcessSpec;
use crate::real::{DoubleDouble, Real};

/// `F^{(m)}(s)`.
pub fn iterate_point(spec: &ProcessSpec, s: &Point, m: usize) -> Point {
    iterate_point_with(spec, s, m, Precision::Double)
}

pub fn iterate_point_with(spec: &ProcessSpec, s: &Point, m: usize, precision: Precision) -> Point {
    let c = match precision {
        Precision::Double => iterate_impl::<f64>(spec, s.complements(), m),
        Precision::DoubleDouble => iterate_impl::<DoubleDouble>(spec, s.complements(), m),
    };
    Point::from_complements(c).expect("iterates stay in the unit cube")
}

fn iterate_impl<R: Real>(spec: &ProcessSpec, c0: &[f64], m: usize) -> Vec<f64> {
    let n = spec.n_types();
    let mut c: Vec<R> = c0.iter().map(|&x| R::from_f64(x)).collect();
    for _ in 0..m {
        step_complements(spec, &mut c, 0..n);
    }
    c.into_iter().map(|x| x.to_f64()).collect()
}

/// Which types are censored and when.
///
/// The indicator `I_level(t)` is the event that no individual of types
/// `1..=level` is alive at generation `t`. The transform restricted to that
/// event is obtained by zeroing those coordinates after `m - t` steps.
/// Level zero is the trivial indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Censoring {
    pub level: usize,
    pub time: usize,
}

impl Censoring {
    /// Censors all types except the last.
    pub fn early(spec: &ProcessSpec, time: usize) -> Self {
        Self {
            level: spec.n_types() - 1,
            time,
        }
    }
}

fn check_dim(spec: &ProcessSpec, s: &Point) -> Result<(), PgfError> {
    if s.dim() != spec.n_types() {
        return Err(PgfError::InvalidArgument(format!(
            "point has {} coordinates, process has {} types",
            s.dim(),
            spec.n_types()
        )));
    }
    Ok(())
}

fn check_censoring(spec: &ProcessSpec, c: Censoring, m: usize) -> Result<(), PgfError> {
    if c.level > spec.n_types() {
        return Err(PgfError::InvalidArgument(format!(
            "censoring level {} exceeds the number of types",
            c.level
        )));
    }
    if c.time > m {
        return Err(PgfError::InvalidArgument(format!(
            "censoring time {} is after the observation time {m}",
            c.time
        )));
    }
    Ok(())
}

/// `E_1[prod_j s_j^{Z_j(m)} | T = n]`.
pub fn conditional_transform(
    spec: &ProcessSpec,
    table: &SurvivalTable,
    s: &Point,
    m: usize,
    n: usize,
) -> Result<f64, PgfError> {
    conditional_impl(spec, table, s, None, m, n)
}

/// `E_1[s^{Z(m)} I_level(t)]`.
pub fn censored_transform(spec: &ProcessSpec, s: &Point, censoring: Censoring, m: usize) -> Result<f64, PgfError> {
    check_dim(spec, s)?;
    check_censoring(spec, censoring, m)?;
    let nt = spec.n_types();
    let mut c = s.complements().to_vec();
    for _ in 0..m - censoring.time {
        step_complements(spec, &mut c, 0..nt);
    }
    for x in &mut c[..censoring.level] {
        *x = 1.0;
    }
    for _ in 0..censoring.time {
        step_complements(spec, &mut c, 0..nt);
    }
    Ok(1.0 - c[0])
}

/// `E_1[x^{Z(m)} I_level(t)] - E_1[y^{Z(m)} I_level(t)]` for `x >= y`, with
/// `gap = x - y` supplied exactly.
pub fn censored_difference(
    spec: &ProcessSpec,
    x: &Point,
    y: &Point,
    gap: &[f64],
    censoring: Censoring,
    m: usize,
) -> Result<f64, PgfError> {
    check_dim(spec, x)?;
    check_dim(spec, y)?;
    check_censoring(spec, censoring, m)?;
    if gap.len() != spec.n_types() || gap.iter().any(|g| !(*g >= 0.0)) {
        return Err(PgfError::InvalidArgument("gap must be a nonnegative vector of length N".into()));
    }
    let mut pair = Pair {
        upper: x.complements().to_vec(),
        lower: y.complements().to_vec(),
        gap: gap.to_vec(),
    };
    pair.run(spec, m - censoring.time);
    pair.kill_leading(censoring.level);
    pair.run(spec, censoring.time);
    Ok(pair.gap[0])
}

/// `E_1[s^{Z(m)} I_level(t) | T = n]`.
pub fn censored_conditional_transform(
    spec: &ProcessSpec,
    table: &SurvivalTable,
    s: &Point,
    censoring: Censoring,
    m: usize,
    n: usize,
) -> Result<f64, PgfError> {
    check_censoring(spec, censoring, m)?;
    conditional_impl(spec, table, s, Some(censoring), m, n)
}

fn conditional_impl(
    spec: &ProcessSpec,
    table: &SurvivalTable,
    s: &Point,
    censoring: Option<Censoring>,
    m: usize,
    n: usize,
) -> Result<f64, PgfError> {
    check_dim(spec, s)?;
    if n == 0 {
        return Err(PgfError::UnreachableEvent { n });
    }
    table.require(n)?;
    if table.step_drop(0, n) <= 0.0 {
        return Err(PgfError::UnreachableEvent { n });
    }
    if m >= n {
        // Z(m) = 0 on T = n, and every type is extinct from n on
        return match censoring {
            Some(c) if c.level > 0 && c.time >= n => Ok(1.0),
            Some(c) if c.level > 0 => conditional_impl(spec, table, &Point::ones(spec.n_types()), Some(c), n - 1, n),
            _ => Ok(1.0),
        };
    }
    let ratio = match table.precision() {
        Precision::Double => paired_ratio::<f64>(spec, table, s, censoring, m, n),
        Precision::DoubleDouble => paired_ratio::<DoubleDouble>(spec, table, s, censoring, m, n),
    };
    if !ratio.0.is_finite() || (ratio.1 > 0.0 && ratio.1 < f64::MIN_POSITIVE) {
        return Err(PgfError::PrecisionLoss {
            step: n,
            detail: "joint probability underflows".into(),
        });
    }
    Ok(ratio.0)
}

/// Returns `(ratio, numerator)`.
///
/// With `k = n - m`, `E[s^{Z(m)}; T = n] = F^{(m)}(s q(k)) - F^{(m)}(s q(k-1))`,
/// both starting points having known complements and a known gap `s drop(k)`.
fn paired_ratio<R: Real>(
    spec: &ProcessSpec,
    table: &SurvivalTable,
    s: &Point,
    censoring: Option<Censoring>,
    m: usize,
    n: usize,
) -> (f64, f64) {
    let nt = spec.n_types();
    let k = n - m;
    let sv: Vec<R> = s.complements().iter().map(|&c| R::one() - R::from_f64(c)).collect();
    let cs: Vec<R> = s.complements().iter().map(|&c| R::from_f64(c)).collect();
    let mut pair = Pair {
        upper: (0..nt).map(|j| cs[j] + sv[j] * table.survival_r::<R>(j, k)).collect(),
        lower: (0..nt).map(|j| cs[j] + sv[j] * table.survival_r::<R>(j, k - 1)).collect(),
        gap: (0..nt).map(|j| sv[j] * table.drop_r::<R>(j, k)).collect(),
    };
    match censoring {
        None => pair.run(spec, m),
        Some(c) => {
            pair.run(spec, m - c.time);
            pair.kill_leading(c.level);
            pair.run(spec, c.time);
        }
    }
    let num = pair.gap[0];
    let den = table.drop_r::<R>(0, n);
    ((num / den).to_f64(), num.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn geo_h(n: f64, s: f64) -> f64 {
        (n - (n - 1.0) * s) / (n + 1.0 - n * s)
    }

    #[test]
    fn iterate_matches_geometric_closed_form() {
        let spec = zoo::geometric_single();
        for &s in &[0.0, 0.3, 0.9] {
            let p = iterate_point(&spec, &Point::from_values(vec![s]).unwrap(), 50);
            assert!((p.value(0) - geo_h(50.0, s)).abs() < 1e-14);
        }
    }

    #[test]
    fn conditional_at_one_is_one() {
        let spec = zoo::zoo3();
        let t = SurvivalTable::build(&spec, 400);
        for (m, n) in [(0usize, 5usize), (3, 5), (100, 400), (399, 400)] {
            let v = conditional_transform(&spec, &t, &Point::ones(3), m, n).unwrap();
            assert!((v - 1.0).abs() < 1e-13, "m={m} n={n} v={v}");
        }
    }

    #[test]
    fn conditional_single_type_closed_form() {
        // E[s^{Z(m)}; T = n] = h_m(s h_k(0)) - h_m(s h_{k-1}(0)), k = n - m
        let spec = zoo::geometric_single();
        let t = SurvivalTable::build(&spec, 300);
        let (m, n, s) = (120usize, 300usize, 0.7);
        let k = (n - m) as f64;
        let a = s * geo_h(k, 0.0);
        let b = s * geo_h(k - 1.0, 0.0);
        let mf = m as f64;
        let diff = (a - b) / ((mf + 1.0 - mf * a) * (mf + 1.0 - mf * b));
        let expected = diff * (n as f64) * (n as f64 + 1.0);
        let v = conditional_transform(&spec, &t, &Point::from_values(vec![s]).unwrap(), m, n).unwrap();
        assert!((v - expected).abs() / expected < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn level_zero_censoring_is_uncensored() {
        let spec = zoo::zoo2();
        let t = SurvivalTable::build(&spec, 200);
        let s = Point::from_values(vec![0.4, 0.8]).unwrap();
        let a = conditional_transform(&spec, &t, &s, 50, 200).unwrap();
        let b = censored_conditional_transform(&spec, &t, &s, Censoring { level: 0, time: 20 }, 50, 200).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn censored_all_ones_is_leading_extinction() {
        let spec = zoo::zoo3();
        let lead = SurvivalTable::build(&spec.leading(2), 60);
        for t in [0usize, 1, 7, 60] {
            let v = censored_transform(&spec, &Point::ones(3), Censoring::early(&spec, t), 60).unwrap();
            assert!((v - lead.extinction_cdf(0, t)).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn observation_at_zero_returns_s1() {
        let spec = zoo::zoo2();
        let t = SurvivalTable::build(&spec, 50);
        let s = Point::from_values(vec![0.3, 0.9]).unwrap();
        let v = conditional_transform(&spec, &t, &s, 0, 50).unwrap();
        assert!((v - 0.3).abs() < 1e-14);
    }

    #[test]
    fn censored_difference_matches_plain_difference() {
        let spec = zoo::zoo2();
        let x = Point::from_values(vec![0.9, 0.8]).unwrap();
        let y = Point::from_values(vec![0.9, 0.3]).unwrap();
        let c = Censoring::early(&spec, 4);
        let d = censored_difference(&spec, &x, &y, &[0.0, 0.5], c, 10).unwrap();
        let a = censored_transform(&spec, &x, c, 10).unwrap();
        let b = censored_transform(&spec, &y, c, 10).unwrap();
        assert!((d - (a - b)).abs() < 1e-14);
    }

    #[test]
    fn censoring_after_observation_rejected() {
        let spec = zoo::zoo2();
        let r = censored_transform(&spec, &Point::ones(2), Censoring { level: 1, time: 5 }, 4);
        assert!(matches!(r, Err(PgfError::InvalidArgument(_))));
    }

    #[test]
    fn double_double_conditional_agrees() {
        let spec = zoo::zoo2();
        let a = SurvivalTable::build(&spec, 1000);
        let b = SurvivalTable::build_with(&spec, 1000, Precision::DoubleDouble);
        let s = Point::from_values(vec![0.5, 0.5]).unwrap();
        let x = conditional_transform(&spec, &a, &s, 300, 1000).unwrap();
        let y = conditional_transform(&spec, &b, &s, 300, 1000).unwrap();
        assert!((x - y).abs() < 1e-12);
    }
}
