use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;

use super::limits::{deathfin_bracket, deathfin_direct, limit_death, limit_deathfin, limit_finalstage, HarmonicEvaluator, HARMONIC_N};
use super::report::{Check, ConvergenceReport, ReportRow};
use super::ExperimentError;
use crate::constants::{constant_set, ConstantSet};
use crate::model::{validate_hypothesis_a, MomentData, ProcessSpec};
use crate::pgf::{
    censored_conditional_transform, censored_difference, conditional_transform, harmonic_u, w_censored_weighted_mean,
    w_laplace, w_weighted_mean, Censoring, PgfError, Point, SurvivalTable,
};

/// Validated spec with its moments and constants.
#[derive(Debug, Clone)]
pub struct Context {
    pub spec: ProcessSpec,
    pub model: String,
    pub moments: MomentData,
    pub constants: ConstantSet,
}

impl Context {
    pub fn new(spec: &ProcessSpec, model: &str) -> Result<Self, ExperimentError> {
        let moments = validate_hypothesis_a(spec)?;
        let constants = constant_set(&moments)?;
        Ok(Self {
            spec: spec.clone(),
            model: model.into(),
            moments,
            constants,
        })
    }

    fn n_types(&self) -> usize {
        self.spec.n_types()
    }

    fn b_last(&self) -> f64 {
        self.constants.b_last
    }

    /// `(1, ..., 1, s_N)` with `s_N` given by its complement, lower coordinates `s_lower`.
    fn point(&self, s_lower: f64, last_complement: f64) -> Point {
        let mut c = vec![1.0 - s_lower; self.n_types()];
        c[self.n_types() - 1] = last_complement;
        Point::from_complements(c).expect("coordinates in [0, 1]")
    }

    fn require_multitype(&self, what: &str) -> Result<(), ExperimentError> {
        if self.n_types() < 2 {
            return Err(ExperimentError::InvalidArgument(format!("{what} needs at least two types")));
        }
        Ok(())
    }
}

/// Splits engine results into values and precision flags.
fn flagged<T>(r: Result<T, PgfError>) -> Result<Result<T, String>, ExperimentError> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ PgfError::PrecisionLoss { .. }) => Ok(Err(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

fn row_or_flag(n: usize, params: Vec<f64>, limit: f64, r: Result<f64, PgfError>) -> Result<ReportRow, ExperimentError> {
    Ok(match flagged(r)? {
        Ok(v) => ReportRow::new(n, params, v, limit),
        Err(note) => ReportRow::flagged(n, params, limit, note),
    })
}

fn par_rows<T: Sync>(
    tasks: &[T],
    f: impl Fn(&T) -> Result<ReportRow, ExperimentError> + Sync + Send,
) -> Result<Vec<ReportRow>, ExperimentError> {
    tasks.par_iter().map(f).collect()
}

fn max_n(grid: &[usize]) -> Result<usize, ExperimentError> {
    grid.iter()
        .copied()
        .max()
        .ok_or_else(|| ExperimentError::InvalidArgument("empty n grid".into()))
}

/// `|ratio - 1|` nonincreasing along the grid for rows with `n >= burn_in`.
fn monotone_check(name: &str, rows: &[&ReportRow], burn_in: usize) -> Check {
    let dev: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.n >= burn_in)
        .map(|r| (r.n, (r.ratio - 1.0).abs()))
        .collect();
    let bad = dev.windows(2).find(|w| !(w[1].1 <= w[0].1));
    Check {
        name: name.into(),
        pass: bad.is_none() && !dev.is_empty(),
        detail: match bad {
            Some(w) => format!("|ratio-1| rises from n={} to n={}", w[0].0, w[1].0),
            None => format!("{} rows with n >= {burn_in}", dev.len()),
        },
    }
}

/// `P_i(Z(n) != 0) n^{gamma_i} / c_{i,N}` for every type.
pub fn verify_survival(ctx: &Context, n_grid: &[usize]) -> Result<ConvergenceReport, ExperimentError> {
    let table = SurvivalTable::build(&ctx.spec, max_n(n_grid)?);
    let mut rep = ConvergenceReport::new("survival", &ctx.model, &["type"], &[]);
    for i in 0..ctx.n_types() {
        for &n in n_grid {
            let r = table
                .require(n)
                .map(|_| table.survival(i, n) * (n as f64).powf(ctx.constants.gamma[i]));
            rep.rows.push(row_or_flag(n, vec![(i + 1) as f64], ctx.constants.c[i], r)?);
        }
    }
    add_monotone_checks(&mut rep, ctx.n_types());
    Ok(rep)
}

/// `P_i(T = n) n^{1 + gamma_i} / g_{i,N}` for every type.
pub fn verify_local(ctx: &Context, n_grid: &[usize]) -> Result<ConvergenceReport, ExperimentError> {
    let table = SurvivalTable::build(&ctx.spec, max_n(n_grid)?);
    let mut rep = ConvergenceReport::new("local", &ctx.model, &["type"], &[]);
    for i in 0..ctx.n_types() {
        for &n in n_grid {
            let r = crate::pgf::extinction_time_pmf(&table, i, n)
                .map(|p| p * (n as f64).powf(1.0 + ctx.constants.gamma[i]));
            rep.rows.push(row_or_flag(n, vec![(i + 1) as f64], ctx.constants.g[i], r)?);
        }
    }
    add_monotone_checks(&mut rep, ctx.n_types());
    Ok(rep)
}

fn add_monotone_checks(rep: &mut ConvergenceReport, n_types: usize) {
    for i in 0..n_types {
        let rows: Vec<&ReportRow> = rep.rows.iter().filter(|r| r.params[0] == (i + 1) as f64).collect();
        let c = monotone_check(&format!("monotone_type{}", i + 1), &rows, 100);
        rep.checks.push(c);
    }
}

/// `E[s^{Z_{<N}(m)} exp(-l Z_N(m) / (b_N n)) | T = n]` at `m = round(x n)`.
pub fn verify_finalstage(
    ctx: &Context,
    n_grid: &[usize],
    xs: &[f64],
    lambdas: &[f64],
    s_lower: f64,
) -> Result<ConvergenceReport, ExperimentError> {
    let table = SurvivalTable::build(&ctx.spec, max_n(n_grid)?);
    let mut tasks = Vec::new();
    for &x in xs {
        if !(x > 0.0 && x < 1.0) {
            return Err(ExperimentError::InvalidArgument(format!("x = {x} must lie in (0, 1)")));
        }
        for &l in lambdas {
            for &n in n_grid {
                tasks.push((x, l, n));
            }
        }
    }
    let mut rep = ConvergenceReport::new("finalstage", &ctx.model, &["x", "lambda", "s_lower"], &[]);
    rep.rows = par_rows(&tasks, |&(x, l, n)| {
        let m = (x * n as f64).round() as usize;
        let s = ctx.point(s_lower, -(-l / (ctx.b_last() * n as f64)).exp_m1());
        let r = conditional_transform(&ctx.spec, &table, &s, m, n);
        row_or_flag(n, vec![x, l, s_lower], limit_finalstage(l, x, ctx.n_types()), r)
    })?;
    if s_lower == 1.0 {
        let n = max_n(n_grid)?;
        let tiny = 1e-10;
        let mut worst: f64 = 0.0;
        for &x in xs {
            let m = (x * n as f64).round() as usize;
            let s = ctx.point(1.0, -(-tiny / (ctx.b_last() * n as f64)).exp_m1());
            let v = conditional_transform(&ctx.spec, &table, &s, m, n)?;
            worst = worst.max((v - 1.0).abs());
        }
        rep.checks.push(Check {
            name: "normalization".into(),
            pass: worst <= 1e-9,
            detail: format!("max |value - 1| at lambda = {tiny:e}: {worst:e}"),
        });
    }
    Ok(rep)
}

/// `E[s^{Z_{<N}(m)} exp(-l Z_N(m) / (b_N k)) | T = n]` at `m = n - k`.
pub fn verify_death(
    ctx: &Context,
    cases: &[(usize, usize)],
    lambdas: &[f64],
    s_lower: f64,
) -> Result<ConvergenceReport, ExperimentError> {
    let n_max = cases.iter().map(|c| c.0).max().unwrap_or(0);
    let table = SurvivalTable::build(&ctx.spec, n_max);
    let mut tasks = Vec::new();
    for &(n, k) in cases {
        if k == 0 || k >= n {
            return Err(ExperimentError::InvalidArgument(format!("need 0 < k < n, got n={n} k={k}")));
        }
        for &l in lambdas {
            tasks.push((n, k, l));
        }
    }
    let mut rep = ConvergenceReport::new("death", &ctx.model, &["k", "lambda", "s_lower"], &[]);
    rep.rows = par_rows(&tasks, |&(n, k, l)| {
        let s = ctx.point(s_lower, -(-l / (ctx.b_last() * k as f64)).exp_m1());
        let r = conditional_transform(&ctx.spec, &table, &s, n - k, n);
        row_or_flag(n, vec![k as f64, l, s_lower], limit_death(l), r)
    })?;
    Ok(rep)
}

/// `E[s_N^{Z_N(n-k)} | T = n]` against the stated limit.
///
/// Extra columns: the bracket without the `s_N` factor, the limit computed
/// directly from `h_m(s q(k)) - h_m(s q(k-1))`, and the value over that limit.
pub fn verify_deathfin(
    ctx: &Context,
    n_grid: &[usize],
    ks: &[usize],
    s_values: &[f64],
) -> Result<ConvergenceReport, ExperimentError> {
    let n_max = max_n(n_grid)?;
    let table = SurvivalTable::build(&ctx.spec, n_max);
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let last_table = SurvivalTable::build(&ctx.spec.tail(ctx.n_types() - 1), k_max + 1);
    let ev = HarmonicEvaluator::new(&ctx.spec, HARMONIC_N);
    let mut combos = Vec::new();
    for &k in ks {
        for &s in s_values {
            if let Some(&n) = n_grid.iter().find(|&&n| k >= n) {
                return Err(ExperimentError::InvalidArgument(format!("k = {k} must be below n = {n}")));
            }
            combos.push((k, s));
        }
    }
    let limits: Vec<[f64; 3]> = combos
        .par_iter()
        .map(|&(k, s)| {
            let cache = RefCell::new(HashMap::new());
            let u = |x: f64| -> Result<f64, PgfError> {
                if let Some(&v) = cache.borrow().get(&x.to_bits()) {
                    return Ok(v);
                }
                let v = ev.eval(x)?;
                cache.borrow_mut().insert(x.to_bits(), v);
                Ok(v)
            };
            Ok([
                limit_deathfin(s, k, &u, &last_table)?,
                deathfin_bracket(s, k, &u, &last_table)?,
                deathfin_direct(s, k, &u, &last_table)?,
            ])
        })
        .collect::<Result<_, ExperimentError>>()?;
    let mut tasks = Vec::new();
    for (c, lim) in combos.iter().zip(&limits) {
        for &n in n_grid {
            tasks.push((c.0, c.1, n, *lim));
        }
    }
    let mut rep = ConvergenceReport::new(
        "deathfin",
        &ctx.model,
        &["k", "s"],
        &["bracket", "direct_limit", "value_over_direct"],
    );
    rep.rows = par_rows(&tasks, |&(k, s, n, [limit, bracket, direct])| {
        let p = ctx.point(1.0, 1.0 - s);
        let r = conditional_transform(&ctx.spec, &table, &p, n - k, n);
        let row = row_or_flag(n, vec![k as f64, s], limit, r)?;
        let v = row.value;
        Ok(row.with_extras(vec![bracket, direct, v / direct]))
    })?;
    Ok(rep)
}

/// `P(Z_1(l) + ... + Z_{N-1}(l) > 0 | T = n)` at `l = round(n^e)`; limit zero.
pub fn verify_no_previous(ctx: &Context, n_grid: &[usize], exponents: &[f64]) -> Result<ConvergenceReport, ExperimentError> {
    ctx.require_multitype("the early-extinction probability")?;
    let table = SurvivalTable::build(&ctx.spec, max_n(n_grid)?);
    let mut tasks = Vec::new();
    for &e in exponents {
        for &n in n_grid {
            tasks.push((e, n));
        }
    }
    let mut rep = ConvergenceReport::new("no-previous", &ctx.model, &["exponent"], &["l"]);
    rep.rows = par_rows(&tasks, |&(e, n)| {
        let l = ((n as f64).powf(e).round() as usize).min(n - 1);
        let ones = Point::ones(ctx.n_types());
        let r = censored_conditional_transform(&ctx.spec, &table, &ones, Censoring::early(&ctx.spec, l), l, n)
            .map(|v| 1.0 - v);
        Ok(row_or_flag(n, vec![e], 0.0, r)?.with_extras(vec![l as f64]))
    })?;
    for &e in exponents {
        let vals: Vec<(usize, f64)> = rep.rows.iter().filter(|r| r.params[0] == e).map(|r| (r.n, r.value)).collect();
        let ok = vals.windows(2).all(|w| w[1].1 < w[0].1);
        rep.checks.push(Check {
            name: format!("decreasing_exponent_{e}"),
            pass: ok && vals.len() > 1,
            detail: vals
                .iter()
                .map(|(n, v)| format!("n={n}:{v:.3e}"))
                .collect::<Vec<_>>()
                .join(" "),
        });
    }
    Ok(rep)
}

/// Ordinary least squares of `y` on `x`; returns `(slope, intercept)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub const SLOPE_TOL: f64 = 0.03;

/// `(1 - E[e^{-theta W_N}]) / theta^{gamma_1}` against `D_{N-1}` at `theta = p / n`
/// for each `p` in `points`, plus a log-log fit over all points.
///
/// The fit row has `theta_n = NaN`, value `exp(intercept)` and extras `(slope, intercept)`.
pub fn verify_laplace(ctx: &Context, n: usize, points: &[f64]) -> Result<ConvergenceReport, ExperimentError> {
    ctx.require_multitype("W_N")?;
    if points.len() < 2 || n == 0 {
        return Err(ExperimentError::InvalidArgument("the fit needs n > 0 and two theta points".into()));
    }
    let g1 = ctx.constants.gamma[0];
    let d = ctx.constants.d[ctx.n_types() - 2];
    let thetas: Vec<f64> = points.iter().map(|p| p / n as f64).collect();
    let mut rep = ConvergenceReport::new("laplace", &ctx.model, &["theta_n"], &["theta", "slope", "intercept"]);
    let comps: Vec<f64> = thetas
        .par_iter()
        .map(|&t| w_laplace(&ctx.spec, t).map(|w| w.complement[0]))
        .collect::<Result<_, _>>()?;
    for ((&p, &t), &c) in points.iter().zip(&thetas).zip(&comps) {
        rep.rows
            .push(ReportRow::new(n, vec![p], c / t.powf(g1), d).with_extras(vec![t, f64::NAN, f64::NAN]));
    }
    let lx: Vec<f64> = thetas.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = comps.iter().map(|c| c.ln()).collect();
    let (slope, intercept) = fit_line(&lx, &ly);
    rep.rows.push(
        ReportRow::new(n, vec![f64::NAN], intercept.exp(), d).with_extras(vec![f64::NAN, slope, intercept]),
    );
    rep.checks.push(Check {
        name: "slope".into(),
        pass: (slope - g1).abs() <= SLOPE_TOL,
        detail: format!("slope {slope:.6} vs gamma_1 = {g1} +/- {SLOPE_TOL}"),
    });
    Ok(rep)
}

/// `10^{j/4}` for `j = 0..=12`: thirteen log-spaced points over three decades.
pub fn laplace_points() -> Vec<f64> {
    (0..=12).map(|j| 10f64.powf(j as f64 / 4.0)).collect()
}

/// `(b_N l n^2 / k)(h_m(s) - h_m(0))` with `s = e^{-l/(b_N k)}`, `m = n - k`.
pub fn verify_harmonic_diff(ctx: &Context, cases: &[(usize, usize)], lambdas: &[f64]) -> Result<ConvergenceReport, ExperimentError> {
    let last = ctx.spec.tail(ctx.n_types() - 1);
    let mut tasks = Vec::new();
    for &(n, k) in cases {
        if k == 0 || k + 2 > n {
            return Err(ExperimentError::InvalidArgument(format!("need 0 < k < n - 1, got n={n} k={k}")));
        }
        for &l in lambdas {
            tasks.push((n, k, l));
        }
    }
    let mut rep = ConvergenceReport::new("harmonic-diff", &ctx.model, &["k", "lambda"], &[]);
    rep.rows = par_rows(&tasks, |&(n, k, l)| {
        let m = n - k;
        let s = (-l / (ctx.b_last() * k as f64)).exp();
        let r = harmonic_u(&last, s, m).map(|h| {
            // h.value = b m^2 (h_m(s) - h_m(0))
            let (nf, mf) = (n as f64, m as f64);
            h.value * l * nf * nf / (k as f64 * mf * mf)
        });
        row_or_flag(n, vec![k as f64, l], 1.0, r)
    })?;
    Ok(rep)
}

/// `U_n(h(s)) - U_n(s)` against one.
pub fn verify_harmonic(ctx: &Context, n: usize, s_grid: &[f64]) -> Result<ConvergenceReport, ExperimentError> {
    let last = ctx.spec.tail(ctx.n_types() - 1);
    let mut rep = ConvergenceReport::new("harmonic", &ctx.model, &["s"], &["u_s", "u_hs"]);
    rep.rows = par_rows(s_grid, |&s| {
        let hs = last.pgf_eval(0, &[s]);
        let a = harmonic_u(&last, s, n)?.value;
        let b = harmonic_u(&last, hs, n)?.value;
        Ok(ReportRow::new(n, vec![s], b - a, 1.0).with_extras(vec![a, b]))
    })?;
    Ok(rep)
}

/// `n^{gamma_1 - 1} E[W_N e^{-l W_N/(b_N n)} (I_{N-1}(n^{2/3}))]` against `b_N g_{1,N} / l^{1 - gamma_1}`.
pub fn verify_w_mean(ctx: &Context, n_grid: &[usize], lambdas: &[f64], censored: bool) -> Result<ConvergenceReport, ExperimentError> {
    ctx.require_multitype("W_N")?;
    let g1 = ctx.constants.gamma[0];
    let coef = ctx.b_last() * ctx.constants.g[0];
    let id = if censored { "w-censored" } else { "w-mean" };
    let mut tasks = Vec::new();
    for &l in lambdas {
        for &n in n_grid {
            tasks.push((l, n));
        }
    }
    let mut rep = ConvergenceReport::new(id, &ctx.model, &["lambda"], &[]);
    rep.rows = par_rows(&tasks, |&(l, n)| {
        let nf = n as f64;
        let r = if censored {
            let t = censor_time(n);
            w_censored_weighted_mean(&ctx.spec, l, nf, t)
        } else {
            w_weighted_mean(&ctx.spec, l, nf)
        };
        let r = r.map(|v| v * nf.powf(g1 - 1.0));
        row_or_flag(n, vec![l], coef / l.powf(1.0 - g1), r)
    })?;
    Ok(rep)
}

/// `round(n^{2/3})`.
pub fn censor_time(n: usize) -> usize {
    (n as f64).powf(2.0 / 3.0).round() as usize
}

/// `(n^{1+gamma_1} / k^2) E[Z_N(m) e^{-l Z_N(m)/(b_N k)} I_{N-1}(n^{2/3})]`, `k = round(n^e)`, `m = n - k`.
pub fn verify_z_censored(
    ctx: &Context,
    n_grid: &[usize],
    k_exponents: &[f64],
    lambdas: &[f64],
) -> Result<ConvergenceReport, ExperimentError> {
    ctx.require_multitype("the censored transform")?;
    let g1 = ctx.constants.gamma[0];
    let coef = ctx.b_last() * ctx.constants.g[0];
    let mut tasks = Vec::new();
    for &e in k_exponents {
        for &l in lambdas {
            for &n in n_grid {
                tasks.push((e, l, n));
            }
        }
    }
    let mut rep = ConvergenceReport::new("z-censored", &ctx.model, &["k_exponent", "lambda"], &["k"]);
    rep.rows = par_rows(&tasks, |&(e, l, n)| {
        let k = ((n as f64).powf(e).round() as usize).max(1);
        let m = n - k;
        let t = censor_time(n).min(m);
        let theta = l / (ctx.b_last() * k as f64);
        let nt = ctx.n_types();
        let diff = |h: f64| -> Result<f64, PgfError> {
            let x = ctx.point(1.0, -(-(theta - h)).exp_m1());
            let y = ctx.point(1.0, -(-(theta + h)).exp_m1());
            let mut gap = vec![0.0; nt];
            gap[nt - 1] = 2.0 * (-theta).exp() * h.sinh();
            Ok(censored_difference(&ctx.spec, &x, &y, &gap, Censoring::early(&ctx.spec, t), m)? / (2.0 * h))
        };
        let h = theta * 1e-4;
        let r = diff(h).and_then(|d1| diff(2.0 * h).map(|d2| (4.0 * d1 - d2) / 3.0));
        let nf = n as f64;
        let r = r.map(|v| v * nf.powf(1.0 + g1) / (k as f64 * k as f64));
        Ok(row_or_flag(n, vec![e, l], coef / (l * l), r)?.with_extras(vec![k as f64]))
    })?;
    Ok(rep)
}
