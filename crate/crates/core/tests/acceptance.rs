//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach stdout. The
//! process fails if a criterion outside `EXPECTED_FAILURES` fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use decomp_gw::experiments::{pilot_entries, BandFile, BandedCase, ConvergenceReport, Verdict};
use decomp_gw::model::ProcessSpec;
use decomp_gw::montecarlo::{conditional_estimate, estimate_pmf_T, SimConfig};
use decomp_gw::pgf::{conditional_transform, extinction_time_pmf, harmonic_u, Point, SurvivalTable};
use decomp_gw::zoo;

/// Criteria that cannot hold as stated; see the README.
const EXPECTED_FAILURES: &[u32] = &[6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn bands() -> BandFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../config/bands.toml");
    BandFile::load(&path).expect("band file")
}

/// Recomputes the pilot of `case` and compares it with the frozen entries.
fn pilot_reproduces(case: BandedCase, file: &BandFile) -> Result<(), String> {
    let fresh = pilot_entries(case, file.rule).map_err(|e| e.to_string())?;
    for e in &fresh {
        let stored = file
            .find(&e.key, e.target_n)
            .ok_or_else(|| format!("no frozen band for {}", e.key))?;
        let rel = ((stored.pilot_ratio - e.pilot_ratio) / e.pilot_ratio).abs();
        if stored.pilot_n != e.pilot_n || rel > 1e-12 || stored.half_width != file.rule.half_width(e.pilot_ratio) {
            return Err(format!("{}: stored pilot {} vs recomputed {}", e.key, stored.pilot_ratio, e.pilot_ratio));
        }
    }
    Ok(())
}

fn banded(case: BandedCase, file: &BandFile, limit: Option<Duration>) -> Outcome {
    let t = Instant::now();
    let mut rep = match case.run(case.target_n(), true) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: e.to_string(),
            }
        }
    };
    let elapsed = t.elapsed();
    rep.apply_bands(file);
    let pilot = pilot_reproduces(case, file);
    let judged: Vec<_> = rep.rows.iter().filter(|r| r.band.is_some()).collect();
    let mut pass = rep.verdict() == Verdict::Pass && !judged.is_empty() && pilot.is_ok();
    let mut detail = summarize(&rep);
    if let Err(e) = pilot {
        detail += &format!("; pilot mismatch: {e}");
    }
    if let Some(l) = limit {
        pass &= elapsed <= l;
        detail += &format!("; {:.2} s (limit {} s)", elapsed.as_secs_f64(), l.as_secs());
    }
    Outcome { pass, detail }
}

fn summarize(rep: &ConvergenceReport) -> String {
    let mut parts = Vec::new();
    for r in rep.rows.iter().filter(|r| r.band.is_some()) {
        let b = r.band.unwrap();
        let ok = if r.verdict() == Some(true) { "in" } else { "OUT" };
        parts.push(format!(
            "[{} n={}] ratio {:.6} {ok} [{:.6}, {:.6}]",
            rep.row_key(r),
            r.n,
            r.ratio,
            b.low(),
            b.high()
        ));
    }
    for c in &rep.checks {
        parts.push(format!("{} {} ({})", c.name, if c.pass { "ok" } else { "FAILED" }, c.detail));
    }
    parts.join("; ")
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let spec = zoo::geometric_single();
    let table = SurvivalTable::build(&spec, 10_000);
    let mut worst: f64 = 0.0;
    for n in 1..=10_000usize {
        let nf = n as f64;
        worst = worst.max((table.survival(0, n) * (nf + 1.0) - 1.0).abs());
        let p = extinction_time_pmf(&table, 0, n).unwrap();
        worst = worst.max((p * nf * (nf + 1.0) - 1.0).abs());
    }
    let el = t.elapsed();
    Outcome {
        pass: worst <= 1e-10 && el < Duration::from_secs(1),
        detail: format!("max relative error {worst:.3e}; {:.4} s (limit 1 s)", el.as_secs_f64()),
    }
}

fn criterion_2() -> Outcome {
    let spec = zoo::geometric_single();
    let n = 10_000;
    let mut worst_u: f64 = 0.0;
    let mut worst_id: f64 = 0.0;
    for j in 1..=8 {
        let s = j as f64 / 10.0;
        let u = harmonic_u(&spec, s, n).unwrap().value;
        worst_u = worst_u.max((u / (s / (1.0 - s)) - 1.0).abs());
        let hs = 1.0 / (2.0 - s);
        let uh = harmonic_u(&spec, hs, n).unwrap().value;
        worst_id = worst_id.max((uh - u - 1.0).abs());
    }
    Outcome {
        pass: worst_u <= 1e-3 && worst_id <= 2e-3,
        detail: format!("max relative error of U {worst_u:.3e} (tol 1e-3); max identity error {worst_id:.3e} (tol 2e-3)"),
    }
}

/// `E[s^{Z(n-k)} | T = n]` for the geometric model from its linear fractional iterates.
fn geometric_deathfin_exact(s: f64, k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let m = (n - k) as f64;
    let q = |j: usize| j as f64 / (j as f64 + 1.0);
    let (a, b) = (s * q(k), s * q(k - 1));
    let joint = (a - b) / ((m + 1.0 - m * a) * (m + 1.0 - m * b));
    let nf = n as f64;
    joint * nf * (nf + 1.0)
}

fn criterion_6(file: &BandFile) -> Outcome {
    let engine = banded(BandedCase::DeathFin, file, None);
    let u = |x: f64| x / (1.0 - x);
    let q = |j: usize| j as f64 / (j as f64 + 1.0);
    let n = 20_000;
    let mut worst: f64 = 0.0;
    let mut worst_direct: f64 = 0.0;
    for &k in &[0usize, 1, 2, 5] {
        for &s in &[0.3, 0.6, 0.9] {
            let exact = geometric_deathfin_exact(s, k, n);
            let stated = s * (u(s * q(k + 1)) - u(s * q(k)));
            let direct = if k == 0 { 1.0 } else { u(s * q(k)) - u(s * q(k - 1)) };
            worst = worst.max((exact - stated).abs());
            worst_direct = worst_direct.max((exact - direct).abs());
        }
    }
    let anchor = worst <= 1e-3;
    Outcome {
        pass: engine.pass && anchor,
        detail: format!(
            "engine vs stated limit: {}; geometric anchor max |exact - stated| {worst:.3e} (tol 1e-3); \
             max |exact - (U(s q_k) - U(s q_(k-1)))| {worst_direct:.3e}",
            engine.detail
        ),
    }
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let spec = zoo::zoo2();
    let horizon = 30;
    let table = SurvivalTable::build(&spec, horizon);
    let cfg = SimConfig {
        master_seed: 20_240_601,
        replicates: 1_000_000,
        max_steps: horizon,
        ..SimConfig::default()
    };
    let pmf = estimate_pmf_T(&spec, &cfg).unwrap();
    let mut worst_pmf: f64 = 0.0;
    for n in 1..=horizon {
        worst_pmf = worst_pmf.max(pmf.estimate(n).z_score(extinction_time_pmf(&table, 0, n).unwrap()));
    }
    let (n, m) = (25, 20);
    let s = [0.7, 0.7];
    let exact = conditional_transform(&spec, &table, &Point::from_values(s.to_vec()).unwrap(), m, n).unwrap();
    let ccfg = SimConfig {
        master_seed: 20_240_602,
        replicates: 10_000_000,
        snapshot_times: vec![m],
        ..cfg
    };
    let est = conditional_estimate(&spec, &ccfg, n, |tr| {
        let z = tr.snapshot(0).unwrap();
        s[0].powf(z[0] as f64) * s[1].powf(z[1] as f64)
    })
    .unwrap();
    let z_cond = est.z_score(exact);
    let el = t.elapsed();
    Outcome {
        pass: worst_pmf <= 4.0 && z_cond <= 4.0 && el <= Duration::from_secs(300),
        detail: format!(
            "pmf bins n<=30: max |z| {worst_pmf:.2}; conditional n=25 m=20: {:.6} vs exact {exact:.6}, |z| {z_cond:.2}, \
             {} accepted; {:.1} s (limit 300 s)",
            est.estimate,
            est.accepted,
            el.as_secs_f64()
        ),
    }
}

fn criterion_9() -> Outcome {
    let spec: ProcessSpec = zoo::micro_table();
    let (pmf, bound) = common::enumerate::enumerate_pmf(&spec, 8, 80);
    let table = SurvivalTable::build(&spec, 8);
    let worst = pmf
        .iter()
        .enumerate()
        .map(|(k, p)| (extinction_time_pmf(&table, 0, k + 1).unwrap() - p).abs())
        .fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-9 && bound < 1e-12,
        detail: format!("max |engine - enumeration| {worst:.3e} (tol 1e-9); truncation bound {bound:.1e}"),
    }
}

fn criterion_10() -> Outcome {
    let suites = common::MODEL_SUITES
        .iter()
        .chain(&common::PGF_SUITES)
        .chain(&common::MC_SUITES)
        .chain(&common::CONSTANT_SUITES);
    let mut failures = Vec::new();
    let mut count = 0;
    for (name, f) in suites {
        count += 1;
        if let Err(e) = f(common::CASES) {
            failures.push(format!("{name}: {e}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{count} suites x {} cases", common::CASES)
        } else {
            failures.join("; ")
        },
    }
}

fn main() {
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "geometric closed forms to n = 10^4", Box::new(criterion_1)),
        (2, "harmonic function of the geometric model", Box::new(criterion_2)),
        (
            3,
            "local limit trend, two-type model",
            Box::new(|| banded(BandedCase::Local, &bands(), Some(Duration::from_secs(30)))),
        ),
        (
            4,
            "conditional transform near extinction, k = 200",
            Box::new(|| banded(BandedCase::Death, &bands(), Some(Duration::from_secs(120)))),
        ),
        (
            5,
            "conditional transform at m = xn, with normalization",
            Box::new(|| banded(BandedCase::FinalStage, &bands(), None)),
        ),
        (6, "conditional transform at fixed distance k from extinction", Box::new(|| criterion_6(&bands()))),
        (7, "Laplace transform exponent and constant", Box::new(|| banded(BandedCase::Laplace, &bands(), None))),
        (8, "Monte Carlo against the exact engine", Box::new(criterion_8)),
        (9, "enumeration oracle, micro table model", Box::new(criterion_9)),
        (10, "property suites", Box::new(criterion_10)),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in &criteria {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id}: {name} ({:.1} s): {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !EXPECTED_FAILURES.contains(id) {
            unexpected.push(*id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria pass except the documented {EXPECTED_FAILURES:?}");
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
