//! Random valid models and the property suites shared by the test targets.

#![allow(dead_code)]

pub mod enumerate;

use decomp_gw::constants::{check_identity_c1n, constant_set};
use decomp_gw::model::{validate_hypothesis_a, Family, MomentData, OffspringLaw, ProcessSpec, TableRow};
use decomp_gw::montecarlo::{simulate_trace, stream_rng, SimConfig};
use decomp_gw::pgf::{
    censored_transform, conditional_transform, extinction_time_pmf, harmonic_u, iterate_point, w_transform,
    Censoring, Point, SurvivalTable,
};
use decomp_gw::sum::NeumaierSum;
use decomp_gw::zoo;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 1000;

/// Runs `test` on `cases` deterministic draws of `strategy`.
pub fn check<S, F>(name: &str, cases: u32, strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

/// Parameters of one random law; only the part matching the law's width is used.
#[derive(Debug, Clone)]
pub struct LawRecipe {
    table: bool,
    own_poisson: bool,
    spread: f64,
    links: Vec<(u8, f64)>,
    split: f64,
}

fn law_recipe() -> impl Strategy<Value = LawRecipe> {
    (
        any::<bool>(),
        any::<bool>(),
        0.05f64..0.45,
        prop::collection::vec((0u8..4, 0.05f64..2.5), 4),
        0.1f64..0.9,
    )
        .prop_map(|(table, own_poisson, spread, links, split)| LawRecipe {
            table,
            own_poisson,
            spread,
            links,
            split,
        })
}

fn link_family(kind: u8, mean: f64) -> Family {
    match kind {
        0 => Family::Geometric { mean },
        1 => Family::Poisson { mean },
        2 => Family::Bernoulli { p: (mean / 2.5).clamp(0.05, 1.0) },
        _ => Family::ZERO,
    }
}

fn build_law(parent: usize, n: usize, r: &LawRecipe) -> OffspringLaw {
    let width = n - parent;
    if !r.table {
        let own = if r.own_poisson {
            Family::Poisson { mean: 1.0 }
        } else {
            Family::Geometric { mean: 1.0 }
        };
        let mut m = vec![own];
        for j in 1..width {
            let (kind, mean) = r.links[j - 1];
            // the first link must have positive mean
            let kind = if j == 1 && kind == 3 { 1 } else { kind };
            m.push(link_family(kind, mean));
        }
        return OffspringLaw::product(parent, m);
    }
    // own counts 0, 1, 2 with probabilities a, 1 - 2a, a; each split between
    // "no other children" and one child of each later type flagged by the recipe
    let a = r.spread;
    let mut rows = Vec::new();
    for (own, p) in [(0u32, a), (1, 1.0 - 2.0 * a), (2, a)] {
        let mut plain = vec![0u32; width];
        plain[0] = own;
        let mut with = plain.clone();
        for j in 1..width {
            with[j] = if j == 1 { 1 } else { u32::from(r.links[j - 1].0 % 2 == 0) };
        }
        if width == 1 {
            rows.push(TableRow { counts: plain, prob: p });
        } else {
            rows.push(TableRow {
                counts: plain,
                prob: p * (1.0 - r.split),
            });
            rows.push(TableRow {
                counts: with,
                prob: p * r.split,
            });
        }
    }
    OffspringLaw::table(parent, rows)
}

/// Random model satisfying Hypothesis A with `types` in `range`.
pub fn spec_strategy(range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = ProcessSpec> {
    range
        .prop_flat_map(|n| prop::collection::vec(law_recipe(), n))
        .prop_map(|recipes| {
            let n = recipes.len();
            let laws = recipes.iter().enumerate().map(|(i, r)| build_law(i, n, r)).collect();
            let spec = ProcessSpec::new(laws).expect("generated laws are valid");
            validate_hypothesis_a(&spec).expect("generated model is strongly critical");
            spec
        })
}

fn unit_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, n)
}

/// Spec together with a point of `[0, 1]^N`.
pub fn spec_and_point(range: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = (ProcessSpec, Vec<f64>)> {
    spec_strategy(range).prop_flat_map(|spec| {
        let n = spec.n_types();
        (Just(spec), unit_vec(n))
    })
}

fn fail(msg: String) -> Result<(), TestCaseError> {
    Err(TestCaseError::fail(msg))
}

// ---- model ----

pub fn model_pgf_monotone(cases: u32) -> Result<(), String> {
    let strat = spec_and_point(1..=4).prop_flat_map(|(spec, s)| {
        let n = spec.n_types();
        (Just(spec), Just(s), 0..n, 0..n, 0.0f64..=1.0)
    });
    check("pgf monotone", cases, strat, |(spec, s, i, j, t)| {
        let mut up = s.clone();
        up[j] += t * (1.0 - up[j]);
        let (a, b) = (spec.pgf_eval(i, &s), spec.pgf_eval(i, &up));
        if b + 1e-15 < a {
            return fail(format!("f_{i} decreases along {j}: {a} -> {b}"));
        }
        Ok(())
    })
}

pub fn model_survival_map_direct(cases: u32) -> Result<(), String> {
    let strat = spec_strategy(1..=4).prop_flat_map(|spec| {
        let n = spec.n_types();
        (Just(spec.clone()), 0..n, prop::collection::vec(1e-4f64..=1.0, n))
    });
    check("survival map vs direct", cases, strat, |(spec, i, d)| {
        let x: Vec<f64> = d.iter().map(|v| 1.0 - v).collect();
        let a = spec.survival_map(i, &d);
        let b = 1.0 - spec.pgf_eval(i, &x);
        if (a - b).abs() > 1e-9 {
            return fail(format!("type {i}: {a} vs {b}"));
        }
        Ok(())
    })
}

pub fn model_survival_derivative(cases: u32) -> Result<(), String> {
    let strat = spec_strategy(1..=4).prop_flat_map(|spec| {
        let n = spec.n_types();
        (Just(spec), 0..n)
    });
    check("survival map derivative", cases, strat, |(spec, i)| {
        let n = spec.n_types();
        let slope = |h: f64| {
            let mut d = vec![0.0; n];
            d[i] = h;
            spec.survival_map(i, &d) / h
        };
        let h = 1e-4;
        let est = 2.0 * slope(h) - slope(2.0 * h);
        if (est - 1.0).abs() > 1e-6 {
            return fail(format!("type {i}: derivative {est}"));
        }
        Ok(())
    })
}

/// Empirical first and second moments of `samples` draws within `z` standard errors.
pub fn sample_moments_agree(spec: &ProcessSpec, i: usize, samples: u64, seed: u64, z: f64) -> Result<(), String> {
    let md = MomentData::from_spec(spec);
    let n = spec.n_types();
    let mut rng = stream_rng(seed, i as u64);
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let mut s4 = vec![0.0; n];
    for _ in 0..samples {
        let x = spec.sample_offspring(i, &mut rng);
        for j in 0..n {
            let v = x[j] as f64;
            s1[j] += v;
            s2[j] += v * v;
            s4[j] += v * v * v * v;
        }
    }
    let r = samples as f64;
    for j in 0..n {
        let mean = md.mean[i][j];
        let second = md.second[i][j][j];
        let var = second - mean * mean;
        let emp = s1[j] / r;
        if var <= 0.0 {
            if emp != mean {
                return Err(format!("type {i} child {j}: degenerate mean {emp} vs {mean}"));
            }
            continue;
        }
        if (emp - mean).abs() > z * (var / r).sqrt() {
            return Err(format!("type {i} child {j}: mean {emp} vs {mean}"));
        }
        let emp2 = s2[j] / r;
        let se2 = ((s4[j] / r - emp2 * emp2).max(0.0) / r).sqrt();
        if (emp2 - second).abs() > z * se2.max(1e-12) {
            return Err(format!("type {i} child {j}: second moment {emp2} vs {second}"));
        }
    }
    Ok(())
}

pub fn model_sampling_moments(cases: u32) -> Result<(), String> {
    let strat = spec_strategy(1..=3).prop_flat_map(|spec| {
        let n = spec.n_types();
        (Just(spec), 0..n, any::<u64>())
    });
    check("sampling moments", cases, strat, |(spec, i, seed)| {
        sample_moments_agree(&spec, i, 20_000, seed, 4.0).map_err(TestCaseError::fail)
    })
}

// ---- pgf ----

pub fn pgf_telescoping(cases: u32) -> Result<(), String> {
    let strat = (spec_strategy(1..=4), 1usize..2000);
    check("telescoping", cases, strat, |(spec, n_max)| {
        let table = SurvivalTable::build(&spec, n_max);
        let mut acc = NeumaierSum::new();
        for n in 1..=n_max {
            acc += extinction_time_pmf(&table, 0, n).map_err(|e| TestCaseError::fail(e.to_string()))?;
        }
        let target = 1.0 - table.survival(0, n_max);
        if (acc.value() - target).abs() > 1e-10 {
            return fail(format!("sum {} vs {target}", acc.value()));
        }
        Ok(())
    })
}

pub fn pgf_semigroup(cases: u32) -> Result<(), String> {
    let strat = (spec_and_point(1..=4), 0usize..=50, 0usize..=50);
    check("semigroup", cases, strat, |((spec, s), a, b)| {
        let p = Point::from_values(s).unwrap();
        let whole = iterate_point(&spec, &p, a + b);
        let split = iterate_point(&spec, &iterate_point(&spec, &p, b), a);
        for i in 0..spec.n_types() {
            if (whole.value(i) - split.value(i)).abs() > 1e-12 {
                return fail(format!("coordinate {i}: {} vs {}", whole.value(i), split.value(i)));
            }
        }
        Ok(())
    })
}

pub fn pgf_conditional_monotone(cases: u32) -> Result<(), String> {
    let strat = spec_and_point(1..=4).prop_flat_map(|(spec, s)| {
        let n = spec.n_types();
        (Just(spec), Just(s), 2usize..200, 0.0f64..1.0, 0..n, 0.0f64..=1.0)
    });
    check("conditional monotone", cases, strat, |(spec, s, n, xm, j, t)| {
        let m = ((n as f64) * xm) as usize;
        let table = SurvivalTable::build(&spec, n);
        let mut up = s.clone();
        up[j] += t * (1.0 - up[j]);
        let val = |v: &[f64]| conditional_transform(&spec, &table, &Point::from_values(v.to_vec()).unwrap(), m, n);
        let a = val(&s).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = val(&up).map_err(|e| TestCaseError::fail(e.to_string()))?;
        if b + 1e-12 < a {
            return fail(format!("decreases along {j}: {a} -> {b}"));
        }
        let one = val(&vec![1.0; spec.n_types()]).map_err(|e| TestCaseError::fail(e.to_string()))?;
        if (one - 1.0).abs() > 1e-9 {
            return fail(format!("value at ones {one}"));
        }
        Ok(())
    })
}

pub fn pgf_uncensored(cases: u32) -> Result<(), String> {
    let strat = (spec_and_point(1..=4), 0usize..100);
    check("uncensored level", cases, strat, |((spec, s), m)| {
        let p = Point::from_values(s).unwrap();
        let a = censored_transform(&spec, &p, Censoring { level: 0, time: 0 }, m)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = iterate_point(&spec, &p, m).value(0);
        if (a - b).abs() > 1e-12 {
            return fail(format!("{a} vs {b}"));
        }
        Ok(())
    })
}

pub fn pgf_harmonic_geometric(cases: u32) -> Result<(), String> {
    let spec = zoo::geometric_single();
    check("harmonic closed form", cases, (2usize..=1000, 0.0f64..0.999), |(n, s)| {
        let v = harmonic_u(&spec, s, n).map_err(|e| TestCaseError::fail(e.to_string()))?.value;
        let nf = n as f64;
        let exact = nf * nf * s / ((nf + 1.0 - nf * s) * (nf + 1.0));
        let tol = 1e-10 * exact.abs().max(f64::MIN_POSITIVE);
        if (v - exact).abs() > tol && !(s == 0.0 && v == 0.0) {
            return fail(format!("n={n} s={s}: {v} vs {exact}"));
        }
        Ok(())
    })
}

pub fn pgf_w_residual(cases: u32) -> Result<(), String> {
    let strat = (spec_strategy(2..=4), 0.0f64..=0.999);
    check("W fixed point", cases, strat, |(spec, s)| {
        let w = w_transform(&spec, s).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let n = spec.n_types();
        let mut x = w.phi.clone();
        x.push(s);
        for i in 0..n - 1 {
            let r = (w.phi[i] - spec.pgf_eval(i, &x)).abs();
            if r > 1e-12 {
                return fail(format!("type {i}: residual {r}"));
            }
        }
        Ok(())
    })
}

// ---- montecarlo ----

pub fn mc_thread_invariance(cases: u32) -> Result<(), String> {
    let strat = (spec_strategy(1..=3), any::<u64>(), 1u64..9000, 1usize..8);
    check("thread invariance", cases, strat, |(spec, seed, replicates, threads)| {
        let base = SimConfig {
            master_seed: seed,
            replicates,
            max_steps: 20,
            snapshot_times: vec![5],
            population_cap: 1 << 20,
            ..SimConfig::default()
        };
        let run = |t: usize| {
            let cfg = SimConfig {
                threads: Some(t),
                ..base.clone()
            };
            let pmf = decomp_gw::montecarlo::estimate_pmf_T(&spec, &cfg).unwrap();
            let f = decomp_gw::montecarlo::estimate_functional(&spec, &cfg, |s| {
                s.snapshot(0).map(|z| z.iter().sum::<u64>() as f64).unwrap_or(0.0)
            })
            .unwrap();
            (pmf, f.estimate.to_bits(), f.std_error.to_bits())
        };
        let (a, b) = (run(1), run(threads));
        if a != b {
            return fail(format!("1 thread vs {threads} threads differ"));
        }
        Ok(())
    })
}

pub fn mc_conservation(cases: u32) -> Result<(), String> {
    let strat = (spec_strategy(1..=4), any::<u64>(), 0u64..1_000_000);
    check("conservation", cases, strat, |(spec, seed, stream)| {
        let cfg = SimConfig {
            master_seed: seed,
            max_steps: 60,
            population_cap: 1 << 16,
            ..SimConfig::default()
        };
        let (summary, trace) = simulate_trace(&spec, &cfg, stream);
        let n = spec.n_types();
        for (t, g) in trace.iter().enumerate() {
            for i in 0..n {
                for j in 0..i {
                    if g.contributions[i][j] != 0 {
                        return fail(format!("type {i} produced lower type {j}"));
                    }
                }
                if g.population[i] == 0 && g.contributions[i].iter().any(|&c| c != 0) {
                    return fail(format!("absent type {i} had children at t={t}"));
                }
            }
            let next: Vec<u64> = (0..n).map(|j| (0..n).map(|i| g.contributions[i][j]).sum()).collect();
            if let Some(h) = trace.get(t + 1) {
                if h.population != next {
                    return fail(format!("Z({}) is not the sum of offspring at t={t}", t + 1));
                }
            }
        }
        let w: u64 = trace.iter().map(|g| (0..n - 1).map(|i| g.contributions[i][n - 1]).sum::<u64>()).sum();
        if w != summary.w_n {
            return fail(format!("W_N {} vs recount {w}", summary.w_n));
        }
        if n == 2 && summary.w_n != summary.w_n_immigrant {
            return fail(format!("W_N {} vs immigrants {}", summary.w_n, summary.w_n_immigrant));
        }
        Ok(())
    })
}

// ---- constants ----

/// Moment data with the given half-variances and links; only those enter the constants.
pub fn moments_from(b: &[f64], links: &[f64]) -> MomentData {
    let n = b.len();
    let mut mean = vec![vec![0.0; n]; n];
    for i in 0..n {
        mean[i][i] = 1.0;
        if i + 1 < n {
            mean[i][i + 1] = links[i];
        }
    }
    MomentData {
        mean,
        half_variance: b.to_vec(),
        second: vec![vec![vec![0.0; n]; n]; n],
        moments_certified: true,
    }
}

fn moment_params() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..100.0, n),
            prop::collection::vec(0.01f64..100.0, n - 1),
        )
    })
}

pub fn constants_identity(cases: u32) -> Result<(), String> {
    check("c_1N identity", cases, moment_params(), |(b, links)| {
        let set = constant_set(&moments_from(&b, &links)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let chk = check_identity_c1n(&set).unwrap();
        if !chk.holds {
            return fail(format!("residual {}", chk.residual));
        }
        Ok(())
    })
}

pub fn constants_scaling(cases: u32) -> Result<(), String> {
    check("b_N scaling", cases, moment_params(), |(b, links)| {
        let n = b.len();
        let a = constant_set(&moments_from(&b, &links)).unwrap();
        let mut b2 = b.clone();
        b2[n - 1] *= 2.0;
        let c = constant_set(&moments_from(&b2, &links)).unwrap();
        for i in 0..n {
            let expected = -(2f64.powi(-((n - 1 - i) as i32))) * 2f64.ln();
            let got = c.c[i].ln() - a.c[i].ln();
            if (got - expected).abs() > 1e-12 {
                return fail(format!("type {i}: log ratio {got} vs {expected}"));
            }
        }
        Ok(())
    })
}

pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

pub const MODEL_SUITES: [Suite; 4] = [
    ("pgf monotone", model_pgf_monotone),
    ("survival map vs direct", model_survival_map_direct),
    ("survival map derivative", model_survival_derivative),
    ("sampling moments", model_sampling_moments),
];

pub const PGF_SUITES: [Suite; 6] = [
    ("telescoping", pgf_telescoping),
    ("semigroup", pgf_semigroup),
    ("conditional monotone", pgf_conditional_monotone),
    ("uncensored level", pgf_uncensored),
    ("harmonic closed form", pgf_harmonic_geometric),
    ("W fixed point", pgf_w_residual),
];

pub const MC_SUITES: [Suite; 2] = [("thread invariance", mc_thread_invariance), ("conservation", mc_conservation)];

pub const CONSTANT_SUITES: [Suite; 2] = [("c_1N identity", constants_identity), ("b_N scaling", constants_scaling)];
