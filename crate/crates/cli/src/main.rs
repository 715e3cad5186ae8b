//! `dgw`: command-line front end for the decomposable Galton-Watson laboratory.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use decomp_gw::constants::{check_identity_c1n, constant_set};
use decomp_gw::experiments::{
    self as ex, num, pilot_bands, BandFile, BandRule, ConvergenceReport, Verdict,
};
use decomp_gw::model::{validate_hypothesis_a, ModelConfig, ProcessSpec};
use decomp_gw::montecarlo::{conditional_estimate, estimate_pmf_T, SimConfig};
use decomp_gw::pgf::{
    censored_conditional_transform, conditional_transform, extinction_time_pmf, Censoring, Point, Precision,
    SurvivalTable,
};
use decomp_gw::zoo;
use serde_json::json;

use output::{Format, Sink, Table};

#[derive(Debug, Parser)]
#[command(name = "dgw", version, about = "Strongly critical decomposable Galton-Watson processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Artifact path; overrides --out-dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Artifact directory [env: DGW_OUT_DIR, default: .]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write one two-column file per curve.
    #[arg(long, global = true)]
    plotdata: bool,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Zoo model name (zoo1, zoo2, zoo3, micro) or path to a TOML model file.
    #[arg(long, default_value = "zoo2")]
    model: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check Hypothesis A and print the moment table.
    Validate(ModelArg),
    /// Print the asymptotic constants.
    Constants(ModelArg),
    /// Survival probabilities and the extinction-time law for n = 1..N.
    Extinction {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
        precision: PrecisionArg,
    },
    /// E[prod s_j^{Z_j(m)} (I) | T = n].
    Conditional {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Comma-separated point, one value per type.
        #[arg(long, value_delimiter = ',', required = true)]
        s: Vec<f64>,
        /// Indicator that types 1..=level are extinct at --censor-time.
        #[arg(long, default_value_t = 0)]
        censor_level: usize,
        #[arg(long, default_value_t = 0)]
        censor_time: usize,
    },
    /// Monte Carlo estimates against the exact engine.
    Mc {
        #[command(flatten)]
        model: ModelArg,
        /// Largest extinction time (pmf mode) or the conditioning time (with --m).
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, value_parser = parse_replicates, default_value_t = 100_000)]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Estimate E[prod s_j^{Z_j(m)} | T = n] instead of the pmf.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        s: Vec<f64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Convergence report for a theorem.
    Theorem {
        id: TheoremId,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Convergence report for a lemma.
    Lemma {
        id: LemmaId,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Run the pilots and write the frozen band file.
    Pilot {
        #[arg(long, default_value = "config/bands.toml")]
        write: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    DoubleDouble,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::DoubleDouble => Precision::DoubleDouble,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TheoremId {
    Finalstage,
    Death,
    Deathfin,
    Survival,
    Local,
    NoPrevious,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LemmaId {
    Laplace,
    Harmonic,
    HarmonicDiff,
    WMean,
    WCensored,
    ZCensored,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    s: Vec<f64>,
    /// Common value of s_1..s_{N-1}.
    #[arg(long, default_value_t = 1.0)]
    s_lower: f64,
    #[arg(long, value_delimiter = ',')]
    exponent: Vec<f64>,
    /// Band file; rows with a matching band get a verdict.
    #[arg(long)]
    bands: Option<PathBuf>,
}

fn parse_replicates(s: &str) -> Result<u64, String> {
    let v: u64 = s
        .parse()
        .map_err(|e| format!("replicates must be a positive integer ({e}); example: --replicates 100000"))?;
    if v < 1 {
        return Err("replicates must be at least 1; example: --replicates 100000".into());
    }
    Ok(v)
}

struct Resolved {
    name: String,
    spec: ProcessSpec,
    toml: String,
}

fn resolve_model(arg: &str) -> Result<Resolved> {
    let cfg = if Path::new(arg).is_file() {
        ModelConfig::from_path(Path::new(arg)).map_err(|e| {
            anyhow!("model: {e}\nexample stanza:\n{}", example_stanza())
        })?
    } else if let Some(spec) = zoo::by_name(arg) {
        ModelConfig {
            name: arg.to_string(),
            spec,
        }
    } else {
        bail!(
            "model: {arg:?} is neither a file nor a zoo model (zoo1, zoo2, zoo3, micro)\nexample stanza:\n{}",
            example_stanza()
        );
    };
    Ok(Resolved {
        toml: cfg.render(),
        name: cfg.name,
        spec: cfg.spec,
    })
}

fn example_stanza() -> String {
    ModelConfig {
        name: "zoo2".into(),
        spec: zoo::zoo2(),
    }
    .render()
}

fn header(command: &str, params: serde_json::Value, model: &Resolved) -> Vec<String> {
    vec![
        format!("dgw {}", env!("CARGO_PKG_VERSION")),
        format!("command = {command:?}"),
        format!("params = {params}"),
        "model:".into(),
        model.toml.trim_end().to_string(),
    ]
}

fn or_default<T: Clone>(v: &[T], d: &[T]) -> Vec<T> {
    if v.is_empty() {
        d.to_vec()
    } else {
        v.to_vec()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let sink = Sink {
        out: cli.out.clone(),
        out_dir: cli.out_dir.clone(),
        format: cli.format,
        plotdata: cli.plotdata,
    };
    match run(cli.command, &sink) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, sink: &Sink) -> Result<ExitCode> {
    match command {
        Command::Validate(m) => validate(&m.model),
        Command::Constants(m) => constants(&m.model),
        Command::Extinction { model, n, precision } => extinction(&model.model, n, precision.into(), sink),
        Command::Conditional {
            model,
            n,
            m,
            s,
            censor_level,
            censor_time,
        } => conditional(&model.model, n, m, &s, censor_level, censor_time, sink),
        Command::Mc {
            model,
            n,
            replicates,
            seed,
            m,
            s,
            threads,
        } => mc(&model.model, n, replicates, seed, m, &s, threads, sink),
        Command::Theorem { id, grid } => {
            let model = resolve_model(&grid.model.model)?;
            let ctx = ex::Context::new(&model.spec, &model.name)?;
            let (rep, params) = theorem(id, &ctx, &grid)?;
            finish(rep, params, &model, &grid, sink, &format!("theorem {}", id_name(id)))
        }
        Command::Lemma { id, grid } => {
            let model = resolve_model(&grid.model.model)?;
            let ctx = ex::Context::new(&model.spec, &model.name)?;
            let (rep, params) = lemma(id, &ctx, &grid)?;
            finish(rep, params, &model, &grid, sink, &format!("lemma {}", id_name(id)))
        }
        Command::Pilot { write } => {
            let file = pilot_bands(BandRule::default())?;
            let body = format!(
                "# Tolerance bands frozen from pilot runs at half the target n.\n# Regenerate with `dgw pilot`.\n\n{}",
                file.render()
            );
            if let Some(dir) = write.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&write, body).with_context(|| format!("writing {}", write.display()))?;
            for b in &file.bands {
                println!("{} pilot_n={} ratio={} half_width={}", b.key, b.pilot_n, num(b.pilot_ratio), num(b.half_width));
            }
            eprintln!("wrote {}", write.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn id_name<T: ValueEnum>(id: T) -> String {
    id.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn finish(
    mut rep: ConvergenceReport,
    params: serde_json::Value,
    model: &Resolved,
    grid: &GridArgs,
    sink: &Sink,
    command: &str,
) -> Result<ExitCode> {
    let mut params = params;
    if let Some(b) = &grid.bands {
        let file = BandFile::load(b)?;
        rep.apply_bands(&file);
        params["bands"] = json!(b.display().to_string());
    }
    let path = sink.write_report(&rep, &header(command, params, model))?;
    eprintln!("wrote {}", path.display());
    println!("{}", serde_json::to_string_pretty(&rep.verdict_json())?);
    Ok(match rep.verdict() {
        Verdict::Fail => ExitCode::from(1),
        Verdict::Pass | Verdict::Unbanded => ExitCode::SUCCESS,
    })
}

fn theorem(id: TheoremId, ctx: &ex::Context, g: &GridArgs) -> Result<(ConvergenceReport, serde_json::Value)> {
    Ok(match id {
        TheoremId::Survival | TheoremId::Local => {
            let n = or_default(&g.n, &[100, 316, 1000, 3162, 10_000]);
            let rep = match id {
                TheoremId::Survival => ex::verify_survival(ctx, &n)?,
                _ => ex::verify_local(ctx, &n)?,
            };
            (rep, json!({ "n": n }))
        }
        TheoremId::Finalstage => {
            let n = or_default(&g.n, &[20_000]);
            let x = or_default(&g.x, &ex::FINALSTAGE_XS);
            let l = or_default(&g.lambda, &[1.0]);
            let rep = ex::verify_finalstage(ctx, &n, &x, &l, g.s_lower)?;
            (rep, json!({ "n": n, "x": x, "lambda": l, "s_lower": g.s_lower }))
        }
        TheoremId::Death => {
            let n = or_default(&g.n, &[20_000]);
            let k = or_default(&g.k, &[ex::DEATH_K]);
            let l = or_default(&g.lambda, &ex::DEATH_LAMBDAS);
            let cases: Vec<(usize, usize)> = n.iter().flat_map(|&a| k.iter().map(move |&b| (a, b))).collect();
            let rep = ex::verify_death(ctx, &cases, &l, g.s_lower)?;
            (rep, json!({ "n": n, "k": k, "lambda": l, "s_lower": g.s_lower }))
        }
        TheoremId::Deathfin => {
            let n = or_default(&g.n, &[20_000]);
            let k = or_default(&g.k, &ex::DEATHFIN_KS);
            let s = or_default(&g.s, &ex::DEATHFIN_S);
            let rep = ex::verify_deathfin(ctx, &n, &k, &s)?;
            (rep, json!({ "n": n, "k": k, "s": s }))
        }
        TheoremId::NoPrevious => {
            let n = or_default(&g.n, &[100, 1000, 10_000]);
            let e = or_default(&g.exponent, &[0.6, 0.75]);
            let rep = ex::verify_no_previous(ctx, &n, &e)?;
            (rep, json!({ "n": n, "exponent": e }))
        }
    })
}

fn lemma(id: LemmaId, ctx: &ex::Context, g: &GridArgs) -> Result<(ConvergenceReport, serde_json::Value)> {
    Ok(match id {
        LemmaId::Laplace => {
            let n = or_default(&g.n, &[100_000])[0];
            let p = ex::laplace_points();
            (ex::verify_laplace(ctx, n, &p)?, json!({ "n": n, "theta_n": p }))
        }
        LemmaId::Harmonic => {
            let n = or_default(&g.n, &[10_000])[0];
            let s = or_default(&g.s, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
            (ex::verify_harmonic(ctx, n, &s)?, json!({ "n": n, "s": s }))
        }
        LemmaId::HarmonicDiff => {
            let n = or_default(&g.n, &[10_000]);
            let k = or_default(&g.k, &[100]);
            let l = or_default(&g.lambda, &[1.0]);
            let cases: Vec<(usize, usize)> = n.iter().flat_map(|&a| k.iter().map(move |&b| (a, b))).collect();
            (ex::verify_harmonic_diff(ctx, &cases, &l)?, json!({ "n": n, "k": k, "lambda": l }))
        }
        LemmaId::WMean | LemmaId::WCensored => {
            let n = or_default(&g.n, &[1000, 10_000, 100_000]);
            let l = or_default(&g.lambda, &[0.5, 1.0, 2.0]);
            let censored = matches!(id, LemmaId::WCensored);
            (ex::verify_w_mean(ctx, &n, &l, censored)?, json!({ "n": n, "lambda": l }))
        }
        LemmaId::ZCensored => {
            let n = or_default(&g.n, &[1000, 10_000, 40_000]);
            let e = or_default(&g.exponent, &[0.25, 1.0 / 3.0, 0.5]);
            let l = or_default(&g.lambda, &[1.0]);
            (ex::verify_z_censored(ctx, &n, &e, &l)?, json!({ "n": n, "exponent": e, "lambda": l }))
        }
    })
}

fn validate(model: &str) -> Result<ExitCode> {
    let m = resolve_model(model)?;
    let md = validate_hypothesis_a(&m.spec).map_err(|e| anyhow!("model {}: {e}", m.name))?;
    let n = md.n_types();
    println!("model {} ({n} types): hypothesis A holds", m.name);
    let mut cols = vec!["type".to_string()];
    cols.extend((1..=n).map(|j| format!("m_{j}")));
    cols.push("b".into());
    println!("{}", cols.join(","));
    for i in 0..n {
        let mut row = vec![(i + 1).to_string()];
        row.extend(md.mean[i].iter().map(|&v| num(v)));
        row.push(num(md.half_variance[i]));
        println!("{}", row.join(","));
    }
    Ok(ExitCode::SUCCESS)
}

fn constants(model: &str) -> Result<ExitCode> {
    let m = resolve_model(model)?;
    let md = validate_hypothesis_a(&m.spec)?;
    let c = constant_set(&md)?;
    println!("type,gamma,c,g,D");
    for i in 0..c.n_types {
        let d = c.d.get(i).map(|&v| num(v)).unwrap_or_default();
        println!("{},{},{},{},{}", i + 1, num(c.gamma[i]), num(c.c[i]), num(c.g[i]), d);
    }
    if let Some(chk) = check_identity_c1n(&c) {
        println!("identity_c1n,{},{}", chk.holds, num(chk.residual));
    }
    Ok(ExitCode::SUCCESS)
}

fn extinction(model: &str, n: usize, precision: Precision, sink: &Sink) -> Result<ExitCode> {
    if n == 0 {
        bail!("n must be at least 1; example: --n 1000");
    }
    let m = resolve_model(model)?;
    let table = SurvivalTable::build_with(&m.spec, n, precision);
    let nt = m.spec.n_types();
    let mut cols = vec!["n".to_string()];
    for i in 1..=nt {
        cols.push(format!("survival_{i}"));
        cols.push(format!("pmf_{i}"));
    }
    let mut t = Table {
        columns: cols,
        rows: Vec::new(),
    };
    let last = table.truncated_at().map(|k| k.min(n)).unwrap_or(n);
    for k in 1..=last {
        let mut row = vec![k.to_string()];
        for i in 0..nt {
            row.push(num(table.survival(i, k)));
            row.push(num(extinction_time_pmf(&table, i, k)?));
        }
        t.rows.push(row);
    }
    let params = json!({ "n": n, "precision": format!("{precision:?}") });
    let path = sink.write_table("extinction", &m.name, &header("extinction", params, &m), &t)?;
    eprintln!("wrote {}", path.display());
    if last < n {
        eprintln!("warning: precision loss; table truncated at n = {last}");
    }
    Ok(ExitCode::SUCCESS)
}

fn point(spec: &ProcessSpec, s: &[f64]) -> Result<Point> {
    if s.len() != spec.n_types() {
        bail!("s: expected {} comma-separated values, got {}", spec.n_types(), s.len());
    }
    Ok(Point::from_values(s.to_vec())?)
}

fn conditional(
    model: &str,
    n: usize,
    m: usize,
    s: &[f64],
    level: usize,
    time: usize,
    sink: &Sink,
) -> Result<ExitCode> {
    let md = resolve_model(model)?;
    let p = point(&md.spec, s)?;
    let table = SurvivalTable::build(&md.spec, n);
    let v = if level == 0 {
        conditional_transform(&md.spec, &table, &p, m, n)?
    } else {
        censored_conditional_transform(&md.spec, &table, &p, Censoring { level, time }, m, n)?
    };
    let mut t = Table::new(&["n", "m", "censor_level", "censor_time", "value"]);
    t.rows.push(vec![n.to_string(), m.to_string(), level.to_string(), time.to_string(), num(v)]);
    let params = json!({ "n": n, "m": m, "s": s, "censor_level": level, "censor_time": time });
    let path = sink.write_table("conditional", &md.name, &header("conditional", params, &md), &t)?;
    eprintln!("wrote {}", path.display());
    println!("{}", num(v));
    Ok(ExitCode::SUCCESS)
}

const MC_Z: f64 = 4.0;

#[allow(clippy::too_many_arguments)]
fn mc(
    model: &str,
    n: usize,
    replicates: u64,
    seed: u64,
    m: Option<usize>,
    s: &[f64],
    threads: Option<usize>,
    sink: &Sink,
) -> Result<ExitCode> {
    let md = resolve_model(model)?;
    if n == 0 {
        bail!("n must be at least 1; example: --n 30");
    }
    let table = SurvivalTable::build(&md.spec, n);
    let mut config = SimConfig {
        master_seed: seed,
        replicates,
        max_steps: n,
        threads,
        ..SimConfig::default()
    };
    let mut t = Table::new(&["n", "estimate", "std_error", "exact", "z", "accepted"]);
    let mut worst: f64 = 0.0;
    let experiment;
    let params;
    if let Some(m) = m {
        let p = point(&md.spec, s)?;
        config.snapshot_times = vec![m];
        let exact = conditional_transform(&md.spec, &table, &p, m, n)?;
        let vals = p.values().to_vec();
        let est = conditional_estimate(&md.spec, &config, n, |tr| {
            let z = tr.snapshot(0).expect("snapshot before extinction");
            z.iter().zip(&vals).map(|(&c, &v)| v.powf(c as f64)).product()
        })?;
        worst = est.z_score(exact);
        t.rows.push(vec![
            n.to_string(),
            num(est.estimate),
            num(est.std_error),
            num(exact),
            num(worst),
            est.accepted.to_string(),
        ]);
        experiment = "mc-conditional";
        params = json!({ "n": n, "m": m, "s": s, "replicates": replicates, "seed": seed });
    } else {
        let est = estimate_pmf_T(&md.spec, &config)?;
        for k in 1..=n {
            let e = est.estimate(k);
            let exact = extinction_time_pmf(&table, 0, k)?;
            let z = e.z_score(exact);
            worst = worst.max(z);
            t.rows.push(vec![
                k.to_string(),
                num(e.estimate),
                num(e.std_error),
                num(exact),
                num(z),
                est.counts[k].to_string(),
            ]);
        }
        experiment = "mc-pmf";
        params = json!({ "n": n, "replicates": replicates, "seed": seed });
    }
    let path = sink.write_table(experiment, &md.name, &header(&format!("mc {experiment}"), params, &md), &t)?;
    eprintln!("wrote {}", path.display());
    let pass = worst <= MC_Z;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "experiment": experiment,
            "model": md.name,
            "verdict": if pass { "PASS" } else { "FAIL" },
            "max_z": worst,
            "threshold": MC_Z,
        }))?
    );
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
