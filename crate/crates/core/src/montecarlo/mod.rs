//! Forward simulation with rejection conditioning.
//!
//! Populations are stored as counts per type. Replicate `r` draws from its own
//! ChaCha8 stream `r` under the master seed, so any subset of replicates can be
//! replayed alone. Replicates are grouped into fixed chunks of
//! [`CHUNK`]; chunks run in parallel and are merged in chunk order, making every
//! aggregate bitwise independent of the number of worker threads.

mod simulate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use simulate::{simulate_once, simulate_trace, stream_rng, GenerationRecord, Outcome, TrajectorySummary};

use crate::model::ProcessSpec;

pub const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Total offspring of all same-type parents drawn at once.
    #[default]
    Batched,
    PerParticle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    #[default]
    Extinction,
    /// Stop as soon as types `1..N-1` are extinct; enough for `W_N`.
    LowerTypesExtinct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub master_seed: u64,
    pub replicates: u64,
    pub max_steps: usize,
    pub snapshot_times: Vec<usize>,
    pub population_cap: u64,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub stop: StopRule,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            replicates: 10_000,
            max_steps: 1000,
            snapshot_times: Vec::new(),
            population_cap: 1 << 40,
            sampling: Sampling::Batched,
            stop: StopRule::Extinction,
            threads: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.replicates < 1 {
            return Err(McError::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.max_steps < 1 {
            return Err(McError::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.population_cap < 1 {
            return Err(McError::InvalidConfig("population_cap must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(McError::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("acceptance too low: {accepted} of {replicates} replicates (rate {rate:e})")]
    AcceptanceTooLow { accepted: u64, replicates: u64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub std_error: f64,
    pub replicates: u64,
    /// Replicates that entered the average.
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub cap_exceeded: u64,
}

impl EstimateWithCI {
    /// `|estimate - target|` in standard errors; infinite for a zero-variance miss.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.estimate - target).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error > 0.0 {
            d / self.std_error
        } else {
            f64::INFINITY
        }
    }
}

/// Streaming mean and variance; merges are exact in the chunk order used.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / n;
        self.m2 += o.m2 + d * d * self.count as f64 * o.count as f64 / n;
        self.count += o.count;
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let var = (self.m2 / (self.count - 1) as f64).max(0.0);
        (var / self.count as f64).sqrt()
    }
}

/// Runs every replicate, folding chunk by chunk; returns chunk results in order.
fn map_chunks<A, I, V>(spec: &ProcessSpec, config: &SimConfig, init: I, visit: V) -> Vec<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, TrajectorySummary) + Sync,
{
    let chunks = config.replicates.div_ceil(CHUNK);
    let work = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                let end = ((c + 1) * CHUNK).min(config.replicates);
                for stream in c * CHUNK..end {
                    visit(&mut acc, simulate_once(spec, config, stream));
                }
                acc
            })
            .collect::<Vec<A>>()
    };
    match config.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .expect("thread pool")
            .install(work),
        None => work(),
    }
}

/// Empirical law of the extinction time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfEstimate {
    /// `counts[n]`: replicates with `T = n`.
    pub counts: Vec<u64>,
    pub censored: u64,
    pub cap_exceeded: u64,
    pub replicates: u64,
}

impl PmfEstimate {
    pub fn estimate(&self, n: usize) -> EstimateWithCI {
        let r = self.replicates as f64;
        let hits = self.counts.get(n).copied().unwrap_or(0);
        let p = hits as f64 / r;
        EstimateWithCI {
            estimate: p,
            std_error: (p * (1.0 - p) / r).sqrt(),
            replicates: self.replicates,
            accepted: self.replicates,
            acceptance_rate: 1.0,
            cap_exceeded: self.cap_exceeded,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.replicates as f64
    }
}

#[allow(non_snake_case)]
pub fn estimate_pmf_T(spec: &ProcessSpec, config: &SimConfig) -> Result<PmfEstimate, McError> {
    config.validate()?;
    let len = config.max_steps + 1;
    let parts = map_chunks(
        spec,
        config,
        || (vec![0u64; len], 0u64, 0u64),
        |acc, s| match s.outcome {
            Outcome::Extinct(t) => acc.0[t] += 1,
            Outcome::Censored(_) => acc.1 += 1,
            Outcome::CapExceeded(_) => acc.2 += 1,
        },
    );
    let mut out = PmfEstimate {
        counts: vec![0; len],
        censored: 0,
        cap_exceeded: 0,
        replicates: config.replicates,
    };
    for (c, cens, cap) in parts {
        for (a, b) in out.counts.iter_mut().zip(c) {
            *a += b;
        }
        out.censored += cens;
        out.cap_exceeded += cap;
    }
    Ok(out)
}

/// Mean of `functional` over all replicates.
pub fn estimate_functional<F>(spec: &ProcessSpec, config: &SimConfig, functional: F) -> Result<EstimateWithCI, McError>
where
    F: Fn(&TrajectorySummary) -> f64 + Sync,
{
    config.validate()?;
    let (m, cap) = fold_moments(spec, config, |_| true, &functional);
    Ok(EstimateWithCI {
        estimate: m.mean,
        std_error: m.std_error(),
        replicates: config.replicates,
        accepted: m.count,
        acceptance_rate: 1.0,
        cap_exceeded: cap,
    })
}

/// Mean of `functional` over replicates with `T = n` exactly.
///
/// Trajectories are cut at generation `n`; only extinctions at `n` are kept.
pub fn conditional_estimate<F>(
    spec: &ProcessSpec,
    config: &SimConfig,
    n: usize,
    functional: F,
) -> Result<EstimateWithCI, McError>
where
    F: Fn(&TrajectorySummary) -> f64 + Sync,
{
    config.validate()?;
    if n == 0 {
        return Err(McError::InvalidConfig("T = 0 is impossible from one ancestor".into()));
    }
    let cut = SimConfig {
        max_steps: n,
        stop: StopRule::Extinction,
        ..config.clone()
    };
    let (m, cap) = fold_moments(spec, &cut, |s| s.outcome == Outcome::Extinct(n), &functional);
    let rate = m.count as f64 / config.replicates as f64;
    if m.count == 0 {
        return Err(McError::AcceptanceTooLow {
            accepted: 0,
            replicates: config.replicates,
            rate,
        });
    }
    Ok(EstimateWithCI {
        estimate: m.mean,
        std_error: m.std_error(),
        replicates: config.replicates,
        accepted: m.count,
        acceptance_rate: rate,
        cap_exceeded: cap,
    })
}

fn fold_moments<A, F>(spec: &ProcessSpec, config: &SimConfig, accept: A, functional: &F) -> (Moments, u64)
where
    A: Fn(&TrajectorySummary) -> bool + Sync,
    F: Fn(&TrajectorySummary) -> f64 + Sync,
{
    let parts = map_chunks(
        spec,
        config,
        || (Moments::default(), 0u64),
        |acc, s| {
            if matches!(s.outcome, Outcome::CapExceeded(_)) {
                acc.1 += 1;
            }
            if accept(&s) {
                acc.0.push(functional(&s));
            }
        },
    );
    let mut total = Moments::default();
    let mut cap = 0;
    for (m, c) in &parts {
        total.merge(m);
        cap += c;
    }
    (total, cap)
}
