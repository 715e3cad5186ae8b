use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Sampling, SimConfig, StopRule};
use crate::model::ProcessSpec;

/// Generator for replicate `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "step")]
pub enum Outcome {
    /// `Z(T) = 0` for the first time at `T`.
    Extinct(usize),
    /// Stopped at the given generation with particles still alive.
    Censored(usize),
    /// Population exceeded the cap at the given generation.
    CapExceeded(usize),
}

impl Outcome {
    pub fn extinction_time(&self) -> Option<usize> {
        match *self {
            Outcome::Extinct(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrajectorySummary {
    pub outcome: Outcome,
    /// `Z(m)` for each configured snapshot time, `None` past the stopping time.
    pub snapshots: Vec<Option<Vec<u64>>>,
    /// Type-N children of lower-type parents.
    pub w_n: u64,
    /// Growth of the type-N population not explained by type-N parents.
    pub w_n_immigrant: u64,
    /// First generation with no particles of types `1..N-1`.
    pub early_extinction_time: Option<usize>,
}

impl TrajectorySummary {
    pub fn snapshot(&self, index: usize) -> Option<&[u64]> {
        self.snapshots.get(index).and_then(|s| s.as_deref())
    }

    /// True when every lower-type particle has died, so `w_n` is final.
    pub fn w_complete(&self) -> bool {
        self.early_extinction_time.is_some()
    }
}

/// Population at one generation and the offspring it produced, by parent type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRecord {
    pub population: Vec<u64>,
    /// `contributions[i][j]`: type-j children of type-i parents.
    pub contributions: Vec<Vec<u64>>,
}

pub fn simulate_once(spec: &ProcessSpec, config: &SimConfig, stream: u64) -> TrajectorySummary {
    run(spec, config, stream, None)
}

/// Same trajectory as [`simulate_once`] with every generation recorded.
pub fn simulate_trace(spec: &ProcessSpec, config: &SimConfig, stream: u64) -> (TrajectorySummary, Vec<GenerationRecord>) {
    let mut trace = Vec::new();
    let s = run(spec, config, stream, Some(&mut trace));
    (s, trace)
}

fn run(
    spec: &ProcessSpec,
    config: &SimConfig,
    stream: u64,
    mut trace: Option<&mut Vec<GenerationRecord>>,
) -> TrajectorySummary {
    let n = spec.n_types();
    let last = n - 1;
    let mut rng = stream_rng(config.master_seed, stream);
    let mut z = vec![0u64; n];
    z[0] = 1;
    let mut snapshots: Vec<Option<Vec<u64>>> = vec![None; config.snapshot_times.len()];
    let mut w_n = 0u64;
    let mut w_n_immigrant = 0u64;
    let mut early = None;
    let mut contrib = vec![vec![0u64; n]; n];
    let mut t = 0usize;

    let outcome = loop {
        for (slot, &m) in snapshots.iter_mut().zip(&config.snapshot_times) {
            if m == t {
                *slot = Some(z.clone());
            }
        }
        if early.is_none() && z[..last].iter().all(|&c| c == 0) {
            early = Some(t);
        }
        if z.iter().all(|&c| c == 0) {
            break Outcome::Extinct(t);
        }
        if t >= config.max_steps || (config.stop == StopRule::LowerTypesExtinct && early.is_some()) {
            break Outcome::Censored(t);
        }

        for row in contrib.iter_mut() {
            row.iter_mut().for_each(|c| *c = 0);
        }
        for i in 0..n {
            let count = z[i];
            if count == 0 {
                continue;
            }
            let law = spec.law(i);
            match config.sampling {
                Sampling::Batched => law.sample_batch_into(count, &mut contrib[i], &mut rng),
                Sampling::PerParticle => {
                    for _ in 0..count {
                        law.sample_into(&mut contrib[i], &mut rng);
                    }
                }
            }
        }
        let mut next = vec![0u64; n];
        for row in &contrib {
            for (x, &c) in next.iter_mut().zip(row) {
                *x += c;
            }
        }
        w_n += contrib[..last].iter().map(|r| r[last]).sum::<u64>();
        w_n_immigrant += next[last] - contrib[last][last];
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(GenerationRecord {
                population: z.clone(),
                contributions: contrib.clone(),
            });
        }
        t += 1;
        z = next;
        if z.iter().sum::<u64>() > config.population_cap {
            break Outcome::CapExceeded(t);
        }
    };

    if let Outcome::Extinct(_) = outcome {
        for (slot, &m) in snapshots.iter_mut().zip(&config.snapshot_times) {
            if m > t {
                *slot = Some(vec![0; n]);
            }
        }
    }
    TrajectorySummary {
        outcome,
        snapshots,
        w_n,
        w_n_immigrant,
        early_extinction_time: early,
    }
}
