//! Forward enumeration of the population law of a two-type table model.
//!
//! The law of `Z(t)` is carried on the box `[0, cap]^2`; mass leaving the box
//! is dropped and reported. A dropped state has more than `cap` particles,
//! so its chance of dying out within the horizon is at most `q^(cap+1)` with
//! `q` the larger one-ancestor extinction probability.

use decomp_gw::model::{LawKind, ProcessSpec};

pub struct Enumeration {
    /// `extinct[t] = P(Z(t) = 0)` for `t = 0..=horizon`.
    pub extinct: Vec<f64>,
    /// Total mass dropped from the box.
    pub dropped: f64,
}

type Grid = Vec<Vec<f64>>;

fn table_rows(spec: &ProcessSpec, i: usize) -> Vec<(Vec<usize>, f64)> {
    match spec.law(i).kind() {
        LawKind::Table(rows) => rows
            .iter()
            .map(|r| (r.counts.iter().map(|&c| c as usize).collect(), r.prob))
            .collect(),
        LawKind::Product(_) => panic!("enumeration needs table laws"),
    }
}

/// Law of `Z(t)` from one ancestor of type `start`.
pub fn enumerate(spec: &ProcessSpec, start: usize, horizon: usize, cap: usize) -> Enumeration {
    assert_eq!(spec.n_types(), 2);
    let w = cap + 1;
    let first = table_rows(spec, 0);
    let second = table_rows(spec, 1);

    // pow1[x] = law of the children of x type-1 parents, truncated
    let mut pow1: Vec<Grid> = vec![vec![vec![0.0; w]; w]];
    pow1[0][0][0] = 1.0;
    for x in 1..w {
        let prev = &pow1[x - 1];
        let mut g = vec![vec![0.0; w]; w];
        for a in 0..w {
            for b in 0..w {
                let p = prev[a][b];
                if p == 0.0 {
                    continue;
                }
                for (c, q) in &first {
                    let (na, nb) = (a + c[0], b + c[1]);
                    if na < w && nb < w {
                        g[na][nb] += p * q;
                    }
                }
            }
        }
        pow1.push(g);
    }
    let mut pow2: Vec<Vec<f64>> = vec![vec![0.0; w]];
    pow2[0][0] = 1.0;
    for y in 1..w {
        let prev = &pow2[y - 1];
        let mut g = vec![0.0; w];
        for b in 0..w {
            if prev[b] == 0.0 {
                continue;
            }
            for (c, q) in &second {
                if b + c[0] < w {
                    g[b + c[0]] += prev[b] * q;
                }
            }
        }
        pow2.push(g);
    }

    let mut dist = vec![vec![0.0; w]; w];
    if start == 0 {
        dist[1][0] = 1.0;
    } else {
        dist[0][1] = 1.0;
    }
    let mut extinct = vec![0.0];
    let mut dropped = 0.0;
    for _ in 0..horizon {
        let before: f64 = dist.iter().flatten().sum();
        let mut next = vec![vec![0.0; w]; w];
        for x in 0..w {
            // r[v]: type-2 children of the type-2 parents, mixed over states with x type-1 parents
            let mut r = vec![0.0; w];
            let mut any = false;
            for y in 0..w {
                let p = dist[x][y];
                if p == 0.0 {
                    continue;
                }
                any = true;
                for v in 0..w {
                    r[v] += p * pow2[y][v];
                }
            }
            if !any {
                continue;
            }
            let px = &pow1[x];
            for a in 0..w {
                for u in 0..w {
                    let p = px[a][u];
                    if p == 0.0 {
                        continue;
                    }
                    for v in 0..w - u {
                        next[a][u + v] += p * r[v];
                    }
                }
            }
        }
        let after: f64 = next.iter().flatten().sum();
        dropped += before - after;
        dist = next;
        extinct.push(dist[0][0]);
    }
    Enumeration { extinct, dropped }
}

/// `P(T = n)` for `n = 1..=horizon` with a bound on the truncation error of each entry.
pub fn enumerate_pmf(spec: &ProcessSpec, horizon: usize, cap: usize) -> (Vec<f64>, f64) {
    let e = enumerate(spec, 0, horizon, cap);
    let q = (0..2)
        .map(|i| {
            let f = enumerate(spec, i, horizon, cap);
            // computed value plus dropped mass bounds the true extinction probability
            f.extinct[horizon] + f.dropped
        })
        .fold(0.0, f64::max);
    let bound = 2.0 * e.dropped * q.powi(cap as i32 + 1);
    let pmf = (1..=horizon).map(|n| e.extinct[n] - e.extinct[n - 1]).collect();
    (pmf, bound)
}
