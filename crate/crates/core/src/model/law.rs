use rand::Rng;
use serde::{Deserialize, Serialize};

use super::family::{monomial_gap, Family};
use super::ModelError;
use crate::real::Real;

/// Tolerance on the total mass of a finite offspring table.
pub const TABLE_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Offspring counts for child types `parent..N`.
    pub counts: Vec<u32>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LawKind {
    /// Independent marginals, one per child type `parent..N`.
    Product(Vec<Family>),
    /// Joint law as an explicit list of count vectors over child types `parent..N`.
    Table(Vec<TableRow>),
}

/// Offspring law of one particle type. Children of lower types cannot be
/// expressed: both representations start at the parent's own type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    parent: usize,
    kind: LawKind,
}

impl OffspringLaw {
    /// `parent` is the zero-based type index.
    pub fn product(parent: usize, marginals: Vec<Family>) -> Self {
        Self {
            parent,
            kind: LawKind::Product(marginals),
        }
    }

    pub fn table(parent: usize, rows: Vec<TableRow>) -> Self {
        Self {
            parent,
            kind: LawKind::Table(rows),
        }
    }

    pub fn parent(&self) -> usize {
        self.parent
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    fn check(&self, n_types: usize) -> Result<(), ModelError> {
        let label = self.parent + 1;
        let width = n_types - self.parent;
        match &self.kind {
            LawKind::Product(marginals) => {
                if marginals.len() != width {
                    return Err(ModelError::Shape {
                        type_label: label,
                        detail: format!("expected {width} marginals (types {label}..={n_types}), got {}", marginals.len()),
                    });
                }
                for (offset, fam) in marginals.iter().enumerate() {
                    fam.check().map_err(|detail| ModelError::Parameter {
                        type_label: label,
                        child_label: label + offset,
                        detail,
                    })?;
                }
            }
            LawKind::Table(rows) => {
                if rows.is_empty() {
                    return Err(ModelError::Shape {
                        type_label: label,
                        detail: "offspring table has no rows".into(),
                    });
                }
                let mut mass = 0.0;
                for row in rows {
                    if row.counts.len() != width {
                        return Err(ModelError::Shape {
                            type_label: label,
                            detail: format!("count vector must cover types {label}..={n_types} ({width} entries), got {}", row.counts.len()),
                        });
                    }
                    if !(row.prob.is_finite() && row.prob >= 0.0) {
                        return Err(ModelError::Shape {
                            type_label: label,
                            detail: format!("row probability {} is not a probability", row.prob),
                        });
                    }
                    mass += row.prob;
                }
                if (mass - 1.0).abs() > TABLE_MASS_TOL {
                    return Err(ModelError::Mass { type_label: label, mass });
                }
            }
        }
        Ok(())
    }

    /// Mean number of children of the given (absolute) child type.
    pub fn mean(&self, child: usize) -> f64 {
        if child < self.parent {
            return 0.0;
        }
        let j = child - self.parent;
        match &self.kind {
            LawKind::Product(m) => m[j].mean(),
            LawKind::Table(rows) => rows.iter().map(|r| r.prob * r.counts[j] as f64).sum(),
        }
    }

    /// E[eta_j eta_k] for absolute child types `j, k`.
    pub fn cross_moment(&self, j: usize, k: usize) -> f64 {
        if j < self.parent || k < self.parent {
            return 0.0;
        }
        let (a, b) = (j - self.parent, k - self.parent);
        match &self.kind {
            LawKind::Product(m) => {
                if a == b {
                    m[a].second_moment()
                } else {
                    m[a].mean() * m[b].mean()
                }
            }
            LawKind::Table(rows) => rows
                .iter()
                .map(|r| r.prob * r.counts[a] as f64 * r.counts[b] as f64)
                .sum(),
        }
    }

    /// Offspring pgf `f(s) = E[prod_j s_j^{eta_j}]`; `s` is indexed by absolute type.
    pub fn pgf(&self, s: &[f64]) -> f64 {
        let s = &s[self.parent..];
        match &self.kind {
            LawKind::Product(m) => m.iter().zip(s).map(|(f, &x)| f.pgf(x)).product(),
            LawKind::Table(rows) => rows
                .iter()
                .map(|r| {
                    r.prob
                        * r.counts
                            .iter()
                            .zip(s)
                            .map(|(&c, &x)| x.powi(c as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    /// Partial derivative of the pgf in the parent's own coordinate.
    pub fn pgf_own_derivative(&self, s: &[f64]) -> f64 {
        let s = &s[self.parent..];
        match &self.kind {
            LawKind::Product(m) => {
                let rest: f64 = m[1..].iter().zip(&s[1..]).map(|(f, &x)| f.pgf(x)).product();
                m[0].pgf_derivative(s[0]) * rest
            }
            LawKind::Table(rows) => rows
                .iter()
                .filter(|r| r.counts[0] > 0)
                .map(|r| {
                    let own = r.counts[0] as f64 * s[0].powi(r.counts[0] as i32 - 1);
                    let rest: f64 = r.counts[1..]
                        .iter()
                        .zip(&s[1..])
                        .map(|(&c, &x)| x.powi(c as i32))
                        .product();
                    r.prob * own * rest
                })
                .sum(),
        }
    }

    /// `1 - f(1 - d)` evaluated from complements `d` (absolute type index).
    pub fn survival<R: Real>(&self, d: &[R]) -> R {
        let d = &d[self.parent..];
        match &self.kind {
            LawKind::Product(m) => {
                // 1 - prod(1 - u_j) = -expm1(sum log1p(-u_j))
                let mut log_keep = R::zero();
                for (f, &c) in m.iter().zip(d) {
                    if f.is_zero() {
                        continue;
                    }
                    let u = f.survival(c);
                    if u >= R::one() {
                        return R::one();
                    }
                    log_keep = log_keep + (-u).ln_1p();
                }
                -log_keep.exp_m1()
            }
            LawKind::Table(rows) => {
                let logs: Vec<R> = d.iter().map(|&c| if c >= R::one() { R::zero() } else { (-c).ln_1p() }).collect();
                let mut acc = CompensatedSum::new();
                for r in rows {
                    let mut l = R::zero();
                    let mut dead = false;
                    for ((&cnt, &lg), &c) in r.counts.iter().zip(&logs).zip(d) {
                        if cnt == 0 {
                            continue;
                        }
                        if c >= R::one() {
                            dead = true;
                            break;
                        }
                        l = l + R::from_f64(cnt as f64) * lg;
                    }
                    let term = if dead { R::one() } else { -l.exp_m1() };
                    acc.add(R::from_f64(r.prob) * term);
                }
                acc.value()
            }
        }
    }

    /// `f(1 - c)` from complements (absolute type index).
    pub fn value_at_complement<R: Real>(&self, c: &[R]) -> R {
        let c = &c[self.parent..];
        match &self.kind {
            LawKind::Product(m) => m
                .iter()
                .zip(c)
                .fold(R::one(), |acc, (f, &cj)| acc * f.value_at_complement(cj)),
            LawKind::Table(rows) => {
                let mut acc = CompensatedSum::new();
                for r in rows {
                    let term = r
                        .counts
                        .iter()
                        .zip(c)
                        .fold(R::one(), |a, (&k, &cj)| a * (R::one() - cj).powu(k));
                    acc.add(R::from_f64(r.prob) * term);
                }
                acc.value()
            }
        }
    }

    /// `f(x) - f(y)` for `x >= y` componentwise, with complements `cx`, `cy` and
    /// the gap `delta = x - y` all supplied (absolute type index).
    pub fn gap<R: Real>(&self, cx: &[R], cy: &[R], delta: &[R]) -> R {
        let (cx, cy, delta) = (&cx[self.parent..], &cy[self.parent..], &delta[self.parent..]);
        match &self.kind {
            LawKind::Product(m) => {
                // prod a - prod b = sum_l (a_l - b_l) prod_{j>l} a_j prod_{j<l} b_j
                let width = m.len();
                let mut suffix_a = vec![R::one(); width + 1];
                for j in (0..width).rev() {
                    suffix_a[j] = suffix_a[j + 1] * m[j].value_at_complement(cx[j]);
                }
                let mut prefix_b = R::one();
                let mut acc = R::zero();
                for l in 0..width {
                    if !m[l].is_zero() && delta[l] > R::zero() {
                        acc = acc + m[l].gap(cx[l], cy[l], delta[l]) * suffix_a[l + 1] * prefix_b;
                    }
                    prefix_b = prefix_b * m[l].value_at_complement(cy[l]);
                }
                acc
            }
            LawKind::Table(rows) => {
                let x: Vec<R> = cx.iter().map(|&c| R::one() - c).collect();
                let y: Vec<R> = cy.iter().map(|&c| R::one() - c).collect();
                let mut acc = CompensatedSum::new();
                for r in rows {
                    let width = r.counts.len();
                    let mut suffix_a = vec![R::one(); width + 1];
                    for j in (0..width).rev() {
                        suffix_a[j] = suffix_a[j + 1] * x[j].powu(r.counts[j]);
                    }
                    let mut prefix_b = R::one();
                    let mut mono = R::zero();
                    for l in 0..width {
                        let c = r.counts[l];
                        if c > 0 && delta[l] > R::zero() {
                            mono = mono + monomial_gap(x[l], y[l], delta[l], c) * suffix_a[l + 1] * prefix_b;
                        }
                        prefix_b = prefix_b * y[l].powu(c);
                    }
                    acc.add(R::from_f64(r.prob) * mono);
                }
                acc.value()
            }
        }
    }

    /// Adds one offspring vector to `out` (absolute type index).
    pub fn sample_into<G: Rng + ?Sized>(&self, out: &mut [u64], rng: &mut G) {
        let out = &mut out[self.parent..];
        match &self.kind {
            LawKind::Product(m) => {
                for (o, f) in out.iter_mut().zip(m) {
                    *o += f.sample(rng);
                }
            }
            LawKind::Table(rows) => {
                let row = &rows[pick_row(rows, rng.random::<f64>())];
                for (o, &c) in out.iter_mut().zip(&row.counts) {
                    *o += u64::from(c);
                }
            }
        }
    }

    /// Adds the total offspring of `count` independent parents to `out`.
    pub fn sample_batch_into<G: Rng + ?Sized>(&self, count: u64, out: &mut [u64], rng: &mut G) {
        if count == 0 {
            return;
        }
        let out = &mut out[self.parent..];
        match &self.kind {
            LawKind::Product(m) => {
                for (o, f) in out.iter_mut().zip(m) {
                    *o += f.sample_sum(count, rng);
                }
            }
            LawKind::Table(rows) => {
                // multinomial row counts via sequential conditional binomials
                let mut remaining = count;
                let mut mass_left = 1.0;
                for (idx, row) in rows.iter().enumerate() {
                    if remaining == 0 {
                        break;
                    }
                    let k = if idx + 1 == rows.len() || mass_left <= row.prob {
                        remaining
                    } else {
                        let p = (row.prob / mass_left).clamp(0.0, 1.0);
                        rand_distr::Distribution::sample(
                            &rand_distr::Binomial::new(remaining, p).expect("valid binomial"),
                            rng,
                        )
                    };
                    remaining -= k;
                    mass_left -= row.prob;
                    for (o, &c) in out.iter_mut().zip(&row.counts) {
                        *o += u64::from(c) * k;
                    }
                }
            }
        }
    }

    /// Restriction to child types `< end`; used for leading sub-processes.
    fn truncated(&self, end: usize) -> Self {
        let keep = end - self.parent;
        let kind = match &self.kind {
            LawKind::Product(m) => LawKind::Product(m[..keep].to_vec()),
            LawKind::Table(rows) => LawKind::Table(
                rows.iter()
                    .map(|r| TableRow {
                        counts: r.counts[..keep].to_vec(),
                        prob: r.prob,
                    })
                    .collect(),
            ),
        };
        Self { parent: self.parent, kind }
    }
}

fn pick_row(rows: &[TableRow], u: f64) -> usize {
    let mut cum = 0.0;
    for (i, r) in rows.iter().enumerate() {
        cum += r.prob;
        if u < cum {
            return i;
        }
    }
    rows.len() - 1
}

struct CompensatedSum<R> {
    sum: R,
    comp: R,
}

impl<R: Real> CompensatedSum<R> {
    fn new() -> Self {
        Self { sum: R::zero(), comp: R::zero() }
    }

    fn add(&mut self, x: R) {
        let t = self.sum + x;
        let big_sum = if self.sum >= R::zero() { self.sum } else { -self.sum };
        let big_x = if x >= R::zero() { x } else { -x };
        if big_sum >= big_x {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    fn value(&self) -> R {
        self.sum + self.comp
    }
}

/// A decomposable process: one offspring law per type, type `i` producing
/// only types `j >= i`. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    laws: Vec<OffspringLaw>,
}

impl ProcessSpec {
    pub fn new(laws: Vec<OffspringLaw>) -> Result<Self, ModelError> {
        if laws.is_empty() {
            return Err(ModelError::Empty);
        }
        let n = laws.len();
        for (i, law) in laws.iter().enumerate() {
            if law.parent != i {
                return Err(ModelError::LawOrder {
                    position: i + 1,
                    found: law.parent + 1,
                });
            }
            law.check(n)?;
        }
        Ok(Self { laws })
    }

    pub fn n_types(&self) -> usize {
        self.laws.len()
    }

    pub fn laws(&self) -> &[OffspringLaw] {
        &self.laws
    }

    pub fn law(&self, i: usize) -> &OffspringLaw {
        &self.laws[i]
    }

    /// One-step pgf `f_i(s)` of type `i` (zero-based).
    pub fn pgf_eval(&self, i: usize, s: &[f64]) -> f64 {
        debug_assert_eq!(s.len(), self.n_types());
        self.laws[i].pgf(s)
    }

    /// `1 - f_i(1 - d)`.
    pub fn survival_map<R: Real>(&self, i: usize, d: &[R]) -> R {
        self.laws[i].survival(d)
    }

    pub fn sample_offspring<G: Rng + ?Sized>(&self, i: usize, rng: &mut G) -> Vec<u64> {
        let mut out = vec![0; self.n_types()];
        self.laws[i].sample_into(&mut out, rng);
        out
    }

    pub fn mean_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_types();
        (0..n).map(|i| (0..n).map(|j| self.laws[i].mean(j)).collect()).collect()
    }

    /// Sub-process on types `start..N`, re-indexed from zero.
    pub fn tail(&self, start: usize) -> ProcessSpec {
        let laws = self.laws[start..]
            .iter()
            .map(|l| OffspringLaw {
                parent: l.parent - start,
                kind: l.kind.clone(),
            })
            .collect();
        ProcessSpec { laws }
    }

    /// Leading sub-process on types `0..end`; children of later types are dropped.
    pub fn leading(&self, end: usize) -> ProcessSpec {
        let laws = self.laws[..end].iter().map(|l| l.truncated(end)).collect();
        ProcessSpec { laws }
    }
}

/// `n`-th power of the mean matrix: `E[Z_j(n) | Z(0) = e_i]`.
pub fn expectation_matrix(spec: &ProcessSpec, n: u64) -> Vec<Vec<f64>> {
    let m = spec.mean_matrix();
    let size = m.len();
    let mut result: Vec<Vec<f64>> = (0..size)
        .map(|i| (0..size).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut base = m;
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = matmul(&result, &base);
        }
        base = matmul(&base, &base);
        k >>= 1;
    }
    result
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}
