//! Survival complements `d_i(n) = P_i(T > n)` and the law of the extinction time.

use serde::Serialize;

use super::{PgfError, Precision};
use crate::model::ProcessSpec;
use crate::real::{DoubleDouble, Real};

/// `d_i(n)` and `drop_i(n) = d_i(n-1) - d_i(n) = P_i(T = n)` for `n <= horizon`.
///
/// `d(n+1) = 1 - F(1 - d(n))` is evaluated in complement form, and `drop` by
/// the paired recurrence `drop(n+1) = F(q(n)) - F(q(n-1))`, so neither is ever
/// obtained by cancellation.
#[derive(Debug, Clone, Serialize)]
pub struct SurvivalTable {
    n_types: usize,
    precision: Precision,
    horizon: usize,
    truncated_at: Option<usize>,
    d_hi: Vec<f64>,
    d_lo: Vec<f64>,
    drop_hi: Vec<f64>,
    drop_lo: Vec<f64>,
}

impl SurvivalTable {
    pub fn build(spec: &ProcessSpec, n_max: usize) -> Self {
        Self::build_with(spec, n_max, Precision::Double)
    }

    pub fn build_with(spec: &ProcessSpec, n_max: usize, precision: Precision) -> Self {
        match precision {
            Precision::Double => build_impl::<f64>(spec, n_max, precision),
            Precision::DoubleDouble => build_impl::<DoubleDouble>(spec, n_max, precision),
        }
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Largest `n` stored.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// First step at which `d` stopped decreasing in the working precision.
    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    /// `P_i(T > n)`.
    pub fn survival(&self, i: usize, n: usize) -> f64 {
        self.d_hi[n * self.n_types + i]
    }

    /// `P_i(T <= n) = q_i(n)`.
    pub fn extinction_cdf(&self, i: usize, n: usize) -> f64 {
        1.0 - self.survival(i, n)
    }

    /// `P_i(T = n)` for `1 <= n <= horizon`; zero at `n = 0`.
    pub fn step_drop(&self, i: usize, n: usize) -> f64 {
        self.drop_hi[n * self.n_types + i]
    }

    pub(crate) fn survival_r<R: Real>(&self, i: usize, n: usize) -> R {
        let k = n * self.n_types + i;
        R::from_parts(self.d_hi[k], self.d_lo.get(k).copied().unwrap_or(0.0))
    }

    pub(crate) fn drop_r<R: Real>(&self, i: usize, n: usize) -> R {
        let k = n * self.n_types + i;
        R::from_parts(self.drop_hi[k], self.drop_lo.get(k).copied().unwrap_or(0.0))
    }

    pub(crate) fn require(&self, n: usize) -> Result<(), PgfError> {
        if n <= self.horizon {
            return Ok(());
        }
        match self.truncated_at {
            Some(step) if n >= step => Err(PgfError::PrecisionLoss {
                step,
                detail: format!("survival complement stops decreasing at n = {step}; rebuild in double-double"),
            }),
            _ => Err(PgfError::BeyondHorizon {
                requested: n,
                horizon: self.horizon,
            }),
        }
    }
}

/// `P_{i+1}(T = n)` read from the table.
pub fn extinction_time_pmf(table: &SurvivalTable, i: usize, n: usize) -> Result<f64, PgfError> {
    table.require(n)?;
    Ok(table.step_drop(i, n))
}

fn build_impl<R: Real>(spec: &ProcessSpec, n_max: usize, precision: Precision) -> SurvivalTable {
    let nt = spec.n_types();
    let keep_lo = precision == Precision::DoubleDouble;
    let mut t = SurvivalTable {
        n_types: nt,
        precision,
        horizon: 0,
        truncated_at: None,
        d_hi: Vec::with_capacity((n_max + 1) * nt),
        d_lo: Vec::new(),
        drop_hi: Vec::with_capacity((n_max + 1) * nt),
        drop_lo: Vec::new(),
    };
    let push = |t: &mut SurvivalTable, d: &[R], drop: &[R]| {
        for (&a, &b) in d.iter().zip(drop) {
            let (dh, dl) = a.parts();
            let (ph, pl) = b.parts();
            t.d_hi.push(dh);
            t.drop_hi.push(ph);
            if keep_lo {
                t.d_lo.push(dl);
                t.drop_lo.push(pl);
            }
        }
    };

    let mut prev2 = vec![R::one(); nt];
    let mut prev_drop = vec![R::zero(); nt];
    push(&mut t, &prev2, &prev_drop);
    if n_max == 0 {
        return t;
    }
    let mut prev: Vec<R> = (0..nt).map(|i| spec.law(i).survival(&prev2)).collect();
    prev_drop = (0..nt).map(|i| spec.law(i).value_at_complement(&prev2)).collect();
    push(&mut t, &prev, &prev_drop);
    t.horizon = 1;

    let mut next = vec![R::zero(); nt];
    let mut next_drop = vec![R::zero(); nt];
    for n in 2..=n_max {
        for i in 0..nt {
            let law = spec.law(i);
            next[i] = law.survival(&prev);
            next_drop[i] = law.gap(&prev, &prev2, &prev_drop);
        }
        let stalled = (0..nt).any(|i| {
            next[i] > prev[i] || (next[i] == prev[i] && prev[i] > R::zero() && next_drop[i] > R::zero())
        });
        if stalled {
            t.truncated_at = Some(n);
            break;
        }
        push(&mut t, &next, &next_drop);
        t.horizon = n;
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut next);
        std::mem::swap(&mut prev_drop, &mut next_drop);
    }
    t
}
