//! One-step maps on complements and on paired orbits.
//!
//! Laws only look at coordinates `j >= i`, so updating coordinates in
//! ascending order in place applies the map to the old vector.

use std::ops::Range;

use crate::model::ProcessSpec;
use crate::real::Real;

pub(crate) fn step_complements<R: Real>(spec: &ProcessSpec, c: &mut [R], active: Range<usize>) {
    for i in active {
        c[i] = spec.law(i).survival(c);
    }
}

/// Two orbits `x(t) >= y(t)` with complements and the gap `x - y`.
#[derive(Debug, Clone)]
pub(crate) struct Pair<R> {
    pub upper: Vec<R>,
    pub lower: Vec<R>,
    pub gap: Vec<R>,
}

impl<R: Real> Pair<R> {
    pub fn step(&mut self, spec: &ProcessSpec, active: Range<usize>) {
        for i in active {
            let law = spec.law(i);
            let g = law.gap(&self.upper, &self.lower, &self.gap);
            let u = law.survival(&self.upper);
            let l = law.survival(&self.lower);
            self.upper[i] = u;
            self.lower[i] = l;
            self.gap[i] = g;
        }
    }

    pub fn run(&mut self, spec: &ProcessSpec, steps: usize) {
        let n = spec.n_types();
        for _ in 0..steps {
            self.step(spec, 0..n);
        }
    }

    /// Sets the first `level` coordinates of both orbits to zero.
    pub fn kill_leading(&mut self, level: usize) {
        for j in 0..level {
            self.upper[j] = R::one();
            self.lower[j] = R::one();
            self.gap[j] = R::zero();
        }
    }
}
