//! Transform of `W_N`, the number of type-N children born to lower-type parents.
//!
//! `phi_i(s) = E_i[s^{W_N}]` solves `phi_i = f_i(phi_i, ..., phi_{N-1}, s)` for
//! `i < N`, taking the smallest root in each coordinate. Coordinates are solved
//! from `N - 1` down to `1` with Newton's method in complement form started at
//! `phi_i = 0`. Convexity of `f_i` in its own argument makes the iterates
//! increase monotonically to the smallest root, as plain iteration does, only
//! quadratically fast.

use serde::Serialize;

use super::orbit::{step_complements, Pair};
use super::PgfError;
use crate::model::{MomentData, ProcessSpec};

pub const W_MAX_ITER: usize = 1_000_000;
const TOL: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WTransform {
    /// `phi_i` for `i < N`.
    pub phi: Vec<f64>,
    pub complement: Vec<f64>,
    pub iterations: usize,
    /// Largest `|phi_i - f_i(phi, s)|`.
    pub residual: f64,
}

impl WTransform {
    pub fn value(&self) -> f64 {
        self.phi[0]
    }
}

fn check(spec: &ProcessSpec) -> Result<(), PgfError> {
    if spec.n_types() < 2 {
        return Err(PgfError::InvalidArgument("W_N needs at least two types".into()));
    }
    Ok(())
}

/// `phi(s)` for `s` in `[0, 1]`.
pub fn w_transform(spec: &ProcessSpec, s: f64) -> Result<WTransform, PgfError> {
    if !(0.0..=1.0).contains(&s) {
        return Err(PgfError::InvalidArgument(format!("s = {s} is outside [0, 1]")));
    }
    solve_newton(spec, 1.0 - s)
}

/// `phi(e^{-theta})`, with the complement of `e^{-theta}` formed exactly.
pub fn w_laplace(spec: &ProcessSpec, theta: f64) -> Result<WTransform, PgfError> {
    if !(theta >= 0.0) {
        return Err(PgfError::InvalidArgument(format!("theta = {theta} must be nonnegative")));
    }
    solve_newton(spec, -(-theta).exp_m1())
}

fn solve_newton(spec: &ProcessSpec, cs: f64) -> Result<WTransform, PgfError> {
    check(spec)?;
    let n = spec.n_types();
    let mut c = vec![1.0; n];
    c[n - 1] = cs;
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    if cs == 0.0 {
        c.iter_mut().for_each(|x| *x = 0.0);
    } else {
        for i in (0..n - 1).rev() {
            let law = spec.law(i);
            let mut ci = 1.0;
            let mut r;
            let mut it = 0;
            loop {
                c[i] = ci;
                let g = law.survival(&c);
                r = ci - g;
                if r.abs() <= TOL * ci.max(f64::MIN_POSITIVE) || it >= W_MAX_ITER {
                    break;
                }
                let x: Vec<f64> = c.iter().map(|cj| 1.0 - cj).collect();
                let denom = 1.0 - law.pgf_own_derivative(&x);
                let mut next = if denom > 1e-300 { ci - r / denom } else { g };
                if !(next < ci) {
                    next = g;
                }
                it += 1;
                if !(next < ci) {
                    break;
                }
                ci = next.max(0.0);
            }
            iterations += it;
            if it >= W_MAX_ITER {
                return Err(PgfError::SlowConvergence {
                    iterations,
                    residual: r.abs(),
                });
            }
            residual = residual.max(r.abs());
        }
    }
    c.truncate(n - 1);
    Ok(WTransform {
        phi: c.iter().map(|x| 1.0 - x).collect(),
        complement: c,
        iterations,
        residual,
    })
}

/// Plain joint iteration from `phi = 0`; reference implementation.
pub fn w_transform_monotone(spec: &ProcessSpec, s: f64, max_iter: usize) -> Result<WTransform, PgfError> {
    check(spec)?;
    let n = spec.n_types();
    let mut c = vec![1.0; n];
    c[n - 1] = 1.0 - s;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let before = c.clone();
        step_complements(spec, &mut c, 0..n - 1);
        iterations += 1;
        residual = before.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual <= TOL {
            break;
        }
    }
    if residual > 1e-12 {
        return Err(PgfError::SlowConvergence { iterations, residual });
    }
    c.truncate(n - 1);
    Ok(WTransform {
        phi: c.iter().map(|x| 1.0 - x).collect(),
        complement: c,
        iterations,
        residual,
    })
}

/// `E_1[s^{W_N}; Z_1(t) + ... + Z_{N-1}(t) = 0]`: `t` joint iterations from zero.
pub fn w_censored_transform(spec: &ProcessSpec, s: f64, t: usize) -> Result<f64, PgfError> {
    check(spec)?;
    let n = spec.n_types();
    let mut c = vec![1.0; n];
    c[n - 1] = 1.0 - s;
    for _ in 0..t {
        step_complements(spec, &mut c, 0..n - 1);
    }
    Ok(1.0 - c[0])
}

fn last_b(spec: &ProcessSpec) -> f64 {
    MomentData::from_spec(spec).half_variance[spec.n_types() - 1]
}

fn scaled_theta(spec: &ProcessSpec, lambda: f64, n: f64) -> Result<f64, PgfError> {
    check(spec)?;
    if !(lambda > 0.0) || !(n > 0.0) {
        return Err(PgfError::InvalidArgument("lambda and n must be positive".into()));
    }
    Ok(lambda / (last_b(spec) * n))
}

/// Central difference with Richardson extrapolation, `h = theta * 1e-4`.
fn richardson(theta: f64, d: impl Fn(f64) -> Result<f64, PgfError>) -> Result<f64, PgfError> {
    let h = theta * 1e-4;
    let d1 = d(h)?;
    let d2 = d(2.0 * h)?;
    Ok((4.0 * d1 - d2) / 3.0)
}

/// `E_1[W_N exp(-lambda W_N / (b_N n))]`.
pub fn w_weighted_mean(spec: &ProcessSpec, lambda: f64, n: f64) -> Result<f64, PgfError> {
    let theta = scaled_theta(spec, lambda, n)?;
    richardson(theta, |h| {
        let hi = w_laplace(spec, theta + h)?.complement[0];
        let lo = w_laplace(spec, theta - h)?.complement[0];
        Ok((hi - lo) / (2.0 * h))
    })
}

/// `E_1[W_N exp(-lambda W_N / (b_N n)); Z_1(t) + ... + Z_{N-1}(t) = 0]`.
pub fn w_censored_weighted_mean(spec: &ProcessSpec, lambda: f64, n: f64, t: usize) -> Result<f64, PgfError> {
    let theta = scaled_theta(spec, lambda, n)?;
    let nt = spec.n_types();
    richardson(theta, |h| {
        let mut pair = Pair {
            upper: vec![1.0; nt],
            lower: vec![1.0; nt],
            gap: vec![0.0; nt],
        };
        pair.upper[nt - 1] = -(-(theta - h)).exp_m1();
        pair.lower[nt - 1] = -(-(theta + h)).exp_m1();
        pair.gap[nt - 1] = 2.0 * (-theta).exp() * h.sinh();
        for _ in 0..t {
            pair.step(spec, 0..nt - 1);
        }
        Ok(pair.gap[0] / (2.0 * h))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    /// zoo2: `phi = 1/(2 - phi) * e^{-(1 - s)}` gives `1 - phi = sqrt(1 - e^{-(1-s)})`.
    fn zoo2_complement(s: f64) -> f64 {
        (-(-(1.0 - s)).exp_m1()).sqrt()
    }

    #[test]
    fn zoo2_closed_form() {
        let spec = zoo::zoo2();
        for s in [0.0, 0.2, 0.5, 0.9, 0.999, 1.0] {
            let w = w_transform(&spec, s).unwrap();
            assert!((w.complement[0] - zoo2_complement(s)).abs() < 1e-15, "s={s}");
            assert!(w.residual <= 1e-12);
        }
    }

    #[test]
    fn newton_matches_monotone_iteration() {
        for spec in [zoo::zoo2(), zoo::zoo3(), zoo::micro_table()] {
            for s in [0.0, 0.3, 0.7] {
                let a = w_transform(&spec, s).unwrap();
                let b = w_transform_monotone(&spec, s, W_MAX_ITER).unwrap();
                for (x, y) in a.phi.iter().zip(&b.phi) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn value_at_one_is_one() {
        assert_eq!(w_transform(&zoo::zoo3(), 1.0).unwrap().value(), 1.0);
    }

    #[test]
    fn censored_increases_to_full() {
        let spec = zoo::zoo2();
        let full = w_transform(&spec, 0.6).unwrap().value();
        let mut prev = 0.0;
        for t in [1usize, 10, 100, 100_000] {
            let v = w_censored_transform(&spec, 0.6, t).unwrap();
            assert!(v >= prev && v <= full + 1e-15);
            prev = v;
        }
        assert!((full - prev).abs() < 1e-4);
    }

    #[test]
    fn weighted_mean_closed_form() {
        // zoo2: c(theta) = sqrt(1 - exp(-(1 - e^{-theta}))), b = 1
        let spec = zoo::zoo2();
        let theta: f64 = 0.01;
        let u = -(-theta).exp_m1();
        let e = (-u).exp();
        let expected = e * (-theta).exp() / (2.0 * (1.0 - e).sqrt());
        let v = w_weighted_mean(&spec, 1.0, 1.0 / theta).unwrap();
        assert!((v - expected).abs() / expected < 1e-8, "{v} vs {expected}");
    }

    #[test]
    fn censored_weighted_mean_below_full() {
        let spec = zoo::zoo2();
        let full = w_weighted_mean(&spec, 1.0, 1000.0).unwrap();
        let cens = w_censored_weighted_mean(&spec, 1.0, 1000.0, 100).unwrap();
        assert!(cens > 0.0 && cens < full);
    }
}
