use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::real::Real;

/// A one-dimensional offspring count distribution.
///
/// All four families have finite moments of every order, which is what lets
/// [`crate::model::validate_hypothesis_a`] certify the second-moment
/// condition analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Failures before the first success, parametrized by its mean.
    Geometric { mean: f64 },
    Poisson { mean: f64 },
    Bernoulli { p: f64 },
    PointMass { k: u32 },
}

impl Family {
    pub const ZERO: Family = Family::PointMass { k: 0 };

    pub fn check(&self) -> Result<(), String> {
        match *self {
            Family::Geometric { mean } | Family::Poisson { mean } => {
                if !(mean.is_finite() && mean >= 0.0) {
                    return Err(format!("mean must be finite and >= 0, got {mean}"));
                }
            }
            Family::Bernoulli { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("p must lie in [0, 1], got {p}"));
                }
            }
            Family::PointMass { .. } => {}
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Family::Geometric { mean } | Family::Poisson { mean } => mean,
            Family::Bernoulli { p } => p,
            Family::PointMass { k } => k as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Family::Geometric { mean } => mean * (1.0 + mean),
            Family::Poisson { mean } => mean,
            Family::Bernoulli { p } => p * (1.0 - p),
            Family::PointMass { .. } => 0.0,
        }
    }

    /// E[X(X-1)].
    pub fn factorial_moment2(&self) -> f64 {
        match *self {
            Family::Geometric { mean } => 2.0 * mean * mean,
            Family::Poisson { mean } => mean * mean,
            Family::Bernoulli { .. } => 0.0,
            Family::PointMass { k } => k as f64 * (k as f64 - 1.0),
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.variance() + self.mean() * self.mean()
    }

    pub fn is_zero(&self) -> bool {
        self.mean() == 0.0
    }

    pub fn pgf(&self, s: f64) -> f64 {
        match *self {
            Family::Geometric { mean } => 1.0 / (1.0 + mean * (1.0 - s)),
            Family::Poisson { mean } => (mean * (s - 1.0)).exp(),
            Family::Bernoulli { p } => 1.0 - p + p * s,
            Family::PointMass { k } => s.powi(k as i32),
        }
    }

    pub fn pgf_derivative(&self, s: f64) -> f64 {
        match *self {
            Family::Geometric { mean } => {
                let den = 1.0 + mean * (1.0 - s);
                mean / (den * den)
            }
            Family::Poisson { mean } => mean * (mean * (s - 1.0)).exp(),
            Family::Bernoulli { p } => p,
            Family::PointMass { k } => {
                if k == 0 {
                    0.0
                } else {
                    k as f64 * s.powi(k as i32 - 1)
                }
            }
        }
    }

    /// `g(1 - c)` evaluated from the complement `c`.
    pub fn value_at_complement<R: Real>(&self, c: R) -> R {
        match *self {
            Family::Geometric { mean } => R::one() / (R::one() + R::from_f64(mean) * c),
            Family::Poisson { mean } => (-(R::from_f64(mean) * c)).exp(),
            Family::Bernoulli { p } => R::one() - R::from_f64(p) * c,
            Family::PointMass { k } => (R::one() - c).powu(k),
        }
    }

    /// `1 - g(1 - c)` without forming `g` first.
    pub fn survival<R: Real>(&self, c: R) -> R {
        match *self {
            Family::Geometric { mean } => {
                let mc = R::from_f64(mean) * c;
                mc / (R::one() + mc)
            }
            Family::Poisson { mean } => -(-(R::from_f64(mean) * c)).exp_m1(),
            Family::Bernoulli { p } => R::from_f64(p) * c,
            Family::PointMass { k } => {
                if k == 0 || c <= R::zero() {
                    R::zero()
                } else if c >= R::one() {
                    R::one()
                } else {
                    -(R::from_f64(k as f64) * (-c).ln_1p()).exp_m1()
                }
            }
        }
    }

    /// `g(x) - g(y)` for `x = 1 - cx >= y = 1 - cy`, given the gap
    /// `delta = x - y` as an independently tracked quantity.
    pub fn gap<R: Real>(&self, cx: R, cy: R, delta: R) -> R {
        match *self {
            Family::Geometric { mean } => {
                let m = R::from_f64(mean);
                m * delta / ((R::one() + m * cx) * (R::one() + m * cy))
            }
            Family::Poisson { mean } => {
                let m = R::from_f64(mean);
                (-(m * cx)).exp() * (-(-(m * delta)).exp_m1())
            }
            Family::Bernoulli { p } => R::from_f64(p) * delta,
            Family::PointMass { k } => monomial_gap(R::one() - cx, R::one() - cy, delta, k),
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> u64 {
        match *self {
            Family::Geometric { mean } => {
                if mean == 0.0 {
                    return 0;
                }
                Geometric::new(1.0 / (1.0 + mean))
                    .expect("validated geometric parameter")
                    .sample(rng)
            }
            Family::Poisson { mean } => poisson(mean, rng),
            Family::Bernoulli { p } => u64::from(rng.random_bool(p)),
            Family::PointMass { k } => u64::from(k),
        }
    }

    /// Sum of `count` independent draws, using closed convolution forms.
    pub fn sample_sum<G: Rng + ?Sized>(&self, count: u64, rng: &mut G) -> u64 {
        if count == 0 {
            return 0;
        }
        match *self {
            Family::Geometric { mean } => {
                if mean == 0.0 {
                    return 0;
                }
                if count <= 8 {
                    return (0..count).map(|_| self.sample(rng)).sum();
                }
                // Negative binomial as a gamma-mixed Poisson.
                let rate = Gamma::new(count as f64, mean)
                    .expect("positive gamma parameters")
                    .sample(rng);
                poisson(rate, rng)
            }
            Family::Poisson { mean } => poisson(mean * count as f64, rng),
            Family::Bernoulli { p } => Binomial::new(count, p)
                .expect("validated bernoulli parameter")
                .sample(rng),
            Family::PointMass { k } => u64::from(k) * count,
        }
    }
}

fn poisson<G: Rng + ?Sized>(mean: f64, rng: &mut G) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("finite poisson mean").sample(rng) as u64
}

/// `x^k - y^k = delta * sum_{r<k} x^r y^{k-1-r}`; all terms are nonnegative.
pub(crate) fn monomial_gap<R: Real>(x: R, y: R, delta: R, k: u32) -> R {
    if k == 0 {
        return R::zero();
    }
    // P_j = sum_{r<=j} x^r y^{j-r} = y P_{j-1} + x^j
    let mut acc = R::one();
    let mut xp = R::one();
    for _ in 1..k {
        xp = xp * x;
        acc = y * acc + xp;
    }
    delta * acc
}
