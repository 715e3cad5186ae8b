//! Scalar abstraction for the exact engine.
//!
//! Every recurrence in [`crate::pgf`] is written once against [`Real`] and
//! instantiated either with plain `f64` or with [`DoubleDouble`], an
//! unevaluated sum of two doubles giving roughly 32 significant digits.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Rebuilds a value from a stored `(hi, lo)` pair. `f64` ignores `lo`.
    fn from_parts(hi: f64, lo: f64) -> Self;
    fn to_f64(self) -> f64;
    fn parts(self) -> (f64, f64);

    fn exp(self) -> Self;
    fn exp_m1(self) -> Self;
    fn ln_1p(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn powu(self, mut k: u32) -> Self {
        let mut base = self;
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn from_parts(hi: f64, _lo: f64) -> Self {
        hi
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble {
    hi: 0.693_147_180_559_945_3,
    lo: 2.319_046_813_846_299_6e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn normalized(hi: f64, lo: f64) -> Self {
        if !hi.is_finite() {
            return Self { hi, lo: 0.0 };
        }
        let (h, l) = quick_two_sum(hi, lo);
        Self { hi: h, lo: l }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    /// `expm1` on a reduced argument `|x| <= ~0.5`: Taylor series on
    /// `x / 2^10`, then ten doublings via `e^{2r} - 1 = t (t + 2)`.
    fn expm1_small(self) -> Self {
        const HALVINGS: i32 = 10;
        let r = self.scale_pow2(-HALVINGS);
        let mut term = r;
        let mut sum = r;
        let mut k = 2.0;
        loop {
            term = term * r / Self::from_f64(k);
            sum = sum + term;
            if term.hi.abs() <= 1e-36 * sum.hi.abs().max(1e-300) || k > 40.0 {
                break;
            }
            k += 1.0;
        }
        let two = Self::from_f64(2.0);
        for _ in 0..HALVINGS {
            sum = sum * (sum + two);
        }
        sum
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(std::cmp::Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        if !s.is_finite() {
            return Self { hi: s, lo: 0.0 };
        }
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::normalized(s, e + f)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        if !p.is_finite() {
            return Self { hi: p, lo: 0.0 };
        }
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        Self::normalized(p, e)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi / rhs.hi;
        if !q1.is_finite() || q1 == 0.0 {
            return Self { hi: q1, lo: 0.0 };
        }
        let r = self - rhs * Self::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Self::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (h, l) = quick_two_sum(q1, q2);
        Self { hi: h, lo: l } + Self::from_f64(q3)
    }
}

impl Real for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn from_parts(hi: f64, lo: f64) -> Self {
        Self::normalized(hi, lo)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn parts(self) -> (f64, f64) {
        (self.hi, self.lo)
    }

    fn exp(self) -> Self {
        if self.hi.is_nan() {
            return self;
        }
        if self.hi < -745.0 {
            return Self::zero();
        }
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Self::from_f64(k);
        (r.expm1_small() + Self::one()).scale_pow2(k as i32)
    }

    fn exp_m1(self) -> Self {
        if self.hi.is_nan() {
            return self;
        }
        if self.hi.abs() <= 0.5 {
            self.expm1_small()
        } else {
            self.exp() - Self::one()
        }
    }

    fn ln_1p(self) -> Self {
        if self.hi.is_nan() || self.hi < -1.0 {
            return Self::from_f64(f64::NAN);
        }
        if self.hi == -1.0 && self.lo <= 0.0 {
            return Self::from_f64(f64::NEG_INFINITY);
        }
        if self.hi == 0.0 {
            return self;
        }
        // Newton on expm1(y) = x; two steps from the f64 guess reach full precision.
        let mut y = Self::from_f64(self.to_f64().ln_1p());
        for _ in 0..2 {
            let e = y.exp_m1();
            y = y - (e - self) / (e + Self::one());
        }
        y
    }
}
