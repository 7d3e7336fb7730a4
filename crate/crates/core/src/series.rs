//! Truncated power series in the perturbation amplitude δ.
//!
//! A [`Series<L>`] stores the first `L` Taylor coefficients of a complex
//! function of δ. Arithmetic discards every term of order `L` and above, so
//! composing series reproduces the Taylor coefficients of the composed
//! function exactly (up to rounding).

use crate::C64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Coefficient count of the full kernel tables (orders 0..=4).
pub const FULL: usize = 5;

/// Highest expansion order supported by the kernel tables.
pub const N_MAX: usize = FULL - 1;

/// Truncated power series `c[0] + c[1] δ + ... + c[L-1] δ^(L-1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Series<const L: usize> {
    pub c: [C64; L],
}

impl<const L: usize> Default for Series<L> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<const L: usize> Series<L> {
    pub fn zero() -> Self {
        Self { c: [C64::new(0.0, 0.0); L] }
    }

    pub fn constant(value: C64) -> Self {
        let mut s = Self::zero();
        s.c[0] = value;
        s
    }

    pub fn real(value: f64) -> Self {
        Self::constant(C64::new(value, 0.0))
    }

    /// Builds a series from leading real coefficients; missing entries are zero
    /// and entries beyond the truncation order are dropped.
    pub fn from_real(coeffs: &[f64]) -> Self {
        let mut s = Self::zero();
        for (dst, &v) in s.c.iter_mut().zip(coeffs) {
            *dst = C64::new(v, 0.0);
        }
        s
    }

    pub fn from_complex(coeffs: &[C64]) -> Self {
        let mut s = Self::zero();
        for (dst, &v) in s.c.iter_mut().zip(coeffs) {
            *dst = v;
        }
        s
    }

    pub fn scale(&self, k: C64) -> Self {
        let mut s = *self;
        for v in s.c.iter_mut() {
            *v *= k;
        }
        s
    }

    pub fn scale_re(&self, k: f64) -> Self {
        let mut s = *self;
        for v in s.c.iter_mut() {
            *v *= k;
        }
        s
    }

    /// Evaluates the truncated polynomial at `delta`.
    pub fn eval(&self, delta: f64) -> C64 {
        self.c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &v| acc * delta + v)
    }

    /// Multiplicative inverse; the constant term must be nonzero.
    pub fn recip(&self) -> Self {
        let mut out = Self::zero();
        let inv0 = self.c[0].inv();
        out.c[0] = inv0;
        for n in 1..L {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=n {
                acc += self.c[k] * out.c[n - k];
            }
            out.c[n] = -acc * inv0;
        }
        out
    }

    pub fn div(&self, rhs: &Self) -> Self {
        *self * rhs.recip()
    }

    /// `exp(self)`, by the recurrence `n f_n = Σ k g_k f_{n-k}`.
    pub fn exp(&self) -> Self {
        let mut out = Self::zero();
        out.c[0] = self.c[0].exp();
        for n in 1..L {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=n {
                acc += self.c[k] * out.c[n - k] * k as f64;
            }
            out.c[n] = acc / n as f64;
        }
        out
    }

    /// `self^alpha` on the principal branch, written as `g0^alpha (1 + u)^alpha`.
    pub fn powf(&self, alpha: f64) -> Self {
        let g0 = self.c[0];
        let mut out = Self::zero();
        out.c[0] = g0.powf(alpha);
        for n in 1..L {
            let mut acc = C64::new(0.0, 0.0);
            for k in 1..=n {
                acc += self.c[k] * out.c[n - k] * (alpha * k as f64 - (n - k) as f64);
            }
            out.c[n] = acc / (g0 * n as f64);
        }
        out
    }

    /// Composes an analytic function given by its Taylor coefficients about 0
    /// with this series (Horner evaluation in series arithmetic).
    pub fn compose_taylor(&self, taylor: &[C64]) -> Self {
        let mut acc = Self::zero();
        for &t in taylor.iter().rev() {
            acc = acc * *self;
            acc.c[0] += t;
        }
        acc
    }

    /// Copies the first `L2` coefficients into a series of a different length.
    pub fn resize<const L2: usize>(&self) -> Series<L2> {
        let mut out = Series::<L2>::zero();
        for (dst, src) in out.c.iter_mut().zip(self.c.iter()) {
            *dst = *src;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl<const L: usize> Add for Series<L> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        self
    }
}

impl<const L: usize> AddAssign for Series<L> {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
    }
}

impl<const L: usize> Sub for Series<L> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        self
    }
}

impl<const L: usize> Neg for Series<L> {
    type Output = Self;
    fn neg(mut self) -> Self {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl<const L: usize> Mul for Series<L> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for n in 0..L {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..=n {
                acc += self.c[k] * rhs.c[n - k];
            }
            out.c[n] = acc;
        }
        out
    }
}
