//! Log-domain arithmetic for quantities such as `perm(A)` and `(mn)!` that
//! overflow `f64` long before the interesting range of `n`.

use std::ops::{Div, Mul};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

/// A nonnegative real stored as its natural logarithm; `-inf` is exact zero.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct LogNonneg(f64);

impl LogNonneg {
    pub const ZERO: Self = Self(f64::NEG_INFINITY);
    pub const ONE: Self = Self(0.0);

    pub fn from_ln(log_value: f64) -> Self {
        debug_assert!(!log_value.is_nan() && log_value != f64::INFINITY);
        Self(log_value)
    }

    /// Panics on negative or NaN input.
    pub fn from_value(x: f64) -> Self {
        assert!(x >= 0.0, "LogNonneg::from_value({x})");
        Self(x.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl Mul for LogNonneg {
    type Output = Self;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Div for LogNonneg {
    type Output = Self;

    fn div(self, rhs: Self) -> Self {
        assert!(!rhs.is_zero(), "division by zero");
        Self(self.0 - rhs.0)
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.comp *= f;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming log-sum-exp: accumulates `ln Σ exp(x_i)` one term at a time with
/// a running max shift, so no term is ever exponentiated above 1.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    acc: CompensatedSum,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            acc: CompensatedSum::default(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            if self.max != f64::NEG_INFINITY {
                self.acc.scale((self.max - x).exp());
            }
            self.max = x;
            self.acc.add(1.0);
        } else {
            self.acc.add((x - self.max).exp());
        }
    }

    /// Folds another accumulator into this one.
    pub fn merge(&mut self, other: &Self) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = *other;
            return;
        }
        let (hi, lo) = if other.max > self.max {
            (*other, *self)
        } else {
            (*self, *other)
        };
        let f = (lo.max - hi.max).exp();
        let mut acc = hi.acc;
        acc.add(lo.acc.sum * f);
        acc.add(lo.acc.comp * f);
        *self = Self { max: hi.max, acc };
    }

    pub fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.value().ln()
        }
    }
}

/// `ln Σ exp(t_i)` with the max-shift technique and compensated summation.
/// `-inf` terms are exact zeros; a `+inf` term yields `+inf`.
pub fn log_sum_exp(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Empty("log_sum_exp needs at least one term"));
    }
    if terms.iter().any(|t| t.is_nan()) {
        return Ok(f64::NAN);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let mut acc = CompensatedSum::default();
    for &t in terms {
        acc.add((t - max).exp());
    }
    Ok(max + acc.value().ln())
}

/// Largest argument served from the cached prefix-sum table.
pub const LOG_FACTORIAL_TABLE_MAX: u64 = 1_000_000;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(LOG_FACTORIAL_TABLE_MAX as usize + 1);
        table.push(0.0);
        let mut acc = CompensatedSum::default();
        for k in 1..=LOG_FACTORIAL_TABLE_MAX {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        table
    })
}

/// `ln(k!)`: compensated prefix sums of `ln j` up to 10⁶, the Stirling series
/// beyond that.
pub fn log_factorial(k: u64) -> f64 {
    if k <= LOG_FACTORIAL_TABLE_MAX {
        log_factorial_table()[k as usize]
    } else {
        stirling_series(k as f64)
    }
}

fn stirling_series(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let correction =
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)));
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + correction
}

/// `ln C(n, k)`.
pub fn log_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "log_binomial({n}, {k})");
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// `x ln y` with the convention `0 · ln 0 = 0`.
#[inline]
pub fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}
