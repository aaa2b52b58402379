use std::cmp::Ordering;
use std::ops::{Div, Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn as_f64(self) -> f64 {
        match self {
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
            Sign::Positive => 1.0,
        }
    }

    fn from_f64(s: f64) -> Self {
        match s.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Sign::Positive,
            Some(Ordering::Less) => Sign::Negative,
            _ => Sign::Zero,
        }
    }
}

/// A real number stored as a sign and the natural log of its magnitude.
///
/// Volumes and partition functions are products of Gamma values far outside
/// the range of `f64`; everything downstream works with `LogNumber`s or plain
/// logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNumber {
    pub sign: Sign,
    /// Ignored when `sign` is `Zero`.
    pub log_abs: f64,
}

impl LogNumber {
    pub const ZERO: LogNumber = LogNumber {
        sign: Sign::Zero,
        log_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogNumber = LogNumber {
        sign: Sign::Positive,
        log_abs: 0.0,
    };

    pub fn from_log(log_abs: f64) -> Self {
        LogNumber {
            sign: Sign::Positive,
            log_abs,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            LogNumber {
                sign: Sign::from_f64(x),
                log_abs: x.abs().ln(),
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == Sign::Zero
    }

    /// Converts back to `f64`, overflowing to infinity when out of range.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            s => s.as_f64() * self.log_abs.exp(),
        }
    }

    pub fn powf(self, exponent: f64) -> Result<Self> {
        match self.sign {
            Sign::Negative => Err(domain("real power of a negative LogNumber")),
            Sign::Zero if exponent > 0.0 => Ok(Self::ZERO),
            Sign::Zero => Err(domain("non-positive power of zero")),
            Sign::Positive => Ok(Self::from_log(self.log_abs * exponent)),
        }
    }

    /// Signed sum, computed without leaving the log domain.
    pub fn add(self, other: LogNumber) -> LogNumber {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_abs >= other.log_abs {
            (self, other)
        } else {
            (other, self)
        };
        let delta = small.log_abs - big.log_abs;
        if big.sign == small.sign {
            LogNumber {
                sign: big.sign,
                log_abs: big.log_abs + delta.exp().ln_1p(),
            }
        } else if delta == 0.0 {
            Self::ZERO
        } else {
            LogNumber {
                sign: big.sign,
                log_abs: big.log_abs + (-delta.exp()).ln_1p(),
            }
        }
    }

    pub fn sub(self, other: LogNumber) -> LogNumber {
        self.add(-other)
    }
}

impl Mul for LogNumber {
    type Output = LogNumber;

    fn mul(self, rhs: LogNumber) -> LogNumber {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        LogNumber {
            sign: Sign::from_f64(self.sign.as_f64() * rhs.sign.as_f64()),
            log_abs: self.log_abs + rhs.log_abs,
        }
    }
}

impl Div for LogNumber {
    type Output = LogNumber;

    /// Division by zero yields a zero-signed value with `log_abs = +inf`.
    fn div(self, rhs: LogNumber) -> LogNumber {
        if rhs.is_zero() {
            return LogNumber {
                sign: Sign::Zero,
                log_abs: f64::INFINITY,
            };
        }
        if self.is_zero() {
            return Self::ZERO;
        }
        LogNumber {
            sign: Sign::from_f64(self.sign.as_f64() * rhs.sign.as_f64()),
            log_abs: self.log_abs - rhs.log_abs,
        }
    }
}

impl Neg for LogNumber {
    type Output = LogNumber;

    fn neg(self) -> LogNumber {
        LogNumber {
            sign: Sign::from_f64(-self.sign.as_f64()),
            log_abs: self.log_abs,
        }
    }
}

/// `ln Σ exp(v_i)` with the maximum factored out; `-inf` entries are allowed.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(domain("log_sum_exp of an empty sequence"));
    }
    if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(domain("log_sum_exp requires finite or -inf values"));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `ln( (1/N) Σ exp(v_i) )`.
pub fn log_mean_exp(values: &[f64]) -> Result<f64> {
    Ok(log_sum_exp(values)? - (values.len() as f64).ln())
}
