//! Log-space arithmetic for quantities that underflow `f64`.
//!
//! Scale sequences such as `2 * 3^-n` leave the normal range near `n = 700`,
//! so sums and differences are carried as natural logarithms.

use serde::{Deserialize, Serialize};

/// `ln(e^a + e^b)` without overflow or underflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(sum e^x)` over an iterator, using a running maximum.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(e^a - e^b)` for `a >= b`. Returns `-inf` when `a == b`.
#[inline]
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b || a.is_nan() || b.is_nan());
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp_m1()).ln()
}

/// `ln(1 - e^x)` for `x < 0`, accurate on both ends.
#[inline]
pub fn log1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// A real number stored as sign and log-magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    /// -1, 0 or +1.
    pub sign: i8,
    /// `ln |x|`; `-inf` when `sign == 0`.
    pub ln_abs: f64,
}

impl SignedLog {
    pub fn zero() -> Self {
        SignedLog {
            sign: 0,
            ln_abs: f64::NEG_INFINITY,
        }
    }

    /// `e^a - e^b` as a signed log value.
    pub fn difference(a: f64, b: f64) -> Self {
        if a == b {
            Self::zero()
        } else if a > b {
            SignedLog {
                sign: 1,
                ln_abs: log_sub_exp(a, b),
            }
        } else {
            SignedLog {
                sign: -1,
                ln_abs: log_sub_exp(b, a),
            }
        }
    }

    pub fn value(&self) -> f64 {
        f64::from(self.sign) * self.ln_abs.exp()
    }

    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_exp_matches_direct_sum_in_range() {
        let a = 0.5f64;
        let b = 2.0f64;
        let direct = (a.exp() + b.exp()).ln();
        assert!((log_add_exp(a, b) - direct).abs() < 1e-15);
    }

    #[test]
    fn add_exp_survives_overflow() {
        // ln(e^1234 + e^1232) = 1232 + ln(e^2 + 1)
        let expected = 1232.0 + (2f64.exp() + 1.0).ln();
        assert!((log_add_exp(1234.0, 1232.0) - expected).abs() < 1e-12);
        assert!((1234f64.exp() + 1232f64.exp()).ln().is_infinite());
    }

    #[test]
    fn sum_exp_of_empty_is_neg_inf() {
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
    }

    #[test]
    fn sub_exp_deep_underflow() {
        // e^-1000 - e^-1001 = e^-1000 (1 - e^-1)
        let expected = -1000.0 + (1.0 - (-1f64).exp()).ln();
        assert!((log_sub_exp(-1000.0, -1001.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn log1m_exp_both_branches() {
        for &x in &[-0.1, -0.7, -5.0, -40.0] {
            let direct = (1.0 - f64::exp(x)).ln();
            let got = log1m_exp(x);
            assert!(
                (got - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                "x = {x}"
            );
        }
        // 1 - e^-1e-10 = 1e-10 - 5e-21 + ...
        assert!((log1m_exp(-1e-10) - (1e-10f64 - 5e-21).ln()).abs() < 1e-12);
    }

    #[test]
    fn signed_difference() {
        let d = SignedLog::difference((2.0f64 / 3.0).ln(), (1.0f64 / 3.0).ln());
        assert_eq!(d.sign, 1);
        assert!((d.value() - 1.0 / 3.0).abs() < 1e-15);
        let neg = SignedLog::difference(0.0, 1.0);
        assert_eq!(neg.sign, -1);
        assert_eq!(SignedLog::difference(3.0, 3.0).sign, 0);
    }
}
