//! Exact and log-domain arithmetic: factorials, binomials and the
//! hypergeometric ratio `C(N - drop, m) / C(N, m)` behind every moment.
//!
//! Log values are natural logarithms throughout. Quantities in base `b`
//! are derived at the presentation layer via [`LogValue::log_base`].

use std::fmt;
use std::ops::{Div, Mul};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type ExactInt = BigUint;
pub type ExactRational = BigRational;

/// Smallest argument accepted by the Stirling evaluation of `ln n!`.
pub const STIRLING_MIN: u64 = 20;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// A nonnegative quantity stored as its natural logarithm.
///
/// Zero is represented explicitly, so products of astronomically small
/// probabilities never underflow to a bogus `-inf` arithmetic chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    is_zero: bool,
    log_magnitude: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue {
        is_zero: true,
        log_magnitude: 0.0,
    };
    pub const ONE: LogValue = LogValue {
        is_zero: false,
        log_magnitude: 0.0,
    };

    /// Wraps a natural logarithm. `-inf` maps to zero.
    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan(), "LogValue::from_ln(NaN)");
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue {
                is_zero: false,
                log_magnitude: ln,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x >= 0.0, "LogValue holds nonnegative quantities, got {x}");
        if x == 0.0 {
            Self::ZERO
        } else {
            Self::from_ln(x.ln())
        }
    }

    pub fn from_biguint(x: &BigUint) -> Self {
        if x.is_zero() {
            Self::ZERO
        } else {
            Self::from_ln(ln_biguint(x))
        }
    }

    /// Panics on a negative rational.
    pub fn from_rational(x: &BigRational) -> Self {
        assert!(!x.is_negative(), "LogValue holds nonnegative quantities");
        if x.is_zero() {
            return Self::ZERO;
        }
        let num = x.numer().magnitude();
        let den = x.denom().magnitude();
        Self::from_ln(ln_biguint(num) - ln_biguint(den))
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    /// Natural log; `-inf` for zero.
    pub fn ln(&self) -> f64 {
        if self.is_zero {
            f64::NEG_INFINITY
        } else {
            self.log_magnitude
        }
    }

    pub fn log_base(&self, base: f64) -> f64 {
        self.ln() / base.ln()
    }

    /// Overflows to `inf` or underflows to `0.0` outside the f64 range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero {
            0.0
        } else {
            self.log_magnitude.exp()
        }
    }

    pub fn powi(self, exponent: i64) -> Self {
        if self.is_zero {
            if exponent == 0 {
                return Self::ONE;
            }
            assert!(exponent > 0, "zero raised to a negative power");
            return Self::ZERO;
        }
        Self::from_ln(self.log_magnitude * exponent as f64)
    }
}

impl Mul for LogValue {
    type Output = LogValue;

    fn mul(self, rhs: LogValue) -> LogValue {
        if self.is_zero || rhs.is_zero {
            LogValue::ZERO
        } else {
            LogValue::from_ln(self.log_magnitude + rhs.log_magnitude)
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;

    fn div(self, rhs: LogValue) -> LogValue {
        assert!(!rhs.is_zero, "division by a zero LogValue");
        if self.is_zero {
            LogValue::ZERO
        } else {
            LogValue::from_ln(self.log_magnitude - rhs.log_magnitude)
        }
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero {
            write!(f, "0")
        } else {
            write!(f, "exp({})", self.log_magnitude)
        }
    }
}

/// Natural log of an arbitrary-precision integer (must be nonzero).
pub fn ln_biguint(x: &BigUint) -> f64 {
    debug_assert!(!x.is_zero());
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits in u64") as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top 64 bits");
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorialMode {
    /// Compensated sum of `ln i` for `i <= n`.
    ExactSum,
    /// Stirling series through the `n^-7` term; requires `n >= 20`.
    Stirling,
}

/// `ln(n!)` in the requested mode.
pub fn log_factorial(n: u64, mode: FactorialMode) -> Result<f64> {
    match mode {
        FactorialMode::ExactSum => Ok(log_factorial_sum(n)),
        FactorialMode::Stirling => {
            if n < STIRLING_MIN {
                return Err(Error::InvalidRange(format!(
                    "Stirling mode needs n >= {STIRLING_MIN}, got {n}; use the exact sum"
                )));
            }
            Ok(stirling_ln_factorial(n as f64))
        }
    }
}

fn log_factorial_sum(n: u64) -> f64 {
    // Neumaier summation keeps the accumulated error near one ulp.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 2..=n {
        let term = (i as f64).ln();
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Tail of the Stirling series, `ln x! - [(x + 1/2) ln x - x + ln(2 pi)/2]`.
/// The first omitted term is `1/(1188 x^9)`, below `2e-15` for `x >= 20`.
fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn stirling_ln_factorial(x: f64) -> f64 {
    (x + 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x)
}

/// Fast `ln(n!)`: exact product below the Stirling threshold, series above.
pub fn ln_factorial(n: u64) -> f64 {
    if n < STIRLING_MIN {
        // 19! < 2^63, so the product is exact.
        let fact: u64 = (2..=n).product();
        (fact as f64).ln()
    } else {
        stirling_ln_factorial(n as f64)
    }
}

/// `ln[(a + h)! / a!]`, evaluated without forming either factorial.
pub fn ln_rising_factorial_ratio(a: u64, h: u64) -> f64 {
    if h == 0 {
        return 0.0;
    }
    if a < STIRLING_MIN {
        return ln_factorial(a + h) - ln_factorial(a);
    }
    let af = a as f64;
    let hf = h as f64;
    (af + 0.5) * (hf / af).ln_1p() + hf * (af + hf).ln() - hf
        + (stirling_tail(af + hf) - stirling_tail(af))
}

/// `C(n, k)` exactly; zero outside `0 <= k <= n`.
pub fn exact_binomial(n: u64, k: i64) -> ExactInt {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Exact `C(total - drop, m) / C(total, m)`.
pub fn exact_binomial_ratio(total: u64, m: u64, drop: u64) -> Result<ExactRational> {
    if m > total {
        return Err(Error::InvalidRange(format!(
            "m = {m} must lie in [0, N = {total}]"
        )));
    }
    let remaining = total.checked_sub(drop);
    let num = match remaining {
        Some(r) => exact_binomial(r, m as i64),
        None => BigUint::zero(),
    };
    let den = exact_binomial(total, m as i64);
    Ok(BigRational::new(num.into(), den.into()))
}

/// `ln[C(total - drop, m) / C(total, m)]` as a difference of log-factorials.
///
/// The large `ln` terms that cancel between numerator and denominator are
/// combined analytically, so the absolute error stays near `drop * 1e-16`
/// even when `total` is of order `1e16`.
pub fn log_binomial_ratio(total: u64, m: u64, drop: u64) -> Result<LogValue> {
    if m > total {
        return Err(Error::InvalidRange(format!(
            "m = {m} must lie in [0, N = {total}]"
        )));
    }
    if drop == 0 {
        return Ok(LogValue::ONE);
    }
    if drop > total || m > total - drop {
        return Ok(LogValue::ZERO);
    }
    // ratio = [(N-m)! / (N-m-h)!] / [N! / (N-h)!]
    let free_after = total - m - drop;
    let kept_after = total - drop;
    if free_after < STIRLING_MIN {
        let ln = ln_rising_factorial_ratio(free_after, drop)
            - ln_rising_factorial_ratio(kept_after, drop);
        return Ok(LogValue::from_ln(ln));
    }
    let n = total as f64;
    let h = drop as f64;
    let a1 = free_after as f64;
    let a2 = kept_after as f64;
    let ln = h * (-(m as f64) / n).ln_1p() + (a1 + 0.5) * (h / a1).ln_1p()
        - (a2 + 0.5) * (h / a2).ln_1p()
        + (stirling_tail((total - m) as f64) - stirling_tail(a1))
        - (stirling_tail(n) - stirling_tail(a2));
    Ok(LogValue::from_ln(ln))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pascal(n: usize) -> Vec<Vec<u128>> {
        let mut rows = vec![vec![1u128]];
        for i in 1..=n {
            let prev = &rows[i - 1];
            let mut row = vec![1u128; i + 1];
            for j in 1..i {
                row[j] = prev[j - 1] + prev[j];
            }
            rows.push(row);
        }
        rows
    }

    #[test]
    fn log_factorial_small_values() {
        assert_eq!(log_factorial(0, FactorialMode::ExactSum).unwrap(), 0.0);
        let v = log_factorial(10, FactorialMode::ExactSum).unwrap();
        assert!((v - 3_628_800f64.ln()).abs() < 1e-12);
        assert!((v - 15.104_412_573_075_516).abs() < 1e-12);
    }

    #[test]
    fn stirling_rejects_small_arguments() {
        assert!(log_factorial(19, FactorialMode::Stirling).is_err());
        assert!(log_factorial(20, FactorialMode::Stirling).is_ok());
    }

    #[test]
    fn stirling_matches_exact_product_near_threshold() {
        // 20! .. 25! are exact in u128; compare against their logs
        let mut fact: u128 = (2..=19u128).product();
        for n in 20u64..=30 {
            fact *= n as u128;
            let exact = ln_biguint(&BigUint::from(fact));
            let approx = log_factorial(n, FactorialMode::Stirling).unwrap();
            assert!((exact - approx).abs() < 1e-12, "n={n}: {exact} vs {approx}");
        }
    }

    #[test]
    fn stirling_agrees_with_sum_at_one_million() {
        let sum = log_factorial(1_000_000, FactorialMode::ExactSum).unwrap();
        let st = log_factorial(1_000_000, FactorialMode::Stirling).unwrap();
        assert!(((sum - st) / sum).abs() < 1e-10, "{sum} vs {st}");
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(exact_binomial(6, 3), BigUint::from(20u32));
        assert_eq!(exact_binomial(7, 0), BigUint::from(1u32));
        assert_eq!(exact_binomial(2, 3), BigUint::zero());
        assert_eq!(exact_binomial(2, -1), BigUint::zero());
    }

    #[test]
    fn binomial_matches_pascal_triangle() {
        let rows = pascal(60);
        for n in 0..=60u64 {
            for k in 0..=n {
                assert_eq!(
                    exact_binomial(n, k as i64),
                    BigUint::from(rows[n as usize][k as usize])
                );
            }
        }
    }

    #[test]
    fn log_binomial_ratio_examples() {
        let v = log_binomial_ratio(6, 3, 2).unwrap();
        assert!((v.ln() - 0.2f64.ln()).abs() < 1e-12);
        assert_eq!(log_binomial_ratio(6, 3, 0).unwrap(), LogValue::ONE);
        assert!(log_binomial_ratio(6, 3, 4).unwrap().is_zero());
        assert!(log_binomial_ratio(6, 7, 0).is_err());
    }

    #[test]
    fn log_binomial_ratio_matches_exact_quotient() {
        for total in 0..=60u64 {
            for m in 0..=total {
                for drop in 0..=total {
                    let exact = exact_binomial_ratio(total, m, drop).unwrap();
                    let lv = log_binomial_ratio(total, m, drop).unwrap();
                    if exact.is_zero() {
                        assert!(lv.is_zero(), "N={total} m={m} drop={drop}");
                        continue;
                    }
                    let want = LogValue::from_rational(&exact).ln();
                    let rel = (lv.ln() - want).exp_m1().abs();
                    assert!(rel < 1e-12, "N={total} m={m} drop={drop}: rel {rel}");
                }
            }
        }
    }

    #[test]
    fn log_binomial_ratio_large_arguments_match_direct_sum() {
        // ln ratio = sum_{i<h} ln(1 - m/(N-i)); direct for moderate h
        let total = 499_500u64;
        let m = total / 2;
        let drop = 4_500u64;
        let direct: f64 = (0..drop)
            .map(|i| (-(m as f64) / (total - i) as f64).ln_1p())
            .sum();
        let v = log_binomial_ratio(total, m, drop).unwrap().ln();
        assert!((v - direct).abs() < 1e-8, "{v} vs {direct}");
    }

    #[test]
    fn log_value_roundtrip_and_algebra() {
        for &x in &[1e-300, 1e-5, 0.37, 1.0, 42.0, 1e300] {
            let lv = LogValue::from_f64(x);
            assert!(((lv.to_f64() - x) / x).abs() < 1e-12);
        }
        let a = LogValue::from_f64(6.0);
        let b = LogValue::from_f64(3.0);
        assert!(((a * b).to_f64() - 18.0).abs() < 1e-12);
        assert!(((a / b).to_f64() - 2.0).abs() < 1e-12);
        assert!((a * LogValue::ZERO).is_zero());
        assert_eq!(LogValue::ZERO.ln(), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_biguint_wide_values() {
        let big = exact_binomial(1000, 500);
        let ln = ln_biguint(&big);
        let want = ln_factorial(1000) - 2.0 * ln_factorial(500);
        assert!((ln - want).abs() < 1e-9);
    }
}
