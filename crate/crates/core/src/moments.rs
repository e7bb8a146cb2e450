//! First moment of the number of ordered equitable colourings: `gamma(n)`,
//! `mu_{n,k}`, `mu_bar_{n,k}` in exact, log-domain and asymptotic form,
//! plus numeric diagnostics for the growth rate of `mu_bar` and its steps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numerics::{
    exact_binomial_ratio, ln_factorial, log_binomial_ratio, ExactRational, LogValue,
};
use crate::partitions::{
    count_partitions_exact, enumerate_equipartitions, ln_partition_count, shape,
    EquipartitionShape,
};

/// Largest `n` accepted by the exact first-moment mode.
pub const EXACT_MU_MAX_N: u64 = 60;
/// Largest `n` accepted by the brute-force first-moment oracle.
pub const BRUTEFORCE_MU_MAX_N: u64 = 10;
/// Keeps `N = C(n, 2)` and `f` comfortably inside `u64`.
pub const MAX_N: u64 = 4_000_000_000;

/// `1 - 1/e^2`, the upper end of the admissible edge densities.
pub fn density_limit() -> f64 {
    1.0 - (-2.0f64).exp()
}

/// Edge density `p` held as an exact fraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Density {
    ratio: BigRational,
    num: u64,
    den: u64,
}

impl Density {
    /// Requires `0 < p < 1 - 1/e^2`.
    pub fn new(ratio: BigRational) -> Result<Self> {
        let d = Self::with_override(ratio)?;
        if d.as_f64() >= density_limit() {
            return Err(Error::Hypothesis(d.to_string()));
        }
        Ok(d)
    }

    /// Any `0 < p < 1`; for exploring outside the admissible range.
    pub fn with_override(ratio: BigRational) -> Result<Self> {
        if !ratio.is_positive() || ratio >= BigRational::one() {
            return Err(Error::Hypothesis(ratio.to_string()));
        }
        let num = ratio.numer().to_u64();
        let den = ratio.denom().to_u64();
        match (num, den) {
            (Some(num), Some(den)) if den <= u32::MAX as u64 => Ok(Density { ratio, num, den }),
            _ => Err(Error::Parse(format!(
                "density {ratio} needs a denominator below 2^32"
            ))),
        }
    }

    pub fn from_fraction(num: u64, den: u64) -> Result<Self> {
        Self::new(BigRational::new(num.into(), den.into()))
    }

    pub fn ratio(&self) -> &BigRational {
        &self.ratio
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn q(&self) -> f64 {
        (self.den - self.num) as f64 / self.den as f64
    }

    /// `ln b = -ln(1 - p)`.
    pub fn ln_b(&self) -> f64 {
        -(-self.as_f64()).ln_1p()
    }

    pub fn b(&self) -> f64 {
        self.den as f64 / (self.den - self.num) as f64
    }

    /// `m = floor(p N)`.
    pub fn edges(&self, total_pairs: u64) -> u64 {
        let m = total_pairs as u128 * self.num as u128 / self.den as u128;
        m as u64
    }

    /// `epsilon = p N - m`, exactly.
    pub fn epsilon(&self, total_pairs: u64) -> ExactRational {
        let pn = &self.ratio * BigRational::from_integer(BigInt::from(total_pairs));
        &pn - BigRational::from_integer(pn.floor().to_integer())
    }
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Parses `"1/2"`, `"3"` or a finite decimal such as `"0.25"` exactly.
pub fn parse_fraction(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not an exact fraction: {s:?}"));
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let num = BigInt::from_str(&digits).map_err(|_| bad())?;
        let den = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(BigRational::new(num, den));
    }
    let r = BigRational::from_str(s).map_err(|_| bad())?;
    Ok(r)
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Density::new(parse_fraction(s)?)
    }
}

/// `N = C(n, 2)`.
pub fn total_pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// `gamma(n) = 2 log_b n - 2 log_b log_b n - 2 log_b 2`, base given by `ln b`.
pub fn gamma_ln_base(n: u64, ln_b: f64) -> Result<f64> {
    let log_b_n = (n as f64).ln() / ln_b;
    if log_b_n.is_nan() || log_b_n < 1.0 {
        return Err(Error::Domain(format!(
            "gamma needs log_b n >= 1, got log_b {n} = {log_b_n}"
        )));
    }
    Ok(2.0 * log_b_n - 2.0 * log_b_n.ln() / ln_b - 2.0 * std::f64::consts::LN_2 / ln_b)
}

pub fn gamma(n: u64, b: f64) -> Result<f64> {
    if b.is_nan() || b <= 1.0 {
        return Err(Error::Domain(format!("base b = {b} must exceed 1")));
    }
    gamma_ln_base(n, b.ln())
}

/// All scalar quantities attached to `(n, k, p)`.
#[derive(Debug, Clone)]
pub struct MomentParams {
    pub n: u64,
    pub k: u64,
    pub p: Density,
    /// `N = C(n, 2)`.
    pub total_pairs: u64,
    /// `m = floor(p N)`.
    pub m: u64,
    pub epsilon: ExactRational,
    /// `None` when `log_b n < 1`.
    pub gamma: Option<f64>,
    pub shape: EquipartitionShape,
}

impl MomentParams {
    pub fn new(n: u64, k: u64, p: &Density) -> Result<Self> {
        if n > MAX_N {
            return Err(Error::InvalidRange(format!("n = {n} exceeds {MAX_N}")));
        }
        let shape = shape(n, k)?;
        let total_pairs = total_pairs(n);
        Ok(MomentParams {
            n,
            k,
            p: p.clone(),
            total_pairs,
            m: p.edges(total_pairs),
            epsilon: p.epsilon(total_pairs),
            gamma: gamma_ln_base(n, p.ln_b()).ok(),
            shape,
        })
    }

    pub fn q(&self) -> f64 {
        self.p.q()
    }

    pub fn b(&self) -> f64 {
        self.p.b()
    }

    pub fn ln_b(&self) -> f64 {
        self.p.ln_b()
    }

    pub fn forbidden(&self) -> u64 {
        self.shape.forbidden
    }

    /// `n / k` when integral.
    pub fn j(&self) -> Option<u64> {
        self.shape.part_size()
    }

    pub fn require_j(&self) -> Result<u64> {
        self.j().ok_or(Error::NonIntegralPartSize {
            n: self.n,
            k: self.k,
        })
    }

    fn ln_symmetry(&self) -> f64 {
        ln_factorial(self.shape.k_large) + ln_factorial(self.shape.k_small)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMode {
    Exact,
    LogDomain,
    Asymptotic,
}

impl FromStr for MomentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MomentMode::Exact),
            "log" | "log_domain" | "log-domain" => Ok(MomentMode::LogDomain),
            "asymptotic" => Ok(MomentMode::Asymptotic),
            _ => Err(Error::Parse(format!("unknown moment mode {s:?}"))),
        }
    }
}

impl fmt::Display for MomentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MomentMode::Exact => "exact",
            MomentMode::LogDomain => "log",
            MomentMode::Asymptotic => "asymptotic",
        })
    }
}

#[derive(Debug, Clone)]
pub struct MomentResult {
    /// Expected number of valid ordered equipartitions.
    pub mu: LogValue,
    /// Same, unordered: `mu / (k_L! k_S!)`.
    pub mu_bar: LogValue,
    pub mode: MomentMode,
    /// Exact `(mu, mu_bar)`, exact mode only.
    pub exact: Option<(ExactRational, ExactRational)>,
}

fn factorial_big(x: u64) -> BigUint {
    (1..=x).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn mu(params: &MomentParams, mode: MomentMode) -> Result<MomentResult> {
    let sh = &params.shape;
    match mode {
        MomentMode::Exact => {
            if params.n > EXACT_MU_MAX_N {
                return Err(Error::SizeGuard {
                    what: "exact first moment",
                    limit: EXACT_MU_MAX_N,
                    got: params.n,
                });
            }
            let count = count_partitions_exact(params.n, params.k)?;
            let prob = exact_binomial_ratio(params.total_pairs, params.m, sh.forbidden)?;
            let mu = BigRational::from_integer(count.into()) * prob;
            let sym = factorial_big(sh.k_large) * factorial_big(sh.k_small);
            let mu_bar = &mu / BigRational::from_integer(sym.into());
            Ok(MomentResult {
                mu: LogValue::from_rational(&mu),
                mu_bar: LogValue::from_rational(&mu_bar),
                mode,
                exact: Some((mu, mu_bar)),
            })
        }
        MomentMode::LogDomain | MomentMode::Asymptotic => {
            let ln_p = ln_partition_count(sh);
            let mu = if mode == MomentMode::LogDomain {
                LogValue::from_ln(ln_p) * log_binomial_ratio(params.total_pairs, params.m, sh.forbidden)?
            } else {
                let f = sh.forbidden as f64;
                let n_pairs = params.total_pairs as f64;
                let correction = if n_pairs > 0.0 {
                    f * f * params.p.as_f64() / (2.0 * params.q() * n_pairs)
                } else {
                    0.0
                };
                LogValue::from_ln(ln_p - f * params.ln_b() - correction)
            };
            let mu_bar = mu / LogValue::from_ln(params.ln_symmetry());
            Ok(MomentResult {
                mu,
                mu_bar,
                mode,
                exact: None,
            })
        }
    }
}

/// Log-domain first moments without building [`MomentParams`]; used by
/// sweeps that evaluate millions of `(n, k)` points.
#[derive(Debug, Clone)]
pub struct FirstMoment {
    p: Density,
}

impl FirstMoment {
    pub fn new(p: &Density) -> Self {
        FirstMoment { p: p.clone() }
    }

    pub fn density(&self) -> &Density {
        &self.p
    }

    fn parts(&self, n: u64, k: u64) -> (u64, u64, u64, u64) {
        let small = n / k;
        let k_large = n % k;
        let k_small = k - k_large;
        let forbidden = k_large * (small + 1) * small / 2 + k_small * small * small.saturating_sub(1) / 2;
        (small, k_large, k_small, forbidden)
    }

    /// `ln mu_{n,k}`; requires `1 <= k <= n`.
    pub fn ln_mu(&self, n: u64, k: u64) -> f64 {
        assert!(k >= 1 && k <= n, "need 1 <= k <= n");
        let (small, k_large, k_small, forbidden) = self.parts(n, k);
        let total = total_pairs(n);
        let ln_p = ln_factorial(n)
            - k_large as f64 * ln_factorial(small + 1)
            - k_small as f64 * ln_factorial(small);
        let ratio = log_binomial_ratio(total, self.p.edges(total), forbidden)
            .expect("m <= N by construction");
        ln_p + ratio.ln()
    }

    /// `ln mu_bar_{n,k}`.
    pub fn ln_mu_bar(&self, n: u64, k: u64) -> f64 {
        let (_, k_large, k_small, _) = self.parts(n, k);
        self.ln_mu(n, k) - ln_factorial(k_large) - ln_factorial(k_small)
    }
}

/// Sum over all ordered equipartitions of the probability that each one
/// is a proper colouring.
pub fn mu_bruteforce(n: u64, k: u64, p: &Density) -> Result<ExactRational> {
    if n > BRUTEFORCE_MU_MAX_N {
        return Err(Error::SizeGuard {
            what: "brute-force first moment",
            limit: BRUTEFORCE_MU_MAX_N,
            got: n,
        });
    }
    let total = total_pairs(n);
    let m = p.edges(total);
    // partitions tallied by their own forbidden-edge count
    let mut by_forbidden: BTreeMap<u64, u64> = BTreeMap::new();
    let mut iter = enumerate_equipartitions(n, k)?;
    let mut sizes = vec![0u64; k as usize];
    while let Some(assign) = iter.next_assignment() {
        sizes.iter_mut().for_each(|s| *s = 0);
        for &c in assign {
            sizes[c] += 1;
        }
        let f: u64 = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
        *by_forbidden.entry(f).or_insert(0) += 1;
    }
    let mut acc = BigRational::zero();
    for (f, count) in by_forbidden {
        acc += exact_binomial_ratio(total, m, f)? * BigRational::from_integer(count.into());
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateDiagnostic {
    pub n: u64,
    pub x_input: f64,
    pub k: u64,
    /// `n/k - gamma(n)` for the rounded `k`.
    pub x_realized: f64,
    /// `log_b(mu_bar_{n,k}) / n`.
    pub mu_bar_log_b_per_n: f64,
    /// `-x_realized / 2`.
    pub predicted: f64,
    /// `mu_bar_log_b_per_n - predicted`.
    pub slack: f64,
}

pub fn rate_diagnostic(n: u64, x: f64, p: &Density) -> Result<RateDiagnostic> {
    let ln_b = p.ln_b();
    let g = gamma_ln_base(n, ln_b)?;
    let k = (n as f64 / (g + x)).round();
    if !(k >= 1.0 && k <= n as f64) {
        return Err(Error::Domain(format!(
            "k = round(n/(gamma + x)) = {k} is out of range for n = {n}"
        )));
    }
    let k = k as u64;
    let x_realized = n as f64 / k as f64 - g;
    let fm = FirstMoment::new(p);
    let value = fm.ln_mu_bar(n, k) / ln_b / n as f64;
    let predicted = -x_realized / 2.0;
    Ok(RateDiagnostic {
        n,
        x_input: x,
        k,
        x_realized,
        mu_bar_log_b_per_n: value,
        predicted,
        slack: value - predicted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub n: u64,
    pub k: u64,
    /// `|n/k - gamma| > 10`: too far from `gamma` for the asymptotics to apply.
    pub out_of_regime: bool,
    /// `ln(mu_{n,k+1} / mu_{n,k})`.
    pub mu_step_ln: f64,
    /// `ln b * (n^2/(2k(k+1)) - n/(2k))`.
    pub mu_step_bound_ln: f64,
    /// `max(0, bound - step)`.
    pub mu_step_deficit: f64,
    /// `ln(mu_bar_{n,k+1} / mu_bar_{n,k})`.
    pub mu_bar_step_ln: f64,
    /// `mu_bar_step_ln / (ln n ln ln n)`.
    pub mu_bar_step_scaled: f64,
    /// `ln(mu_{n+1,k} / mu_{n,k})`.
    pub vertex_step_ln: f64,
    /// `ln(ln n / n)`.
    pub vertex_step_reference_ln: f64,
    /// `vertex_step_ln - vertex_step_reference_ln`.
    pub vertex_step_offset: f64,
}

pub fn step_diagnostics(n: u64, k: u64, p: &Density) -> Result<StepDiagnostics> {
    if k < 1 || k + 1 > n {
        return Err(Error::InvalidRange(format!(
            "need 1 <= k and k + 1 <= n, got n = {n}, k = {k}"
        )));
    }
    let ln_b = p.ln_b();
    let g = gamma_ln_base(n, ln_b)?;
    let fm = FirstMoment::new(p);
    let (nf, kf) = (n as f64, k as f64);
    let mu_step_ln = fm.ln_mu(n, k + 1) - fm.ln_mu(n, k);
    let mu_step_bound_ln = ln_b * (nf * nf / (2.0 * kf * (kf + 1.0)) - nf / (2.0 * kf));
    let mu_bar_step_ln = fm.ln_mu_bar(n, k + 1) - fm.ln_mu_bar(n, k);
    let vertex_step_ln = fm.ln_mu(n + 1, k) - fm.ln_mu(n, k);
    let vertex_step_reference_ln = (nf.ln() / nf).ln();
    Ok(StepDiagnostics {
        n,
        k,
        out_of_regime: (nf / kf - g).abs() > 10.0,
        mu_step_ln,
        mu_step_bound_ln,
        mu_step_deficit: (mu_step_bound_ln - mu_step_ln).max(0.0),
        mu_bar_step_ln,
        mu_bar_step_scaled: mu_bar_step_ln / (nf.ln() * nf.ln().ln()),
        vertex_step_ln,
        vertex_step_reference_ln,
        vertex_step_offset: vertex_step_ln - vertex_step_reference_ln,
    })
}

/// `k = round(n / gamma(n))`.
pub fn typical_k(n: u64, p: &Density) -> Result<u64> {
    let g = gamma_ln_base(n, p.ln_b())?;
    Ok(((n as f64 / g).round() as u64).clamp(1, n))
}

/// Smallest divisor of `n` that is at least `round(n / gamma(n))`, so that
/// `j = n/k` is an integer not exceeding `gamma` (up to rounding).
pub fn divisor_k_near_gamma(n: u64, p: &Density) -> Result<u64> {
    let target = typical_k(n, p)?;
    Ok((target..=n).find(|&k| n.is_multiple_of(k)).unwrap_or(n))
}
