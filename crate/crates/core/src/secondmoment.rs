//! Second moment of the number of ordered equitable colourings.
//!
//! `S_r` in exact and asymptotic form, the constants `c` and `c_tilde`,
//! the `T_i` sequence, and brute-force `E[X^2] / E[X]^2` via two routes.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{density_limit, mu, total_pairs, Density, MomentMode, MomentParams};
use crate::numerics::{
    exact_binomial_ratio, ln_factorial, log_binomial_ratio, ExactRational, LogValue,
};
use crate::partitions::{
    count_pairs_with_overlap, count_partitions_exact, enumerate_equipartitions, shape,
    OverlapSequence, ALL_PAIRS_MAX_COUNT, PAIR_CENSUS_MAX_N,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SMode {
    Exact,
    Asymptotic,
}

/// `S = C(N - 2f + d, m) C(N, m) / C(N - f, m)^2` for `d` shared forbidden
/// edges.
pub fn s_value(params: &MomentParams, d: u64, mode: SMode) -> Result<LogValue> {
    let f = params.forbidden();
    if d > f {
        return Err(Error::InvalidRange(format!("need 0 <= d <= f = {f}, got d = {d}")));
    }
    match mode {
        SMode::Exact => {
            let union = log_binomial_ratio(params.total_pairs, params.m, 2 * f - d)?;
            let single = log_binomial_ratio(params.total_pairs, params.m, f)?;
            if union.is_zero() {
                return Ok(LogValue::ZERO);
            }
            if single.is_zero() {
                return Err(Error::ZeroFirstMoment);
            }
            Ok(union / (single * single))
        }
        SMode::Asymptotic => {
            let (df, ff, nn) = (d as f64, f as f64, params.total_pairs as f64);
            let p = params.p.as_f64();
            let quad = p * (df * df + 2.0 * ff * ff - 4.0 * df * ff) / (2.0 * params.q() * nn);
            Ok(LogValue::from_ln(df * params.ln_b() - quad))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMomentConstants {
    /// `(1 - ln b / 2) / 2`.
    pub c: f64,
    /// `min((1/ln b - 1/2) / 2, 1/2)`.
    pub c_tilde: f64,
}

pub fn constants(p: &Density) -> Result<SecondMomentConstants> {
    if p.as_f64() >= density_limit() {
        return Err(Error::Hypothesis(p.to_string()));
    }
    let ln_b = p.ln_b();
    Ok(SecondMomentConstants {
        c: 0.5 * (1.0 - ln_b / 2.0),
        c_tilde: (0.5 * (1.0 / ln_b - 0.5)).min(0.5),
    })
}

/// `T_i = e^{rho i} b^{C(i,2)} k^2 j!^2 / (n^i i! (j-i)!^2)` for `2 <= i <= j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TSequence {
    pub j: u64,
    pub rho: f64,
    /// `(i, ln T_i)` for `i = 2..=j`.
    pub ln_terms: Vec<(u64, f64)>,
    /// `max_{3 <= i <= j} log_n T_i`; `None` when `j < 3`.
    pub max_log_n_from_3: Option<f64>,
    /// Index attaining the maximum.
    pub argmax_from_3: Option<u64>,
}

impl TSequence {
    pub fn ln_t(&self, i: u64) -> Option<f64> {
        self.ln_terms.iter().find(|(idx, _)| *idx == i).map(|&(_, v)| v)
    }

    /// `T_i` as a float when it is representable.
    pub fn value(&self, i: u64) -> Option<f64> {
        self.ln_t(i).map(f64::exp).filter(|v| v.is_finite() && *v > 0.0)
    }
}

pub fn t_sequence(params: &MomentParams, rho: f64) -> Result<TSequence> {
    let j = params.require_j()?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidRange(format!("rho = {rho} must lie in [0, 1]")));
    }
    let ln_n = (params.n as f64).ln();
    let ln_k = (params.k as f64).ln();
    let ln_b = params.ln_b();
    let ln_j_fact = ln_factorial(j);
    let ln_terms: Vec<(u64, f64)> = (2..=j)
        .map(|i| {
            let ln_t = rho * i as f64 + (i * (i - 1) / 2) as f64 * ln_b + 2.0 * ln_k + 2.0 * ln_j_fact
                - i as f64 * ln_n
                - ln_factorial(i)
                - 2.0 * ln_factorial(j - i);
            (i, ln_t)
        })
        .collect();
    let best = ln_terms
        .iter()
        .filter(|(i, _)| *i >= 3)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .copied();
    Ok(TSequence {
        j,
        rho,
        max_log_n_from_3: best.map(|(_, v)| v / ln_n),
        argmax_from_3: best.map(|(i, _)| i),
        ln_terms,
    })
}

/// `exp(-(b/2)(j-1)^2 (1 - e^{2/ln^3 n}))`, the bound on the contribution of
/// small overlaps.
pub fn r1_sum_estimate(params: &MomentParams) -> Result<f64> {
    let j = params.require_j()? as f64;
    let ln_n = (params.n as f64).ln();
    if ln_n <= 0.0 {
        return Err(Error::Domain("n must exceed 1".into()));
    }
    let growth = (2.0 / ln_n.powi(3)).exp_m1();
    Ok((params.b() / 2.0 * (j - 1.0).powi(2) * growth).exp())
}

/// `(2 e log_b n)^{R_3}`: bound on the number of `(r_3, .., r_j)` with sum `R_3`.
pub fn r3_count_bound(r3: u64, n: u64, b: f64) -> LogValue {
    if r3 == 0 {
        return LogValue::ONE;
    }
    let log_b_n = (n as f64).ln() / b.ln();
    LogValue::from_ln(r3 as f64 * (2.0 * std::f64::consts::E * log_b_n).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMethod {
    /// Sum over ordered partition pairs of the probability that the union
    /// of their forbidden edges is absent.
    PairEnum,
    /// Sum over overlap profiles of `P_r` times the per-profile probability.
    OverlapDecomposition,
}

#[derive(Debug, Clone)]
pub struct SecondMomentReport {
    pub method: RatioMethod,
    pub mu: ExactRational,
    pub second_moment: ExactRational,
    /// `E[X^2] / E[X]^2`.
    pub ratio: ExactRational,
    /// `Q_r S_r` per profile (overlap decomposition only; empty otherwise).
    pub by_overlap: BTreeMap<OverlapSequence, ExactRational>,
}

pub fn ratio_bruteforce(n: u64, k: u64, p: &Density, method: RatioMethod) -> Result<SecondMomentReport> {
    if n > PAIR_CENSUS_MAX_N {
        return Err(Error::SizeGuard {
            what: "brute-force second moment",
            limit: PAIR_CENSUS_MAX_N,
            got: n,
        });
    }
    let params = MomentParams::new(n, k, p)?;
    let first = mu(&params, MomentMode::Exact)?.exact.expect("exact mode").0;
    if first.is_zero() {
        return Err(Error::ZeroFirstMoment);
    }
    let total = total_pairs(n);
    let m = params.m;
    let f = shape(n, k)?.forbidden;
    let mut by_overlap = BTreeMap::new();
    let second = match method {
        RatioMethod::PairEnum => {
            let by_union = union_size_census(n, k)?;
            let mut acc = BigRational::zero();
            for (union, count) in by_union {
                acc += exact_binomial_ratio(total, m, union)? * BigRational::from_integer(count.into());
            }
            acc
        }
        RatioMethod::OverlapDecomposition => {
            let census = count_pairs_with_overlap(n, k)?;
            let mut acc = BigRational::zero();
            let mu_sq = &first * &first;
            for (profile, count) in census {
                let term = exact_binomial_ratio(total, m, 2 * f - profile.d())?
                    * BigRational::from_integer(count.into());
                by_overlap.insert(profile, &term / &mu_sq);
                acc += term;
            }
            acc
        }
    };
    let ratio = &second / (&first * &first);
    Ok(SecondMomentReport {
        method,
        mu: first,
        second_moment: second,
        ratio,
        by_overlap,
    })
}

/// Number of ordered pairs `(pi1, pi2)` by `|F(pi1) U F(pi2)|`, with
/// forbidden edge sets compared as bitmasks.
fn union_size_census(n: u64, k: u64) -> Result<BTreeMap<u64, BigUint>> {
    let masks: Vec<u64> = enumerate_equipartitions(n, k)?
        .map(|p| p.forbidden_mask())
        .collect();
    let tally = |first: u64| -> BTreeMap<u64, u64> {
        let mut out = BTreeMap::new();
        for &second in &masks {
            *out.entry((first | second).count_ones() as u64).or_insert(0) += 1;
        }
        out
    };
    let total = count_partitions_exact(n, k)?;
    let (counts, scale) = if masks.len() as u64 <= ALL_PAIRS_MAX_COUNT {
        let merged = masks
            .par_iter()
            .map(|&m| tally(m))
            .reduce(BTreeMap::new, |mut a, b| {
                for (key, c) in b {
                    *a.entry(key).or_insert(0) += c;
                }
                a
            });
        (merged, BigUint::from(1u32))
    } else {
        (tally(masks[0]), total)
    };
    Ok(counts
        .into_iter()
        .map(|(u, c)| (u, BigUint::from(c) * &scale))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> Density {
        Density::from_fraction(1, 2).unwrap()
    }

    #[test]
    fn s_value_examples() {
        let p = half();
        let params = MomentParams::new(4, 2, &p).unwrap();
        let s = s_value(&params, 2, SMode::Exact).unwrap();
        assert!((s.to_f64() - 5.0).abs() < 1e-12);
        assert!(s_value(&params, 0, SMode::Exact).unwrap().is_zero());
        assert!(s_value(&params, 3, SMode::Exact).is_err());

        let params = MomentParams::new(1000, 100, &p).unwrap();
        let f = params.forbidden() as f64;
        let want = -0.5 * f * f / (0.5 * params.total_pairs as f64);
        let got = s_value(&params, 0, SMode::Asymptotic).unwrap().ln();
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn constants_at_half() {
        let c = constants(&half()).unwrap();
        assert!((c.c - 0.326_713).abs() < 1e-6);
        assert!((c.c_tilde - 0.471_348).abs() < 1e-6);
        let near = Density::from_fraction(8646, 10_000).unwrap();
        let c = constants(&near).unwrap();
        assert!(c.c > 0.0 && c.c < 1e-3);
        assert!(c.c_tilde > 0.0 && c.c_tilde < 1e-3);
    }

    #[test]
    fn t2_collapses_at_zero_overlap() {
        let p = half();
        let params = MomentParams::new(600, 30, &p).unwrap();
        let t = t_sequence(&params, 0.0).unwrap();
        let j = 20.0f64;
        let want = params.b() / 2.0 * (j - 1.0).powi(2);
        assert!((t.value(2).unwrap() / want - 1.0).abs() < 1e-12);

        let rho = 0.3f64;
        let t = t_sequence(&params, rho).unwrap();
        assert!((t.value(2).unwrap() / ((2.0 * rho).exp() * want) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t3_respects_closed_form_bound() {
        let p = half();
        for (n, k) in [(600u64, 30u64), (1_039_830, 34_661), (10_000, 625)] {
            let params = MomentParams::new(n, k, &p).unwrap();
            let j = params.j().unwrap() as f64;
            let (nf, kf, b) = (n as f64, k as f64, params.b());
            let bound = (3.0 + 3.0 * b.ln() + 2.0 * kf.ln() + 6.0 * j.ln() - 3.0 * nf.ln()) - 6f64.ln();
            for rho in [0.0, 0.5, 1.0] {
                let t = t_sequence(&params, rho).unwrap();
                assert!(t.ln_t(3).unwrap() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn t_sequence_requires_integral_j() {
        let params = MomentParams::new(10, 3, &half()).unwrap();
        assert!(t_sequence(&params, 0.0).is_err());
        assert!(r1_sum_estimate(&params).is_err());
    }

    #[test]
    fn r1_estimate_exceeds_one() {
        let params = MomentParams::new(1000, 100, &half()).unwrap();
        let v = r1_sum_estimate(&params).unwrap();
        assert!(v.is_finite() && v > 1.0);
    }

    #[test]
    fn r3_bound_trivial_case() {
        assert_eq!(r3_count_bound(0, 100, 2.0), LogValue::ONE);
    }

    #[test]
    fn ratio_examples() {
        let p = half();
        let a = ratio_bruteforce(4, 2, &p, RatioMethod::PairEnum).unwrap();
        let b = ratio_bruteforce(4, 2, &p, RatioMethod::OverlapDecomposition).unwrap();
        assert_eq!(a.second_moment, BigRational::new(12.into(), 5.into()));
        assert_eq!(a.ratio, BigRational::new(5.into(), 3.into()));
        assert_eq!(a.ratio, b.ratio);
        let sum: BigRational = b.by_overlap.values().cloned().sum();
        assert_eq!(sum, b.ratio);

        let c = ratio_bruteforce(3, 3, &p, RatioMethod::PairEnum).unwrap();
        assert_eq!(c.ratio, BigRational::from_integer(1.into()));

        let d = ratio_bruteforce(6, 2, &p, RatioMethod::PairEnum).unwrap();
        let e = ratio_bruteforce(6, 2, &p, RatioMethod::OverlapDecomposition).unwrap();
        assert_eq!(d.ratio, e.ratio);
        assert!(ratio_bruteforce(11, 2, &p, RatioMethod::PairEnum).is_err());
    }

    #[test]
    fn identity_profile_has_maximal_d() {
        let p = half();
        for (n, k) in [(6u64, 2u64), (6, 3), (8, 4), (9, 3)] {
            let params = MomentParams::new(n, k, &p).unwrap();
            let rep = ratio_bruteforce(n, k, &p, RatioMethod::OverlapDecomposition).unwrap();
            let max_d = rep.by_overlap.keys().map(|r| r.d()).max().unwrap();
            assert_eq!(max_d, params.forbidden());
            let s = s_value(&params, max_d, SMode::Exact).unwrap();
            let single = exact_binomial_ratio(params.total_pairs, params.m, params.forbidden()).unwrap();
            let want = LogValue::from_rational(&single);
            assert!((s.ln() + want.ln()).abs() < 1e-12);
        }
    }
}
