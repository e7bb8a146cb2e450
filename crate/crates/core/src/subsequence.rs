//! The subsequence `n_j`: the smallest multiple of `j` whose `gamma` lies
//! within 10 of `j` and whose expected number of unordered equitable
//! `n_j/j`-colourings is at least `ln j`.
//!
//! The threshold uses the natural logarithm: the condition is
//! `ln mu_bar >= ln(ln j)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{gamma_ln_base, Density, FirstMoment, MAX_N};
use crate::numerics::LogValue;

/// Largest multiplier `t` tried for `n = t j`.
pub const SCAN_BUDGET: u64 = 1 << 31;

/// Half-width of the window `gamma(n_j) in [j - 10, j + 10]`.
pub const GAMMA_WINDOW: f64 = 10.0;

/// Base of the logarithm in the threshold `mu_bar >= log j`.
pub const THRESHOLD_LOG_BASE: &str = "e";

#[derive(Debug, Clone, PartialEq)]
pub struct SubsequenceEntry {
    pub j: u64,
    pub n_j: u64,
    pub k_j: u64,
    pub gamma_j: f64,
    pub mu_bar_at_kj: LogValue,
    pub mu_bar_at_kj_minus_1: LogValue,
}

/// The window and threshold conditions at a single `n`, for minimality checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditions {
    pub gamma: Option<f64>,
    pub in_window: bool,
    pub ln_mu_bar: f64,
    pub above_threshold: bool,
}

impl Conditions {
    pub fn both(&self) -> bool {
        self.in_window && self.above_threshold
    }
}

struct Scanner {
    j: u64,
    fm: FirstMoment,
    ln_b: f64,
    threshold: f64,
}

impl Scanner {
    fn new(j: u64, p: &Density) -> Self {
        Scanner {
            j,
            fm: FirstMoment::new(p),
            ln_b: p.ln_b(),
            threshold: (j as f64).ln().ln(),
        }
    }

    /// `gamma(t j)`, or `None` below the domain.
    fn gamma(&self, t: u64) -> Option<f64> {
        let n = t * self.j;
        // gamma is increasing once ln n > 1 and log_b n >= 1
        if (n as f64).ln() <= 1.0 {
            return None;
        }
        gamma_ln_base(n, self.ln_b).ok()
    }

    fn conditions(&self, t: u64) -> Conditions {
        let jf = self.j as f64;
        let gamma = self.gamma(t);
        let in_window = gamma.is_some_and(|g| g >= jf - GAMMA_WINDOW && g <= jf + GAMMA_WINDOW);
        let ln_mu_bar = self.fm.ln_mu_bar(t * self.j, t);
        Conditions {
            gamma,
            in_window,
            ln_mu_bar,
            above_threshold: ln_mu_bar >= self.threshold,
        }
    }
}

fn max_multiplier(j: u64) -> u64 {
    SCAN_BUDGET.min(MAX_N / j)
}

/// Evaluates both defining conditions at `n = t j`.
pub fn conditions_at(j: u64, t: u64, p: &Density) -> Result<Conditions> {
    if t == 0 || t.checked_mul(j).is_none_or(|n| n > MAX_N) {
        return Err(Error::InvalidRange(format!("multiplier {t} out of range for j = {j}")));
    }
    Ok(Scanner::new(j, p).conditions(t))
}

pub fn find_nj(j: u64, p: &Density) -> Result<SubsequenceEntry> {
    if j < 3 {
        return Err(Error::InvalidRange(format!("j = {j} must be at least 3")));
    }
    let s = Scanner::new(j, p);
    let jf = j as f64;
    let t_max = max_multiplier(j);
    let below = |t: u64| s.gamma(t).is_none_or(|g| g < jf - GAMMA_WINDOW);
    if below(t_max) {
        return Err(Error::ScanBudget(j));
    }
    // first t with gamma(t j) >= j - 10
    let (mut lo, mut hi) = (1u64, t_max);
    if below(lo) {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        hi = lo;
    }
    for t in hi..=t_max {
        if s.gamma(t).is_some_and(|g| g > jf + GAMMA_WINDOW) {
            return Err(Error::NotFound(j));
        }
        let c = s.conditions(t);
        if c.both() {
            let n = t * j;
            return Ok(SubsequenceEntry {
                j,
                n_j: n,
                k_j: t,
                gamma_j: c.gamma.expect("in window"),
                mu_bar_at_kj: LogValue::from_ln(c.ln_mu_bar),
                mu_bar_at_kj_minus_1: if t > 1 {
                    LogValue::from_ln(s.fm.ln_mu_bar(n, t - 1))
                } else {
                    LogValue::ZERO
                },
            });
        }
    }
    Err(Error::ScanBudget(j))
}

/// `find_nj` for every `j` in the range, in parallel, ordered by `j`.
pub fn find_range(j_min: u64, j_max: u64, p: &Density) -> Vec<(u64, Result<SubsequenceEntry>)> {
    (j_min..=j_max)
        .into_par_iter()
        .map(|j| (j, find_nj(j, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NjReport {
    pub j: u64,
    /// `gamma_j - j`.
    pub gamma_offset: f64,
    /// `gamma(n_j)` recomputed from scratch.
    pub gamma_recomputed: f64,
    /// `ln mu_bar_{n_j, k_j} >= ln ln j`.
    pub threshold_holds: bool,
    /// `ln mu_bar_{n_j, k_j - 1} < -ln j`.
    pub below_inverse_j: bool,
    /// `ln sum_{k < k_j} mu_bar_{n_j, k}`, summed directly.
    pub ln_lower_sum: f64,
    /// Geometric bound on the same sum from the last step ratio.
    pub ln_lower_sum_geometric: f64,
    /// Both conditions evaluated at `n_j - j`.
    pub previous: Option<Conditions>,
    /// `n_j - j` fails at least one condition.
    pub minimal: bool,
}

fn logsumexp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn verify_nj(entry: &SubsequenceEntry, p: &Density) -> Result<NjReport> {
    let s = Scanner::new(entry.j, p);
    let (n, k, j) = (entry.n_j, entry.k_j, entry.j);
    if n != k * j {
        return Err(Error::InvalidRange(format!("n_j = {n} is not k_j * j = {k} * {j}")));
    }
    let gamma_recomputed = gamma_ln_base(n, s.ln_b)?;
    let ln_prev = entry.mu_bar_at_kj_minus_1.ln();
    let ln_lower_sum = logsumexp((1..k).map(|kk| s.fm.ln_mu_bar(n, kk)));
    // steps ln(mu_bar_{k} / mu_bar_{k-1}) grow as k decreases, so the tail is
    // dominated by a geometric series with the ratio of the top step
    let ln_lower_sum_geometric = if k >= 3 {
        let step = ln_prev - s.fm.ln_mu_bar(n, k - 2);
        if step > 0.0 {
            ln_prev - (-(-step).exp_m1()).ln()
        } else {
            f64::INFINITY
        }
    } else {
        ln_prev
    };
    let previous = (k > 1).then(|| s.conditions(k - 1));
    Ok(NjReport {
        j,
        gamma_offset: entry.gamma_j - j as f64,
        gamma_recomputed,
        threshold_holds: entry.mu_bar_at_kj.ln() >= s.threshold,
        below_inverse_j: ln_prev < -(j as f64).ln(),
        ln_lower_sum,
        ln_lower_sum_geometric,
        previous,
        minimal: previous.is_none_or(|c| !c.both()),
    })
}

/// One CSV row: the entry columns followed by the verification columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubseqRow {
    pub j: u64,
    pub n_j: u64,
    pub k_j: u64,
    pub gamma_j: f64,
    pub log_mu_bar_kj: f64,
    pub log_mu_bar_kj_minus_1: f64,
    pub gamma_offset: f64,
    pub below_inverse_j: bool,
    pub log_lower_sum: f64,
    pub log_lower_sum_geometric: f64,
    pub minimal: bool,
}

impl SubseqRow {
    pub fn new(entry: &SubsequenceEntry, report: &NjReport) -> Self {
        SubseqRow {
            j: entry.j,
            n_j: entry.n_j,
            k_j: entry.k_j,
            gamma_j: entry.gamma_j,
            log_mu_bar_kj: entry.mu_bar_at_kj.ln(),
            log_mu_bar_kj_minus_1: entry.mu_bar_at_kj_minus_1.ln(),
            gamma_offset: report.gamma_offset,
            below_inverse_j: report.below_inverse_j,
            log_lower_sum: report.ln_lower_sum,
            log_lower_sum_geometric: report.ln_lower_sum_geometric,
            minimal: report.minimal,
        }
    }

    pub fn entry(&self) -> SubsequenceEntry {
        SubsequenceEntry {
            j: self.j,
            n_j: self.n_j,
            k_j: self.k_j,
            gamma_j: self.gamma_j,
            mu_bar_at_kj: LogValue::from_ln(self.log_mu_bar_kj),
            mu_bar_at_kj_minus_1: LogValue::from_ln(self.log_mu_bar_kj_minus_1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> Density {
        Density::from_fraction(1, 2).unwrap()
    }

    #[test]
    fn small_j_found_or_minimal() {
        let p = half();
        for j in 3..=12 {
            match find_nj(j, &p) {
                Ok(e) => {
                    assert_eq!(e.n_j % j, 0);
                    let r = verify_nj(&e, &p).unwrap();
                    assert!(r.minimal && r.threshold_holds);
                }
                Err(Error::NotFound(jj)) => assert_eq!(jj, j),
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn j15_entry_and_report() {
        let p = half();
        let e = find_nj(15, &p).unwrap();
        assert_eq!(e.n_j, 3030);
        assert_eq!(e.k_j, 202);
        let r = verify_nj(&e, &p).unwrap();
        assert!((r.gamma_recomputed - e.gamma_j).abs() < 1e-12);
        assert!(r.minimal);
        assert!(r.ln_lower_sum <= r.ln_lower_sum_geometric + 1e-9);
        assert!(r.ln_lower_sum >= e.mu_bar_at_kj_minus_1.ln());
    }

    #[test]
    fn rejects_small_j() {
        assert!(find_nj(2, &half()).is_err());
    }

    #[test]
    fn csv_row_roundtrip_keeps_negative_infinity() {
        let row = SubseqRow {
            j: 4,
            n_j: 8,
            k_j: 2,
            gamma_j: 1.5,
            log_mu_bar_kj: 0.25,
            log_mu_bar_kj_minus_1: f64::NEG_INFINITY,
            gamma_offset: -2.5,
            below_inverse_j: true,
            log_lower_sum: f64::NEG_INFINITY,
            log_lower_sum_geometric: f64::NEG_INFINITY,
            minimal: true,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&row).unwrap();
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("-inf"));
        let back: SubseqRow = csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .next()
            .unwrap()
            .unwrap();
        assert_eq!(back, row);
        assert!(back.entry().mu_bar_at_kj_minus_1.is_zero());
    }
}
