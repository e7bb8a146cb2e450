//! Equipartition shapes, counts, enumeration and overlap profiles.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{ln_factorial, ExactInt, ExactRational, LogValue};

pub const ENUMERATION_MAX_N: u64 = 16;
pub const PAIR_CENSUS_MAX_N: u64 = 10;
pub const EXACT_COUNT_MAX_N: u64 = 64;

/// Part sizes and forbidden-edge count of a `k`-equipartition of `n` vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquipartitionShape {
    pub n: u64,
    pub k: u64,
    /// Fractional part of `n / k`.
    pub delta: ExactRational,
    pub k_large: u64,
    pub k_small: u64,
    pub size_large: u64,
    pub size_small: u64,
    /// Number of vertex pairs lying inside a part.
    pub forbidden: u64,
}

impl EquipartitionShape {
    pub fn divides(&self) -> bool {
        self.k_large == 0
    }

    /// `n / k` when it is an integer.
    pub fn part_size(&self) -> Option<u64> {
        self.divides().then_some(self.size_small)
    }

    /// Size of part `index` in the ordered layout (large parts first).
    pub fn size_of_part(&self, index: u64) -> u64 {
        if index < self.k_large {
            self.size_large
        } else {
            self.size_small
        }
    }
}

fn pairs(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

pub fn shape(n: u64, k: u64) -> Result<EquipartitionShape> {
    if k < 1 || k > n {
        return Err(Error::InvalidRange(format!(
            "need 1 <= k <= n, got n = {n}, k = {k}"
        )));
    }
    let size_small = n / k;
    let k_large = n % k;
    let k_small = k - k_large;
    let size_large = if k_large == 0 { size_small } else { size_small + 1 };
    let forbidden = k_large * pairs(size_large) + k_small * pairs(size_small);

    let delta = BigRational::new(BigInt::from(k_large), BigInt::from(k));
    // algebraic form n(n/k - 1)/2 + delta(1 - delta)k/2
    let nq = BigRational::from_integer(BigInt::from(n));
    let kq = BigRational::from_integer(BigInt::from(k));
    let two = BigRational::from_integer(BigInt::from(2));
    let one = BigRational::one();
    let algebraic = &nq * (&nq / &kq - &one) / &two + &delta * (&one - &delta) * &kq / &two;
    assert_eq!(
        algebraic,
        BigRational::from_integer(BigInt::from(forbidden)),
        "forbidden-edge forms disagree for n={n}, k={k}"
    );

    Ok(EquipartitionShape {
        n,
        k,
        delta,
        k_large,
        k_small,
        size_large,
        size_small,
        forbidden,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCount {
    pub log: LogValue,
    /// Present for `n <= 64`.
    pub exact: Option<ExactInt>,
}

/// Number of ordered `k`-equipartitions, `n! / (ceil!^k_L floor!^k_S)`.
pub fn count_partitions(n: u64, k: u64) -> Result<PartitionCount> {
    let sh = shape(n, k)?;
    let exact = if n <= EXACT_COUNT_MAX_N {
        Some(count_partitions_exact(n, k)?)
    } else {
        None
    };
    Ok(PartitionCount {
        log: LogValue::from_ln(ln_partition_count(&sh)),
        exact,
    })
}

pub fn count_partitions_exact(n: u64, k: u64) -> Result<ExactInt> {
    if n > EXACT_COUNT_MAX_N {
        return Err(Error::SizeGuard {
            what: "exact partition count",
            limit: EXACT_COUNT_MAX_N,
            got: n,
        });
    }
    let sh = shape(n, k)?;
    let fact = |x: u64| -> BigUint { (1..=x).fold(BigUint::one(), |acc, i| acc * i) };
    let denom = fact(sh.size_large).pow(sh.k_large as u32) * fact(sh.size_small).pow(sh.k_small as u32);
    Ok(fact(n) / denom)
}

pub(crate) fn ln_partition_count(sh: &EquipartitionShape) -> f64 {
    ln_factorial(sh.n)
        - sh.k_large as f64 * ln_factorial(sh.size_large)
        - sh.k_small as f64 * ln_factorial(sh.size_small)
}

/// An ordered partition of `{0, .., n-1}` into parts of sizes `ceil(n/k)`
/// (first) and `floor(n/k)`. Each part is kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equipartition {
    n: usize,
    parts: Vec<Vec<usize>>,
}

impl Equipartition {
    pub fn new(n: usize, mut parts: Vec<Vec<usize>>) -> Result<Self> {
        let k = parts.len();
        let sh = shape(n as u64, k as u64)?;
        let mut seen = vec![false; n];
        for (idx, part) in parts.iter_mut().enumerate() {
            part.sort_unstable();
            if part.len() as u64 != sh.size_of_part(idx as u64) {
                return Err(Error::ShapeMismatch(format!(
                    "part {idx} has size {}, expected {}",
                    part.len(),
                    sh.size_of_part(idx as u64)
                )));
            }
            for &v in part.iter() {
                if v >= n || seen[v] {
                    return Err(Error::ShapeMismatch(format!(
                        "vertex {v} is out of range or repeated"
                    )));
                }
                seen[v] = true;
            }
        }
        Ok(Equipartition { n, parts })
    }

    /// Builds a partition from a vertex -> part-index map.
    pub fn from_assignment(assignment: &[usize], k: usize) -> Result<Self> {
        let mut parts = vec![Vec::new(); k];
        for (v, &c) in assignment.iter().enumerate() {
            if c >= k {
                return Err(Error::ShapeMismatch(format!("part index {c} >= k = {k}")));
            }
            parts[c].push(v);
        }
        Self::new(assignment.len(), parts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for (c, part) in self.parts.iter().enumerate() {
            for &v in part {
                out[v] = c;
            }
        }
        out
    }

    /// Number of vertex pairs inside parts, counted from the actual parts.
    pub fn forbidden_edges(&self) -> u64 {
        self.parts.iter().map(|p| pairs(p.len() as u64)).sum()
    }

    /// Forbidden pairs as a bitmask over the lexicographic pair index;
    /// only defined for `n <= 11` (at most 55 pairs).
    pub(crate) fn forbidden_mask(&self) -> u64 {
        assert!(self.n <= 11);
        let mut mask = 0u64;
        for part in &self.parts {
            for (a, &u) in part.iter().enumerate() {
                for &v in &part[a + 1..] {
                    mask |= 1u64 << pair_index(self.n, u, v);
                }
            }
        }
        mask
    }
}

fn pair_index(n: usize, u: usize, v: usize) -> usize {
    let (u, v) = if u < v { (u, v) } else { (v, u) };
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

/// Yields every ordered `k`-equipartition of `n` vertices exactly once,
/// in lexicographic order of the vertex -> part assignment.
#[derive(Debug, Clone)]
pub struct EquipartitionIter {
    k: usize,
    caps: Vec<usize>,
    counts: Vec<usize>,
    assign: Vec<usize>,
    started: bool,
    done: bool,
}

impl EquipartitionIter {
    fn new(n: usize, k: usize, sh: &EquipartitionShape) -> Self {
        let caps = (0..k).map(|c| sh.size_of_part(c as u64) as usize).collect();
        EquipartitionIter {
            k,
            caps,
            counts: vec![0; k],
            assign: vec![0; n],
            started: false,
            done: false,
        }
    }

    fn fill_from(&mut self, start: usize) {
        for pos in start..self.assign.len() {
            let c = (0..self.k)
                .find(|&c| self.counts[c] < self.caps[c])
                .expect("capacity equals remaining vertices");
            self.assign[pos] = c;
            self.counts[c] += 1;
        }
    }

    fn advance(&mut self) -> bool {
        for pos in (0..self.assign.len()).rev() {
            let old = self.assign[pos];
            self.counts[old] -= 1;
            if let Some(c) = (old + 1..self.k).find(|&c| self.counts[c] < self.caps[c]) {
                self.assign[pos] = c;
                self.counts[c] += 1;
                self.fill_from(pos + 1);
                return true;
            }
        }
        false
    }

    /// Current assignment without allocating a partition.
    pub(crate) fn next_assignment(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_from(0);
        } else if !self.advance() {
            self.done = true;
            return None;
        }
        Some(&self.assign)
    }
}

impl Iterator for EquipartitionIter {
    type Item = Equipartition;

    fn next(&mut self) -> Option<Equipartition> {
        let k = self.k;
        let assign = self.next_assignment()?.to_vec();
        Some(Equipartition::from_assignment(&assign, k).expect("enumerator yields valid shapes"))
    }
}

pub fn enumerate_equipartitions(n: u64, k: u64) -> Result<EquipartitionIter> {
    if n > ENUMERATION_MAX_N {
        return Err(Error::SizeGuard {
            what: "equipartition enumeration",
            limit: ENUMERATION_MAX_N,
            got: n,
        });
    }
    let sh = shape(n, k)?;
    Ok(EquipartitionIter::new(n as usize, k as usize, &sh))
}

/// Overlap profile of an ordered pair of equipartitions.
///
/// `r[i]` counts part pairs (first from one partition, second from the
/// other) meeting in exactly `i >= 2` vertices; only nonzero entries are
/// stored. Ordering and hashing follow `(n, r)`; the other fields are
/// derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OverlapSequence {
    n: u64,
    r: BTreeMap<u64, u64>,
    v: u64,
    d: u64,
    r3_sum: u64,
}

impl OverlapSequence {
    pub fn from_counts(n: u64, counts: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut r = BTreeMap::new();
        for (i, c) in counts {
            if i >= 2 && c > 0 {
                *r.entry(i).or_insert(0) += c;
            }
        }
        let v = r.iter().map(|(&i, &c)| i * c).sum();
        let d = r.iter().map(|(&i, &c)| pairs(i) * c).sum();
        let r3_sum = r.range(3..).map(|(_, &c)| c).sum();
        OverlapSequence { n, r, v, d, r3_sum }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn r(&self) -> &BTreeMap<u64, u64> {
        &self.r
    }

    pub fn r_i(&self, i: u64) -> u64 {
        self.r.get(&i).copied().unwrap_or(0)
    }

    /// Vertices lying in overlap blocks.
    pub fn v(&self) -> u64 {
        self.v
    }

    /// Shared forbidden edges.
    pub fn d(&self) -> u64 {
        self.d
    }

    pub fn r3_sum(&self) -> u64 {
        self.r3_sum
    }

    pub fn rho(&self) -> ExactRational {
        BigRational::new(BigInt::from(self.v), BigInt::from(self.n))
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

fn overlap_of_assignments(n: usize, k: usize, a1: &[usize], a2: &[usize], table: &mut [u64]) -> OverlapSequence {
    table.iter_mut().for_each(|t| *t = 0);
    for v in 0..n {
        table[a1[v] * k + a2[v]] += 1;
    }
    OverlapSequence::from_counts(n as u64, table.iter().map(|&c| (c, 1)))
}

pub fn overlap(p1: &Equipartition, p2: &Equipartition) -> Result<OverlapSequence> {
    if p1.n != p2.n || p1.k() != p2.k() {
        return Err(Error::ShapeMismatch(format!(
            "(n, k) = ({}, {}) vs ({}, {})",
            p1.n,
            p1.k(),
            p2.n,
            p2.k()
        )));
    }
    let k = p1.k();
    let mut table = vec![0; k * k];
    Ok(overlap_of_assignments(
        p1.n,
        k,
        &p1.assignment(),
        &p2.assignment(),
        &mut table,
    ))
}

/// How the ordered-pair census is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairCensus {
    /// Every ordered pair `(pi1, pi2)`.
    AllPairs,
    /// Pairs with `pi1` fixed to the first partition, scaled by `P`.
    /// Exact because vertex relabelling acts transitively on ordered
    /// equipartitions of one shape and preserves overlap profiles.
    FixedFirst,
    /// `AllPairs` when `P <= 2048`, otherwise `FixedFirst`.
    Auto,
}

pub const ALL_PAIRS_MAX_COUNT: u64 = 2048;

/// Number of ordered pairs of `k`-equipartitions with each overlap profile.
pub fn count_pairs_with_overlap(n: u64, k: u64) -> Result<BTreeMap<OverlapSequence, ExactInt>> {
    count_pairs_with_overlap_using(n, k, PairCensus::Auto)
}

pub fn count_pairs_with_overlap_using(
    n: u64,
    k: u64,
    census: PairCensus,
) -> Result<BTreeMap<OverlapSequence, ExactInt>> {
    if n > PAIR_CENSUS_MAX_N {
        return Err(Error::SizeGuard {
            what: "overlap pair census",
            limit: PAIR_CENSUS_MAX_N,
            got: n,
        });
    }
    let total = count_partitions_exact(n, k)?;
    let census = match census {
        PairCensus::Auto if total <= BigUint::from(ALL_PAIRS_MAX_COUNT) => PairCensus::AllPairs,
        PairCensus::Auto => PairCensus::FixedFirst,
        other => other,
    };
    let all: Vec<Vec<usize>> = {
        let mut it = enumerate_equipartitions(n, k)?;
        let mut out = Vec::new();
        while let Some(a) = it.next_assignment() {
            out.push(a.to_vec());
        }
        out
    };
    let (n, k) = (n as usize, k as usize);
    let tally = |first: &[usize]| -> BTreeMap<OverlapSequence, u64> {
        let mut table = vec![0; k * k];
        let mut local = BTreeMap::new();
        for second in &all {
            let ov = overlap_of_assignments(n, k, first, second, &mut table);
            *local.entry(ov).or_insert(0u64) += 1;
        }
        local
    };
    let merge = |mut a: BTreeMap<OverlapSequence, u64>, b: BTreeMap<OverlapSequence, u64>| {
        for (key, c) in b {
            *a.entry(key).or_insert(0) += c;
        }
        a
    };
    let (counts, scale) = match census {
        PairCensus::AllPairs => (
            all.par_iter()
                .map(|first| tally(first))
                .reduce(BTreeMap::new, merge),
            BigUint::one(),
        ),
        _ => (tally(&all[0]), total),
    };
    Ok(counts
        .into_iter()
        .map(|(key, c)| (key, BigUint::from(c) * &scale))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn ep(n: usize, parts: &[&[usize]]) -> Equipartition {
        Equipartition::new(n, parts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn shape_examples() {
        let s = shape(7, 3).unwrap();
        assert_eq!(s.delta, BigRational::new(1.into(), 3.into()));
        assert_eq!((s.k_large, s.k_small, s.forbidden), (1, 2, 5));
        let s = shape(9, 3).unwrap();
        assert_eq!((s.k_large, s.k_small, s.forbidden), (0, 3, 9));
        assert!(s.delta.is_zero());
        assert_eq!(shape(5, 5).unwrap().forbidden, 0);
        assert!(shape(3, 0).is_err());
        assert!(shape(3, 4).is_err());
    }

    #[test]
    fn forbidden_count_strictly_decreases_in_k() {
        for n in 2..200u64 {
            for k in 1..n {
                let a = shape(n, k).unwrap();
                let b = shape(n, k + 1).unwrap();
                assert!(b.forbidden < a.forbidden);
                // lower bound n^2/(2k(k+1)) - n/(2k), scaled by 2k(k+1)
                let lhs = 2 * k * (k + 1) * (a.forbidden - b.forbidden);
                let rhs = (n * n) as i64 - (n * (k + 1)) as i64;
                assert!(lhs as i64 >= rhs, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn count_examples() {
        assert_eq!(count_partitions_exact(9, 3).unwrap(), BigUint::from(1680u32));
        assert_eq!(count_partitions_exact(7, 3).unwrap(), BigUint::from(210u32));
        // singletons in every order
        assert_eq!(count_partitions_exact(4, 4).unwrap(), BigUint::from(24u32));
        assert!(count_partitions_exact(65, 3).is_err());
        let c = count_partitions(100, 7).unwrap();
        assert!(c.exact.is_none());
        let c = count_partitions(9, 3).unwrap();
        assert!((c.log.ln() - 1680f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(enumerate_equipartitions(4, 2).unwrap().count(), 6);
        assert_eq!(enumerate_equipartitions(3, 3).unwrap().count(), 6);
        assert_eq!(enumerate_equipartitions(6, 2).unwrap().count(), 20);
        assert!(enumerate_equipartitions(17, 2).is_err());
    }

    #[test]
    fn enumeration_matches_formula_and_is_duplicate_free() {
        for n in 1..=9u64 {
            for k in 1..=n {
                let all: Vec<_> = enumerate_equipartitions(n, k).unwrap().collect();
                let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
                assert_eq!(distinct.len(), all.len());
                assert_eq!(BigUint::from(all.len()), count_partitions_exact(n, k).unwrap());
            }
        }
    }

    #[test]
    fn partition_validation() {
        assert!(Equipartition::new(4, vec![vec![0, 1], vec![2, 3]]).is_ok());
        assert!(Equipartition::new(4, vec![vec![0, 1, 2], vec![3]]).is_err());
        assert!(Equipartition::new(4, vec![vec![0, 1], vec![1, 3]]).is_err());
        // smaller part first violates the ordering
        assert!(Equipartition::new(5, vec![vec![0, 1], vec![2, 3, 4]]).is_err());
    }

    #[test]
    fn overlap_examples() {
        let a = ep(6, &[&[0, 1, 2], &[3, 4, 5]]);
        let o = overlap(&a, &a).unwrap();
        assert_eq!((o.r_i(3), o.v(), o.d()), (2, 6, 6));
        let b = ep(6, &[&[0, 1, 3], &[2, 4, 5]]);
        let o = overlap(&a, &b).unwrap();
        assert_eq!((o.r_i(2), o.v(), o.d()), (2, 4, 2));
        let c = ep(4, &[&[0, 1], &[2, 3]]);
        let e = ep(4, &[&[0, 2], &[1, 3]]);
        assert!(overlap(&c, &e).unwrap().is_empty());
        assert!(overlap(&a, &c).is_err());
    }

    #[test]
    fn pair_census_examples() {
        let m = count_pairs_with_overlap(4, 2).unwrap();
        let twos = OverlapSequence::from_counts(4, [(2, 2)]);
        let none = OverlapSequence::from_counts(4, []);
        assert_eq!(m[&twos], BigUint::from(12u32));
        assert_eq!(m[&none], BigUint::from(24u32));
        assert_eq!(m.len(), 2);

        let m = count_pairs_with_overlap(3, 3).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[&OverlapSequence::from_counts(3, [])], BigUint::from(36u32));

        let total: BigUint = count_pairs_with_overlap(6, 2).unwrap().values().sum();
        assert_eq!(total, BigUint::from(400u32));
        assert!(count_pairs_with_overlap(11, 2).is_err());
    }

    #[test]
    fn census_strategies_agree() {
        for (n, k) in [(5, 2), (6, 3), (7, 3), (6, 4), (7, 2)] {
            assert_eq!(
                count_pairs_with_overlap_using(n, k, PairCensus::AllPairs).unwrap(),
                count_pairs_with_overlap_using(n, k, PairCensus::FixedFirst).unwrap(),
                "n={n} k={k}"
            );
        }
    }

    #[test]
    fn identical_partitions_share_all_forbidden_edges() {
        for (n, k) in [(6u64, 2u64), (6, 3), (8, 4), (9, 3)] {
            let sh = shape(n, k).unwrap();
            for p in enumerate_equipartitions(n, k).unwrap().take(50) {
                let o = overlap(&p, &p).unwrap();
                assert_eq!(o.d(), sh.forbidden);
                assert_eq!(o.v(), n);
            }
        }
    }

    #[test]
    fn forbidden_mask_counts_forbidden_edges() {
        for p in enumerate_equipartitions(7, 3).unwrap() {
            assert_eq!(p.forbidden_mask().count_ones() as u64, p.forbidden_edges());
        }
        assert_eq!(pair_index(5, 3, 4), 9);
        assert_eq!(pair_index(5, 1, 0), 0);
    }
}
