//! Simple undirected graphs with bitset adjacency, seeded `G(n, m)` and
//! `G(n, p)` sampling, DIMACS-style I/O, and equitable-colouring checks.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::partitions::Equipartition;

pub(crate) const WORD: usize = 64;

pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(WORD)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Sorted `(u, v)` with `u < v`.
    edges: Vec<(usize, usize)>,
    rows: Vec<Vec<u64>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            edges: Vec::new(),
            rows: vec![vec![0; words_for(n)]; n],
        }
    }

    /// Rejects loops, duplicates and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Graph::empty(n);
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidRange(format!("edge ({u}, {v}) outside 0..{n}")));
            }
            if u == v {
                return Err(Error::InvalidRange(format!("loop at vertex {u}")));
            }
            if g.has_edge(u, v) {
                return Err(Error::InvalidRange(format!("duplicate edge ({u}, {v})")));
            }
            g.set(u, v);
            g.edges.push((u.min(v), u.max(v)));
        }
        g.edges.sort_unstable();
        Ok(g)
    }

    fn set(&mut self, u: usize, v: usize) {
        self.rows[u][v / WORD] |= 1 << (v % WORD);
        self.rows[v][u / WORD] |= 1 << (u % WORD);
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).unwrap()
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3);
        Self::from_edges(n, (0..n).map(|u| (u, (u + 1) % n))).unwrap()
    }

    /// Sides `0..a` and `a..a+b`.
    pub fn complete_bipartite(a: usize, b: usize) -> Self {
        Self::from_edges(a + b, (0..a).flat_map(|u| (a..a + b).map(move |v| (u, v)))).unwrap()
    }

    /// Centre 0 with `leaves` pendant vertices.
    pub fn star(leaves: usize) -> Self {
        Self::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v))).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.rows[u][v / WORD] >> (v % WORD) & 1 == 1
    }

    pub fn row(&self, v: usize) -> &[u64] {
        &self.rows[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rows[v].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// True iff no two vertices of `set` are adjacent.
    pub fn is_independent(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(i, &u)| set[i + 1..].iter().all(|&v| !self.has_edge(u, v)))
    }

    /// DIMACS-like text: `p edge <n> <m>` then `e <u> <v>`, 1-indexed.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        writeln!(out, "p edge {} {}", self.n, self.edges.len()).unwrap();
        for &(u, v) in &self.edges {
            writeln!(out, "e {} {}", u + 1, v + 1).unwrap();
        }
        out
    }

    /// Parses the DIMACS-like format; `c` lines are comments.
    pub fn from_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut tok = line.split_whitespace();
            let bad = |msg: &str| Error::Parse(format!("line {}: {msg}: {line:?}", lineno + 1));
            match tok.next() {
                None | Some("c") => continue,
                Some("p") => {
                    if header.is_some() {
                        return Err(bad("second header"));
                    }
                    if tok.next() != Some("edge") {
                        return Err(bad("expected `p edge <n> <m>`"));
                    }
                    let n = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad n"))?;
                    let m = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad m"))?;
                    header = Some((n, m));
                }
                Some("e") => {
                    if header.is_none() {
                        return Err(bad("edge before header"));
                    }
                    let mut endpoint = || -> Result<usize> {
                        let x: usize = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad endpoint"))?;
                        x.checked_sub(1).ok_or_else(|| bad("vertices are 1-indexed"))
                    };
                    let u = endpoint()?;
                    let v = endpoint()?;
                    edges.push((u, v));
                }
                Some(_) => return Err(bad("unknown line type")),
            }
        }
        let (n, m) = header.ok_or_else(|| Error::Parse("missing `p edge` header".into()))?;
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header declares {m} edges, found {}",
                edges.len()
            )));
        }
        Graph::from_edges(n, edges)
    }

    pub fn read_dimacs(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_dimacs(&fs::read_to_string(path)?)
    }

    pub fn write_dimacs(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_dimacs())?;
        Ok(())
    }
}

/// Identifies one random stream.
///
/// The generator is ChaCha8 keyed by `seed_from_u64(master_seed)` with the
/// ChaCha stream id set to `stream_index`; distinct pairs give distinct
/// keystreams, independent of how work is scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Maps a lexicographic pair index to `(u, v)`, `u < v`.
fn pair_from_index(n: usize, offsets: &[usize], idx: usize) -> (usize, usize) {
    // offsets[u] = index of pair (u, u+1)
    let u = offsets.partition_point(|&o| o <= idx) - 1;
    let v = u + 1 + (idx - offsets[u]);
    debug_assert!(v < n);
    (u, v)
}

/// Uniform graph with exactly `m` edges.
pub fn sample_gnm(n: usize, m: usize, seed: SeedSpec) -> Result<Graph> {
    let total = n * n.saturating_sub(1) / 2;
    if m > total {
        return Err(Error::InvalidRange(format!("m = {m} exceeds C({n}, 2) = {total}")));
    }
    let offsets: Vec<usize> = (0..n).map(|u| u * (2 * n - u - 1) / 2).collect();
    let mut rng = seed.rng();
    let picked = index::sample(&mut rng, total, m);
    Graph::from_edges(n, picked.iter().map(|idx| pair_from_index(n, &offsets, idx)))
}

/// Each pair independently present with probability `p`, decided by an
/// exact integer comparison.
pub fn sample_gnp(n: usize, p: &BigRational, seed: SeedSpec) -> Result<Graph> {
    if p.is_negative() || *p > BigRational::one() {
        return Err(Error::InvalidRange(format!("p = {p} outside [0, 1]")));
    }
    let (num, den) = match (p.numer().to_u64(), p.denom().to_u64()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidRange(format!("p = {p} has oversized terms"))),
    };
    let mut rng = seed.rng();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if !p.is_zero() && rng.gen_range(0..den) < num {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

/// True iff every part is an independent set of `g`.
pub fn is_valid_equitable(g: &Graph, partition: &Equipartition) -> Result<bool> {
    if partition.n() != g.n() {
        return Err(Error::ShapeMismatch(format!(
            "partition covers {} vertices, graph has {}",
            partition.n(),
            g.n()
        )));
    }
    Ok(partition.parts().iter().all(|part| g.is_independent(part)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gnm_edge_cases() {
        let g = sample_gnm(4, 6, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(g, Graph::complete(4));
        let g = sample_gnm(4, 0, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(sample_gnm(4, 7, SeedSpec::new(1, 0)).is_err());
    }

    #[test]
    fn gnm_is_deterministic_per_seed() {
        let a = sample_gnm(30, 200, SeedSpec::new(9, 3)).unwrap();
        let b = sample_gnm(30, 200, SeedSpec::new(9, 3)).unwrap();
        let c = sample_gnm(30, 200, SeedSpec::new(9, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.edge_count(), 200);
    }

    #[test]
    fn gnp_extremes() {
        let one = BigRational::one();
        let zero = BigRational::zero();
        assert_eq!(sample_gnp(5, &one, SeedSpec::new(0, 0)).unwrap(), Graph::complete(5));
        assert_eq!(sample_gnp(5, &zero, SeedSpec::new(0, 0)).unwrap().edge_count(), 0);
    }

    #[test]
    fn pair_index_inverse() {
        let n = 9;
        let offsets: Vec<usize> = (0..n).map(|u| u * (2 * n - u - 1) / 2).collect();
        let mut idx = 0;
        for u in 0..n {
            for v in u + 1..n {
                assert_eq!(pair_from_index(n, &offsets, idx), (u, v));
                idx += 1;
            }
        }
    }

    #[test]
    fn equitable_validity_examples() {
        let k4 = Graph::complete(4);
        let p = Equipartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert!(!is_valid_equitable(&k4, &p).unwrap());
        assert!(is_valid_equitable(&Graph::empty(4), &p).unwrap());
        let c6 = Graph::cycle(6);
        let bip = Equipartition::new(6, vec![vec![0, 2, 4], vec![1, 3, 5]]).unwrap();
        assert!(is_valid_equitable(&c6, &bip).unwrap());
        assert!(is_valid_equitable(&Graph::empty(5), &p).is_err());
    }

    #[test]
    fn dimacs_roundtrip_and_errors() {
        let g = Graph::complete_bipartite(3, 3);
        let text = g.to_dimacs();
        assert!(text.starts_with("p edge 6 9\n"));
        assert_eq!(Graph::from_dimacs(&text).unwrap(), g);
        assert!(Graph::from_dimacs("p edge 3 1\ne 1 1\n").is_err());
        assert!(Graph::from_dimacs("p edge 3 2\ne 1 2\n").is_err());
        assert!(Graph::from_dimacs("e 1 2\n").is_err());
        assert!(Graph::from_dimacs("p edge 3 1\ne 0 2\n").is_err());
        let with_comment = "c hello\np edge 3 1\ne 1 3\n";
        assert!(Graph::from_dimacs(with_comment).unwrap().has_edge(0, 2));
    }

    #[test]
    fn multiword_rows() {
        let g = sample_gnm(130, 2000, SeedSpec::new(5, 0)).unwrap();
        let degree_sum: usize = (0..130).map(|v| g.degree(v)).sum();
        assert_eq!(degree_sum, 4000);
        for &(u, v) in g.edges() {
            assert!(g.has_edge(v, u));
        }
    }
}
