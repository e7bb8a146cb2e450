//! Exact equitable and ordinary colouring by branch and bound, the equitable
//! threshold, and a seeded greedy upper bound.

use std::io;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{words_for, Graph, SeedSpec, WORD};
use crate::partitions::{shape, Equipartition};

const DEADLINE_CHECK_MASK: u64 = 4095;

#[derive(Debug, Clone, Copy)]
struct Deadline(Option<Instant>);

impl Deadline {
    fn after(limit: Option<Duration>) -> Self {
        Deadline(limit.map(|d| Instant::now() + d))
    }

    fn check(&self) -> Result<()> {
        match self.0 {
            Some(t) if Instant::now() >= t => Err(Error::Timeout),
            _ => Ok(()),
        }
    }
}

fn bit(set: &[u64], v: usize) -> bool {
    set[v / WORD] >> (v % WORD) & 1 == 1
}

fn set_bit(set: &mut [u64], v: usize) {
    set[v / WORD] |= 1 << (v % WORD);
}

fn clear_bit(set: &mut [u64], v: usize) {
    set[v / WORD] &= !(1 << (v % WORD));
}

fn popcount_and_not(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x & !y).count_ones() as usize).sum()
}

fn ones(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &word)| {
        let mut bits = word;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let t = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(w * WORD + t)
        })
    })
}

/// A colouring as a vertex -> colour map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoringWitness {
    pub assignment: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct WitnessRow {
    vertex: usize,
    colour: usize,
}

impl ColoringWitness {
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn is_proper(&self, g: &Graph) -> bool {
        self.assignment.len() == g.n()
            && self.assignment.iter().all(|&c| c < self.k)
            && g.edges().iter().all(|&(u, v)| self.assignment[u] != self.assignment[v])
    }

    pub fn is_balanced(&self) -> bool {
        let sizes = self.class_sizes();
        match (sizes.iter().min(), sizes.iter().max()) {
            (Some(lo), Some(hi)) => hi - lo <= 1,
            _ => true,
        }
    }

    /// Proper and balanced.
    pub fn validate(&self, g: &Graph) -> bool {
        self.is_proper(g) && self.is_balanced()
    }

    /// Reorders classes larger-first so the result has the canonical shape.
    pub fn to_equipartition(&self) -> Result<Equipartition> {
        let sizes = self.class_sizes();
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by_key(|&c| std::cmp::Reverse(sizes[c]));
        let mut rank = vec![0; self.k];
        for (r, &c) in order.iter().enumerate() {
            rank[c] = r;
        }
        let relabelled: Vec<usize> = self.assignment.iter().map(|&c| rank[c]).collect();
        Equipartition::from_assignment(&relabelled, self.k)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (vertex, &colour) in self.assignment.iter().enumerate() {
            w.serialize(WitnessRow { vertex, colour })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut rows: Vec<WitnessRow> = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input)
            .deserialize()
            .collect::<std::result::Result<_, _>>()?;
        rows.sort_by_key(|r| r.vertex);
        if rows.iter().enumerate().any(|(i, r)| r.vertex != i) {
            return Err(Error::Parse("witness vertices must be 0..n without gaps".into()));
        }
        let assignment: Vec<usize> = rows.iter().map(|r| r.colour).collect();
        let k = assignment.iter().max().map_or(0, |c| c + 1);
        Ok(ColoringWitness { assignment, k })
    }
}

/// Vertex order used by every search: descending degree, ties by index.
fn search_order(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
    order
}

struct EquitableSearch<'a> {
    g: &'a Graph,
    k: usize,
    order: Vec<usize>,
    small: usize,
    k_large: usize,
    sizes: Vec<usize>,
    // classes currently holding small + 1 vertices
    large_used: usize,
    opened: usize,
    // neighbours of each class's members
    forbid: Vec<Vec<u64>>,
    unassigned: Vec<u64>,
    colour: Vec<usize>,
    nodes: u64,
    deadline: Deadline,
}

impl EquitableSearch<'_> {
    fn has_room(&self, c: usize) -> bool {
        self.sizes[c] < self.small || (self.sizes[c] == self.small && self.large_used < self.k_large)
    }

    fn place(&mut self, v: usize, c: usize) {
        if self.sizes[c] == self.small {
            self.large_used += 1;
        }
        self.sizes[c] += 1;
        self.colour[v] = c;
        clear_bit(&mut self.unassigned, v);
        for (f, r) in self.forbid[c].iter_mut().zip(self.g.row(v)) {
            *f |= r;
        }
    }

    fn unplace(&mut self, v: usize, c: usize, saved: Vec<u64>) {
        self.sizes[c] -= 1;
        if self.sizes[c] == self.small {
            self.large_used -= 1;
        }
        set_bit(&mut self.unassigned, v);
        self.forbid[c] = saved;
    }

    /// Every class must still be able to reach the small size, and every
    /// unassigned vertex must still have somewhere to go.
    fn viable(&self) -> bool {
        let free: usize = self.unassigned.iter().map(|w| w.count_ones() as usize).sum();
        let deficit: usize = self.sizes.iter().map(|&s| self.small.saturating_sub(s)).sum();
        if deficit > free {
            return false;
        }
        for c in 0..self.opened {
            if self.sizes[c] < self.small
                && popcount_and_not(&self.unassigned, &self.forbid[c]) < self.small - self.sizes[c]
            {
                return false;
            }
        }
        if self.opened < self.k {
            return true;
        }
        ones(&self.unassigned).all(|u| (0..self.k).any(|c| self.has_room(c) && !bit(&self.forbid[c], u)))
    }

    fn search(&mut self, depth: usize) -> Result<bool> {
        self.nodes += 1;
        if self.nodes & DEADLINE_CHECK_MASK == 0 {
            self.deadline.check()?;
        }
        if depth == self.order.len() {
            return Ok(true);
        }
        let v = self.order[depth];
        let remaining = self.order.len() - depth;
        for c in 0..self.opened.min(self.k) {
            if !self.has_room(c) || bit(&self.forbid[c], v) {
                continue;
            }
            let saved = self.forbid[c].clone();
            self.place(v, c);
            if self.viable() && self.search(depth + 1)? {
                return Ok(true);
            }
            self.unplace(v, c, saved);
        }
        // one fresh class, and only if enough vertices remain to fill the unopened ones
        if self.opened < self.k && (self.k - self.opened) * self.small <= remaining {
            let c = self.opened;
            let saved = self.forbid[c].clone();
            self.opened += 1;
            self.place(v, c);
            if self.viable() && self.search(depth + 1)? {
                return Ok(true);
            }
            self.unplace(v, c, saved);
            self.opened -= 1;
        }
        Ok(false)
    }
}

fn equitable_k_feasible_until(g: &Graph, k: usize, deadline: Deadline) -> Result<Option<ColoringWitness>> {
    let n = g.n();
    if k == 0 || k > n {
        return Err(Error::InvalidRange(format!("k = {k} outside 1..={n}")));
    }
    let sh = shape(n as u64, k as u64)?;
    let words = words_for(n);
    let mut unassigned = vec![0u64; words];
    for v in 0..n {
        set_bit(&mut unassigned, v);
    }
    let mut s = EquitableSearch {
        g,
        k,
        order: search_order(g),
        small: sh.size_small as usize,
        k_large: sh.k_large as usize,
        sizes: vec![0; k],
        large_used: 0,
        opened: 0,
        forbid: vec![vec![0; words]; k],
        unassigned,
        colour: vec![0; n],
        nodes: 0,
        deadline,
    };
    if s.search(0)? {
        Ok(Some(ColoringWitness {
            assignment: s.colour,
            k,
        }))
    } else {
        Ok(None)
    }
}

/// Some equitable `k`-colouring, or `None` if none exists.
pub fn equitable_k_feasible(g: &Graph, k: usize, time_limit: Option<Duration>) -> Result<Option<ColoringWitness>> {
    equitable_k_feasible_until(g, k, Deadline::after(time_limit))
}

/// Maximum clique by Bron–Kerbosch with pivoting.
pub fn max_clique(g: &Graph) -> Vec<usize> {
    fn expand(g: &Graph, r: &mut Vec<usize>, p: Vec<u64>, x: Vec<u64>, best: &mut Vec<usize>) {
        let p_count: usize = p.iter().map(|w| w.count_ones() as usize).sum();
        if p_count == 0 {
            if x.iter().all(|&w| w == 0) && r.len() > best.len() {
                *best = r.clone();
            }
            return;
        }
        if r.len() + p_count <= best.len() {
            return;
        }
        let pivot = ones(&p)
            .chain(ones(&x))
            .max_by_key(|&u| {
                p.iter()
                    .zip(g.row(u))
                    .map(|(a, b)| (a & b).count_ones())
                    .sum::<u32>()
            })
            .unwrap();
        let mut outside: Vec<u64> = p.clone();
        for (a, b) in outside.iter_mut().zip(g.row(pivot)) {
            *a &= !b;
        }
        let candidates: Vec<usize> = ones(&outside).collect();
        let (mut p, mut x) = (p, x);
        for v in candidates {
            let row = g.row(v);
            let p2: Vec<u64> = p.iter().zip(row).map(|(a, b)| a & b).collect();
            let x2: Vec<u64> = x.iter().zip(row).map(|(a, b)| a & b).collect();
            r.push(v);
            expand(g, r, p2, x2, best);
            r.pop();
            clear_bit(&mut p, v);
            set_bit(&mut x, v);
        }
    }

    let n = g.n();
    let words = words_for(n);
    let mut all = vec![0u64; words];
    for v in 0..n {
        set_bit(&mut all, v);
    }
    let mut best = Vec::new();
    expand(g, &mut Vec::new(), all, vec![0; words], &mut best);
    best.sort_unstable();
    best
}

fn clique_bound(g: &Graph) -> usize {
    max_clique(g).len().max(1)
}

/// Least `k` admitting an equitable colouring, with its witness.
///
/// Feasibility is not monotone in `k`, so every `k` from the clique bound
/// upward is tested in turn.
pub fn equitable_chromatic_number(g: &Graph, time_limit: Option<Duration>) -> Result<(usize, ColoringWitness)> {
    if g.n() == 0 {
        return Err(Error::InvalidRange("graph has no vertices".into()));
    }
    let deadline = Deadline::after(time_limit);
    for k in clique_bound(g)..=g.n() {
        deadline.check()?;
        if let Some(w) = equitable_k_feasible_until(g, k, deadline)? {
            return Ok((k, w));
        }
    }
    unreachable!("singleton classes always form an equitable colouring")
}

struct DsaturSearch<'a> {
    g: &'a Graph,
    colour: Vec<Option<usize>>,
    // neighbour_colours[v * n + c] = coloured neighbours of v with colour c
    neighbour_colours: Vec<u32>,
    saturation: Vec<usize>,
    best: usize,
    best_colouring: Vec<usize>,
    lower: usize,
    nodes: u64,
    deadline: Deadline,
}

impl DsaturSearch<'_> {
    fn pick(&self) -> Option<usize> {
        (0..self.g.n())
            .filter(|&v| self.colour[v].is_none())
            .max_by_key(|&v| (self.saturation[v], self.g.degree(v), std::cmp::Reverse(v)))
    }

    fn assign(&mut self, v: usize, c: usize, delta: i32) {
        let n = self.g.n();
        self.colour[v] = if delta > 0 { Some(c) } else { None };
        for u in ones(self.g.row(v)) {
            let slot = &mut self.neighbour_colours[u * n + c];
            if delta > 0 {
                *slot += 1;
                if *slot == 1 {
                    self.saturation[u] += 1;
                }
            } else {
                *slot -= 1;
                if *slot == 0 {
                    self.saturation[u] -= 1;
                }
            }
        }
    }

    fn search(&mut self, used: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes & DEADLINE_CHECK_MASK == 0 {
            self.deadline.check()?;
        }
        let Some(v) = self.pick() else {
            self.best = used;
            self.best_colouring = self.colour.iter().map(|c| c.unwrap()).collect();
            return Ok(());
        };
        let n = self.g.n();
        for c in 0..=used {
            if self.best <= self.lower {
                return Ok(());
            }
            if c + 1 >= self.best {
                break;
            }
            if self.neighbour_colours[v * n + c] > 0 {
                continue;
            }
            self.assign(v, c, 1);
            self.search(used.max(c + 1))?;
            self.assign(v, c, -1);
        }
        Ok(())
    }
}

/// Exact chromatic number with a proper colouring attaining it.
pub fn chromatic_colouring(g: &Graph, time_limit: Option<Duration>) -> Result<(usize, Vec<usize>)> {
    let n = g.n();
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let mut s = DsaturSearch {
        g,
        colour: vec![None; n],
        neighbour_colours: vec![0; n * n],
        saturation: vec![0; n],
        best: n + 1,
        best_colouring: (0..n).collect(),
        lower: clique_bound(g),
        nodes: 0,
        deadline: Deadline::after(time_limit),
    };
    s.search(0)?;
    Ok((s.best, s.best_colouring))
}

pub fn chromatic_number(g: &Graph, time_limit: Option<Duration>) -> Result<usize> {
    chromatic_colouring(g, time_limit).map(|(k, _)| k)
}

/// Least `k` such that equitable `l`-colourings exist for every `l >= k`.
///
/// Scans down from `min(Δ + 1, n)`; above that cap feasibility is
/// guaranteed.
pub fn equitable_threshold(g: &Graph, time_limit: Option<Duration>) -> Result<usize> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidRange("graph has no vertices".into()));
    }
    let deadline = Deadline::after(time_limit);
    let omega = clique_bound(g);
    let cap = (g.max_degree() + 1).min(n);
    for k in (1..=cap).rev() {
        deadline.check()?;
        if k < omega || equitable_k_feasible_until(g, k, deadline)?.is_none() {
            return Ok(k + 1);
        }
    }
    Ok(1)
}

const GREEDY_RESTARTS: usize = 32;

fn greedy_attempt<R: Rng>(g: &Graph, k: usize, rng: &mut R) -> Option<ColoringWitness> {
    let n = g.n();
    let sh = shape(n as u64, k as u64).ok()?;
    let (small, k_large) = (sh.size_small as usize, sh.k_large as usize);
    let mut order: Vec<(usize, u32, usize)> = (0..n).map(|v| (g.degree(v), rng.gen(), v)).collect();
    order.sort_unstable_by(|a, b| b.cmp(a));
    let mut sizes = vec![0usize; k];
    let mut large_used = 0;
    let mut colour = vec![usize::MAX; n];
    for &(_, _, v) in &order {
        let mut options: Vec<usize> = (0..k)
            .filter(|&c| sizes[c] < small || (sizes[c] == small && large_used < k_large))
            .filter(|&c| ones(g.row(v)).all(|u| colour[u] != c))
            .collect();
        if options.is_empty() {
            return None;
        }
        options.shuffle(rng);
        let c = *options.iter().min_by_key(|&&c| sizes[c]).unwrap();
        if sizes[c] == small {
            large_used += 1;
        }
        sizes[c] += 1;
        colour[v] = c;
    }
    Some(ColoringWitness { assignment: colour, k })
}

/// Randomized greedy with restarts; the returned `k` upper-bounds the
/// equitable chromatic number.
pub fn greedy_equitable_bound(g: &Graph, seed: SeedSpec) -> (usize, ColoringWitness) {
    let n = g.n();
    let mut rng = seed.rng();
    for k in clique_bound(g)..n {
        for _ in 0..GREEDY_RESTARTS {
            if let Some(w) = greedy_attempt(g, k, &mut rng) {
                return (k, w);
            }
        }
    }
    (
        n,
        ColoringWitness {
            assignment: (0..n).collect(),
            k: n,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::is_valid_equitable;

    #[test]
    fn feasibility_examples() {
        let k33 = Graph::complete_bipartite(3, 3);
        let w = equitable_k_feasible(&k33, 2, None).unwrap().unwrap();
        assert!(w.validate(&k33));
        assert_ne!(w.assignment[0], w.assignment[3]);
        assert!(equitable_k_feasible(&k33, 3, None).unwrap().is_none());
        let w = equitable_k_feasible(&Graph::empty(5), 1, None).unwrap().unwrap();
        assert_eq!(w.class_sizes(), vec![5]);
        assert!(equitable_k_feasible(&k33, 7, None).is_err());
    }

    #[test]
    fn equitable_number_examples() {
        assert_eq!(equitable_chromatic_number(&Graph::complete(4), None).unwrap().0, 4);
        assert_eq!(equitable_chromatic_number(&Graph::star(4), None).unwrap().0, 3);
        assert_eq!(equitable_chromatic_number(&Graph::complete_bipartite(3, 3), None).unwrap().0, 2);
    }

    #[test]
    fn chromatic_examples() {
        assert_eq!(chromatic_number(&Graph::complete(4), None).unwrap(), 4);
        assert_eq!(chromatic_number(&Graph::cycle(5), None).unwrap(), 3);
        assert_eq!(chromatic_number(&Graph::empty(6), None).unwrap(), 1);
        assert_eq!(chromatic_number(&Graph::cycle(6), None).unwrap(), 2);
        let (k, colouring) = chromatic_colouring(&Graph::star(5), None).unwrap();
        assert_eq!(k, 2);
        assert!(ColoringWitness { assignment: colouring, k }.is_proper(&Graph::star(5)));
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(equitable_threshold(&Graph::complete_bipartite(3, 3), None).unwrap(), 4);
        assert_eq!(equitable_threshold(&Graph::complete(4), None).unwrap(), 4);
        assert_eq!(equitable_threshold(&Graph::empty(4), None).unwrap(), 1);
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_equitable_bound(&Graph::empty(7), SeedSpec::new(1, 0)).0, 1);
        assert_eq!(greedy_equitable_bound(&Graph::complete(6), SeedSpec::new(1, 0)).0, 6);
        let g = Graph::cycle(7);
        let (k, w) = greedy_equitable_bound(&g, SeedSpec::new(3, 0));
        assert!(w.validate(&g));
        assert!(k >= equitable_chromatic_number(&g, None).unwrap().0);
    }

    #[test]
    fn clique_examples() {
        assert_eq!(max_clique(&Graph::complete(5)).len(), 5);
        assert_eq!(max_clique(&Graph::cycle(5)).len(), 2);
        assert_eq!(max_clique(&Graph::empty(3)).len(), 1);
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5), (2, 4), (2, 5)]).unwrap();
        assert_eq!(max_clique(&g), vec![2, 3, 4, 5]);
    }

    #[test]
    fn witness_conversions() {
        let g = Graph::cycle(6);
        let (_, w) = equitable_chromatic_number(&g, None).unwrap();
        let p = w.to_equipartition().unwrap();
        assert!(is_valid_equitable(&g, &p).unwrap());
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("vertex,colour\n"));
        assert_eq!(ColoringWitness::read_csv(buf.as_slice()).unwrap(), w);
    }

    #[test]
    fn unbalanced_witness_to_equipartition_places_large_first() {
        let w = ColoringWitness {
            assignment: vec![0, 1, 1, 0, 1],
            k: 2,
        };
        let p = w.to_equipartition().unwrap();
        assert_eq!(p.parts()[0], vec![1, 2, 4]);
    }

    #[test]
    fn zero_time_limit_times_out_on_hard_instance() {
        let g = crate::graphs::sample_gnm(60, 900, SeedSpec::new(11, 0)).unwrap();
        let r = equitable_chromatic_number(&g, Some(Duration::ZERO));
        assert!(matches!(r, Err(Error::Timeout)));
    }
}
