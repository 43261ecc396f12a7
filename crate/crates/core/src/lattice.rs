//! Set partitions, the non-crossing lattice NC(n), its Möbius function and the
//! Kreweras complement.
//!
//! Elements of the ground set are 0-based internally. Text and JSON forms are
//! 1-based, so `{{1,3},{2,4}}` is the crossing pairing of four points.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest n for which NC(n) is enumerated unless a caller raises the limit.
pub const DEFAULT_NC_LIMIT: usize = 10;

/// A set partition of `{0, .., n-1}` in canonical form: every block sorted
/// ascending and blocks sorted by their least element.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition from 0-based blocks, validating coverage and disjointness.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("partition of an empty ground set"));
        }
        let mut seen = vec![false; n];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::domain("empty block"));
            }
            for &x in block {
                if x >= n {
                    return Err(Error::domain(format!("element {} outside 1..={n}", x + 1)));
                }
                if seen[x] {
                    return Err(Error::domain(format!("element {} appears twice", x + 1)));
                }
                seen[x] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::domain(format!("element {} not covered", missing + 1)));
        }
        Ok(Self::canonical(n, blocks))
    }

    /// Same as [`Partition::new`] with 1-based element labels.
    pub fn from_one_based(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut zero = Vec::with_capacity(blocks.len());
        for block in blocks {
            let mut b = Vec::with_capacity(block.len());
            for &x in block {
                if x == 0 {
                    return Err(Error::domain("1-based element 0"));
                }
                b.push(x - 1);
            }
            zero.push(b);
        }
        Self::new(n, zero)
    }

    /// Partition whose blocks are the level sets of `labels` (any label values).
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::domain("partition of an empty ground set"));
        }
        let mut slot: HashMap<T, usize> = HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            let b = *slot.entry(*l).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            blocks[b].push(i);
        }
        Ok(Self::canonical(labels.len(), blocks))
    }

    fn canonical(n: usize, mut blocks: Vec<Vec<usize>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Partition { n, blocks }
    }

    /// 0_n, all singletons.
    pub fn singletons(n: usize) -> Self {
        Partition { n, blocks: (0..n).map(|i| vec![i]).collect() }
    }

    /// 1_n, a single block.
    pub fn full(n: usize) -> Self {
        Partition { n, blocks: vec![(0..n).collect()] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// `labels[i]` is the index of the block holding element `i`.
    pub fn block_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (b, block) in self.blocks.iter().enumerate() {
            for &x in block {
                labels[x] = b;
            }
        }
        labels
    }

    /// Stack scan: a block may only be revisited when it is the innermost open one.
    pub fn is_noncrossing(&self) -> bool {
        let labels = self.block_labels();
        let last: Vec<usize> = self.blocks.iter().map(|b| *b.last().unwrap()).collect();
        let mut open = vec![false; self.blocks.len()];
        let mut stack: Vec<usize> = Vec::new();
        for (i, &b) in labels.iter().enumerate() {
            if open[b] {
                if stack.last() != Some(&b) {
                    return false;
                }
            } else {
                open[b] = true;
                stack.push(b);
            }
            if last[b] == i {
                stack.pop();
            }
        }
        true
    }

    /// Refinement order: every block of `self` lies inside a block of `other`.
    pub fn leq(&self, other: &Partition) -> Result<bool> {
        if self.n != other.n {
            return Err(Error::domain(format!(
                "partitions of different ground sets ({} vs {})",
                self.n, other.n
            )));
        }
        let labels = other.block_labels();
        Ok(self
            .blocks
            .iter()
            .all(|b| b.iter().all(|&x| labels[x] == labels[b[0]])))
    }

    /// Relabels element `i` as `(i + shift) mod n`.
    pub fn rotate(&self, shift: usize) -> Partition {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&x| (x + shift) % self.n).collect())
            .collect();
        Self::canonical(self.n, blocks)
    }

    /// Cyclic successor map with every block read as an increasing cycle.
    pub(crate) fn increasing_cycles(&self) -> Vec<usize> {
        let mut next = vec![0; self.n];
        for b in &self.blocks {
            for (j, &x) in b.iter().enumerate() {
                next[x] = b[(j + 1) % b.len()];
            }
        }
        next
    }

    pub(crate) fn from_successor(next: &[usize]) -> Partition {
        let n = next.len();
        let mut seen = vec![false; n];
        let mut blocks = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut block = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                block.push(x);
                x = next[x];
            }
            blocks.push(block);
        }
        Self::canonical(n, blocks)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", x + 1)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

impl FromStr for Partition {
    type Err = Error;

    /// Parses `{{1,3},{2,4}}` (or the same with square brackets); n is the largest element.
    fn from_str(s: &str) -> Result<Self> {
        let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let inner = cleaned
            .strip_prefix(['{', '['])
            .and_then(|r| r.strip_suffix(['}', ']']))
            .ok_or_else(|| Error::Parse(format!("not a partition literal: {s}")))?;
        let mut blocks = Vec::new();
        for chunk in inner.split(['}', ']']) {
            let chunk = chunk.trim_start_matches(',').trim_start_matches(['{', '[']);
            if chunk.is_empty() {
                continue;
            }
            let block = chunk
                .split(',')
                .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("{t}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            blocks.push(block);
        }
        let n = blocks.iter().flatten().copied().max().unwrap_or(0);
        Partition::from_one_based(n, &blocks)
    }
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let blocks = self.blocks.iter().map(|b| b.iter().map(|x| x + 1).collect()).collect();
        PartitionRepr { n: self.n, blocks }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PartitionRepr::deserialize(d)?;
        Partition::from_one_based(repr.n, &repr.blocks).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`Partition::is_noncrossing`].
pub fn is_noncrossing(p: &Partition) -> bool {
    p.is_noncrossing()
}

/// Free-function form of [`Partition::leq`].
pub fn leq(sigma: &Partition, pi: &Partition) -> Result<bool> {
    sigma.leq(pi)
}

pub fn catalan(n: usize) -> u64 {
    let mut c: u64 = 1;
    for i in 0..n as u64 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    c
}

/// All of NC(n) in sorted canonical order.
pub fn enumerate_nc(n: usize) -> Result<Vec<Partition>> {
    enumerate_nc_with_limit(n, DEFAULT_NC_LIMIT)
}

pub fn enumerate_nc_with_limit(n: usize, limit: usize) -> Result<Vec<Partition>> {
    if n == 0 {
        return Err(Error::domain("NC(0) requested"));
    }
    if n > limit {
        return Err(Error::Size(format!("NC({n}) exceeds the enumeration limit {limit}")));
    }
    let mut out = Vec::with_capacity(catalan(n) as usize);
    let mut blocks = Vec::new();
    fill_nc(vec![(0, n)], &mut blocks, &mut out, n);
    out.sort();
    Ok(out)
}

// Open intervals still to be partitioned; the block of each interval's first
// element splits the rest into independent gaps.
fn fill_nc(
    mut pending: Vec<(usize, usize)>,
    blocks: &mut Vec<Vec<usize>>,
    out: &mut Vec<Partition>,
    n: usize,
) {
    let Some((lo, hi)) = pending.pop() else {
        out.push(Partition::canonical(n, blocks.clone()));
        return;
    };
    if lo >= hi {
        fill_nc(pending, blocks, out, n);
        return;
    }
    let rest = hi - lo - 1;
    for mask in 0u32..(1u32 << rest) {
        let mut block = vec![lo];
        block.extend((0..rest).filter(|j| mask >> j & 1 == 1).map(|j| lo + 1 + j));
        let mut next = pending.clone();
        for w in block.windows(2) {
            next.push((w[0] + 1, w[1]));
        }
        next.push((block[block.len() - 1] + 1, hi));
        blocks.push(block);
        fill_nc(next, blocks, out, n);
        blocks.pop();
    }
}

/// Every set partition of n elements (restricted growth strings).
pub fn set_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut rgs = vec![0usize; n];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == rgs.len() {
            out.push(Partition::from_labels(rgs).expect("nonempty"));
            return;
        }
        for l in 0..=max + 1 {
            rgs[i] = l;
            rec(i + 1, max.max(l), rgs, out);
        }
    }
    rec(1, 0, &mut rgs, &mut out);
    out
}

/// Möbius function of the full partition lattice: product over blocks of `pi`
/// of (-1)^(m-1) (m-1)!, where m counts the blocks of `sigma` inside it.
pub fn partition_lattice_moebius(sigma: &Partition, pi: &Partition) -> Result<i64> {
    if !sigma.leq(pi)? {
        return Err(Error::domain(format!("{sigma} is not below {pi}")));
    }
    let labels = pi.block_labels();
    let mut counts = vec![0usize; pi.num_blocks()];
    for b in sigma.blocks() {
        counts[labels[b[0]]] += 1;
    }
    let mut mu: i64 = 1;
    for m in counts {
        let fact: i64 = (1..m as i64).product();
        mu *= if m % 2 == 1 { fact } else { -fact };
    }
    Ok(mu)
}

/// Kreweras complement with the dual point of `i` placed right after `i`.
/// As permutations with increasing cycles this is `pi^{-1} gamma`.
pub fn kreweras_complement(pi: &Partition) -> Result<Partition> {
    if !pi.is_noncrossing() {
        return Err(Error::domain(format!("{pi} is crossing")));
    }
    let n = pi.n;
    let succ = pi.increasing_cycles();
    let mut pred = vec![0; n];
    for (x, &y) in succ.iter().enumerate() {
        pred[y] = x;
    }
    let k: Vec<usize> = (0..n).map(|x| pred[(x + 1) % n]).collect();
    Ok(Partition::from_successor(&k))
}

/// Inverse of [`kreweras_complement`], `gamma sigma^{-1}` as permutations.
pub fn inverse_kreweras(sigma: &Partition) -> Result<Partition> {
    if !sigma.is_noncrossing() {
        return Err(Error::domain(format!("{sigma} is crossing")));
    }
    let n = sigma.n;
    let succ = sigma.increasing_cycles();
    let mut pred = vec![0; n];
    for (x, &y) in succ.iter().enumerate() {
        pred[y] = x;
    }
    let k: Vec<usize> = (0..n).map(|x| (pred[x] + 1) % n).collect();
    Ok(Partition::from_successor(&k))
}

/// NC(n) with stable indices and lazily memoized Möbius values.
///
/// The Möbius values below each upper element are computed at most once and
/// then only read, so a lattice can be shared between threads.
pub struct NcLattice {
    n: usize,
    partitions: Vec<Partition>,
    index: HashMap<Partition, usize>,
    labels: Vec<Vec<u8>>,
    down: Vec<OnceLock<Vec<(usize, i64)>>>,
}

impl NcLattice {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_limit(n, DEFAULT_NC_LIMIT)
    }

    pub fn with_limit(n: usize, limit: usize) -> Result<Self> {
        let partitions = enumerate_nc_with_limit(n, limit)?;
        let index = partitions.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let labels = partitions
            .iter()
            .map(|p| p.block_labels().into_iter().map(|l| l as u8).collect())
            .collect();
        let down = (0..partitions.len()).map(|_| OnceLock::new()).collect();
        Ok(NcLattice { n, partitions, index, labels, down })
    }

    /// Process-wide lattice for `n <= DEFAULT_NC_LIMIT`.
    pub fn shared(n: usize) -> Result<&'static NcLattice> {
        static CACHE: [OnceLock<NcLattice>; DEFAULT_NC_LIMIT + 1] =
            [const { OnceLock::new() }; DEFAULT_NC_LIMIT + 1];
        if n == 0 || n > DEFAULT_NC_LIMIT {
            return Err(Error::Size(format!(
                "NC({n}) outside the shared range 1..={DEFAULT_NC_LIMIT}"
            )));
        }
        if let Some(l) = CACHE[n].get() {
            return Ok(l);
        }
        let built = NcLattice::new(n)?;
        Ok(CACHE[n].get_or_init(|| built))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn get(&self, i: usize) -> &Partition {
        &self.partitions[i]
    }

    pub fn index_of(&self, p: &Partition) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn top(&self) -> usize {
        self.index[&Partition::full(self.n)]
    }

    pub fn bottom(&self) -> usize {
        self.index[&Partition::singletons(self.n)]
    }

    /// `partitions[s] <= partitions[p]` by index.
    pub fn leq_idx(&self, s: usize, p: usize) -> bool {
        let lab = &self.labels[p];
        self.partitions[s]
            .blocks()
            .iter()
            .all(|b| b.iter().all(|&x| lab[x] == lab[b[0]]))
    }

    /// Möbius values mu(s, p) for every s below p, sorted by s.
    pub fn moebius_down(&self, p: usize) -> &[(usize, i64)] {
        self.down[p].get_or_init(|| self.compute_down(p))
    }

    // [s, p] is the product over blocks b of p of [s|b, 1_b], and
    // [sigma, 1] is isomorphic to [0, K(sigma)], so mu(s, p) is a product of
    // signed Catalan numbers over the blocks of the restricted complements.
    fn compute_down(&self, p: usize) -> Vec<(usize, i64)> {
        let blocks = self.partitions[p].blocks();
        (0..self.len())
            .filter(|&s| self.leq_idx(s, p))
            .map(|s| {
                let lab = &self.labels[s];
                let mut mu = 1i64;
                for b in blocks {
                    let restricted: Vec<u8> = b.iter().map(|&x| lab[x]).collect();
                    let sigma = Partition::from_labels(&restricted).expect("non-empty block");
                    let k = kreweras_complement(&sigma).expect("restriction is non-crossing");
                    for c in k.blocks() {
                        let m = c.len() - 1;
                        let sign = if m % 2 == 0 { 1 } else { -1 };
                        mu *= sign * catalan(m) as i64;
                    }
                }
                (s, mu)
            })
            .collect()
    }

    #[cfg(test)]
    fn compute_down_recursive(&self, p: usize) -> Vec<(usize, i64)> {
        let mut below: Vec<usize> = (0..self.len()).filter(|&s| self.leq_idx(s, p)).collect();
        below.sort_by_key(|&s| (self.partitions[s].num_blocks(), s));
        let mut mu: Vec<i64> = Vec::with_capacity(below.len());
        for (pos, &s) in below.iter().enumerate() {
            if s == p {
                mu.push(1);
                continue;
            }
            let nb = self.partitions[s].num_blocks();
            let mut acc = 0i64;
            for (q, &t) in below[..pos].iter().enumerate() {
                if self.partitions[t].num_blocks() < nb && self.leq_idx(s, t) {
                    acc += mu[q];
                }
            }
            mu.push(-acc);
        }
        let mut out: Vec<(usize, i64)> = below.into_iter().zip(mu).collect();
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    pub fn moebius_idx(&self, s: usize, p: usize) -> Result<i64> {
        let down = self.moebius_down(p);
        match down.binary_search_by_key(&s, |e| e.0) {
            Ok(i) => Ok(down[i].1),
            Err(_) => Err(Error::domain(format!(
                "{} is not below {}",
                self.partitions[s], self.partitions[p]
            ))),
        }
    }

    pub fn moebius(&self, sigma: &Partition, pi: &Partition) -> Result<i64> {
        let s = self.lookup(sigma)?;
        let p = self.lookup(pi)?;
        self.moebius_idx(s, p)
    }

    fn lookup(&self, p: &Partition) -> Result<usize> {
        if p.n() != self.n {
            return Err(Error::domain(format!("{p} is not a partition of {} points", self.n)));
        }
        self.index_of(p).ok_or_else(|| Error::domain(format!("{p} is crossing")))
    }
}

/// Möbius function of NC(n) for non-crossing `sigma <= pi`.
pub fn moebius(sigma: &Partition, pi: &Partition) -> Result<i64> {
    if sigma.n() != pi.n() {
        return Err(Error::domain("partitions of different ground sets"));
    }
    NcLattice::shared(sigma.n())?.moebius(sigma, pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Partition {
        s.parse().unwrap()
    }

    #[test]
    fn crossing_examples() {
        assert!(!p("{{1,3},{2,4}}").is_noncrossing());
        assert!(p("{{1,2,3,4}}").is_noncrossing());
        assert!(p("{{1,4},{2,3}}").is_noncrossing());
        assert!(!p("{{1,4},{2,5},{3}}").is_noncrossing());
        assert!(p("{{1,5},{2,4},{3},{6}}").is_noncrossing());
    }

    #[test]
    fn counts_and_limit() {
        assert_eq!(enumerate_nc(1).unwrap().len(), 1);
        assert_eq!(enumerate_nc(4).unwrap().len(), 14);
        assert_eq!(enumerate_nc(5).unwrap().len(), 42);
        assert!(matches!(enumerate_nc(11), Err(Error::Size(_))));
        assert_eq!(enumerate_nc_with_limit(11, 11).unwrap().len(), 58786);
    }

    #[test]
    fn product_formula_matches_recursion() {
        for n in 1..=6 {
            let lat = NcLattice::new(n).unwrap();
            for q in 0..lat.len() {
                assert_eq!(lat.compute_down(q), lat.compute_down_recursive(q), "n={n} {}", lat.get(q));
            }
        }
    }

    #[test]
    fn order_examples() {
        assert!(Partition::singletons(4).leq(&p("{{1,3},{2},{4}}")).unwrap());
        assert!(p("{{1,2},{3},{4}}").leq(&p("{{1,2,3},{4}}")).unwrap());
        assert!(!p("{{1,4},{2,3}}").leq(&p("{{1,2},{3,4}}")).unwrap());
        assert!(Partition::singletons(3).leq(&Partition::full(4)).is_err());
    }

    #[test]
    fn moebius_examples() {
        let q = p("{{1,2},{3}}");
        assert_eq!(moebius(&q, &q).unwrap(), 1);
        assert_eq!(moebius(&Partition::singletons(3), &Partition::full(3)).unwrap(), 2);
        assert_eq!(moebius(&Partition::singletons(4), &Partition::full(4)).unwrap(), -5);
        assert!(moebius(&Partition::full(3), &Partition::singletons(3)).is_err());
        assert!(moebius(&p("{{1,3},{2,4}}"), &Partition::full(4)).is_err());
    }

    #[test]
    fn kreweras_examples() {
        assert_eq!(kreweras_complement(&Partition::full(5)).unwrap(), Partition::singletons(5));
        assert_eq!(kreweras_complement(&Partition::singletons(4)).unwrap(), Partition::full(4));
        assert_eq!(kreweras_complement(&p("{{1,2},{3,4}}")).unwrap(), p("{{1},{2,4},{3}}"));
        assert_eq!(inverse_kreweras(&Partition::singletons(4)).unwrap(), Partition::full(4));
        assert!(kreweras_complement(&p("{{1,3},{2,4}}")).is_err());
    }

    #[test]
    fn partition_lattice_moebius_values() {
        let bottom = Partition::singletons(4);
        assert_eq!(partition_lattice_moebius(&bottom, &Partition::full(4)).unwrap(), -6);
        assert_eq!(partition_lattice_moebius(&bottom, &p("{{1,2},{3,4}}")).unwrap(), 1);
        assert_eq!(partition_lattice_moebius(&p("{{1,3},{2},{4}}"), &Partition::full(4)).unwrap(), 2);
    }

    #[test]
    fn parse_display_roundtrip() {
        let q = p("{{2,4},{1},{3}}");
        assert_eq!(q.to_string(), "{{1},{2,4},{3}}");
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, r#"{"n":4,"blocks":[[1],[2,4],[3]]}"#);
        assert_eq!(serde_json::from_str::<Partition>(&json).unwrap(), q);
        assert!("{{1,2},{2}}".parse::<Partition>().is_err());
    }
}
