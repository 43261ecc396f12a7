//! Moments and free cumulants of words of operators under an expectation functional.
//!
//! A word is a sequence of [`Letter`]s, each an opaque operator id with an
//! optional time tag. The engine only talks to an [`ExpectationFunctional`];
//! it never sees matrices.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{kreweras_complement, NcLattice, Partition};
use crate::C64;

/// Operator id plus time tag.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Letter {
    pub op: usize,
    #[serde(default)]
    pub time: f64,
}

impl Letter {
    pub fn new(op: usize) -> Self {
        Letter { op, time: 0.0 }
    }

    pub fn at(op: usize, time: f64) -> Self {
        Letter { op, time }
    }
}

impl PartialEq for Letter {
    fn eq(&self, other: &Self) -> bool {
        self.op == other.op && self.time.to_bits() == other.time.to_bits()
    }
}

impl Eq for Letter {}

impl Hash for Letter {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.op.hash(state);
        self.time.to_bits().hash(state);
    }
}

/// Word of letters with no time tags.
pub fn word(ops: &[usize]) -> Vec<Letter> {
    ops.iter().map(|&op| Letter::new(op)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    ExplicitTable,
    NormalizedTrace,
    Thermal,
    EnsembleAveraged,
    FreeProduct,
}

/// Evaluates `<word>`. Implementations return 1 for the empty word.
pub trait ExpectationFunctional: Sync {
    fn moment(&self, word: &[Letter]) -> Result<C64>;

    fn kind(&self) -> FunctionalKind;

    /// Whether the functional is a trace, i.e. invariant under cyclic rotation.
    fn is_tracial(&self) -> bool {
        matches!(
            self.kind(),
            FunctionalKind::NormalizedTrace | FunctionalKind::EnsembleAveraged
        )
    }
}

impl<T: ExpectationFunctional + ?Sized> ExpectationFunctional for &T {
    fn moment(&self, word: &[Letter]) -> Result<C64> {
        (**self).moment(word)
    }

    fn kind(&self) -> FunctionalKind {
        (**self).kind()
    }
}

/// Explicit table of word moments. With `cyclic` set, lookups fall back to
/// every rotation of the word.
#[derive(Clone, Debug)]
pub struct MomentTable {
    values: HashMap<Vec<Letter>, C64>,
    cyclic: bool,
    kind: FunctionalKind,
}

impl MomentTable {
    pub fn new(cyclic: bool) -> Self {
        MomentTable { values: HashMap::new(), cyclic, kind: FunctionalKind::ExplicitTable }
    }

    pub fn with_kind(cyclic: bool, kind: FunctionalKind) -> Self {
        MomentTable { values: HashMap::new(), cyclic, kind }
    }

    /// Single operator `op = 0` with `moments[n-1] = <A^n>`; tracial.
    pub fn univariate(moments: &[C64]) -> Self {
        let mut t = MomentTable::new(true);
        for (i, &m) in moments.iter().enumerate() {
            t.insert(word(&vec![0; i + 1]), m);
        }
        t
    }

    pub fn insert(&mut self, word: Vec<Letter>, value: C64) {
        self.values.insert(word, value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Letter>, &C64)> {
        self.values.iter()
    }
}

impl ExpectationFunctional for MomentTable {
    fn moment(&self, w: &[Letter]) -> Result<C64> {
        if w.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        if let Some(v) = self.values.get(w) {
            return Ok(*v);
        }
        if self.cyclic {
            let mut rot = w.to_vec();
            for _ in 1..w.len() {
                rot.rotate_left(1);
                if let Some(v) = self.values.get(&rot) {
                    return Ok(*v);
                }
            }
        }
        let ops: Vec<String> = w.iter().map(|l| l.op.to_string()).collect();
        Err(Error::MissingMoment(ops.join(" ")))
    }

    fn kind(&self) -> FunctionalKind {
        self.kind
    }

    fn is_tracial(&self) -> bool {
        self.cyclic
    }
}

/// Moments of the free product of two families: letters whose op is in
/// `a_ops` are evaluated by `a`, all others by `b`, and mixed words follow the
/// free product rule through the Kreweras complement.
pub struct FreeProduct<A, B> {
    pub a: A,
    pub b: B,
    pub a_ops: Vec<usize>,
}

impl<A: ExpectationFunctional, B: ExpectationFunctional> FreeProduct<A, B> {
    pub fn new(a: A, b: B, a_ops: Vec<usize>) -> Self {
        FreeProduct { a, b, a_ops }
    }

    fn is_a(&self, l: &Letter) -> bool {
        self.a_ops.contains(&l.op)
    }
}

impl<A: ExpectationFunctional, B: ExpectationFunctional> ExpectationFunctional for FreeProduct<A, B> {
    fn moment(&self, w: &[Letter]) -> Result<C64> {
        if w.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        // Split into a1 b1 a2 b2 ... am bm with possibly empty end pieces.
        let mut a_parts: Vec<Vec<Letter>> = Vec::new();
        let mut b_parts: Vec<Vec<Letter>> = Vec::new();
        let mut i = 0;
        while i < w.len() {
            let mut a = Vec::new();
            while i < w.len() && self.is_a(&w[i]) {
                a.push(w[i]);
                i += 1;
            }
            let mut b = Vec::new();
            while i < w.len() && !self.is_a(&w[i]) {
                b.push(w[i]);
                i += 1;
            }
            a_parts.push(a);
            b_parts.push(b);
        }
        if a_parts.len() == 1 {
            if b_parts[0].is_empty() {
                return self.a.moment(&a_parts[0]);
            }
            if a_parts[0].is_empty() {
                return self.b.moment(&b_parts[0]);
            }
        }
        mixed_moment_free_parts(&a_parts, &self.a, &b_parts, &self.b)
    }

    fn kind(&self) -> FunctionalKind {
        FunctionalKind::FreeProduct
    }

    fn is_tracial(&self) -> bool {
        self.a.is_tracial() && self.b.is_tracial()
    }
}

fn concat(parts: &[Vec<Letter>], idx: &[usize]) -> Vec<Letter> {
    idx.iter().flat_map(|&i| parts[i].iter().copied()).collect()
}

/// Moments of sub-words keyed by position bitmask.
struct SubwordMoments<'a, F: ?Sized> {
    parts: &'a [Vec<Letter>],
    f: &'a F,
    cache: HashMap<u32, C64>,
}

impl<'a, F: ExpectationFunctional + ?Sized> SubwordMoments<'a, F> {
    fn new(parts: &'a [Vec<Letter>], f: &'a F) -> Self {
        SubwordMoments { parts, f, cache: HashMap::new() }
    }

    fn get(&mut self, mask: u32) -> Result<C64> {
        if let Some(v) = self.cache.get(&mask) {
            return Ok(*v);
        }
        let idx = positions(mask);
        let v = self.f.moment(&concat(self.parts, &idx))?;
        self.cache.insert(mask, v);
        Ok(v)
    }
}

fn positions(mask: u32) -> Vec<usize> {
    (0..32).filter(|i| mask >> i & 1 == 1).collect()
}

fn block_mask(block: &[usize], pos: &[usize]) -> u32 {
    block.iter().fold(0u32, |m, &j| m | 1 << pos[j])
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("cumulant of an empty word"));
    }
    if n > crate::lattice::DEFAULT_NC_LIMIT {
        return Err(Error::Size(format!("word length {n} exceeds the NC enumeration limit")));
    }
    Ok(())
}

/// `<word>_sigma`: product over blocks of sigma of the moment of the sub-word
/// read in block order.
pub fn blockwise_moment<F: ExpectationFunctional + ?Sized>(
    w: &[Letter],
    sigma: &Partition,
    f: &F,
) -> Result<C64> {
    if sigma.n() != w.len() {
        return Err(Error::domain(format!(
            "partition of {} points for a word of length {}",
            sigma.n(),
            w.len()
        )));
    }
    let mut acc = C64::new(1.0, 0.0);
    for b in sigma.blocks() {
        let sub: Vec<Letter> = b.iter().map(|&i| w[i]).collect();
        acc *= f.moment(&sub)?;
    }
    Ok(acc)
}

/// `kappa_n(word)` by Möbius inversion over NC(n).
pub fn cumulant<F: ExpectationFunctional + ?Sized>(w: &[Letter], f: &F) -> Result<C64> {
    let n = w.len();
    check_len(n)?;
    let parts: Vec<Vec<Letter>> = w.iter().map(|l| vec![*l]).collect();
    cumulant_of_parts(&parts, f)
}

/// Free cumulant whose i-th argument is the product of the letters in `parts[i]`.
pub fn cumulant_of_parts<F: ExpectationFunctional + ?Sized>(
    parts: &[Vec<Letter>],
    f: &F,
) -> Result<C64> {
    let n = parts.len();
    check_len(n)?;
    let lattice = NcLattice::shared(n)?;
    let down = lattice.moebius_down(lattice.top());
    let pos: Vec<usize> = (0..n).collect();
    let mut moments = SubwordMoments::new(parts, f);
    // Fill the cache first so the parallel sum only reads.
    let mut masks: Vec<Vec<u32>> = Vec::with_capacity(down.len());
    for &(s, _) in down {
        let ms: Vec<u32> = lattice.get(s).blocks().iter().map(|b| block_mask(b, &pos)).collect();
        for &m in &ms {
            moments.get(m)?;
        }
        masks.push(ms);
    }
    let cache = &moments.cache;
    let term = |(i, &(_, mu)): (usize, &(usize, i64))| {
        masks[i].iter().fold(C64::new(mu as f64, 0.0), |acc, m| acc * cache[m])
    };
    let terms: Vec<C64> = if down.len() > 2000 {
        down.par_iter().enumerate().map(term).collect()
    } else {
        down.iter().enumerate().map(term).collect()
    };
    Ok(terms.into_iter().sum())
}

/// `kappa_pi(word)`: product over blocks of pi of the cumulant of the sub-word.
pub fn cumulant_partition<F: ExpectationFunctional + ?Sized>(
    w: &[Letter],
    pi: &Partition,
    f: &F,
) -> Result<C64> {
    if pi.n() != w.len() {
        return Err(Error::domain("partition size differs from word length"));
    }
    let mut acc = C64::new(1.0, 0.0);
    for b in pi.blocks() {
        let sub: Vec<Letter> = b.iter().map(|&i| w[i]).collect();
        acc *= cumulant(&sub, f)?;
    }
    Ok(acc)
}

/// Cumulants of every sub-word of a word, keyed by position mask, with the
/// block products `kappa_pi` for all of NC(n).
#[derive(Clone, Debug)]
pub struct CumulantSet {
    word: Vec<Letter>,
    by_mask: HashMap<u32, C64>,
}

impl CumulantSet {
    pub fn word(&self) -> &[Letter] {
        &self.word
    }

    /// `kappa_n` of the full word.
    pub fn full(&self) -> C64 {
        self.by_mask[&((1u32 << self.word.len()) - 1)]
    }

    /// Cumulant of the sub-word at the given (increasing) positions.
    pub fn subword(&self, positions: &[usize]) -> Option<C64> {
        let mask = positions.iter().fold(0u32, |m, &p| m | 1 << p);
        self.by_mask.get(&mask).copied()
    }

    pub fn partition(&self, pi: &Partition) -> Result<C64> {
        if pi.n() != self.word.len() {
            return Err(Error::domain("partition size differs from word length"));
        }
        let pos: Vec<usize> = (0..pi.n()).collect();
        Ok(pi
            .blocks()
            .iter()
            .fold(C64::new(1.0, 0.0), |acc, b| acc * self.by_mask[&block_mask(b, &pos)]))
    }

    /// Every `(pi, kappa_pi)` for pi in NC(n).
    pub fn all_partitions(&self) -> Result<Vec<(Partition, C64)>> {
        let lattice = NcLattice::shared(self.word.len())?;
        lattice
            .partitions()
            .iter()
            .map(|p| Ok((p.clone(), self.partition(p)?)))
            .collect()
    }
}

/// All sub-word cumulants of `w` by the recursive definition
/// `kappa(S) = <S> - sum over pi < 1 of prod kappa(blocks)`.
pub fn cumulants_from_moments<F: ExpectationFunctional + ?Sized>(
    w: &[Letter],
    f: &F,
) -> Result<CumulantSet> {
    let n = w.len();
    check_len(n)?;
    let parts: Vec<Vec<Letter>> = w.iter().map(|l| vec![*l]).collect();
    let mut moments = SubwordMoments::new(&parts, f);
    let mut by_mask: HashMap<u32, C64> = HashMap::new();
    let mut masks: Vec<u32> = (1..(1u32 << n)).collect();
    masks.sort_by_key(|m| m.count_ones());
    for mask in masks {
        let pos = positions(mask);
        let m = pos.len();
        let lattice = NcLattice::shared(m)?;
        let top = lattice.top();
        let mut acc = moments.get(mask)?;
        for (i, p) in lattice.partitions().iter().enumerate() {
            if i == top {
                continue;
            }
            acc -= p
                .blocks()
                .iter()
                .fold(C64::new(1.0, 0.0), |a, b| a * by_mask[&block_mask(b, &pos)]);
        }
        by_mask.insert(mask, acc);
    }
    Ok(CumulantSet { word: w.to_vec(), by_mask })
}

/// Moment-cumulant formula: sum over NC(n) of block products of cumulants.
/// `kappa` receives the positions of a block in increasing order.
pub fn moments_from_cumulants(
    n: usize,
    mut kappa: impl FnMut(&[usize]) -> Result<C64>,
) -> Result<C64> {
    check_len(n)?;
    let lattice = NcLattice::shared(n)?;
    let mut total = C64::new(0.0, 0.0);
    for p in lattice.partitions() {
        let mut term = C64::new(1.0, 0.0);
        for b in p.blocks() {
            term *= kappa(b)?;
        }
        total += term;
    }
    Ok(total)
}

/// n-th moment of a single variable from its cumulant sequence
/// (`kappas[j-1] = kappa_j`).
pub fn moment_from_univariate(kappas: &[C64], n: usize) -> Result<C64> {
    moments_from_cumulants(n, |b| {
        kappas
            .get(b.len() - 1)
            .copied()
            .ok_or_else(|| Error::domain(format!("kappa_{} not supplied", b.len())))
    })
}

/// Free product rule `<a1 b1 .. an bn> = sum_pi kappa_pi(a) <b>_{K(pi)}`.
pub fn mixed_moment_free<FA, FB>(a: &[Letter], fa: &FA, b: &[Letter], fb: &FB) -> Result<C64>
where
    FA: ExpectationFunctional + ?Sized,
    FB: ExpectationFunctional + ?Sized,
{
    if a.len() != b.len() {
        return Err(Error::domain("alternating word needs as many A letters as B letters"));
    }
    let ap: Vec<Vec<Letter>> = a.iter().map(|l| vec![*l]).collect();
    let bp: Vec<Vec<Letter>> = b.iter().map(|l| vec![*l]).collect();
    mixed_moment_free_parts(&ap, fa, &bp, fb)
}

fn mixed_moment_free_parts<FA, FB>(
    a: &[Vec<Letter>],
    fa: &FA,
    b: &[Vec<Letter>],
    fb: &FB,
) -> Result<C64>
where
    FA: ExpectationFunctional + ?Sized,
    FB: ExpectationFunctional + ?Sized,
{
    let n = a.len();
    check_len(n)?;
    let lattice = NcLattice::shared(n)?;
    let pos: Vec<usize> = (0..n).collect();
    let mut a_kappa: HashMap<u32, C64> = HashMap::new();
    let mut b_mom = SubwordMoments::new(b, fb);
    let mut total = C64::new(0.0, 0.0);
    for p in lattice.partitions() {
        let mut term = C64::new(1.0, 0.0);
        for blk in p.blocks() {
            let m = block_mask(blk, &pos);
            let v = match a_kappa.get(&m) {
                Some(v) => *v,
                None => {
                    let sub: Vec<Vec<Letter>> = blk.iter().map(|&i| a[i].clone()).collect();
                    let v = cumulant_of_parts(&sub, fa)?;
                    a_kappa.insert(m, v);
                    v
                }
            };
            term *= v;
        }
        if term == C64::new(0.0, 0.0) {
            continue;
        }
        for blk in kreweras_complement(p)?.blocks() {
            term *= b_mom.get(block_mask(blk, &pos))?;
        }
        total += term;
    }
    Ok(total)
}

/// One term `kappa_pi(A) <B>_{K(pi)}` of the free product expansion.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FreeProductTerm {
    pub a_partition: Partition,
    pub b_partition: Partition,
}

/// The NC(n) terms of the free product expansion of `<a1 b1 .. an bn>`.
pub fn free_product_terms(n: usize) -> Result<Vec<FreeProductTerm>> {
    check_len(n)?;
    NcLattice::shared(n)?
        .partitions()
        .iter()
        .map(|p| {
            Ok(FreeProductTerm { a_partition: p.clone(), b_partition: kreweras_complement(p)? })
        })
        .collect()
}

/// `<(a1 - <a1>)(b1 - <b1>) .. (an - <an>)(bn - <bn>)>` under `f`, expanded by
/// multilinearity. Vanishes when the two families are free.
pub fn alternating_centered_residual<F: ExpectationFunctional + ?Sized>(
    a: &[Letter],
    b: &[Letter],
    f: &F,
) -> Result<C64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::domain("alternating word needs n >= 1 letters of each family"));
    }
    let letters: Vec<Letter> = a.iter().zip(b).flat_map(|(x, y)| [*x, *y]).collect();
    let m = letters.len();
    if m > 24 {
        return Err(Error::Size("alternating word too long".into()));
    }
    let means: Vec<C64> = letters.iter().map(|l| f.moment(&[*l])).collect::<Result<_>>()?;
    let mut total = C64::new(0.0, 0.0);
    for keep in 0u32..(1u32 << m) {
        let mut coeff = C64::new(1.0, 0.0);
        let mut sub = Vec::new();
        for (i, l) in letters.iter().enumerate() {
            if keep >> i & 1 == 1 {
                sub.push(*l);
            } else {
                coeff *= -means[i];
            }
        }
        if coeff != C64::new(0.0, 0.0) {
            total += coeff * f.moment(&sub)?;
        }
    }
    Ok(total)
}

/// Same residual with the mixed moments generated by the free product of `fa` and `fb`.
pub fn alternating_centered_free<FA, FB>(a: &[Letter], fa: FA, b: &[Letter], fb: FB) -> Result<C64>
where
    FA: ExpectationFunctional,
    FB: ExpectationFunctional,
{
    let a_ops: Vec<usize> = a.iter().map(|l| l.op).collect();
    if b.iter().any(|l| a_ops.contains(&l.op)) {
        return Err(Error::domain("the two families must use disjoint operator ids"));
    }
    let fp = FreeProduct::new(fa, fb, a_ops);
    alternating_centered_residual(a, b, &fp)
}

/// Additivity of free cumulants for free summands.
pub fn free_sum_cumulants(kappa_a: &[C64], kappa_b: &[C64]) -> Vec<C64> {
    let n = kappa_a.len().max(kappa_b.len());
    (0..n)
        .map(|i| {
            kappa_a.get(i).copied().unwrap_or_default() + kappa_b.get(i).copied().unwrap_or_default()
        })
        .collect()
}
