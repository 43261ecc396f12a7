//! The symmetric group S_k: composition, cycles, Cayley length, geodesics and
//! the embedding of non-crossing partitions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::Partition;

/// Largest k for which geodesic sets are found by filtering all of S_k.
pub const GEODESIC_LIMIT: usize = 7;

/// A permutation of `{0, .., k-1}` stored as its one-line images.
///
/// Ordering is lexicographic on the one-line notation, which fixes the
/// indexing of S_k used throughout the crate.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Permutation {
    images: Vec<usize>,
}

/// Orbits of a permutation, each listed from its least element along the
/// permutation, sorted by least element.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct CycleDecomposition {
    pub cycles: Vec<Vec<usize>>,
}

/// Why a permutation does not correspond to a non-crossing partition.
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum NcRejection {
    /// Some orbit is not traversed in increasing cyclic order.
    Orientation { cycle: Vec<usize> },
    /// The orbits are correctly oriented but cross.
    Crossing { partition: String },
}

impl fmt::Display for NcRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NcRejection::Orientation { cycle } => {
                let c: Vec<String> = cycle.iter().map(|x| (x + 1).to_string()).collect();
                write!(f, "cycle ({}) runs against the cyclic order", c.join(" "))
            }
            NcRejection::Crossing { partition } => write!(f, "orbits {partition} cross"),
        }
    }
}

impl Permutation {
    /// From 0-based images.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let k = images.len();
        if k == 0 {
            return Err(Error::domain("permutation of an empty set"));
        }
        let mut seen = vec![false; k];
        for &x in &images {
            if x >= k || seen[x] {
                return Err(Error::domain(format!("{images:?} is not a bijection")));
            }
            seen[x] = true;
        }
        Ok(Permutation { images })
    }

    /// From 1-based one-line notation, e.g. `[2, 3, 1]`.
    pub fn from_one_line(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(Error::domain("one-line notation is 1-based"));
        }
        Self::new(images.iter().map(|x| x - 1).collect())
    }

    /// From 0-based cycles; unlisted points are fixed.
    pub fn from_cycles(k: usize, cycles: &[Vec<usize>]) -> Result<Self> {
        let mut images: Vec<usize> = (0..k).collect();
        let mut touched = vec![false; k];
        for c in cycles {
            for (j, &x) in c.iter().enumerate() {
                if x >= k || touched[x] {
                    return Err(Error::domain(format!("bad cycle {c:?}")));
                }
                touched[x] = true;
                images[x] = c[(j + 1) % c.len()];
            }
        }
        Ok(Permutation { images })
    }

    pub fn identity(k: usize) -> Self {
        Permutation { images: (0..k).collect() }
    }

    /// gamma_k = (2, 3, .., k, 1) in one-line notation.
    pub fn long_cycle(k: usize) -> Self {
        Permutation { images: (0..k).map(|i| (i + 1) % k).collect() }
    }

    pub fn transposition(k: usize, i: usize, j: usize) -> Self {
        let mut images: Vec<usize> = (0..k).collect();
        images.swap(i, j);
        Permutation { images }
    }

    /// Permutation whose cycles are the blocks of `p` read in increasing order.
    pub fn from_noncrossing(p: &Partition) -> Self {
        Permutation { images: p.increasing_cycles() }
    }

    pub fn k(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn one_line(&self) -> Vec<usize> {
        self.images.iter().map(|x| x + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.k() != other.k() {
            return Err(Error::domain(format!(
                "composing permutations of {} and {} points",
                self.k(),
                other.k()
            )));
        }
        Ok(self.then_unchecked(other))
    }

    fn then_unchecked(&self, other: &Permutation) -> Permutation {
        Permutation { images: other.images.iter().map(|&x| self.images[x]).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.k()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { images: inv }
    }

    /// `rho^{-1} self rho`.
    pub fn conjugate_by(&self, rho: &Permutation) -> Result<Permutation> {
        rho.inverse().compose(&self.compose(rho)?)
    }

    pub fn cycles(&self) -> CycleDecomposition {
        let k = self.k();
        let mut seen = vec![false; k];
        let mut cycles = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            let mut c = Vec::new();
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                c.push(x);
                x = self.images[x];
            }
            cycles.push(c);
        }
        CycleDecomposition { cycles }
    }

    pub fn num_cycles(&self) -> usize {
        let mut seen = vec![false; self.k()];
        let mut count = 0;
        for start in 0..self.k() {
            if !seen[start] {
                count += 1;
                let mut x = start;
                while !seen[x] {
                    seen[x] = true;
                    x = self.images[x];
                }
            }
        }
        count
    }

    /// Cayley length, k - #cycles.
    pub fn length(&self) -> usize {
        self.k() - self.num_cycles()
    }

    pub fn orbit_partition(&self) -> Partition {
        Partition::from_successor(&self.images)
    }

    /// The non-crossing partition of the orbits, provided every orbit runs in
    /// increasing cyclic order and the orbits do not cross.
    pub fn to_noncrossing(&self) -> std::result::Result<Partition, NcRejection> {
        for c in self.cycles().cycles {
            let mut sorted = c.clone();
            sorted.sort_unstable();
            let ok = sorted
                .iter()
                .enumerate()
                .all(|(i, &b)| self.images[b] == sorted[(i + 1) % sorted.len()]);
            if !ok {
                return Err(NcRejection::Orientation { cycle: c });
            }
        }
        let p = self.orbit_partition();
        if p.is_noncrossing() {
            Ok(p)
        } else {
            Err(NcRejection::Crossing { partition: p.to_string() })
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.to_noncrossing().is_ok()
    }

    /// Returns `(rho, rho^{-1} self rho)` with the second element canonical.
    ///
    /// `rho = identity` when `self` is already canonical. Otherwise `rho` lists
    /// the cycles sorted by least element, each read from its least element, so
    /// the conjugate is a product of increasing interval cycles.
    pub fn canonicalize_by_conjugation(&self) -> (Permutation, Permutation) {
        if self.is_canonical() {
            return (Permutation::identity(self.k()), self.clone());
        }
        let order: Vec<usize> = self.cycles().cycles.into_iter().flatten().collect();
        let rho = Permutation { images: order };
        let conj = self.conjugate_by(&rho).expect("same size");
        (rho, conj)
    }

    /// Every element of S_k in lexicographic order of one-line notation.
    pub fn all(k: usize) -> Vec<Permutation> {
        let mut cur: Vec<usize> = (0..k).collect();
        let mut out = vec![Permutation { images: cur.clone() }];
        while next_lex(&mut cur) {
            out.push(Permutation { images: cur.clone() });
        }
        out
    }

    /// Position of `self` in [`Permutation::all`].
    pub fn lex_rank(&self) -> usize {
        let k = self.k();
        let mut rank = 0;
        let mut fact: usize = (1..k).product();
        for i in 0..k {
            let smaller = self.images[i + 1..].iter().filter(|&&x| x < self.images[i]).count();
            rank += smaller * fact;
            if i + 1 < k {
                fact /= k - 1 - i;
            }
        }
        rank
    }

    /// Cycle notation with 1-based points, fixed points included, e.g. `(1 2)(3)`.
    pub fn cycle_string(&self) -> String {
        self.cycles()
            .cycles
            .iter()
            .map(|c| {
                let inner: Vec<String> = c.iter().map(|x| (x + 1).to_string()).collect();
                format!("({})", inner.join(" "))
            })
            .collect()
    }
}

impl std::ops::Mul for &Permutation {
    type Output = Permutation;

    /// Composition `self ∘ rhs`. Panics on mismatched sizes.
    fn mul(self, rhs: &Permutation) -> Permutation {
        assert_eq!(self.k(), rhs.k(), "permutation sizes differ");
        self.then_unchecked(rhs)
    }
}

fn next_lex(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// True iff l(beta) + l(beta^{-1} alpha) = l(alpha).
pub fn on_geodesic(beta: &Permutation, alpha: &Permutation) -> Result<bool> {
    let step = beta.inverse().compose(alpha)?;
    Ok(beta.length() + step.length() == alpha.length())
}

/// All beta on a geodesic from the identity to `alpha`.
pub fn geodesic_set(alpha: &Permutation) -> Result<Vec<Permutation>> {
    if alpha.k() > GEODESIC_LIMIT {
        return Err(Error::Size(format!(
            "geodesic enumeration limited to k <= {GEODESIC_LIMIT}"
        )));
    }
    let target = alpha.length();
    let alpha_inv = alpha.inverse();
    Ok(Permutation::all(alpha.k())
        .into_iter()
        .filter(|b| b.length() + (&alpha_inv * b).length() == target)
        .collect())
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.images.iter().map(|x| (x + 1).to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// One-line notation, 1-based: `(2,3,1)`, `2,3,1` or `2 3 1`.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches(['(', '[']).trim_end_matches([')', ']']);
        let images = trimmed
            .split([',', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("{t}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Permutation::from_one_line(&images)
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_line().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Permutation::from_one_line(&v).map_err(serde::de::Error::custom)
    }
}
