//! Exact Gram and Weingarten matrices of S_k at integer dimension D.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{NcLattice, Partition};
use crate::perm::Permutation;

/// Dense square matrix of big integers, row-major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntMatrix {
    n: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(n: usize) -> Self {
        IntMatrix { n, data: vec![BigInt::zero(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> BigInt) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        IntMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[BigInt]> {
        self.data.chunks(self.n)
    }

    fn to_rows(&self) -> Vec<Vec<BigInt>> {
        self.rows().map(|r| r.to_vec()).collect()
    }
}

/// Fraction-free Gauss-Jordan inverse. Returns `(adj, det)` with
/// `m * adj = det * I`, or `None` when `m` is singular.
pub fn fraction_free_inverse(m: &IntMatrix) -> Option<(IntMatrix, BigInt)> {
    let n = m.n;
    let mut a: Vec<Vec<BigInt>> = m
        .to_rows()
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.extend((0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }));
            row
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n).find(|&r| !a[r][k].is_zero())?;
        a.swap(k, p);
        let pivot_row = a[k].clone();
        let pivot = pivot_row[k].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == k {
                continue;
            }
            let factor = row[k].clone();
            for j in 0..2 * n {
                if j == k {
                    continue;
                }
                row[j] = (&pivot * &row[j] - &factor * &pivot_row[j]) / &prev;
            }
            row[k] = BigInt::zero();
        }
        prev = pivot;
    }
    // every diagonal entry of the left block now equals the last pivot
    let mut det = prev;
    let mut adj = IntMatrix::zeros(n);
    for (i, row) in a.into_iter().enumerate() {
        for (j, v) in row.into_iter().skip(n).enumerate() {
            adj.data[i * n + j] = v;
        }
    }
    if det.is_negative() {
        det = -det;
        for v in &mut adj.data {
            *v = -&*v;
        }
    }
    Some((adj, det))
}

/// Fraction-free elimination for `m x = b`. Returns `(y, d)` with `x = y / d`,
/// or `None` when `m` is singular.
pub fn fraction_free_solve(m: &IntMatrix, b: &[BigInt]) -> Option<(Vec<BigInt>, BigInt)> {
    let n = m.n;
    assert_eq!(b.len(), n, "right-hand side length");
    let mut a = m.to_rows();
    let mut rhs = b.to_vec();
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n).find(|&r| !a[r][k].is_zero())?;
        a.swap(k, p);
        rhs.swap(k, p);
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        let pivot = &pivot_row[k];
        for (off, row) in tail.iter_mut().enumerate() {
            let i = k + 1 + off;
            let factor = std::mem::take(&mut row[k]);
            if factor.is_zero() {
                for j in k + 1..n {
                    row[j] = (pivot * &row[j]) / &prev;
                }
            } else {
                for j in k + 1..n {
                    row[j] = (pivot * &row[j] - &factor * &pivot_row[j]) / &prev;
                }
            }
            rhs[i] = (pivot * &rhs[i] - &factor * &rhs[k]) / &prev;
        }
        prev = pivot.clone();
    }
    let d = prev;
    let mut y = vec![BigInt::zero(); n];
    for i in (0..n).rev() {
        let mut acc = &d * &rhs[i];
        for j in i + 1..n {
            acc -= &a[i][j] * &y[j];
        }
        y[i] = acc / &a[i][i];
    }
    Some((y, d))
}

/// Gram matrix `Q(alpha, beta) = D^{#(alpha^{-1} beta)}` over S_k in lexicographic order.
pub fn gram(k: usize, dim: u64) -> Result<IntMatrix> {
    if k == 0 || dim == 0 {
        return Err(Error::domain("gram matrix needs k >= 1 and D >= 1"));
    }
    let perms = Permutation::all(k);
    let powers: Vec<BigInt> = (0..=k as u32).map(|e| BigInt::from(dim).pow(e)).collect();
    let inv: Vec<Permutation> = perms.iter().map(|p| p.inverse()).collect();
    Ok(IntMatrix::from_fn(perms.len(), |i, j| {
        powers[(&inv[i] * &perms[j]).num_cycles()].clone()
    }))
}

/// Exact Weingarten matrix at fixed (k, D), stored as integer numerators over
/// one positive common denominator.
#[derive(Clone, Debug)]
pub struct WeingartenTable {
    k: usize,
    dim: u64,
    perms: Vec<Permutation>,
    /// `rel[i * n + j]` is the lexicographic index of `perms[i]^{-1} perms[j]`.
    rel: Vec<usize>,
    cycles: Vec<usize>,
    /// Numerator of `Wg(id, sigma)` indexed by sigma.
    numer: Vec<BigInt>,
    denom: BigInt,
}

/// Exact inverse of [`gram`]. Fails with a regime error when D < k, where the
/// Gram matrix is singular.
pub fn weingarten(k: usize, dim: u64) -> Result<WeingartenTable> {
    WeingartenTable::new(k, dim)
}

impl WeingartenTable {
    pub fn new(k: usize, dim: u64) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::domain("Weingarten table needs k >= 1 and D >= 1"));
        }
        if k > 6 {
            return Err(Error::Size(format!("exact Weingarten tables are limited to k <= 6, got {k}")));
        }
        if dim < k as u64 {
            return Err(Error::Regime(format!(
                "pseudo-inverse regime unsupported: D = {dim} < k = {k} makes the Gram matrix singular"
            )));
        }
        let perms = Permutation::all(k);
        let n = perms.len();
        let inv: Vec<Permutation> = perms.iter().map(|p| p.inverse()).collect();
        let mut rel = Vec::with_capacity(n * n);
        for a in &inv {
            for b in &perms {
                rel.push((a * b).lex_rank());
            }
        }
        let cycles: Vec<usize> = perms.iter().map(|p| p.num_cycles()).collect();
        let q = gram(k, dim)?;
        // Q and its inverse are functions of alpha^{-1} beta, so the row of the
        // identity determines everything: Q w = e_id (Q is symmetric).
        let mut e = vec![BigInt::zero(); n];
        e[0] = BigInt::one();
        let (y, d) = fraction_free_solve(&q, &e)
            .ok_or_else(|| Error::Regime(format!("Gram matrix singular at k = {k}, D = {dim}")))?;
        let mut g = d.abs();
        for v in &y {
            g = g.gcd(v);
        }
        let sign = if d.is_negative() { -BigInt::one() } else { BigInt::one() };
        let numer: Vec<BigInt> = y.iter().map(|v| v / &g * &sign).collect();
        let denom = d.abs() / &g;
        Ok(WeingartenTable { k, dim, perms, rel, cycles, numer, denom })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> u64 {
        self.dim
    }

    /// S_k in the table's index order.
    pub fn permutations(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    /// Index of `perms[i]^{-1} perms[j]`.
    pub fn relative(&self, i: usize, j: usize) -> usize {
        self.rel[i * self.perms.len() + j]
    }

    pub fn common_denominator(&self) -> &BigInt {
        &self.denom
    }

    pub fn numerator(&self, i: usize, j: usize) -> &BigInt {
        &self.numer[self.relative(i, j)]
    }

    pub fn entry_idx(&self, i: usize, j: usize) -> BigRational {
        BigRational::new(self.numerator(i, j).clone(), self.denom.clone())
    }

    pub fn entry(&self, alpha: &Permutation, beta: &Permutation) -> BigRational {
        self.entry_idx(alpha.lex_rank(), beta.lex_rank())
    }

    /// `Wg(id, sigma)` as f64 for every sigma, indexed like [`Self::permutations`].
    pub fn class_values_f64(&self) -> Vec<f64> {
        self.numer
            .iter()
            .map(|v| BigRational::new(v.clone(), self.denom.clone()).to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Gram entry `D^{#(alpha^{-1} beta)}` by index.
    pub fn gram_entry(&self, i: usize, j: usize) -> BigInt {
        BigInt::from(self.dim).pow(self.cycles[self.relative(i, j)] as u32)
    }

    /// Checks `Wg Q = I` exactly by integer arithmetic on the numerators.
    pub fn verify_inverse(&self) -> bool {
        let n = self.perms.len();
        let powers: Vec<BigInt> =
            (0..=self.k as u32).map(|e| BigInt::from(self.dim).pow(e)).collect();
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigInt::zero();
                for m in 0..n {
                    acc += self.numerator(i, m) * &powers[self.cycles[self.relative(m, j)]];
                }
                let expect = if i == j { self.denom.clone() } else { BigInt::zero() };
                if acc != expect {
                    return false;
                }
            }
        }
        true
    }

    /// Entries as `"p/q"` strings over the common denominator, rows in index order.
    pub fn entry_strings(&self) -> Vec<Vec<String>> {
        let n = self.perms.len();
        (0..n)
            .map(|i| (0..n).map(|j| format!("{}/{}", self.numerator(i, j), self.denom)).collect())
            .collect()
    }

    pub fn to_document(&self) -> WeingartenDocument {
        let n = self.perms.len();
        WeingartenDocument {
            k: self.k,
            dim: self.dim,
            permutations: self.perms.iter().map(|p| p.one_line()).collect(),
            denominator: self.denom.to_string(),
            gram: (0..n)
                .map(|i| (0..n).map(|j| self.gram_entry(i, j).to_string()).collect())
                .collect(),
            wg: self.entry_strings(),
        }
    }
}

/// Serializable view of a [`WeingartenTable`].
#[derive(Serialize, Debug, Clone)]
pub struct WeingartenDocument {
    pub k: usize,
    pub dim: u64,
    pub permutations: Vec<Vec<usize>>,
    pub denominator: String,
    pub gram: Vec<Vec<String>>,
    pub wg: Vec<Vec<String>>,
}

/// Möbius value of a single permutation: product over cycles of length m of
/// the NC(m) value mu(0_m, 1_m).
pub fn permutation_moebius(sigma: &Permutation) -> Result<i64> {
    let mut mu = 1i64;
    for c in sigma.cycles().cycles {
        let m = c.len();
        let lattice = NcLattice::shared(m)?;
        mu *= lattice.moebius_idx(lattice.bottom(), lattice.top())?;
    }
    Ok(mu)
}

/// Möbius value between `beta` and `alpha` for `beta` on a geodesic from the
/// identity to `alpha`: conjugate the pair until `alpha` is canonical, map both
/// to non-crossing partitions and read off the lattice Möbius function.
/// Returns `None` off the geodesic.
pub fn geodesic_moebius(beta: &Permutation, alpha: &Permutation) -> Result<Option<i64>> {
    if !crate::perm::on_geodesic(beta, alpha)? {
        return Ok(None);
    }
    let (rho, alpha_c) = alpha.canonicalize_by_conjugation();
    let beta_c = beta.conjugate_by(&rho)?;
    let pi = alpha_c
        .to_noncrossing()
        .map_err(|r| Error::domain(format!("canonical form rejected: {r}")))?;
    let sigma: Partition = beta_c
        .to_noncrossing()
        .map_err(|r| Error::domain(format!("geodesic element rejected: {r}")))?;
    Ok(Some(crate::lattice::moebius(&sigma, &pi)?))
}

/// Leading large-D term `mu(beta, alpha) / D^{2k - #(beta^{-1} alpha)}` of
/// `Wg(alpha, beta)` for geodesic pairs, and 0 for all other pairs.
pub fn weingarten_asymptotic(alpha: &Permutation, beta: &Permutation, dim: u64) -> Result<BigRational> {
    let k = alpha.k();
    match geodesic_moebius(beta, alpha)? {
        None => Ok(BigRational::zero()),
        Some(mu) => {
            let rel = beta.inverse().compose(alpha)?;
            let exp = (2 * k - rel.num_cycles()) as u32;
            Ok(BigRational::new(BigInt::from(mu), BigInt::from(dim).pow(exp)))
        }
    }
}

/// Leading large-D term of `Wg(alpha, beta)` for any pair,
/// `Moeb(alpha^{-1} beta) / D^{2k - #(alpha^{-1} beta)}`.
pub fn weingarten_leading_term(alpha: &Permutation, beta: &Permutation, dim: u64) -> Result<BigRational> {
    let rel = alpha.inverse().compose(beta)?;
    let mu = permutation_moebius(&rel)?;
    let exp = (2 * alpha.k() - rel.num_cycles()) as u32;
    Ok(BigRational::new(BigInt::from(mu), BigInt::from(dim).pow(exp)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn small_gram() {
        let q = gram(1, 7).unwrap();
        assert_eq!(q.get(0, 0), &BigInt::from(7));
        let q = gram(2, 3).unwrap();
        let vals: Vec<i64> = q.rows().flatten().map(|v| v.to_i64().unwrap()).collect();
        assert_eq!(vals, vec![9, 3, 3, 9]);
    }

    #[test]
    fn small_weingarten() {
        let w = weingarten(1, 5).unwrap();
        assert_eq!(w.entry_idx(0, 0), r(1, 5));
        let w = weingarten(2, 2).unwrap();
        assert_eq!(w.entry_idx(0, 1), r(-1, 6));
        assert_eq!(w.entry_idx(0, 0), r(2, 6));
        let w = weingarten(2, 3).unwrap();
        assert_eq!(w.entry_strings()[0], vec!["3/24".to_string(), "-1/24".to_string()]);
        assert!(matches!(weingarten(3, 2), Err(Error::Regime(_))));
    }

    #[test]
    fn k3_identity_entry() {
        // (D^2 - 2) / (D (D^2 - 1) (D^2 - 4)) at D = 3
        let w = weingarten(3, 3).unwrap();
        assert_eq!(w.entry_idx(0, 0), r(7, 120));
        assert!(w.verify_inverse());
    }

    #[test]
    fn generic_inverse_agrees() {
        let q = gram(3, 4).unwrap();
        let (adj, det) = fraction_free_inverse(&q).unwrap();
        let w = weingarten(3, 4).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(BigRational::new(adj.get(i, j).clone(), det.clone()), w.entry_idx(i, j));
            }
        }
        let singular = gram(3, 2).unwrap();
        assert!(fraction_free_inverse(&singular).is_none());
    }

    #[test]
    fn asymptotic_examples() {
        let id1 = Permutation::identity(1);
        assert_eq!(weingarten_asymptotic(&id1, &id1, 9).unwrap(), r(1, 9));
        let swap = Permutation::transposition(2, 0, 1);
        assert_eq!(weingarten_asymptotic(&swap, &swap, 10).unwrap(), r(1, 100));
        // off the geodesic the leading channel order vanishes
        let g = Permutation::long_cycle(3);
        let off = g.inverse();
        assert_eq!(weingarten_asymptotic(&g, &off, 10).unwrap(), BigRational::zero());
        assert_eq!(permutation_moebius(&Permutation::long_cycle(4)).unwrap(), -5);
    }
}

