//! The k-fold Haar channel `O -> E[U^{†⊗k} O U^{⊗k}]` on product inputs,
//! expressed as coefficients over permutation operators.
//!
//! Convention: `<i|W_b|j> = prod_l delta(i_l, j_{b(l)})`, so that
//! `W_b W_a = W_{ab}` and `Tr(W_b A_1⊗..⊗A_k)` is a product of traces taken
//! along the cycles of `b`. The channel output is `sum_a c_a W_{a^{-1}}`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::kreweras_complement;
use crate::linalg::{hs_inner, CMat};
use crate::moments::{cumulant_partition, mixed_moment_free, ExpectationFunctional, Letter};
use crate::perm::{geodesic_set, Permutation};
use crate::weingarten::{geodesic_moebius, WeingartenTable};
use crate::C64;

/// Largest `D^k` for which dense permutation operators are built.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    Exact,
    Asymptotic,
}

/// Coefficient of `W_{alpha^{-1}}` for every alpha in S_k, lexicographic order.
#[derive(Clone, Debug)]
pub struct ChannelCoefficients {
    pub k: usize,
    pub dim: u64,
    pub mode: ChannelMode,
    pub perms: Vec<Permutation>,
    pub coeffs: Vec<C64>,
}

#[derive(Serialize)]
struct CoeffRecord {
    alpha: Permutation,
    cycles: String,
    value: C64,
}

#[derive(Serialize)]
struct CoeffDocument {
    k: usize,
    dim: u64,
    mode: ChannelMode,
    coefficients: Vec<CoeffRecord>,
}

impl Serialize for ChannelCoefficients {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CoeffDocument {
            k: self.k,
            dim: self.dim,
            mode: self.mode,
            coefficients: self
                .perms
                .iter()
                .zip(&self.coeffs)
                .map(|(a, c)| CoeffRecord { alpha: a.clone(), cycles: a.cycle_string(), value: *c })
                .collect(),
        }
        .serialize(s)
    }
}

impl ChannelCoefficients {
    pub fn get(&self, alpha: &Permutation) -> Option<C64> {
        if alpha.k() != self.k {
            return None;
        }
        self.coeffs.get(alpha.lex_rank()).copied()
    }

    /// `Tr` of the output, `sum_a c_a D^{#a}`.
    pub fn output_trace(&self) -> C64 {
        let d = self.dim as f64;
        self.perms
            .iter()
            .zip(&self.coeffs)
            .map(|(a, c)| c * d.powi(a.num_cycles() as i32))
            .sum()
    }

    /// Dense output operator `sum_a c_a W_{a^{-1}}` on `(C^D)^{⊗k}`.
    pub fn to_dense(&self) -> Result<CMat> {
        let n = dense_size(self.k, self.dim as usize)?;
        let mut out = Array2::zeros((n, n));
        for (a, c) in self.perms.iter().zip(&self.coeffs) {
            let op = PermutationOperator::new(a.inverse(), self.dim as usize);
            for (j, i) in op.column_targets()?.into_iter().enumerate() {
                out[[i, j]] += *c;
            }
        }
        Ok(out)
    }
}

fn dense_size(k: usize, dim: usize) -> Result<usize> {
    let n = (dim as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if n as usize > DENSE_LIMIT || n > u128::from(u64::MAX) {
        return Err(Error::Size(format!("dense form needs D^k <= {DENSE_LIMIT}, got {dim}^{k}")));
    }
    Ok(n as usize)
}

/// `W_alpha` acting on `(C^D)^{⊗k}`; the first tensor factor is the most
/// significant digit of the flat index.
#[derive(Clone, Debug)]
pub struct PermutationOperator {
    pub alpha: Permutation,
    pub dim: usize,
}

impl PermutationOperator {
    pub fn new(alpha: Permutation, dim: usize) -> Self {
        PermutationOperator { alpha, dim }
    }

    /// For each basis column `j`, the row `i` with `<i|W|j> = 1`.
    pub fn column_targets(&self) -> Result<Vec<usize>> {
        let k = self.alpha.k();
        let n = dense_size(k, self.dim)?;
        let d = self.dim;
        let mut digits = vec![0usize; k];
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let mut r = j;
            for l in (0..k).rev() {
                digits[l] = r % d;
                r /= d;
            }
            let i = (0..k).fold(0usize, |acc, l| acc * d + digits[self.alpha.apply(l)]);
            out.push(i);
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Result<CMat> {
        let t = self.column_targets()?;
        let mut m = Array2::zeros((t.len(), t.len()));
        for (j, i) in t.into_iter().enumerate() {
            m[[i, j]] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }
}

/// The word `A_{j1} A_{b(j1)} ..` for each cycle of `b`, cycles read from their
/// least element.
pub fn cycle_words(beta: &Permutation, ops: &[Letter]) -> Vec<Vec<Letter>> {
    beta.cycles().cycles.iter().map(|c| c.iter().map(|&j| ops[j]).collect()).collect()
}

/// `prod over cycles of b <cycle word>`.
pub fn cycle_moment<F: ExpectationFunctional + ?Sized>(
    beta: &Permutation,
    ops: &[Letter],
    f: &F,
) -> Result<C64> {
    let mut acc = C64::new(1.0, 0.0);
    for w in cycle_words(beta, ops) {
        acc *= f.moment(&w)?;
    }
    Ok(acc)
}

fn check_word(k: usize, ops: &[Letter]) -> Result<()> {
    if k == 0 || ops.len() != k {
        return Err(Error::domain(format!("channel of order {k} needs {k} input operators, got {}", ops.len())));
    }
    Ok(())
}

/// Exact coefficients `c_a = sum_b Wg(a,b) D^{#b} prod <cycle words of b>`.
pub fn channel_exact<F: ExpectationFunctional + ?Sized>(
    k: usize,
    dim: u64,
    ops: &[Letter],
    f: &F,
) -> Result<ChannelCoefficients> {
    check_word(k, ops)?;
    let table = WeingartenTable::new(k, dim)?;
    channel_exact_with(&table, ops, f)
}

/// [`channel_exact`] with a precomputed table.
pub fn channel_exact_with<F: ExpectationFunctional + ?Sized>(
    table: &WeingartenTable,
    ops: &[Letter],
    f: &F,
) -> Result<ChannelCoefficients> {
    let k = table.k();
    check_word(k, ops)?;
    let d = table.dim() as f64;
    let perms = table.permutations().to_vec();
    let traces: Vec<C64> = perms
        .iter()
        .map(|b| Ok(cycle_moment(b, ops, f)? * d.powi(b.num_cycles() as i32)))
        .collect::<Result<_>>()?;
    let wg = table.class_values_f64();
    let n = perms.len();
    let coeffs: Vec<C64> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| traces[j] * wg[table.relative(i, j)]).sum())
        .collect();
    Ok(ChannelCoefficients { k, dim: table.dim(), mode: ChannelMode::Exact, perms, coeffs })
}

/// Leading-order coefficients `c_a = kappa_a / D^{k - #a}`.
pub fn channel_asymptotic<F: ExpectationFunctional + ?Sized>(
    k: usize,
    dim: u64,
    ops: &[Letter],
    f: &F,
) -> Result<ChannelCoefficients> {
    check_word(k, ops)?;
    if dim == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let perms = Permutation::all(k);
    let d = dim as f64;
    let coeffs = perms
        .par_iter()
        .map(|a| Ok(kappa_alpha(a, ops, f)? / d.powi(a.length() as i32)))
        .collect::<Result<Vec<C64>>>()?;
    Ok(ChannelCoefficients { k, dim, mode: ChannelMode::Asymptotic, perms, coeffs })
}

/// `kappa_alpha(A_1..A_k)`: for canonical alpha the product of free cumulants
/// over its orbits; otherwise conjugate alpha to canonical form and evaluate
/// on the reordered word.
pub fn kappa_alpha<F: ExpectationFunctional + ?Sized>(
    alpha: &Permutation,
    ops: &[Letter],
    f: &F,
) -> Result<C64> {
    check_word(alpha.k(), ops)?;
    let (rho, canon) = alpha.canonicalize_by_conjugation();
    let pi = canon
        .to_noncrossing()
        .map_err(|r| Error::domain(format!("conjugated permutation not canonical: {r}")))?;
    let reordered: Vec<Letter> = (0..alpha.k()).map(|x| ops[rho.apply(x)]).collect();
    cumulant_partition(&reordered, &pi, f)
}

/// `kappa_alpha` as the Möbius sum over the geodesic from the identity to alpha.
pub fn kappa_alpha_geodesic<F: ExpectationFunctional + ?Sized>(
    alpha: &Permutation,
    ops: &[Letter],
    f: &F,
) -> Result<C64> {
    check_word(alpha.k(), ops)?;
    let mut acc = C64::new(0.0, 0.0);
    for beta in geodesic_set(alpha)? {
        let mu = geodesic_moebius(&beta, alpha)?.expect("geodesic element");
        acc += cycle_moment(&beta, ops, f)? * mu as f64;
    }
    Ok(acc)
}

/// `<A_1^U B_1 .. A_k^U B_k>` averaged over Haar U at leading order:
/// `sum_{pi in NC(k)} kappa_pi(A) <B>_{K(pi)}`.
pub fn otoc_haar<FA, FB>(a: &[Letter], fa: &FA, b: &[Letter], fb: &FB) -> Result<C64>
where
    FA: ExpectationFunctional + ?Sized,
    FB: ExpectationFunctional + ?Sized,
{
    mixed_moment_free(a, fa, b, fb)
}

/// Per-alpha terms `(1/D) c_a Tr(W_{a^{-1} gamma} B_1⊗..⊗B_k)` of the OTOC
/// obtained by contracting channel coefficients with the B operators.
pub fn otoc_contraction_terms<FB: ExpectationFunctional + ?Sized>(
    coeffs: &ChannelCoefficients,
    b: &[Letter],
    fb: &FB,
) -> Result<Vec<C64>> {
    check_word(coeffs.k, b)?;
    let gamma = Permutation::long_cycle(coeffs.k);
    let d = coeffs.dim as f64;
    coeffs
        .perms
        .iter()
        .zip(&coeffs.coeffs)
        .map(|(a, c)| {
            let rel = a.inverse().compose(&gamma)?;
            Ok(c * cycle_moment(&rel, b, fb)? * d.powi(rel.num_cycles() as i32 - 1))
        })
        .collect()
}

/// Sum of [`otoc_contraction_terms`]. With exact coefficients this is the
/// exact finite-D Haar average.
pub fn otoc_contraction<FB: ExpectationFunctional + ?Sized>(
    coeffs: &ChannelCoefficients,
    b: &[Letter],
    fb: &FB,
) -> Result<C64> {
    Ok(otoc_contraction_terms(coeffs, b, fb)?.into_iter().sum())
}

/// Both OTOC evaluation paths side by side.
#[derive(Clone, Debug, Serialize)]
pub struct OtocReport {
    pub k: usize,
    pub dim: u64,
    pub formula: C64,
    pub contraction_asymptotic: C64,
    pub contraction_exact: Option<C64>,
}

pub fn otoc_report<FA, FB>(dim: u64, a: &[Letter], fa: &FA, b: &[Letter], fb: &FB) -> Result<OtocReport>
where
    FA: ExpectationFunctional + ?Sized,
    FB: ExpectationFunctional + ?Sized,
{
    let k = a.len();
    let formula = otoc_haar(a, fa, b, fb)?;
    let asym = channel_asymptotic(k, dim, a, fa)?;
    let contraction_asymptotic = otoc_contraction(&asym, b, fb)?;
    let contraction_exact = if dim >= k as u64 && k <= 6 {
        Some(otoc_contraction(&channel_exact(k, dim, a, fa)?, b, fb)?)
    } else {
        None
    };
    Ok(OtocReport { k, dim, formula, contraction_asymptotic, contraction_exact })
}

/// Dense Haar twirl valid for any D, as the Hilbert-Schmidt projection onto
/// the span of the permutation operators.
#[derive(Clone, Debug)]
pub struct DenseHaarChannel {
    k: usize,
    dim: usize,
    basis: Vec<CMat>,
}

impl DenseHaarChannel {
    pub fn new(k: usize, dim: usize) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::domain("dense Haar channel needs k >= 1 and D >= 1"));
        }
        dense_size(k, dim)?;
        let mut basis: Vec<CMat> = Vec::new();
        for a in Permutation::all(k) {
            let mut v = PermutationOperator::new(a, dim).to_dense()?;
            let scale = crate::linalg::frobenius_norm(&v);
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for e in &basis {
                    let p = hs_inner(e, &v);
                    v.zip_mut_with(e, |x, y| *x -= p * y);
                }
            }
            let norm = crate::linalg::frobenius_norm(&v);
            if norm > 1e-9 * scale {
                basis.push(v / C64::new(norm, 0.0));
            }
        }
        Ok(DenseHaarChannel { k, dim, basis })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the commutant, `k!` when D >= k.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn apply(&self, o: &CMat) -> Result<CMat> {
        let n = self.basis[0].nrows();
        if o.dim() != (n, n) {
            return Err(Error::domain(format!("input must be {n}x{n}")));
        }
        let mut out = Array2::zeros((n, n));
        for e in &self.basis {
            let p = hs_inner(e, o);
            out.zip_mut_with(e, |x, y| *x += p * y);
        }
        Ok(out)
    }
}

/// Checks the duality `Orb(a^{-1} gamma) = K(Orb(a))` for a geodesic element.
pub fn duality_holds(alpha: &Permutation) -> Result<bool> {
    let gamma = Permutation::long_cycle(alpha.k());
    let pi = alpha.orbit_partition();
    if !pi.is_noncrossing() {
        return Ok(false);
    }
    let dual = alpha.inverse().compose(&gamma)?.orbit_partition();
    Ok(dual == kreweras_complement(&pi)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron_all, trace, TraceFunctional};
    use crate::moments::{word, MomentTable};
    use ndarray::array;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn small_ops(d: usize, count: usize) -> Vec<CMat> {
        (0..count)
            .map(|t| {
                Array2::from_shape_fn((d, d), |(i, j)| {
                    C64::new(((i * 7 + j * 3 + t * 5) % 11) as f64 / 5.0 - 1.0, ((i + 2 * j + t) % 5) as f64 / 7.0)
                })
            })
            .collect()
    }

    #[test]
    fn trace_formula_dense_k3_d3() {
        let ops = small_ops(3, 3);
        let big = kron_all(&ops);
        let f = TraceFunctional::new(ops).unwrap();
        let w = word(&[0, 1, 2]);
        for b in Permutation::all(3) {
            let wb = PermutationOperator::new(b.clone(), 3).to_dense().unwrap();
            let lhs = trace(&wb.dot(&big));
            let rhs = cycle_moment(&b, &w, &f).unwrap() * 3f64.powi(b.num_cycles() as i32);
            assert!((lhs - rhs).norm() < 1e-9, "{b}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn product_rule() {
        for a in Permutation::all(3) {
            for b in Permutation::all(3) {
                let wa = PermutationOperator::new(a.clone(), 2).to_dense().unwrap();
                let wb = PermutationOperator::new(b.clone(), 2).to_dense().unwrap();
                let wab = PermutationOperator::new(a.compose(&b).unwrap(), 2).to_dense().unwrap();
                assert_eq!(wb.dot(&wa), wab);
            }
        }
    }

    #[test]
    fn k1_is_trace() {
        let t = MomentTable::univariate(&[c(0.3)]);
        let ch = channel_exact(1, 5, &word(&[0]), &t).unwrap();
        assert!((ch.coeffs[0] - c(0.3)).norm() < 1e-14);
    }

    #[test]
    fn k2_d2_traceless() {
        let t = MomentTable::univariate(&[c(0.0), c(1.0)]);
        let ch = channel_exact(2, 2, &word(&[0, 0]), &t).unwrap();
        let id = Permutation::identity(2);
        let swap = Permutation::long_cycle(2);
        assert!((ch.get(&id).unwrap() - c(-1.0 / 3.0)).norm() < 1e-14);
        assert!((ch.get(&swap).unwrap() - c(2.0 / 3.0)).norm() < 1e-14);
    }

    #[test]
    fn regime_error() {
        let t = MomentTable::univariate(&[c(0.0), c(1.0), c(0.0)]);
        let e = channel_exact(3, 2, &word(&[0, 0, 0]), &t).unwrap_err();
        assert!(e.is_regime());
    }

    #[test]
    fn asymptotic_k2_k3() {
        let t = MomentTable::univariate(&[c(0.5), c(2.0), c(1.0)]);
        let ch = channel_asymptotic(2, 10, &word(&[0, 0]), &t).unwrap();
        assert!((ch.coeffs[0] - c(0.25)).norm() < 1e-14);
        assert!((ch.coeffs[1] - c(1.75 / 10.0)).norm() < 1e-14);
        let ch = channel_asymptotic(3, 10, &word(&[0, 0, 0]), &t).unwrap();
        let k3 = 1.0 - 3.0 * 0.5 * 2.0 + 2.0 * 0.125;
        let g = Permutation::long_cycle(3);
        assert!((ch.get(&g).unwrap() - c(k3 / 100.0)).norm() < 1e-14);
    }

    #[test]
    fn kappa_paths_agree() {
        let ops = small_ops(4, 4);
        let f = TraceFunctional::new(ops).unwrap();
        let w = word(&[0, 1, 2, 3]);
        for a in Permutation::all(4) {
            let x = kappa_alpha(&a, &w, &f).unwrap();
            let y = kappa_alpha_geodesic(&a, &w, &f).unwrap();
            assert!((x - y).norm() < 1e-10 * (1.0 + x.norm()), "{a}: {x} vs {y}");
        }
    }

    #[test]
    fn dense_channel_matches_coefficients() {
        let a = array![[c(1.0), C64::new(0.5, 0.2)], [C64::new(0.5, -0.2), c(-0.4)]];
        let f = TraceFunctional::new(vec![a.clone()]).unwrap();
        let ch = channel_exact(2, 2, &word(&[0, 0]), &f).unwrap();
        let dense = DenseHaarChannel::new(2, 2).unwrap();
        let out = dense.apply(&kron_all(&[a.clone(), a])).unwrap();
        let diff = &out - &ch.to_dense().unwrap();
        assert!(crate::linalg::max_abs(&diff) < 1e-12);
        assert!((ch.output_trace() - trace(&out)).norm() < 1e-12);
    }

    #[test]
    fn duality_on_geodesic() {
        let g = Permutation::long_cycle(5);
        for a in geodesic_set(&g).unwrap() {
            assert!(duality_holds(&a).unwrap());
        }
    }
}
