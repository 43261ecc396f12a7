//! Small dense complex linear algebra helpers on top of ndarray.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, EigValsh, UPLO};

use crate::error::{Error, Result};
use crate::moments::{ExpectationFunctional, FunctionalKind, Letter};
use crate::C64;

pub type CMat = Array2<C64>;

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|x| x.conj())
}

pub fn identity(n: usize) -> CMat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .zip_mut_with(b, |o, &x| *o = aij * x);
        }
    }
    out
}

/// `m ⊗ m ⊗ .. ⊗ m` with `k` factors.
pub fn kron_power(m: &CMat, k: usize) -> CMat {
    let mut out = m.clone();
    for _ in 1..k {
        out = kron(&out, m);
    }
    out
}

pub fn kron_all(ms: &[CMat]) -> CMat {
    let mut out = ms[0].clone();
    for m in &ms[1..] {
        out = kron(&out, m);
    }
    out
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: ArrayView2<C64>, b: ArrayView2<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (i, row) in a.outer_iter().enumerate() {
        let col = b.column(i);
        for (x, y) in row.iter().zip(col.iter()) {
            acc += x * y;
        }
    }
    acc
}

/// Hilbert-Schmidt inner product `Tr(a^† b)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc: f64, x| acc.max(x.norm()))
}

pub fn hermiticity_residual(m: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for ((i, j), x) in m.indexed_iter() {
        worst = worst.max((x - m[[j, i]].conj()).norm());
    }
    worst
}

/// Largest entry of `|u^† u - 1|`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let p = dagger(u).dot(u);
    max_abs(&(p - identity(u.nrows())))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> Result<f64> {
    let g = dagger(m).dot(m);
    let ev = g
        .eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Linalg(format!("eigvalsh: {e}")))?;
    Ok(ev.iter().fold(0.0f64, |a, &x| a.max(x)).max(0.0).sqrt())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> Result<(Array1<f64>, CMat)> {
    m.eigh(UPLO::Lower).map_err(|e| Error::Linalg(format!("eigh: {e}")))
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    m.eigh(UPLO::Lower).map_err(|e| Error::Linalg(format!("eigh: {e}")))
}

pub fn to_complex(m: &Array2<f64>) -> CMat {
    m.mapv(|x| C64::new(x, 0.0))
}

/// `v^† m v` for a unitary `v` whose columns are the new basis.
pub fn rotate_into(m: &CMat, v: &CMat) -> CMat {
    dagger(v).dot(&m.dot(v))
}

/// Multiplies column `j` of `m` by `d[j]`.
pub fn scale_columns(m: &mut CMat, d: &[C64]) {
    for (mut col, &x) in m.axis_iter_mut(Axis(1)).zip(d) {
        col.mapv_inplace(|v| v * x);
    }
}

/// Multiplies row `i` of `m` by `d[i]`.
pub fn scale_rows(m: &mut CMat, d: &[C64]) {
    for (mut row, &x) in m.axis_iter_mut(Axis(0)).zip(d) {
        row.mapv_inplace(|v| v * x);
    }
}


/// `<w> = Tr(M_{w1} .. M_{wn}) / D` over a list of square matrices indexed by
/// operator id. Time tags must be zero.
#[derive(Clone, Debug)]
pub struct TraceFunctional {
    pub ops: Vec<CMat>,
}

impl TraceFunctional {
    pub fn new(ops: Vec<CMat>) -> Result<Self> {
        let d = ops.first().map(|m| m.nrows()).unwrap_or(0);
        if d == 0 || ops.iter().any(|m| m.dim() != (d, d)) {
            return Err(Error::domain("trace functional needs square matrices of one size"));
        }
        Ok(TraceFunctional { ops })
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }
}

impl ExpectationFunctional for TraceFunctional {
    fn moment(&self, w: &[Letter]) -> Result<C64> {
        let d = self.dim();
        if w.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        for l in w {
            if l.op >= self.ops.len() {
                return Err(Error::MissingMoment(format!("no operator with id {}", l.op)));
            }
            if l.time != 0.0 {
                return Err(Error::domain("trace functional has no time evolution"));
            }
        }
        if w.len() == 1 {
            return Ok(trace(&self.ops[w[0].op]) / d as f64);
        }
        let mut acc = self.ops[w[0].op].clone();
        for l in &w[1..w.len() - 1] {
            acc = acc.dot(&self.ops[l.op]);
        }
        Ok(trace_of_product(acc.view(), self.ops[w[w.len() - 1].op].view()) / d as f64)
    }

    fn kind(&self) -> FunctionalKind {
        FunctionalKind::NormalizedTrace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn kron_and_trace() {
        let a = array![[C64::new(1.0, 0.0), C64::new(2.0, 0.0)], [C64::new(0.0, 1.0), C64::new(3.0, 0.0)]];
        let b = identity(3);
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (6, 6));
        assert_eq!(trace(&k), trace(&a) * 3.0);
        assert_eq!(trace_of_product(a.view(), a.view()), trace(&a.dot(&a)));
        assert!((spectral_norm(&identity(4)).unwrap() - 1.0).abs() < 1e-12);
    }
}
