//! Unitary ensembles, Monte Carlo channel estimates, k-freeness tests, design
//! checks and channel distances.

use std::collections::HashMap;

use ndarray::{Array2, Axis};
use ndarray_linalg::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{DenseHaarChannel, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::eth::SpectralModel;
use crate::linalg::{
    dagger, eigh, hermiticity_residual, identity, kron_power, max_abs, scale_columns, scale_rows,
    trace_of_product, CMat,
};
use crate::moments::{cumulant, FunctionalKind, Letter, MomentTable};
use crate::C64;

pub const DEFAULT_BATCHES: usize = 20;

/// Dense square matrix with a Hermiticity flag.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub dim: usize,
    pub entries: CMat,
    pub hermitian: bool,
}

impl DenseOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        let dim = entries.nrows();
        if dim == 0 || entries.ncols() != dim {
            return Err(Error::domain("operator must be a non-empty square matrix"));
        }
        let hermitian = hermiticity_residual(&entries) <= 1e-12 * max_abs(&entries).max(1.0);
        Ok(DenseOperator { dim, entries, hermitian })
    }

    /// Fails unless the matrix is Hermitian within 1e-12.
    pub fn hermitian(entries: CMat) -> Result<Self> {
        let op = Self::new(entries)?;
        if !op.hermitian {
            return Err(Error::domain("operator is not Hermitian"));
        }
        Ok(op)
    }

    pub fn from_real(entries: &Array2<f64>) -> Result<Self> {
        Self::new(entries.mapv(|x| C64::new(x, 0.0)))
    }
}

#[derive(Clone, Debug)]
pub enum EnsembleVariant {
    Haar { dim: usize },
    /// Finite set of unitaries with probabilities.
    Discrete { unitaries: Vec<CMat>, probs: Vec<f64> },
    /// `U = exp(-iHt)` with `t` uniform on `[0, t_max]`; `t_max = inf` selects
    /// the infinite-time average where an analytic form exists.
    Hamiltonian { energies: Vec<f64>, basis: CMat, t_max: f64, samples: usize, resonance_tol: f64 },
}

#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub variant: EnsembleVariant,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn haar(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("Haar ensemble needs D >= 1"));
        }
        Ok(EnsembleSpec { variant: EnsembleVariant::Haar { dim }, seed })
    }

    pub fn discrete(unitaries: Vec<CMat>, probs: Vec<f64>, seed: u64) -> Result<Self> {
        if unitaries.is_empty() || unitaries.len() != probs.len() {
            return Err(Error::domain("discrete ensemble needs one probability per unitary"));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::domain("probabilities must be nonnegative and sum to 1"));
        }
        let d = unitaries[0].nrows();
        for u in &unitaries {
            if u.dim() != (d, d) {
                return Err(Error::domain("unitaries must share one square shape"));
            }
            if crate::linalg::unitarity_residual(u) > 1e-10 {
                return Err(Error::domain("ensemble element is not unitary"));
            }
        }
        Ok(EnsembleSpec { variant: EnsembleVariant::Discrete { unitaries, probs }, seed })
    }

    pub fn uniform(unitaries: Vec<CMat>, seed: u64) -> Result<Self> {
        let n = unitaries.len();
        Self::discrete(unitaries, vec![1.0 / n as f64; n], seed)
    }

    pub fn hamiltonian(model: &SpectralModel, t_max: f64, samples: usize, seed: u64) -> Result<Self> {
        if !(t_max > 0.0) {
            return Err(Error::domain("t_max must be positive"));
        }
        Ok(EnsembleSpec {
            variant: EnsembleVariant::Hamiltonian {
                energies: model.energies().to_vec(),
                basis: model.basis().clone(),
                t_max,
                samples,
                resonance_tol: model.default_resonance_tol(),
            },
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            EnsembleVariant::Haar { dim } => *dim,
            EnsembleVariant::Discrete { unitaries, .. } => unitaries[0].nrows(),
            EnsembleVariant::Hamiltonian { energies, .. } => energies.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.variant {
            EnsembleVariant::Haar { .. } => "haar",
            EnsembleVariant::Discrete { .. } => "discrete",
            EnsembleVariant::Hamiltonian { .. } => "hamiltonian",
        }
    }
}

/// Independent stream `index` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_simple_fn((rows, cols), || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// First `cols` columns of a Haar unitary: QR of a Ginibre matrix with the
/// phases of the triangular diagonal moved into Q.
pub fn haar_isometry<R: Rng + ?Sized>(dim: usize, cols: usize, rng: &mut R) -> Result<CMat> {
    if dim == 0 || cols == 0 || cols > dim {
        return Err(Error::domain(format!("isometry {dim}x{cols} not available")));
    }
    let g = ginibre(dim, cols, rng);
    let (mut q, r) = g.qr().map_err(|e| Error::Linalg(format!("qr: {e}")))?;
    let phases: Vec<C64> = (0..cols)
        .map(|j| {
            let x = r[[j, j]];
            if x.norm() > 0.0 {
                x / x.norm()
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect();
    scale_columns(&mut q, &phases);
    Ok(q)
}

pub fn sample_haar<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<CMat> {
    if dim == 0 {
        return Err(Error::domain("Haar sampling needs D >= 1"));
    }
    haar_isometry(dim, dim, rng)
}

/// The four single-qubit Paulis.
pub fn pauli_group() -> Vec<CMat> {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    vec![
        identity(2),
        ndarray::array![[o, l], [l, o]],
        ndarray::array![[o, -i], [i, o]],
        ndarray::array![[l, o], [o, -l]],
    ]
}

/// The 24 single-qubit Cliffords modulo phase, closed from H and S.
pub fn clifford_group() -> Vec<CMat> {
    let o = C64::new(0.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hd: CMat = ndarray::array![[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]];
    let s: CMat = ndarray::array![[C64::new(1.0, 0.0), o], [o, C64::new(0.0, 1.0)]];
    let gens = [hd, s];
    let mut found: Vec<CMat> = vec![identity(2)];
    let mut frontier = found.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for x in &gens {
                let c = fix_phase(g.dot(x));
                if !found.iter().any(|f| max_abs(&(f - &c)) < 1e-10) {
                    found.push(c.clone());
                    next.push(c);
                }
            }
        }
        frontier = next;
    }
    found
}

fn fix_phase(m: CMat) -> CMat {
    let p = m.iter().find(|x| x.norm() > 1e-9).copied().unwrap_or(C64::new(1.0, 0.0));
    let ph = p.conj() / p.norm();
    m.mapv(|x| x * ph)
}

fn check_power(k: usize, dim: usize, limit: usize) -> Result<usize> {
    let n = (dim as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if k == 0 || n > limit as u128 {
        return Err(Error::Size(format!("D^k = {dim}^{k} exceeds the dense limit {limit}")));
    }
    Ok(n as usize)
}

fn phase_kernel(delta: f64, t_max: f64, tol: f64) -> C64 {
    if t_max.is_infinite() {
        return if delta.abs() <= tol { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    time_window_kernel(delta, t_max)
}

/// `(1/T) int_0^T exp(i delta t) dt = (exp(i delta T) - 1) / (i delta T)`.
pub fn time_window_kernel(delta: f64, t_max: f64) -> C64 {
    let x = delta * t_max;
    if x.abs() < 1e-8 {
        return C64::new(1.0 - x * x / 6.0, x / 2.0);
    }
    (C64::new(0.0, x).exp() - 1.0) / C64::new(0.0, x)
}

fn hamiltonian_unitary(energies: &[f64], basis: &CMat, t: f64) -> CMat {
    let mut v = basis.clone();
    let ph: Vec<C64> = energies.iter().map(|&e| C64::new(0.0, -e * t).exp()).collect();
    scale_columns(&mut v, &ph);
    v.dot(&dagger(basis))
}

fn conj_tensor(uk: &CMat, o: &CMat) -> CMat {
    dagger(uk).dot(&o.dot(uk))
}

/// Empirical mean of `U^{†⊗k} O U^{⊗k}`. Discrete ensembles are enumerated
/// exactly and ignore `n_samples`.
pub fn channel_monte_carlo(e: &EnsembleSpec, k: usize, o: &CMat, n_samples: usize) -> Result<CMat> {
    let n = check_power(k, e.dim(), DENSE_LIMIT)?;
    if o.dim() != (n, n) {
        return Err(Error::domain(format!("input must be {n}x{n}")));
    }
    match &e.variant {
        EnsembleVariant::Discrete { unitaries, probs } => {
            let mut acc = Array2::zeros((n, n));
            for (u, &p) in unitaries.iter().zip(probs) {
                acc = acc + conj_tensor(&kron_power(u, k), o) * C64::new(p, 0.0);
            }
            Ok(acc)
        }
        _ => {
            if n_samples == 0 {
                return Err(Error::domain("n_samples must be positive"));
            }
            let mut acc: CMat = Array2::zeros((n, n));
            for start in (0..n_samples).step_by(64) {
                let end = (start + 64).min(n_samples);
                let parts = (start..end)
                    .into_par_iter()
                    .map(|i| {
                        let u = sample_unitary(e, i as u64)?;
                        Ok(conj_tensor(&kron_power(&u, k), o))
                    })
                    .collect::<Result<Vec<CMat>>>()?;
                for p in parts {
                    acc = acc + p;
                }
            }
            Ok(acc / C64::new(n_samples as f64, 0.0))
        }
    }
}

/// Sample `index` of a Haar or Hamiltonian ensemble, from its own stream.
pub fn sample_unitary(e: &EnsembleSpec, index: u64) -> Result<CMat> {
    let mut rng = stream_rng(e.seed, index);
    match &e.variant {
        EnsembleVariant::Haar { dim } => sample_haar(*dim, &mut rng),
        EnsembleVariant::Hamiltonian { energies, basis, t_max, .. } => {
            if t_max.is_infinite() {
                return Err(Error::domain("cannot sample times from an infinite window"));
            }
            let t = rng.random::<f64>() * t_max;
            Ok(hamiltonian_unitary(energies, basis, t))
        }
        EnsembleVariant::Discrete { unitaries, probs } => {
            let x: f64 = rng.random();
            let mut acc = 0.0;
            for (u, p) in unitaries.iter().zip(probs) {
                acc += p;
                if x < acc {
                    return Ok(u.clone());
                }
            }
            Ok(unitaries[unitaries.len() - 1].clone())
        }
    }
}

/// Monte Carlo estimate with a batch-means standard error.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub estimate: C64,
    pub std_error: f64,
    pub n_samples: usize,
    pub batches: usize,
    pub seed: u64,
    /// True when the ensemble was enumerated and the value is exact.
    pub exact: bool,
}

#[derive(Clone, Debug)]
enum Rep {
    Diag(Vec<C64>),
    Dense(CMat),
}

enum Prod {
    Ident,
    Diag(Vec<C64>),
    Dense(CMat),
}

fn times(p: Prod, r: &Rep) -> Prod {
    match (p, r) {
        (Prod::Ident, Rep::Diag(d)) => Prod::Diag(d.clone()),
        (Prod::Ident, Rep::Dense(m)) => Prod::Dense(m.clone()),
        (Prod::Diag(a), Rep::Diag(b)) => Prod::Diag(a.iter().zip(b).map(|(x, y)| x * y).collect()),
        (Prod::Diag(a), Rep::Dense(m)) => {
            let mut m = m.clone();
            scale_rows(&mut m, &a);
            Prod::Dense(m)
        }
        (Prod::Dense(mut m), Rep::Diag(d)) => {
            scale_columns(&mut m, d);
            Prod::Dense(m)
        }
        (Prod::Dense(m), Rep::Dense(x)) => Prod::Dense(m.dot(x)),
    }
}

fn chain(reps: &[&Rep]) -> Prod {
    reps.iter().fold(Prod::Ident, |p, r| times(p, r))
}

fn trace_pair(l: &Prod, r: &Prod, d: usize) -> C64 {
    match (l, r) {
        (Prod::Ident, Prod::Ident) => C64::new(d as f64, 0.0),
        (Prod::Ident, Prod::Diag(x)) | (Prod::Diag(x), Prod::Ident) => x.iter().sum(),
        (Prod::Ident, Prod::Dense(m)) | (Prod::Dense(m), Prod::Ident) => m.diag().sum(),
        (Prod::Diag(x), Prod::Diag(y)) => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        (Prod::Diag(x), Prod::Dense(m)) | (Prod::Dense(m), Prod::Diag(x)) => {
            x.iter().zip(m.diag()).map(|(a, b)| a * b).sum()
        }
        (Prod::Dense(a), Prod::Dense(b)) => trace_of_product(a.view(), b.view()),
    }
}

/// `Tr(X_1 .. X_n) / D`, split at the middle so that words with at most two
/// dense letters cost O(D^2).
fn word_trace(w: &[&Rep], d: usize) -> C64 {
    let mid = w.len() / 2;
    trace_pair(&chain(&w[..mid]), &chain(&w[mid..]), d) / d as f64
}

/// How `A^U` is drawn for one ensemble, in a working basis shared with `B`.
enum Conjugator<'a> {
    /// `A^U = c + Y diag(a) Y^†` with Y a Haar isometry.
    HaarLowRank { c: f64, spikes: Vec<f64> },
    /// `A^U = W diag(lambda) W^†` with W Haar.
    HaarSpectral { lambda: Vec<f64> },
    /// `A^U = W^† A W` with W Haar.
    HaarGeneral { a: CMat },
    Discrete { a: &'a CMat, unitaries: &'a [CMat], probs: &'a [f64] },
    /// Working basis is the eigenbasis of H.
    Hamiltonian { a: CMat, energies: &'a [f64], t_max: f64 },
}

struct Prepared<'a> {
    dim: usize,
    b: Rep,
    conj: Conjugator<'a>,
}

fn prepare<'a>(e: &'a EnsembleSpec, a: &'a DenseOperator, b: &'a DenseOperator) -> Result<Prepared<'a>> {
    let d = e.dim();
    if a.dim != d || b.dim != d {
        return Err(Error::domain(format!("operators must be {d}x{d}")));
    }
    match &e.variant {
        EnsembleVariant::Haar { .. } => {
            let (b_rep, to_work) = if b.hermitian {
                let (vals, vecs) = eigh(&b.entries)?;
                (Rep::Diag(vals.iter().map(|&x| C64::new(x, 0.0)).collect()), Some(vecs))
            } else {
                (Rep::Dense(b.entries.clone()), None)
            };
            let conj = if a.hermitian {
                let (vals, _) = eigh(&a.entries)?;
                let lambda = vals.to_vec();
                match low_rank_split(&lambda) {
                    Some((c, spikes)) if spikes.len() * 4 <= d => Conjugator::HaarLowRank { c, spikes },
                    _ => Conjugator::HaarSpectral { lambda },
                }
            } else {
                let aw = match &to_work {
                    Some(v) => dagger(v).dot(&a.entries.dot(v)),
                    None => a.entries.clone(),
                };
                Conjugator::HaarGeneral { a: aw }
            };
            Ok(Prepared { dim: d, b: b_rep, conj })
        }
        EnsembleVariant::Discrete { unitaries, probs } => Ok(Prepared {
            dim: d,
            b: Rep::Dense(b.entries.clone()),
            conj: Conjugator::Discrete { a: &a.entries, unitaries, probs },
        }),
        EnsembleVariant::Hamiltonian { energies, basis, t_max, .. } => {
            if t_max.is_infinite() {
                return Err(Error::domain("sampling needs a finite t_max"));
            }
            let rot = |m: &CMat| dagger(basis).dot(&m.dot(basis));
            Ok(Prepared {
                dim: d,
                b: Rep::Dense(rot(&b.entries)),
                conj: Conjugator::Hamiltonian { a: rot(&a.entries), energies, t_max: *t_max },
            })
        }
    }
}

/// Most degenerate eigenvalue `c` and the remaining eigenvalues shifted by `-c`.
fn low_rank_split(lambda: &[f64]) -> Option<(f64, Vec<f64>)> {
    let scale = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let tol = 1e-9 * scale;
    let mut best = (0usize, 0usize);
    let mut start = 0;
    for i in 1..=lambda.len() {
        if i == lambda.len() || lambda[i] - lambda[i - 1] > tol {
            if i - start > best.1 - best.0 {
                best = (start, i);
            }
            start = i;
        }
    }
    if best.1 - best.0 < 2 {
        return None;
    }
    let c = lambda[best.0..best.1].iter().sum::<f64>() / (best.1 - best.0) as f64;
    let spikes = lambda
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < best.0 || *i >= best.1)
        .map(|(_, x)| x - c)
        .collect();
    Some((c, spikes))
}

fn draw_conjugate(p: &Prepared, seed: u64, index: u64) -> Result<CMat> {
    let d = p.dim;
    let mut rng = stream_rng(seed, index);
    match &p.conj {
        Conjugator::HaarLowRank { c, spikes } => {
            let mut out = identity(d) * C64::new(*c, 0.0);
            if spikes.is_empty() {
                return Ok(out);
            }
            let y = haar_isometry(d, spikes.len(), &mut rng)?;
            let mut ya = y.clone();
            scale_columns(&mut ya, &spikes.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
            out = out + ya.dot(&dagger(&y));
            Ok(out)
        }
        Conjugator::HaarSpectral { lambda } => {
            let w = sample_haar(d, &mut rng)?;
            let mut wl = w.clone();
            scale_columns(&mut wl, &lambda.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
            Ok(wl.dot(&dagger(&w)))
        }
        Conjugator::HaarGeneral { a } => {
            let w = sample_haar(d, &mut rng)?;
            Ok(dagger(&w).dot(&a.dot(&w)))
        }
        Conjugator::Discrete { .. } => Err(Error::domain("discrete ensembles are enumerated")),
        Conjugator::Hamiltonian { a, energies, t_max } => {
            let t = rng.random::<f64>() * t_max;
            let ph: Vec<C64> = energies.iter().map(|&e| C64::new(0.0, e * t).exp()).collect();
            let mut out = a.clone();
            for ((i, j), x) in out.indexed_iter_mut() {
                *x *= ph[i] * ph[j].conj();
            }
            Ok(out)
        }
    }
}

/// Distinct words over {A^U = false, B = true} needed for all sub-words of `w`,
/// each reduced to its lexicographically least rotation.
fn subword_set(w: &[bool]) -> (Vec<Vec<bool>>, Vec<usize>) {
    let n = w.len();
    let mut index: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut words = Vec::new();
    let mut of_mask = vec![usize::MAX; 1 << n];
    for mask in 1usize..(1 << n) {
        let sub: Vec<bool> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).collect();
        let canon = least_rotation(&sub);
        let id = *index.entry(canon.clone()).or_insert_with(|| {
            words.push(canon);
            words.len() - 1
        });
        of_mask[mask] = id;
    }
    (words, of_mask)
}

fn least_rotation(w: &[bool]) -> Vec<bool> {
    (0..w.len())
        .map(|r| {
            let mut v = w.to_vec();
            v.rotate_left(r);
            v
        })
        .min()
        .unwrap_or_default()
}

/// Averages of the normalized traces of `words` over the ensemble, with batch
/// averages for error estimates.
struct WordAverages {
    mean: Vec<C64>,
    batches: Vec<Vec<C64>>,
    n_samples: usize,
    exact: bool,
}

fn average_words(
    e: &EnsembleSpec,
    a: &DenseOperator,
    b: &DenseOperator,
    words: &[Vec<bool>],
    n_samples: usize,
    n_batches: usize,
) -> Result<WordAverages> {
    let p = prepare(e, a, b)?;
    let d = p.dim;
    let eval = |au: CMat| -> Vec<C64> {
        let ar = Rep::Dense(au);
        words
            .iter()
            .map(|w| {
                let reps: Vec<&Rep> = w.iter().map(|&isb| if isb { &p.b } else { &ar }).collect();
                word_trace(&reps, d)
            })
            .collect()
    };
    if let Conjugator::Discrete { a, unitaries, probs } = &p.conj {
        let mut mean = vec![C64::new(0.0, 0.0); words.len()];
        for (u, &pr) in unitaries.iter().zip(probs.iter()) {
            for (m, v) in mean.iter_mut().zip(eval(conj_tensor(u, a))) {
                *m += v * pr;
            }
        }
        return Ok(WordAverages { mean, batches: vec![], n_samples: unitaries.len(), exact: true });
    }
    if n_samples < n_batches.max(2) || n_batches < 2 {
        return Err(Error::domain(format!(
            "need at least {} samples and 2 batches, got {n_samples} samples",
            n_batches.max(2)
        )));
    }
    let mut sums = vec![vec![C64::new(0.0, 0.0); words.len()]; n_batches];
    let mut counts = vec![0usize; n_batches];
    for start in (0..n_samples).step_by(256) {
        let end = (start + 256).min(n_samples);
        let vals = (start..end)
            .into_par_iter()
            .map(|i| Ok(eval(draw_conjugate(&p, e.seed, i as u64)?)))
            .collect::<Result<Vec<Vec<C64>>>>()?;
        for (off, v) in vals.into_iter().enumerate() {
            let i = start + off;
            let bi = i * n_batches / n_samples;
            counts[bi] += 1;
            for (s, x) in sums[bi].iter_mut().zip(v) {
                *s += x;
            }
        }
    }
    let mut mean = vec![C64::new(0.0, 0.0); words.len()];
    for s in &sums {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n_samples as f64;
    }
    let batches = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|x| x / c as f64).collect())
        .collect();
    Ok(WordAverages { mean, batches, n_samples, exact: false })
}

fn batch_error(values: &[C64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m: C64 = values.iter().sum::<C64>() / n as f64;
    let var: f64 = values.iter().map(|x| (x - m).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn alternating(k: usize) -> Vec<bool> {
    (0..2 * k).map(|i| i % 2 == 1).collect()
}

fn letters_of(w: &[bool]) -> Vec<Letter> {
    w.iter().map(|&isb| Letter::new(usize::from(isb))).collect()
}

fn kappa_from(w: &[bool], of_mask: &[usize], values: &[C64]) -> Result<C64> {
    let n = w.len();
    let mut table = MomentTable::with_kind(true, FunctionalKind::EnsembleAveraged);
    for mask in 1usize..(1 << n) {
        let sub: Vec<bool> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| w[i]).collect();
        table.insert(letters_of(&sub), values[of_mask[mask]]);
    }
    cumulant(&letters_of(w), &table)
}

/// `kappa_{2k}(A^U, B, .., A^U, B)` under the ensemble-averaged functional:
/// every word moment is averaged first, then Möbius-inverted.
pub fn k_freeness_test(
    e: &EnsembleSpec,
    a: &DenseOperator,
    b: &DenseOperator,
    k: usize,
    n_samples: usize,
) -> Result<Estimate> {
    k_freeness_test_batched(e, a, b, k, n_samples, DEFAULT_BATCHES)
}

pub fn k_freeness_test_batched(
    e: &EnsembleSpec,
    a: &DenseOperator,
    b: &DenseOperator,
    k: usize,
    n_samples: usize,
    n_batches: usize,
) -> Result<Estimate> {
    if k == 0 || 2 * k > crate::lattice::DEFAULT_NC_LIMIT {
        return Err(Error::domain("k must be between 1 and 5"));
    }
    let w = alternating(k);
    let (words, of_mask) = subword_set(&w);
    let avg = average_words(e, a, b, &words, n_samples, n_batches)?;
    let estimate = kappa_from(&w, &of_mask, &avg.mean)?;
    let per_batch = avg
        .batches
        .iter()
        .map(|v| kappa_from(&w, &of_mask, v))
        .collect::<Result<Vec<C64>>>()?;
    Ok(Estimate {
        estimate,
        std_error: batch_error(&per_batch),
        n_samples: avg.n_samples,
        batches: avg.batches.len(),
        seed: e.seed,
        exact: avg.exact,
    })
}

/// Ensemble average of `<A^U B A^U B ..>` with `k` copies of each.
pub fn otoc_monte_carlo(
    e: &EnsembleSpec,
    a: &DenseOperator,
    b: &DenseOperator,
    k: usize,
    n_samples: usize,
) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    let w = alternating(k);
    let avg = average_words(e, a, b, std::slice::from_ref(&w), n_samples, DEFAULT_BATCHES)?;
    let per_batch: Vec<C64> = avg.batches.iter().map(|v| v[0]).collect();
    Ok(Estimate {
        estimate: avg.mean[0],
        std_error: batch_error(&per_batch),
        n_samples: avg.n_samples,
        batches: avg.batches.len(),
        seed: e.seed,
        exact: avg.exact,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignReport {
    pub k: usize,
    pub dim: usize,
    pub is_design: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// "matrix-units" for a full comparison on a basis of inputs, "spot" for
    /// random dense inputs.
    pub method: String,
    pub inputs: usize,
}

/// Largest `D^k` for the full matrix-unit comparison.
pub const DESIGN_FULL_LIMIT: usize = 64;
/// Largest `D^k` for the random spot-check comparison.
pub const DESIGN_SPOT_LIMIT: usize = 1024;

/// Compares the ensemble k-fold channel with the Haar one. Hamiltonian
/// ensembles use the analytic time average over `[0, t_max]`.
pub fn design_check(e: &EnsembleSpec, k: usize, tolerance: f64) -> Result<DesignReport> {
    let d = e.dim();
    let n = check_power(k, d, DESIGN_SPOT_LIMIT)?;
    if let EnsembleVariant::Haar { .. } = e.variant {
        return Ok(DesignReport {
            k,
            dim: d,
            is_design: true,
            max_deviation: 0.0,
            tolerance,
            method: "identical".into(),
            inputs: 0,
        });
    }
    let haar = DenseHaarChannel::new(k, d)?;
    let (max_dev, method, inputs) = if n <= DESIGN_FULL_LIMIT {
        let mut worst: f64 = 0.0;
        let cols = superoperator_columns(e, k)?;
        for (i, j, out) in cols {
            let mut unit: CMat = Array2::zeros((n, n));
            unit[[i, j]] = C64::new(1.0, 0.0);
            let h = haar.apply(&unit)?;
            worst = worst.max(max_abs(&(h - out)));
        }
        (worst, "matrix-units", n * n)
    } else {
        let mut worst: f64 = 0.0;
        let spots = 8;
        for s in 0..spots {
            let mut rng = stream_rng(e.seed ^ 0x5eed, s as u64);
            let g = ginibre(n, n, &mut rng);
            let o = &g + &dagger(&g);
            let h = haar.apply(&o)?;
            worst = worst.max(max_abs(&(h - apply_ensemble(e, k, &o)?)));
        }
        (worst, "spot", spots)
    };
    Ok(DesignReport {
        k,
        dim: d,
        is_design: max_dev <= tolerance,
        max_deviation: max_dev,
        tolerance,
        method: method.into(),
        inputs,
    })
}

/// Exact ensemble channel on a dense input.
fn apply_ensemble(e: &EnsembleSpec, k: usize, o: &CMat) -> Result<CMat> {
    match &e.variant {
        EnsembleVariant::Haar { dim } => DenseHaarChannel::new(k, *dim)?.apply(o),
        EnsembleVariant::Discrete { .. } => channel_monte_carlo(e, k, o, 1),
        EnsembleVariant::Hamiltonian { energies, basis, t_max, resonance_tol, .. } => {
            let vk = kron_power(basis, k);
            let mut x = dagger(&vk).dot(&o.dot(&vk));
            let sums = multi_energies(energies, k);
            for ((i, j), v) in x.indexed_iter_mut() {
                *v *= phase_kernel(sums[i] - sums[j], *t_max, *resonance_tol);
            }
            Ok(vk.dot(&x.dot(&dagger(&vk))))
        }
    }
}

/// `sum_l E_{i_l}` for every multi-index `i`, first factor most significant.
fn multi_energies(energies: &[f64], k: usize) -> Vec<f64> {
    let mut sums = vec![0.0];
    for _ in 0..k {
        sums = sums.iter().flat_map(|s| energies.iter().map(move |e| s + e)).collect();
    }
    sums
}

/// `(i, j, Phi_E(|i><j|))` for every matrix unit, in a basis where the Haar
/// channel is unchanged.
fn superoperator_columns(e: &EnsembleSpec, k: usize) -> Result<Vec<(usize, usize, CMat)>> {
    let d = e.dim();
    let n = check_power(k, d, DESIGN_FULL_LIMIT)?;
    let mut out = Vec::with_capacity(n * n);
    match &e.variant {
        EnsembleVariant::Haar { .. } => {
            let haar = DenseHaarChannel::new(k, d)?;
            for i in 0..n {
                for j in 0..n {
                    let mut unit: CMat = Array2::zeros((n, n));
                    unit[[i, j]] = C64::new(1.0, 0.0);
                    out.push((i, j, haar.apply(&unit)?));
                }
            }
        }
        EnsembleVariant::Discrete { unitaries, probs } => {
            let uks: Vec<CMat> = unitaries.iter().map(|u| kron_power(u, k)).collect();
            for i in 0..n {
                for j in 0..n {
                    let mut acc: CMat = Array2::zeros((n, n));
                    for (uk, &p) in uks.iter().zip(probs) {
                        // U^† |i><j| U = (row i of U)^† (row j of U)
                        let ri = uk.row(i).mapv(|x| x.conj()).insert_axis(Axis(1));
                        let rj = uk.row(j).to_owned().insert_axis(Axis(0));
                        acc = acc + ri.dot(&rj) * C64::new(p, 0.0);
                    }
                    out.push((i, j, acc));
                }
            }
        }
        EnsembleVariant::Hamiltonian { energies, t_max, resonance_tol, .. } => {
            let sums = multi_energies(energies, k);
            for i in 0..n {
                for j in 0..n {
                    let mut unit: CMat = Array2::zeros((n, n));
                    unit[[i, j]] = phase_kernel(sums[i] - sums[j], *t_max, *resonance_tol);
                    out.push((i, j, unit));
                }
            }
        }
    }
    Ok(out)
}

/// Frobenius norm of the difference of the k-fold superoperators of the Haar
/// and ensemble channels.
pub fn channel_distance(e: &EnsembleSpec, k: usize) -> Result<f64> {
    let d = e.dim();
    match &e.variant {
        EnsembleVariant::Haar { .. } => Ok(0.0),
        EnsembleVariant::Discrete { .. } => {
            let n = check_power(k, d, DESIGN_FULL_LIMIT)?;
            let haar = DenseHaarChannel::new(k, d)?;
            let mut acc = 0.0;
            for (i, j, out) in superoperator_columns(e, k)? {
                let mut unit: CMat = Array2::zeros((n, n));
                unit[[i, j]] = C64::new(1.0, 0.0);
                let diff = haar.apply(&unit)? - out;
                acc += diff.iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
            Ok(acc.sqrt())
        }
        EnsembleVariant::Hamiltonian { energies, t_max, resonance_tol, .. } => {
            // Both superoperators are diagonal-compatible in the eigenbasis: the
            // ensemble one is diagonal with the phase kernel, and the Haar
            // projection has support only on index pairs related by a
            // permutation, where the kernel is exactly 1. Hence
            // |P - S|^2 = sum |d_e|^2 - rank P.
            let n = check_power(k, d, 1 << 14)?;
            let sums = multi_energies(energies, k);
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += phase_kernel(sums[i] - sums[j], *t_max, *resonance_tol).norm_sqr();
                }
            }
            let rank = commutant_rank(k, d)?;
            Ok((acc - rank as f64).max(0.0).sqrt())
        }
    }
}

/// Dimension of the span of the permutation operators on `(C^D)^{⊗k}`.
pub fn commutant_rank(k: usize, dim: usize) -> Result<usize> {
    if dim >= k {
        return Ok((1..=k).product());
    }
    Ok(DenseHaarChannel::new(k, dim)?.rank())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_sample_is_unitary() {
        let mut rng = stream_rng(7, 0);
        let u = sample_haar(16, &mut rng).unwrap();
        assert!(crate::linalg::unitarity_residual(&u) < 1e-10);
    }

    #[test]
    fn group_sizes() {
        assert_eq!(clifford_group().len(), 24);
        assert_eq!(pauli_group().len(), 4);
    }

    #[test]
    fn low_rank_detection() {
        let (c, s) = low_rank_split(&[-3.0, 1.0, 1.0, 1.0, 2.0]).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(s, vec![-4.0, 1.0]);
        assert!(low_rank_split(&[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn window_kernel_limits() {
        assert_eq!(time_window_kernel(0.0, 5.0), C64::new(1.0, 0.0));
        let k = time_window_kernel(2.0, 3.0);
        let direct = (C64::new(0.0, 6.0).exp() - 1.0) / C64::new(0.0, 6.0);
        assert!((k - direct).norm() < 1e-15);
    }

    #[test]
    fn pauli_design_levels() {
        let e = EnsembleSpec::uniform(pauli_group(), 0).unwrap();
        assert!(design_check(&e, 1, 1e-10).unwrap().is_design);
        assert!(!design_check(&e, 2, 1e-3).unwrap().is_design);
    }
}
