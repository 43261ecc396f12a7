//! Perturbed Hamiltonians `H + c lambda H'` and observables written in their
//! eigenbases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eth::model::{goe_matrix, SpectralModel};
use crate::eth::thermal::{ThermalFunctional, ThermalState};
use crate::linalg::{dagger, eigh, hermiticity_residual, to_complex, CMat};
use crate::moments::{cumulant, word};
use crate::C64;

const PROFILE_BINS: usize = 16;

#[derive(Clone, Debug)]
pub struct DeutschSpec {
    /// `H'` in the original basis of the model.
    pub perturbation: CMat,
    pub c: f64,
    /// Exponent `a` in `c = N^-a`, when `c` was set that way.
    pub exponent: Option<f64>,
    pub lambdas: Vec<f64>,
}

impl DeutschSpec {
    pub fn new(perturbation: CMat, c: f64, lambdas: Vec<f64>) -> Result<Self> {
        if perturbation.nrows() != perturbation.ncols() {
            return Err(Error::domain("perturbation must be square"));
        }
        let scale = perturbation.iter().map(|x| x.norm()).fold(1.0, f64::max);
        if hermiticity_residual(&perturbation) > 1e-10 * scale {
            return Err(Error::domain("perturbation is not Hermitian"));
        }
        if !c.is_finite() || lambdas.is_empty() || lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::domain("need finite c and at least one finite lambda"));
        }
        Ok(DeutschSpec { perturbation, c, exponent: None, lambdas })
    }

    /// GOE perturbation with the same normalization as [`SpectralModel::goe`]
    /// and `c = dim^-a`.
    pub fn goe(dim: usize, seed: u64, exponent: f64, lambdas: Vec<f64>) -> Result<Self> {
        let h = goe_matrix(dim, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let mut s = Self::new(to_complex(&h), (dim as f64).powf(-exponent), lambdas)?;
        s.exponent = Some(exponent);
        Ok(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OverlapSummary {
    pub lambda: f64,
    pub row_sum_residual: f64,
    pub col_sum_residual: f64,
    /// `sqrt(sum_nm U_nm (E_n - E_m^lambda)^2 / D)`.
    pub rms_width: f64,
    /// Mean overlap per pair in bins of `|E_n - E_m^lambda|`: (bin centre, mean).
    pub profile: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixedCumulant {
    pub lambda_1: f64,
    pub lambda_2: f64,
    /// `kappa_4(A_1, A_2, A_1, A_2)` in the base thermal state.
    pub kappa4: C64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeutschReport {
    pub dim: usize,
    pub c: f64,
    pub exponent: Option<f64>,
    pub beta: f64,
    pub overlaps: Vec<OverlapSummary>,
    pub mixed: Vec<MixedCumulant>,
}

pub struct DeutschResult {
    pub report: DeutschReport,
    /// `<E_n | E_m^lambda>` in the base eigenbasis, per lambda.
    pub basis_changes: Vec<CMat>,
    /// `|<E_n | E_m^lambda>|^2`, per lambda.
    pub overlaps: Vec<ndarray::Array2<f64>>,
    /// Matrix elements `<E_n^lambda | A | E_m^lambda>`, per lambda.
    pub observables: Vec<CMat>,
}

/// Diagonalizes each `H_lambda`, rotates `a` (given in the base eigenbasis) into
/// every perturbed eigenbasis and reports overlaps and pairwise mixed cumulants.
pub fn deutsch_ensemble(model: &SpectralModel, spec: &DeutschSpec, a: &CMat, beta: f64) -> Result<DeutschResult> {
    let d = model.dim();
    if spec.perturbation.dim() != (d, d) || a.dim() != (d, d) {
        return Err(Error::domain(format!("perturbation and observable must be {d}x{d}")));
    }
    let e = model.energies();
    let v = model.basis();
    let hp = dagger(v).dot(&spec.perturbation).dot(v);
    let solved: Vec<(ndarray::Array1<f64>, CMat)> = spec
        .lambdas
        .par_iter()
        .map(|&l| {
            let mut h = hp.mapv(|x| x * (spec.c * l));
            for i in 0..d {
                h[[i, i]] += e[i];
            }
            eigh(&h)
        })
        .collect::<Result<_>>()?;
    let mut summaries = Vec::new();
    let mut overlaps = Vec::new();
    let mut observables = Vec::new();
    let mut bases = Vec::new();
    for (&l, (el, w)) in spec.lambdas.iter().zip(solved) {
        let u = w.mapv(|x| x.norm_sqr());
        summaries.push(summarize(l, e.as_slice().expect("contiguous"), el.as_slice().expect("contiguous"), &u));
        observables.push(dagger(&w).dot(a).dot(&w));
        overlaps.push(u);
        bases.push(w);
    }
    let state = ThermalState::new(model, beta)?;
    let mut mixed = Vec::new();
    for i in 0..spec.lambdas.len() {
        for j in i..spec.lambdas.len() {
            let f = ThermalFunctional::from_parts(e.as_slice().expect("contiguous"), &state.weights, vec![&observables[i], &observables[j]]);
            let kappa4 = cumulant(&word(&[0, 1, 0, 1]), &f)?;
            mixed.push(MixedCumulant { lambda_1: spec.lambdas[i], lambda_2: spec.lambdas[j], kappa4 });
        }
    }
    Ok(DeutschResult {
        report: DeutschReport { dim: d, c: spec.c, exponent: spec.exponent, beta, overlaps: summaries, mixed },
        basis_changes: bases,
        overlaps,
        observables,
    })
}

fn summarize(lambda: f64, e: &[f64], el: &[f64], u: &ndarray::Array2<f64>) -> OverlapSummary {
    let d = e.len();
    let row = u.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    let col = u.columns().into_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
    let span = (e[d - 1] - e[0]).max(el[d - 1] - el[0]).max(f64::MIN_POSITIVE);
    let h = span / PROFILE_BINS as f64;
    let mut mass = [0.0; PROFILE_BINS];
    let mut count = [0usize; PROFILE_BINS];
    let mut second = 0.0;
    for n in 0..d {
        for m in 0..d {
            let w = (e[n] - el[m]).abs();
            second += u[[n, m]] * w * w;
            let b = ((w / h) as usize).min(PROFILE_BINS - 1);
            mass[b] += u[[n, m]];
            count[b] += 1;
        }
    }
    let profile = (0..PROFILE_BINS)
        .map(|b| ((b as f64 + 0.5) * h, if count[b] > 0 { mass[b] / count[b] as f64 } else { 0.0 }))
        .collect();
    OverlapSummary { lambda, row_sum_residual: row, col_sum_residual: col, rms_width: (second / d as f64).sqrt(), profile }
}
