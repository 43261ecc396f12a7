//! Thermal states and the canonical expectation of time-evolved words.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eth::model::SpectralModel;
use crate::linalg::CMat;
use crate::moments::{cumulant, ExpectationFunctional, FunctionalKind, Letter};
use crate::C64;

#[derive(Clone, Debug, Serialize)]
pub struct ThermalState {
    pub beta: f64,
    /// `ln Z` with `Z = sum exp(-beta E_i)`.
    pub log_z: f64,
    pub weights: Vec<f64>,
}

impl ThermalState {
    pub fn new(model: &SpectralModel, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::domain("beta must be finite"));
        }
        let e = model.energies();
        let shift = if beta >= 0.0 { e[0] } else { e[e.len() - 1] };
        let raw: Vec<f64> = e.iter().map(|&x| (-beta * (x - shift)).exp()).collect();
        let s: f64 = raw.iter().sum();
        Ok(ThermalState { beta, log_z: s.ln() - beta * shift, weights: raw.iter().map(|x| x / s).collect() })
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `(sum w)^2 / sum w^2`.
    pub fn effective_dimension(&self) -> f64 {
        let s: f64 = self.weights.iter().sum();
        s * s / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// `A(t)` in the eigenbasis: `A_ij exp(i (E_i - E_j) t)`.
pub fn evolve(a: &CMat, energies: &[f64], t: f64) -> CMat {
    if t == 0.0 {
        return a.clone();
    }
    let ph: Vec<C64> = energies.iter().map(|&e| C64::new(0.0, e * t).exp()).collect();
    let mut out = a.clone();
    for ((i, j), x) in out.indexed_iter_mut() {
        *x *= ph[i] * ph[j].conj();
    }
    out
}

/// `Tr(exp(-beta H) A_1(t_1) .. A_n(t_n)) / Z` for observables given in the
/// eigenbasis, indexed by letter op.
pub struct ThermalFunctional<'a> {
    energies: Vec<f64>,
    weights: &'a [f64],
    ops: Vec<&'a CMat>,
}

impl<'a> ThermalFunctional<'a> {
    pub fn new(model: &'a SpectralModel, state: &'a ThermalState, ops: Vec<&'a CMat>) -> Result<Self> {
        let d = model.dim();
        if state.dim() != d {
            return Err(Error::domain("thermal state and model differ in dimension"));
        }
        if ops.iter().any(|m| m.dim() != (d, d)) {
            return Err(Error::domain(format!("observables must be {d}x{d}")));
        }
        Ok(ThermalFunctional { energies: model.energies().to_vec(), weights: &state.weights, ops })
    }

    pub(crate) fn from_parts(energies: &[f64], weights: &'a [f64], ops: Vec<&'a CMat>) -> Self {
        ThermalFunctional { energies: energies.to_vec(), weights, ops }
    }

    /// Looks observables up by name in the model.
    pub fn by_name(model: &'a SpectralModel, state: &'a ThermalState, names: &[&str]) -> Result<Self> {
        let ops = names.iter().map(|n| model.observable(n)).collect::<Result<Vec<_>>>()?;
        Self::new(model, state, ops)
    }

    fn letter(&self, l: &Letter) -> Result<CMat> {
        let m = self
            .ops
            .get(l.op)
            .ok_or_else(|| Error::MissingMoment(format!("no observable with id {}", l.op)))?;
        Ok(evolve(m, &self.energies, l.time))
    }

    fn product(&self, w: &[Letter]) -> Result<Option<CMat>> {
        let mut acc: Option<CMat> = None;
        for l in w {
            let m = self.letter(l)?;
            acc = Some(match acc {
                None => m,
                Some(p) => p.dot(&m),
            });
        }
        Ok(acc)
    }
}

impl ExpectationFunctional for ThermalFunctional<'_> {
    fn moment(&self, w: &[Letter]) -> Result<C64> {
        let wts = self.weights;
        match w.len() {
            0 => Ok(C64::new(1.0, 0.0)),
            1 => {
                let m = self.ops.get(w[0].op).ok_or_else(|| Error::MissingMoment(format!("op {}", w[0].op)))?;
                Ok(m.diag().iter().zip(wts).map(|(x, p)| x * p).sum())
            }
            n => {
                let mid = n / 2;
                let l = self.product(&w[..mid])?.expect("non-empty");
                let r = self.product(&w[mid..])?.expect("non-empty");
                let mut acc = C64::new(0.0, 0.0);
                for (i, row) in l.outer_iter().enumerate() {
                    let col = r.column(i);
                    let s: C64 = row.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                    acc += s * wts[i];
                }
                Ok(acc)
            }
        }
    }

    fn kind(&self) -> FunctionalKind {
        FunctionalKind::Thermal
    }

    fn is_tracial(&self) -> bool {
        self.weights.iter().all(|&w| (w - self.weights[0]).abs() <= 1e-15)
    }
}

pub fn thermal_word_moment(
    model: &SpectralModel,
    state: &ThermalState,
    ops: &[&CMat],
    word: &[Letter],
) -> Result<C64> {
    ThermalFunctional::new(model, state, ops.to_vec())?.moment(word)
}

/// `kappa^beta_n` of the word by Möbius inversion over NC(n).
pub fn thermal_free_cumulant(
    model: &SpectralModel,
    state: &ThermalState,
    ops: &[&CMat],
    word: &[Letter],
) -> Result<C64> {
    let f = ThermalFunctional::new(model, state, ops.to_vec())?;
    cumulant(word, &f)
}

/// The alternating word `A(t) B A(t) B ..` with `k` copies of each, ops 0 and 1.
pub fn otoc_word(k: usize, t: f64) -> Vec<Letter> {
    (0..2 * k).map(|i| if i % 2 == 0 { Letter::at(0, t) } else { Letter::new(1) }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eth::model::diagonal;

    #[test]
    fn weights_normalized() {
        let m = SpectralModel::from_spectrum(vec![-1.0, 0.0, 3.0], vec![]).unwrap();
        let s = ThermalState::new(&m, 2.0).unwrap();
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let z: f64 = [2.0f64, 0.0, -6.0].iter().map(|x| x.exp()).sum();
        assert!((s.z() - z).abs() < 1e-12 * z);
        let s0 = ThermalState::new(&m, 0.0).unwrap();
        assert!((s0.effective_dimension() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_letter_static() {
        let a = diagonal(&[1.0, 2.0, 3.0]);
        let m = SpectralModel::from_spectrum(vec![-1.0, 0.0, 3.0], vec![("a".into(), a.clone())]).unwrap();
        let s = ThermalState::new(&m, 0.5).unwrap();
        let f = ThermalFunctional::by_name(&m, &s, &["a"]).unwrap();
        let x = f.moment(&[Letter::at(0, 0.0)]).unwrap();
        let y = f.moment(&[Letter::at(0, 7.3)]).unwrap();
        assert!((x - y).norm() < 1e-14);
    }
}
