//! Spectral models: a diagonalized Hamiltonian with observables in its eigenbasis.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh, eigh_real, hermiticity_residual, max_abs, to_complex, CMat};
use crate::C64;

/// Default cap on the Hilbert space dimension.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Default mixed-field Ising couplings `(J, h_x, h_z)`.
pub const ISING_DEFAULT: (f64, f64, f64) = (1.0, -1.05, 0.5);

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    Goe { dim: usize, seed: u64 },
    Ising { sites: usize, j: f64, hx: f64, hz: f64 },
    User,
}

#[derive(Clone, Debug)]
pub struct SpectralModel {
    energies: Array1<f64>,
    basis: CMat,
    observables: BTreeMap<String, CMat>,
    provenance: ModelKind,
}

/// Accidental coincidences `|E_i + E_j - E_k - E_l| < eps` among random
/// quadruples that are not trivially paired.
#[derive(Clone, Debug, Serialize)]
pub struct ResonanceReport {
    pub eps: f64,
    pub sampled: usize,
    pub resonant: usize,
    pub degenerate_pairs: usize,
}

impl SpectralModel {
    /// Diagonalizes a Hermitian `h`; `observables` are given in the original basis.
    pub fn from_hamiltonian(
        h: &CMat,
        observables: Vec<(String, CMat)>,
        provenance: ModelKind,
    ) -> Result<Self> {
        Self::from_hamiltonian_capped(h, observables, provenance, DEFAULT_DIM_CAP)
    }

    pub fn from_hamiltonian_capped(
        h: &CMat,
        observables: Vec<(String, CMat)>,
        provenance: ModelKind,
        cap: usize,
    ) -> Result<Self> {
        let d = h.nrows();
        if d == 0 || h.ncols() != d {
            return Err(Error::domain("Hamiltonian must be a non-empty square matrix"));
        }
        if d > cap {
            return Err(Error::Size(format!("dimension {d} exceeds the cap {cap}")));
        }
        let scale = max_abs(h).max(1.0);
        if hermiticity_residual(h) > 1e-10 * scale {
            return Err(Error::domain("Hamiltonian is not Hermitian"));
        }
        let (energies, basis) = if h.iter().all(|x| x.im == 0.0) {
            let (e, v) = eigh_real(&h.mapv(|x| x.re))?;
            (e, to_complex(&v))
        } else {
            eigh(h)?
        };
        let mut m = SpectralModel { energies, basis, observables: BTreeMap::new(), provenance };
        for (name, o) in observables {
            m.add_observable(&name, &o)?;
        }
        Ok(m)
    }

    /// Model with a diagonal Hamiltonian; observables are already in the eigenbasis.
    pub fn from_spectrum(energies: Vec<f64>, observables: Vec<(String, CMat)>) -> Result<Self> {
        let d = energies.len();
        if d == 0 {
            return Err(Error::domain("empty spectrum"));
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("energies must be sorted ascending"));
        }
        let mut m = SpectralModel {
            energies: Array1::from(energies),
            basis: crate::linalg::identity(d),
            observables: BTreeMap::new(),
            provenance: ModelKind::User,
        };
        for (name, o) in observables {
            if o.dim() != (d, d) {
                return Err(Error::domain(format!("observable {name} has the wrong shape")));
            }
            m.observables.insert(name, o);
        }
        Ok(m)
    }

    /// GOE draw: off-diagonal entries N(0, 1/D), diagonal N(0, 2/D), so the
    /// spectrum fills [-2, 2].
    pub fn goe(dim: usize, seed: u64) -> Result<Self> {
        let h = goe_matrix(dim, &mut ChaCha8Rng::seed_from_u64(seed))?;
        Self::from_hamiltonian(&to_complex(&h), vec![], ModelKind::Goe { dim, seed })
    }

    /// Mixed-field Ising chain with open boundaries,
    /// `H = J sum Z_i Z_{i+1} + h_x sum X_i + h_z sum Z_i`.
    /// Stores `X`, `Z` on the first and middle site as `sx_1`, `sz_1`, `sx_mid`, `sz_mid`.
    pub fn ising(sites: usize, j: f64, hx: f64, hz: f64) -> Result<Self> {
        let h = ising_hamiltonian(sites, j, hx, hz)?;
        let mid = sites / 2;
        let obs = vec![
            ("sx_1".to_string(), to_complex(&local_pauli(sites, 0, 'x')?)),
            ("sz_1".to_string(), to_complex(&local_pauli(sites, 0, 'z')?)),
            ("sx_mid".to_string(), to_complex(&local_pauli(sites, mid, 'x')?)),
            ("sz_mid".to_string(), to_complex(&local_pauli(sites, mid, 'z')?)),
        ];
        Self::from_hamiltonian(&to_complex(&h), obs, ModelKind::Ising { sites, j, hx, hz })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &Array1<f64> {
        &self.energies
    }

    /// Eigenvectors as columns.
    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn provenance(&self) -> &ModelKind {
        &self.provenance
    }

    pub fn spectral_width(&self) -> f64 {
        self.energies[self.dim() - 1] - self.energies[0]
    }

    /// `1e-10` times the spectral width.
    pub fn default_resonance_tol(&self) -> f64 {
        1e-10 * self.spectral_width().max(f64::MIN_POSITIVE)
    }

    /// Rotates `o` (original basis) into the eigenbasis and stores it.
    pub fn add_observable(&mut self, name: &str, o: &CMat) -> Result<()> {
        let d = self.dim();
        if o.dim() != (d, d) {
            return Err(Error::domain(format!("observable {name} is {:?}, expected {d}x{d}", o.dim())));
        }
        let rotated = dagger(&self.basis).dot(&o.dot(&self.basis));
        self.observables.insert(name.to_string(), rotated);
        Ok(())
    }

    /// Stores a matrix already expressed in the eigenbasis.
    pub fn add_observable_eigenbasis(&mut self, name: &str, o: CMat) -> Result<()> {
        let d = self.dim();
        if o.dim() != (d, d) {
            return Err(Error::domain(format!("observable {name} has the wrong shape")));
        }
        self.observables.insert(name.to_string(), o);
        Ok(())
    }

    /// Observable in the eigenbasis.
    pub fn observable(&self, name: &str) -> Result<&CMat> {
        self.observables
            .get(name)
            .ok_or_else(|| Error::domain(format!("unknown observable {name}")))
    }

    pub fn observable_names(&self) -> Vec<String> {
        self.observables.keys().cloned().collect()
    }

    /// Largest entry of `|V^† V - 1|`.
    pub fn basis_unitarity_residual(&self) -> f64 {
        crate::linalg::unitarity_residual(&self.basis)
    }

    /// Mean of `min(s_n, s_{n+1}) / max(s_n, s_{n+1})` over consecutive spacings.
    pub fn level_spacing_ratio(&self) -> f64 {
        let e = &self.energies;
        let s: Vec<f64> = e.windows(2).into_iter().map(|w| w[1] - w[0]).collect();
        let mut acc = 0.0;
        let mut n = 0usize;
        for w in s.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a.max(b) > 0.0 {
                acc += a.min(b) / a.max(b);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            acc / n as f64
        }
    }

    pub fn resonance_report(&self, eps: f64, samples: usize, seed: u64) -> ResonanceReport {
        let d = self.dim();
        let e = &self.energies;
        let degenerate_pairs = e.windows(2).into_iter().filter(|w| w[1] - w[0] < eps).count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut resonant = 0;
        let mut sampled = 0;
        if d >= 2 {
            for _ in 0..samples {
                let (i, j, k, l) =
                    (rng.random_range(0..d), rng.random_range(0..d), rng.random_range(0..d), rng.random_range(0..d));
                if (i == k && j == l) || (i == l && j == k) {
                    continue;
                }
                sampled += 1;
                if (e[i] + e[j] - e[k] - e[l]).abs() < eps {
                    resonant += 1;
                }
            }
        }
        ResonanceReport { eps, sampled, resonant, degenerate_pairs }
    }
}

pub fn goe_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Array2<f64>> {
    if dim == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let sd = (1.0 / dim as f64).sqrt();
    let mut h = Array2::zeros((dim, dim));
    for i in 0..dim {
        let x: f64 = rng.sample(StandardNormal);
        h[[i, i]] = x * sd * std::f64::consts::SQRT_2;
        for j in (i + 1)..dim {
            let x: f64 = rng.sample(StandardNormal);
            h[[i, j]] = x * sd;
            h[[j, i]] = x * sd;
        }
    }
    Ok(h)
}

/// Pauli `axis` in {'x', 'z'} on `site` of an `l`-site chain; site 0 is the
/// most significant bit.
pub fn local_pauli(l: usize, site: usize, axis: char) -> Result<Array2<f64>> {
    if l == 0 || l > 12 || site >= l {
        return Err(Error::domain(format!("site {site} outside a chain of {l} sites (at most 12)")));
    }
    let d = 1usize << l;
    let bit = l - 1 - site;
    let mut m = Array2::zeros((d, d));
    for s in 0..d {
        match axis {
            'x' => m[[s ^ (1 << bit), s]] = 1.0,
            'z' => m[[s, s]] = if s >> bit & 1 == 0 { 1.0 } else { -1.0 },
            _ => return Err(Error::domain(format!("unknown Pauli axis {axis}"))),
        }
    }
    Ok(m)
}

pub fn ising_hamiltonian(l: usize, j: f64, hx: f64, hz: f64) -> Result<Array2<f64>> {
    if l == 0 || l > 12 {
        return Err(Error::domain("Ising chain needs 1..=12 sites"));
    }
    let d = 1usize << l;
    let mut h = Array2::zeros((d, d));
    let z = |s: usize, i: usize| if s >> (l - 1 - i) & 1 == 0 { 1.0 } else { -1.0 };
    for s in 0..d {
        let mut diag = 0.0;
        for i in 0..l {
            diag += hz * z(s, i);
            if i + 1 < l {
                diag += j * z(s, i) * z(s, i + 1);
            }
            h[[s ^ (1 << (l - 1 - i)), s]] += hx;
        }
        h[[s, s]] += diag;
    }
    Ok(h)
}

pub fn diagonal(values: &[f64]) -> CMat {
    Array2::from_diag(&Array1::from_iter(values.iter().map(|&x| C64::new(x, 0.0))))
}

/// Diagonal sign pattern in the original basis: +1 on runs of length `period`
/// starting at index 0, -1 on the runs between. `period = D/2` splits the
/// space in halves, `period = 1` alternates.
pub fn sign_diagonal(dim: usize, period: usize) -> Result<CMat> {
    if period == 0 || dim == 0 || dim % (2 * period) != 0 {
        return Err(Error::domain(format!("period {period} does not tile dimension {dim} into +/- runs")));
    }
    let v: Vec<f64> = (0..dim).map(|i| if (i / period) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    Ok(diagonal(&v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input_keeps_basis() {
        let h = diagonal(&[-1.0, 0.5, 2.0]);
        let m = SpectralModel::from_hamiltonian(&h, vec![], ModelKind::User).unwrap();
        assert!(max_abs(&(m.basis() - &crate::linalg::identity(3))) < 1e-12);
        assert_eq!(m.energies().to_vec(), vec![-1.0, 0.5, 2.0]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut h = diagonal(&[1.0, 2.0]);
        h[[0, 1]] = C64::new(1.0, 0.0);
        assert!(SpectralModel::from_hamiltonian(&h, vec![], ModelKind::User).is_err());
    }

    #[test]
    fn ising_paulis_anticommute() {
        let x = local_pauli(4, 1, 'x').unwrap();
        let z = local_pauli(4, 1, 'z').unwrap();
        let z2 = local_pauli(4, 2, 'z').unwrap();
        let ac = x.dot(&z) + z.dot(&x);
        assert!(ac.iter().all(|v| v.abs() < 1e-15));
        let c = x.dot(&z2) - z2.dot(&x);
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        let h = ising_hamiltonian(4, 1.0, -1.05, 0.5).unwrap();
        assert!((&h - &h.t()).iter().all(|v| v.abs() < 1e-15));
    }
}
