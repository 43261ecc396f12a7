//! Exact-diagonalization dynamics: spectral models, thermal free cumulants,
//! distinct-index sums, time averages and the Deutsch ensemble.

pub mod deutsch;
pub mod model;
pub mod network;
pub mod thermal;
pub mod timeavg;

pub use model::{ModelKind, SpectralModel};
pub use thermal::{ThermalFunctional, ThermalState};
