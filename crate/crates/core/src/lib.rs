//! Free probability tools for k-fold unitary channels.
//!
//! The crate covers non-crossing partitions and their Möbius function,
//! permutations and the Weingarten calculus, free cumulants of words under an
//! arbitrary expectation functional, Haar k-fold channels, Monte Carlo tests of
//! k-freeness for unitary ensembles, and long-time dynamics of ETH observables.

pub mod channel;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod eth;
pub mod lattice;
pub mod linalg;
pub mod moments;
pub mod perm;
pub mod weingarten;

pub use error::{Error, Result};
pub use lattice::{NcLattice, Partition};
pub use moments::{ExpectationFunctional, Letter};
pub use perm::Permutation;
pub use weingarten::WeingartenTable;

pub type C64 = num_complex::Complex64;
