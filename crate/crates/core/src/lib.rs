//! Weak-field photon scattering and slow ground-state dynamics of multi-level
//! quantum emitters coupled through a dielectric medium.
//!
//! Units: `hbar = 1`, rates and energies in a reference rate `Gamma_0`,
//! positions in carrier wavelengths. Excited-level energies are detunings
//! from the carrier; ground-level energies are absolute.

pub mod effective;
pub mod error;
pub mod linalg;
pub mod media;
pub mod model;
pub mod oracle;
pub mod parallel;
pub mod scattering;

pub use error::{Error, Result};
pub use media::{DecayMatrix, GreenMediumSpec, JumpBasis, ShiftMatrix};
pub use model::{build_manifolds, EmitterSpec, HcTerm, Level, ManifoldBasis, SystemSpec, Transition};
pub use parallel::ExecutionMode;
