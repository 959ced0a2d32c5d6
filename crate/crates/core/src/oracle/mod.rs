//! Brute-force references that share no solver code with the engine: full
//! Lindblad dynamics without elimination, and real-space single-photon
//! scattering in a waveguide.

pub mod full;
pub mod single_excitation;

pub use full::{
    extrapolate_zero_drive, full_lindblad_evolve, full_state_space, steady_output_amplitude, steady_state,
    FullStateSpace,
};
pub use single_excitation::{single_excitation_scattering, SingleExcitationResult};
