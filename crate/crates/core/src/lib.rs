//! Two-site Jaynes-Cummings-Hubbard model with a dispersively coupled knob
//! qubit that switches the photon hopping between the resonators.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod hilbert;
pub mod spectra;

pub use error::{Error, Result};
