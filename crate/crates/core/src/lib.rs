//! Pseudopure-state preparation and readout for NMR quantum information
//! processing.
//!
//! The crate models an N-qubit first-order spin system as diagonal
//! population vectors. It prepares pairs of pseudopure states (POPS) by
//! two-experiment subtraction, compiles controlled gates into
//! transition-selective pi pulses, synthesizes noisy spectra, and multiplies
//! two POPS spectra that share a common pseudopure state to recover the
//! spectrum of that single state.

pub mod algebra;
pub mod config;
pub mod couplings;
pub mod error;
pub mod gates;
pub mod reference;
pub mod scenario;
pub mod spectrometer;
pub mod spin_system;
pub mod state;

pub use config::{build_system, five_qubit_system, load_system, SystemConfig};
pub use couplings::{find_couplings, PeakOrderTarget};
pub use error::{Error, Result};
pub use gates::{
    apply_sequence, compile, compile_cnot, compile_cswap, gate_truth_permutation, GateSpec,
    PulseSequence,
};
pub use spin_system::{BasisState, PeakLabel, SignedPeak, SpinDef, SpinSystem, Transition};
pub use state::{make_pops, pi_pulse, pseudopure, thermal_state, PopulationState, StateKind};
