//! Simulation and inference for magnetically insensitive qubits synthesized in
//! the metastable D3/2 manifold of a nuclear-spin-zero ion (138Ba+).
//!
//! The crate is organized by subsystem:
//!
//! * [`atomic`] — level structure, Landé factors, Clebsch–Gordan weights and
//!   field sensitivities.
//! * [`scatter`] — quantum-jump simulation of optical pumping with a 493 nm
//!   photon counter, detection matrices and dark-state analysis.
//! * [`tomography`] — population reconstruction from polarization-tagged
//!   photon counts.
//! * [`dynamics`] — coherent rotations inside the D3/2 quartet, synthetic
//!   qubit states, STIRAP and Rabi fitting.
//! * [`ramsey`] — magnetic noise and Ramsey coherence benchmarks.
//! * [`doc`] — structured text documents and CSV emission shared by the CLI.

pub mod atomic;
pub mod doc;
pub mod dynamics;
mod error;
pub mod fit;
mod linalg;
pub mod quartet;
pub mod ramsey;
pub mod rng;
pub mod scatter;
pub mod tomography;

pub use atomic::{AtomConstants, Manifold, Polarization, ZeemanState};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use quartet::{DensityMatrix, QuartetState};
pub use scatter::{BeamConfig, Color, DetectionMatrix, PumpModel};
pub use tomography::{CountsVector, PopulationEstimate};

