//! Optical pumping in the eight-level S1/2 + P1/2 + D3/2 system with a 493 nm
//! photon counter.
//!
//! Trajectories carry a pure state inside the current lower manifold. For a
//! given state the no-jump evolution is integrated in closed form: the P1/2
//! amplitude covariance ∫ a(t) a(t)† dt solves a Lyapunov equation, its trace
//! (times Γ) is the probability of any further emission, and its eigenvectors
//! give an exact unraveling of the post-emission ensemble. Jump times never
//! enter the photon count, so none are sampled.

mod beams;
mod dark;
mod jump;
mod matrix;
mod model;

pub use beams::{BeamConfig, Color};
pub use dark::{find_dark_states, find_dark_states_with, DarkState};
pub use jump::{simulate_pumping, PhotonTally, PumpingResult, SimOptions, SimulationMode};
pub use matrix::{
    detection_matrix_d, detection_matrix_s, setting_label, DetectionMatrix, DetectionParams, D_SETTINGS,
    PUBLISHED_D, PUBLISHED_S_BUDGET, S_SETTINGS,
};
pub use model::{PumpModel, DEFAULT_DARK_EPSILON};
