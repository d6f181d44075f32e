//! Single-mode semiconductor laser rate equations.
//!
//! Carrier density N and photon density S evolve as
//!
//! ```text
//! dN/dt = η_i·I/(q·V) − N/τ_n − G(N,S)·S
//! dS/dt = Γ·G(N,S)·S − S/τ_p + Γ·β·N/τ_n
//! G(N,S) = v_g·a·(N − N_tr)/(1 + ε·S)
//! ```
//!
//! Optical output power is proportional to S. Phase and chirp are not modelled.

mod drive;
mod params;
mod rate;
mod simulate;

pub use drive::{drive_from_normalized, DriveConfig};
pub use params::{LaserParams, ELEMENTARY_CHARGE};
pub use rate::{
    derivatives, relaxation_frequency, relaxation_frequency_at, steady_state, threshold_current, RateState,
};
pub use simulate::{integrate_with, solve, Simulation, SolverTolerances};
