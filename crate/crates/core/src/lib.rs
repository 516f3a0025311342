//! Numerical simulation of a multi-photon entanglement pipeline.
//!
//! The crate is organized bottom-up:
//!
//! * [`hilbert`]: finite-dimensional states, operators, exact evolution and
//!   entanglement metrics. Every other module builds on it.
//! * [`spin_register`]: Ising / Heisenberg coupled quantum-dot spins, pulse
//!   schedules and the GHZ planner with its timing formula.
//! * [`cat_code`]: cat-state encoding of the register into cavity modes,
//!   photon-loss trajectories and parity-syndrome recovery.
//! * [`photon_swap`]: single-photon scattering on a three-level dot, the
//!   emission probability surface, and the register-to-photon swap.
//! * [`polarization`]: dual-rail to polarization conversion with heralding.
//! * [`pipeline`]: configuration, reports and the stage drivers used by the CLI.

pub mod cat_code;
pub mod hilbert;
pub mod photon_swap;
pub mod pipeline;
pub mod polarization;
pub mod rng;
pub mod spin_register;

pub use num_complex::Complex64 as C64;
