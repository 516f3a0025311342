//! Quantum-dot spin register driven by superconductor-mediated couplings.
//!
//! Two interactions are available between a pair of dots `(a, b)`:
//! the exchange coupling `J1·σ_a·σ_b` and the Ising coupling `J2·σz_a σz_b`.
//! Entangling schedules are built from timed coupling layers and
//! instantaneous single-dot pulses; pulse time is not counted in the
//! schedule duration. Qubit convention: `σz|0⟩ = +|0⟩`.

mod ghz;
mod planner;
mod schedule;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{pauli, HilbertError, LinearMap, SubsystemLayout};
use crate::C64;

pub use ghz::{apply_correction, ghz_correction, is_ghz_class, max_schmidt_deviation, LocalCorrection};
pub use planner::{
    bell_steps, build_bell, merge_blocks, merge_blocks_with_delta, merge_steps, plan_ghz, singleton_merge_steps,
    BellConstruction, MERGE_DELTA,
};
pub use schedule::{execute, initial_register, PulseSpec, Schedule, Step, TimingReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("coupling strength must be finite and > 0, got {0}")]
    BadStrength(f64),
    #[error("pair ({0}, {1}) must name two distinct dots")]
    BadPair(usize, usize),
    #[error("dot index {index} out of range for {n} dots")]
    DotOutOfRange { index: usize, n: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("contacts {0} and {1} belong to the same block")]
    SameBlock(usize, usize),
    #[error("a GHZ register needs at least 2 dots, got {0}")]
    TooFewDots(usize),
    #[error("state is not GHZ-class (max Schmidt deviation {0:e})")]
    NotGhzClass(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    /// `J1 (XX + YY + ZZ)`
    Heisenberg,
    /// `J2 ZZ`
    Ising,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    /// Angular frequency, ħ = 1.
    pub strength: f64,
    pub pair: (usize, usize),
}

impl CouplingSpec {
    pub fn new(kind: CouplingKind, strength: f64, pair: (usize, usize)) -> Result<Self, SpinError> {
        let s = Self { kind, strength, pair };
        s.validate(usize::MAX)?;
        Ok(s)
    }

    pub(crate) fn validate(&self, n_dots: usize) -> Result<(), SpinError> {
        if !(self.strength > 0.0) || !self.strength.is_finite() {
            return Err(SpinError::BadStrength(self.strength));
        }
        let (a, b) = self.pair;
        if a == b {
            return Err(SpinError::BadPair(a, b));
        }
        for i in [a, b] {
            if i >= n_dots {
                return Err(SpinError::DotOutOfRange { index: i, n: n_dots });
            }
        }
        Ok(())
    }
}

/// Two-dot interaction matrix in the `|ab⟩` basis.
pub fn pair_matrix(kind: CouplingKind, strength: f64) -> DMatrix<C64> {
    let (x, y, z) = (pauli::x(), pauli::y(), pauli::z());
    let m = match kind {
        CouplingKind::Heisenberg => x.kronecker(&x) + y.kronecker(&y) + z.kronecker(&z),
        CouplingKind::Ising => z.kronecker(&z),
    };
    m * C64::new(strength, 0.0)
}

/// Interaction Hamiltonian embedded in a register layout.
pub fn hamiltonian(spec: &CouplingSpec, layout: &SubsystemLayout) -> Result<LinearMap, SpinError> {
    spec.validate(layout.len())?;
    if layout.dims()[spec.pair.0] != 2 || layout.dims()[spec.pair.1] != 2 {
        return Err(SpinError::InvalidSchedule("couplings act on two-level dots".into()));
    }
    Ok(LinearMap::embed(&pair_matrix(spec.kind, spec.strength), &[spec.pair.0, spec.pair.1], layout)?)
}

/// Rotation by `angle` about the equatorial axis at azimuth `phase`:
/// `exp(−i·angle/2·(cos φ X + sin φ Y))`.
pub fn pulse_matrix(angle: f64, phase: f64) -> DMatrix<C64> {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let off = C64::new(0.0, -s);
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(c, 0.0), off * C64::from_polar(1.0, -phase), off * C64::from_polar(1.0, phase), C64::new(c, 0.0)],
    )
}

/// `exp(−i·angle/2·Z)`.
pub fn rz_matrix(angle: f64) -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -angle / 2.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, angle / 2.0)],
    )
}
