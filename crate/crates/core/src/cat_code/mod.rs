//! Cat-state protection of the register in lossy cavities.
//!
//! A logical qubit value `ℓ` is stored in every cavity of a chain as the
//! even cat `|C_α^+⟩` (ℓ = 0) or `|C_{iα}^+⟩` (ℓ = 1). Photon loss flips the
//! cavity parity, which is detected by a QND parity measurement and undone
//! by a recovery map that also re-pumps the decayed amplitude.
//!
//! Cavity states live in a truncated Fock space `{|0⟩, …, |n_max⟩}`.

mod chain;
mod encode;
mod trajectory;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{HilbertError, StateVector, SubsystemLayout};
use crate::spin_register::SpinError;
use crate::C64;

pub use chain::{
    codeword, extend_chain, parity_measure, repump_correct, Branch, ChainState, MAX_DENSE_DIM,
};
pub use encode::{decode, encode, Encoder};
pub use trajectory::{
    build_chain, compare_arms, loss_trajectory, run_ensemble, run_protocol, write_trajectory_csv, ArmComparison,
    ProtocolSpec, TrajectoryRecord,
};

/// Largest tail mass of a coherent state allowed outside the truncation.
pub const TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("n_max = {n_max} too small for |α| = {abs_alpha}; need at least {needed}")]
    TruncationTooSmall { n_max: usize, abs_alpha: f64, needed: usize },
    #[error("odd cat of α = 0 is the null vector")]
    NullCat,
    #[error("loss rate must be finite and >= 0, got {0}")]
    BadKappa(f64),
    #[error("dispersive detuning must be nonzero")]
    ZeroDetuning,
    #[error("state is not in the code subspace (weight {0})")]
    NotInCodeSpace(f64),
    #[error("state is not in chain form (fidelity {0})")]
    NotChainForm(f64),
    #[error("fresh pair does not merge into the chain (fidelity {0})")]
    BadBellPair(f64),
    #[error("cavity index {index} out of range for {n} cavities")]
    CavityOutOfRange { index: usize, n: usize },
    #[error("syndrome has {found} entries for {expected} cavities")]
    SyndromeLength { expected: usize, found: usize },
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("dense representation of dimension {0} is too large")]
    TooLarge(usize),
}

/// Smallest truncation keeping the coherent-state tail below [`TAIL_TOL`].
pub fn min_n_max(abs_alpha: f64) -> usize {
    (abs_alpha * abs_alpha + 8.0 * abs_alpha + 10.0).ceil() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    pub alpha: C64,
    pub n_max: usize,
    /// Photon loss rate, 1/s.
    pub kappa: f64,
}

impl CavitySpec {
    /// Spec with the smallest admissible truncation.
    pub fn new(alpha: C64, kappa: f64) -> Result<Self, CatError> {
        let s = Self { alpha, n_max: min_n_max(alpha.norm()), kappa };
        s.validate()?;
        Ok(s)
    }

    pub fn with_n_max(mut self, n_max: usize) -> Result<Self, CatError> {
        self.n_max = n_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CatError> {
        let needed = min_n_max(self.alpha.norm());
        if self.n_max < needed || !self.alpha.norm().is_finite() {
            return Err(CatError::TruncationTooSmall { n_max: self.n_max, abs_alpha: self.alpha.norm(), needed });
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(CatError::BadKappa(self.kappa));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersiveCoupling {
    /// Hz
    pub g: f64,
    /// Hz
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> i8 {
        match self {
            Parity::Even => 1,
            Parity::Odd => -1,
        }
    }

    fn keeps(self, n: usize) -> bool {
        (n % 2 == 0) == (self == Parity::Even)
    }
}

/// Fock amplitudes `e^{−|α|²/2} αⁿ/√(n!)` for `n ≤ n_max`, renormalized.
pub fn coherent_amplitudes(alpha: C64, n_max: usize) -> Result<Vec<C64>, CatError> {
    let mut c = Vec::with_capacity(n_max + 1);
    c.push(C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0));
    for n in 1..=n_max {
        let prev = c[n - 1];
        c.push(prev * alpha / (n as f64).sqrt());
    }
    let mass: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    if 1.0 - mass > TAIL_TOL || !mass.is_finite() {
        return Err(CatError::TruncationTooSmall {
            n_max,
            abs_alpha: alpha.norm(),
            needed: min_n_max(alpha.norm()),
        });
    }
    let s = mass.sqrt();
    c.iter_mut().for_each(|x| *x /= s);
    Ok(c)
}

/// `N(|α⟩ ± |−α⟩)`, built by masking the coherent state to one parity.
pub fn cat_amplitudes(alpha: C64, parity: Parity, n_max: usize) -> Result<Vec<C64>, CatError> {
    if alpha.norm() == 0.0 && parity == Parity::Odd {
        return Err(CatError::NullCat);
    }
    let mut c = coherent_amplitudes(alpha, n_max)?;
    for (n, x) in c.iter_mut().enumerate() {
        if !parity.keeps(n) {
            *x = C64::new(0.0, 0.0);
        }
    }
    let s = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if !(s > 0.0) {
        return Err(CatError::NullCat);
    }
    c.iter_mut().for_each(|x| *x /= s);
    Ok(c)
}

fn cavity_layout(n_max: usize) -> SubsystemLayout {
    SubsystemLayout::single(n_max + 1, "cavity").expect("n_max >= 1")
}

pub fn coherent(alpha: C64, n_max: usize) -> Result<StateVector, CatError> {
    Ok(StateVector::new(coherent_amplitudes(alpha, n_max)?, cavity_layout(n_max))?)
}

pub fn cat(alpha: C64, parity: Parity, n_max: usize) -> Result<StateVector, CatError> {
    Ok(StateVector::new(cat_amplitudes(alpha, parity, n_max)?, cavity_layout(n_max))?)
}

/// Normalization `N_α^± = 1/√(2(1 ± e^{−2|α|²}))`.
pub fn cat_normalization(alpha: C64, parity: Parity) -> f64 {
    let e = (-2.0 * alpha.norm_sqr()).exp();
    let s = match parity {
        Parity::Even => 1.0 + e,
        Parity::Odd => 1.0 - e,
    };
    1.0 / (2.0 * s).sqrt()
}

/// `⟨C_α^+|C_{iα}^+⟩` from coherent-state overlaps.
pub fn cat_overlap_closed_form(alpha: C64) -> C64 {
    let a2 = alpha.norm_sqr();
    let n = cat_normalization(alpha, Parity::Even);
    // ⟨α|iα⟩ = e^{−|α|²(1−i)}, ⟨α|−iα⟩ = e^{−|α|²(1+i)}
    let t = (C64::new(-a2, a2)).exp() + (C64::new(-a2, -a2)).exp();
    t * (2.0 * n * n)
}

/// `⟨a|b⟩` for plain amplitude slices.
pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨ψ|exp(iπ a†a)|ψ⟩` of one cavity subsystem.
pub fn parity_expectation(state: &StateVector, cavity: usize) -> Result<f64, CatError> {
    let layout = state.layout();
    if cavity >= layout.len() {
        return Err(CatError::CavityOutOfRange { index: cavity, n: layout.len() });
    }
    let stride = layout.strides()[cavity];
    let d = layout.dims()[cavity];
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| if (i / stride) % d % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum())
}

/// `⟨a†a⟩` of one cavity subsystem.
pub fn mean_photon_number(state: &StateVector, cavity: usize) -> Result<f64, CatError> {
    let layout = state.layout();
    if cavity >= layout.len() {
        return Err(CatError::CavityOutOfRange { index: cavity, n: layout.len() });
    }
    let stride = layout.strides()[cavity];
    let d = layout.dims()[cavity];
    Ok(state.amplitudes().iter().enumerate().map(|(i, a)| ((i / stride) % d) as f64 * a.norm_sqr()).sum())
}

/// Conditional rotation `exp(−iθ|0⟩⟨0| a†a)` with `θ = g²t/δ` on a
/// qubit ⊗ cavity state: the `|0⟩` branch sends `α → α e^{−iθ}`.
pub fn dispersive_rotation(state: &StateVector, coupling: DispersiveCoupling, t: f64) -> Result<StateVector, CatError> {
    if coupling.delta == 0.0 || !coupling.delta.is_finite() {
        return Err(CatError::ZeroDetuning);
    }
    let dims = state.layout().dims();
    if dims.len() != 2 || dims[0] != 2 {
        return Err(HilbertError::LayoutMismatch.into());
    }
    let theta = coupling.g * coupling.g * t / coupling.delta;
    let d = dims[1];
    let mut amps = state.amplitudes().to_vec();
    for (n, a) in amps[..d].iter_mut().enumerate() {
        *a *= C64::from_polar(1.0, -theta * n as f64);
    }
    Ok(StateVector::normalized(amps, state.layout().clone())?)
}
