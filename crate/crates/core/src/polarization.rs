//! Dual-rail frequency photons to polarization photons.
//!
//! Downconversion and polarization beam splitters are treated as ideal branch
//! maps with scalar success probabilities:
//!
//! ```text
//! |10⟩ → |H V 0⟩ → |H 0⟩ ≅ |H⟩
//! |01⟩ → |0 H V⟩ → |0 V⟩ ≅ |V⟩
//! ```
//!
//! The herald is the detection of the partner photon, so each converted photon
//! succeeds with probability `eta_bbo · detector_efficiency`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::{HilbertError, StateVector, SubsystemLayout};
use crate::C64;

const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarizationError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error("odd number of rails: {0}")]
    OddRails(usize),
    #[error("weight {0:e} outside the dual-rail subspace")]
    NotDualRail(f64),
    #[error("invalid conversion spec: {0}")]
    BadSpec(String),
    #[error("cannot pair {0} photons")]
    BadPairing(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversionSpec {
    pub eta_bbo: f64,
    pub detector_efficiency: f64,
}

impl Default for ConversionSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ConversionSpec {
    pub fn ideal() -> Self {
        Self { eta_bbo: 1.0, detector_efficiency: 1.0 }
    }

    pub fn validate(&self) -> Result<(), PolarizationError> {
        for (name, v) in [("eta_bbo", self.eta_bbo), ("detector_efficiency", self.detector_efficiency)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(PolarizationError::BadSpec(format!("{name} = {v} not in (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn herald_per_photon(&self) -> f64 {
        self.eta_bbo * self.detector_efficiency
    }
}

/// Branch labels through the conversion chain for one photon.
pub fn branch_map(bit: usize) -> [&'static str; 3] {
    if bit == 0 {
        ["10", "HV0", "H0"]
    } else {
        ["01", "0HV", "0V"]
    }
}

/// Photonic state over `2n` rails with one excitation per rail pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DualRailState {
    state: StateVector,
}

fn rail_bits(index: usize, photons: usize) -> Option<usize> {
    let mut bits = 0;
    for q in 0..photons {
        let pair = (index >> (2 * (photons - 1 - q))) & 0b11;
        let bit = match pair {
            0b10 => 0,
            0b01 => 1,
            _ => return None,
        };
        bits = (bits << 1) | bit;
    }
    Some(bits)
}

fn rail_index(bits: usize, photons: usize) -> usize {
    (0..photons).fold(0, |acc, q| (acc << 2) | if (bits >> (photons - 1 - q)) & 1 == 0 { 0b10 } else { 0b01 })
}

fn rail_layout(photons: usize) -> SubsystemLayout {
    let labels = (0..photons).flat_map(|i| [format!("ph{i}_emit"), format!("ph{i}_pass")]).collect();
    SubsystemLayout::new(vec![2; 2 * photons], labels).expect("qubit layout")
}

impl DualRailState {
    pub fn new(state: StateVector) -> Result<Self, PolarizationError> {
        let rails = state.layout().len();
        if state.layout().dims().iter().any(|&d| d != 2) {
            return Err(HilbertError::LayoutMismatch.into());
        }
        if rails % 2 == 1 {
            return Err(PolarizationError::OddRails(rails));
        }
        let photons = rails / 2;
        let outside: f64 = state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| rail_bits(*i, photons).is_none())
            .map(|(_, a)| a.norm_sqr())
            .sum();
        if outside > SUPPORT_TOL {
            return Err(PolarizationError::NotDualRail(outside));
        }
        Ok(Self { state })
    }

    /// Builds the rail state carrying `logical` amplitudes over `n` photons.
    pub fn from_logical(logical: &StateVector) -> Result<Self, PolarizationError> {
        let n = logical.layout().len();
        let mut a = vec![C64::new(0.0, 0.0); 1 << (2 * n)];
        for (bits, x) in logical.amplitudes().iter().enumerate() {
            a[rail_index(bits, n)] = *x;
        }
        Self::new(StateVector::new(a, rail_layout(n))?)
    }

    pub fn photons(&self) -> usize {
        self.state.layout().len() / 2
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    /// Amplitudes on the `2^n` logical branches.
    pub fn logical_amplitudes(&self) -> Vec<C64> {
        let n = self.photons();
        (0..1usize << n).map(|bits| self.state.amplitudes()[rail_index(bits, n)]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarizationState {
    state: StateVector,
}

impl PolarizationState {
    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn into_state(self) -> StateVector {
        self.state
    }

    /// `(|H…H⟩ + |V…V⟩)/√2` over `n` photons.
    pub fn ghz(n: usize) -> Self {
        Self { state: StateVector::ghz(n).with_layout(polarization_layout(n)).expect("same dims") }
    }
}

fn polarization_layout(n: usize) -> SubsystemLayout {
    SubsystemLayout::new(vec![2; n], (0..n).map(|i| format!("pol{i}")).collect()).expect("qubit layout")
}

pub fn convert_register(state: &DualRailState, spec: &ConversionSpec) -> Result<(PolarizationState, f64), PolarizationError> {
    spec.validate()?;
    let n = state.photons();
    let out = StateVector::normalized(state.logical_amplitudes(), polarization_layout(n))?;
    Ok((PolarizationState { state: out }, spec.herald_per_photon().powi(n as i32)))
}

pub fn convert_one(state: &StateVector, spec: &ConversionSpec) -> Result<(PolarizationState, f64), PolarizationError> {
    if state.layout().len() != 2 {
        return Err(PolarizationError::BadPairing(state.layout().len()));
    }
    convert_register(&DualRailState::new(state.clone())?, spec)
}

/// Fuses adjacent photons `(2k, 2k+1)`: after frequency erasure photon `2k+1`
/// is measured in the `(|10⟩ ± |01⟩)/√2` basis and a `−` outcome is undone by
/// a phase flip on photon `2k`. For GHZ-class input either outcome leaves a
/// GHZ state on the surviving photons; the more likely outcome is taken. Each
/// measurement needs a detector click.
pub fn pair_photons(state: &DualRailState, spec: &ConversionSpec) -> Result<(DualRailState, f64), PolarizationError> {
    spec.validate()?;
    let n = state.photons();
    if n < 2 || n % 2 == 1 {
        return Err(PolarizationError::BadPairing(n));
    }
    let m = n / 2;
    let logical = state.logical_amplitudes();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut current = logical;
    let mut width = n;
    // measure from the last pair down so earlier bit positions stay fixed
    for k in (0..m).rev() {
        let measured = 2 * k + 1;
        let shift = width - 1 - measured;
        let low_mask = (1usize << shift) - 1;
        let project = |sign: f64| -> Vec<C64> {
            (0..1usize << (width - 1))
                .map(|r| {
                    let hi = (r >> shift) << (shift + 1);
                    let lo = r & low_mask;
                    let a0 = current[hi | lo];
                    let a1 = current[hi | (1 << shift) | lo];
                    (a0 + a1 * sign) * s
                })
                .collect()
        };
        let plus = project(1.0);
        let minus = project(-1.0);
        let weight = |v: &[C64]| v.iter().map(|x| x.norm_sqr()).sum::<f64>();
        current = if weight(&plus) >= weight(&minus) {
            plus
        } else {
            let partner_shift = width - 2 - 2 * k;
            minus.into_iter().enumerate().map(|(r, a)| if (r >> partner_shift) & 1 == 1 { -a } else { a }).collect()
        };
        width -= 1;
    }
    let out = StateVector::normalized(current, SubsystemLayout::qubits(m))?;
    Ok((DualRailState::from_logical(&out)?, spec.detector_efficiency.powi(m as i32)))
}
