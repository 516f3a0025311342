use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use super::{rz_matrix, SpinError};
use crate::hilbert::{apply_local, bipartitions, pauli, schmidt_spectrum, StateVector};
use crate::C64;

/// Largest deviation of any bipartition's Schmidt spectrum from
/// `(1/√2, 1/√2, 0, …)`.
pub fn max_schmidt_deviation(state: &StateVector) -> Result<f64, SpinError> {
    let n = state.layout().len();
    if n < 2 {
        return Err(SpinError::TooFewDots(n));
    }
    let mut worst: f64 = 0.0;
    for part in bipartitions(n) {
        let s = schmidt_spectrum(state, &part)?;
        for (i, v) in s.iter().enumerate() {
            let want = if i < 2 { FRAC_1_SQRT_2 } else { 0.0 };
            worst = worst.max((v - want).abs());
        }
    }
    Ok(worst)
}

/// Equal to a canonical GHZ state up to single-dot unitaries, judged by the
/// Schmidt spectrum across every bipartition.
pub fn is_ghz_class(state: &StateVector, tol: f64) -> bool {
    max_schmidt_deviation(state).map(|d| d <= tol).unwrap_or(false)
}

/// Bit flips followed by `Rz(z_angle)` on dot 0 that bring a two-branch
/// state `a|x⟩ + b|x̄⟩` to `(|0…0⟩ + |1…1⟩)/√2` up to global phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalCorrection {
    pub x_flips: Vec<usize>,
    pub z_angle: f64,
}

pub fn ghz_correction(state: &StateVector) -> Result<LocalCorrection, SpinError> {
    let layout = state.layout();
    let n = layout.len();
    if layout.dims().iter().any(|&d| d != 2) {
        return Err(SpinError::InvalidSchedule("correction needs a qubit register".into()));
    }
    let amps = state.amplitudes();
    let mask = (1usize << n) - 1;
    let top = n - 1;
    // the branch with dot 0 in |0⟩
    let (k, _) = amps
        .iter()
        .enumerate()
        .filter(|(i, _)| i >> top & 1 == 0)
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .expect("nonempty");
    let (a, b) = (amps[k], amps[k ^ mask]);
    let dev = (a.norm_sqr() - 0.5).abs().max((b.norm_sqr() - 0.5).abs());
    if dev > 1e-6 {
        return Err(SpinError::NotGhzClass(dev));
    }
    let x_flips = (0..n).filter(|&d| k >> (top - d) & 1 == 1).collect();
    Ok(LocalCorrection { x_flips, z_angle: -(b / a).arg() })
}

/// Applies `corr` and fixes the global phase so `⟨0…0|ψ⟩` is real positive.
pub fn apply_correction(state: &StateVector, corr: &LocalCorrection) -> Result<StateVector, SpinError> {
    let layout = state.layout().clone();
    let mut amps = state.amplitudes().to_vec();
    let x = pauli::x();
    for &d in &corr.x_flips {
        apply_local(&mut amps, &layout, &x, &[d])?;
    }
    apply_local(&mut amps, &layout, &rz_matrix(corr.z_angle), &[0])?;
    let p = amps[0];
    if p.norm() > 0.0 {
        let f = C64::from_polar(1.0, -p.arg());
        amps.iter_mut().for_each(|v| *v *= f);
    }
    Ok(StateVector::normalized(amps, layout)?)
}
