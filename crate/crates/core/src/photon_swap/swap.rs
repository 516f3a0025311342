use super::SwapError;
use crate::hilbert::{StateVector, SubsystemLayout};
use crate::spin_register::max_schmidt_deviation;
use crate::C64;

const GHZ_TOL: f64 = 1e-6;

/// Index of the `2n`-rail basis state for register bits `bits` (dot 0 most
/// significant). Bit 0 maps to `|10⟩` (emission rail `w1 − w2` first), bit 1
/// to `|01⟩`.
pub fn dual_rail_index(bits: usize, n: usize) -> usize {
    let mut out = 0;
    for dot in 0..n {
        let b = (bits >> (n - 1 - dot)) & 1;
        out = (out << 2) | if b == 0 { 0b10 } else { 0b01 };
    }
    out
}

fn photonic_layout(n: usize) -> SubsystemLayout {
    let labels = (0..n).flat_map(|i| [format!("ph{i}_emit"), format!("ph{i}_pass")]).collect();
    SubsystemLayout::new(vec![2; 2 * n], labels).expect("qubit layout")
}

/// Heralded swap of an `n`-dot register onto `n` dual-rail photons.
///
/// On success every dot ends in `|1⟩`, so the returned photonic state
/// carries the full register amplitudes. The herald probability is the
/// product of the per-dot success probabilities.
pub fn register_swap(register: &StateVector, p_success: &[f64]) -> Result<(StateVector, f64), SwapError> {
    let n = register.layout().len();
    if register.layout().dims().iter().any(|&d| d != 2) {
        return Err(SwapError::InvalidDot("register must consist of qubits".into()));
    }
    if p_success.len() != n {
        return Err(SwapError::InvalidDot(format!("{} success probabilities for {n} dots", p_success.len())));
    }
    if let Some(&p) = p_success.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(SwapError::BadProbability(p));
    }
    if n > 1 {
        let dev = max_schmidt_deviation(register)?;
        if dev > GHZ_TOL {
            return Err(SwapError::NotGhzClass(dev));
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); 1 << (2 * n)];
    for (bits, a) in register.amplitudes().iter().enumerate() {
        out[dual_rail_index(bits, n)] = *a;
    }
    let herald = p_success.iter().product();
    Ok((StateVector::new(out, photonic_layout(n))?, herald))
}
