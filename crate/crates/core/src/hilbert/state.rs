use serde::{Deserialize, Serialize};

use super::{HilbertError, SubsystemLayout, NORM_TOL};
use crate::C64;

/// Normalized pure state over a composite basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    layout: SubsystemLayout,
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

impl StateVector {
    /// Wraps amplitudes that are already normalized to within `1e-9`.
    pub fn new(amplitudes: Vec<C64>, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        check_len(&amplitudes, &layout)?;
        let n = norm_sqr(&amplitudes).sqrt();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(HilbertError::NotNormalized(n));
        }
        Ok(Self { amplitudes, layout })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        check_len(&amplitudes, &layout)?;
        let n = norm_sqr(&amplitudes).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(HilbertError::ZeroNorm);
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(Self { amplitudes, layout })
    }

    pub fn basis(layout: SubsystemLayout, index: usize) -> Result<Self, HilbertError> {
        let dim = layout.total_dim();
        if index >= dim {
            return Err(HilbertError::IndexOutOfRange { index, len: dim });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, layout })
    }

    /// Basis state from per-subsystem digits.
    pub fn basis_digits(layout: SubsystemLayout, digits: &[usize]) -> Result<Self, HilbertError> {
        if digits.len() != layout.len() || digits.iter().zip(layout.dims()).any(|(&x, &d)| x >= d) {
            return Err(HilbertError::DimensionMismatch {
                expected: layout.len(),
                found: digits.len(),
            });
        }
        let idx = layout.index_of(digits);
        Self::basis(layout, idx)
    }

    /// Single-qubit state `(|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amplitudes: vec![C64::new(s, 0.0), C64::new(s, 0.0)],
            layout: SubsystemLayout::qubits(1),
        }
    }

    /// `(|0…0⟩ + |1…1⟩)/√2` on `n ≥ 1` qubits.
    pub fn ghz(n: usize) -> Self {
        Self::ghz_with(n, C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
    }

    /// `a|0…0⟩ + b|1…1⟩` (renormalized).
    pub fn ghz_with(n: usize, a: C64, b: C64) -> Self {
        let layout = SubsystemLayout::qubits(n);
        let mut amps = vec![C64::new(0.0, 0.0); layout.total_dim()];
        amps[0] = a;
        *amps.last_mut().unwrap() = b;
        Self::normalized(amps, layout).expect("nonzero ghz amplitudes")
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<C64, HilbertError> {
        if !self.layout.compatible(&other.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Same state, relabeled subsystems.
    pub fn with_layout(self, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        check_len(&self.amplitudes, &layout)?;
        Ok(Self { amplitudes: self.amplitudes, layout })
    }

    /// Multiply by a global phase `e^{iφ}`.
    pub fn phased(mut self, phi: f64) -> Self {
        let p = C64::from_polar(1.0, phi);
        self.amplitudes.iter_mut().for_each(|a| *a *= p);
        self
    }

    /// Smallest Euclidean distance between `self` and `e^{iφ}·other` over φ.
    pub fn phase_invariant_distance(&self, other: &Self) -> Result<f64, HilbertError> {
        let ov = self.inner(other)?;
        let d2 = norm_sqr(&self.amplitudes) + norm_sqr(&other.amplitudes) - 2.0 * ov.norm();
        Ok(d2.max(0.0).sqrt())
    }

    /// Plain Euclidean distance (global phase counts).
    pub fn distance(&self, other: &Self) -> Result<f64, HilbertError> {
        if !self.layout.compatible(&other.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Reorders subsystems: output subsystem `i` is input subsystem `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self, HilbertError> {
        let n = self.layout.len();
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(HilbertError::InvalidBipartition(format!("permutation of length {} for {n} subsystems", order.len())));
        }
        for &o in order {
            if o >= n || seen[o] {
                return Err(HilbertError::InvalidBipartition(format!("{order:?} is not a permutation")));
            }
            seen[o] = true;
        }
        let new_layout = self.layout.select(order)?;
        let old_strides = self.layout.strides();
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (new_idx, slot) in out.iter_mut().enumerate() {
            let digits = new_layout.digits(new_idx);
            let old_idx: usize = digits.iter().zip(order).map(|(&x, &o)| x * old_strides[o]).sum();
            *slot = self.amplitudes[old_idx];
        }
        Ok(Self { amplitudes: out, layout: new_layout })
    }
}

fn check_len(amplitudes: &[C64], layout: &SubsystemLayout) -> Result<(), HilbertError> {
    if amplitudes.len() != layout.total_dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: layout.total_dim(),
            found: amplitudes.len(),
        });
    }
    Ok(())
}
