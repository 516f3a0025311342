//! Single-photon scattering on a three-level dot (`|0⟩, |1⟩, |e⟩`).
//!
//! An input photon near `w1` drives `|0⟩ → |e⟩`; decay `|e⟩ → |1⟩` emits a
//! photon near `w1 − w2`. The single-excitation amplitudes `g1(k)` (photon,
//! dot `|0⟩`), `g2(k)` (photon, dot `|1⟩`) and `g3` (dot `|e⟩`) are evolved
//! on a discretized continuum, and `P(t) = ∫dk |g2(k)|²` is the probability
//! that the swap has happened.
//!
//! Both frequency rails share one uniform grid of detunings `δ ∈ [−W, W]`:
//! `g1` lives at `k = w1 − δ` and `g2` at `k = w1 − w2 − δ`. The rails must
//! not overlap (`w2 ≥ 2W`); cross-rail couplings are detuned by `w2` and are
//! dropped.

mod closed_form;
mod dynamics;
mod swap;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hilbert::HilbertError;
use crate::spin_register::SpinError;
use crate::C64;

pub use closed_form::{eq16_closed_form, ClosedForm, ComparisonReport};
pub use dynamics::{
    integrate_dynamics, integrate_with, swap_probability, AmplitudeState, DynamicsOptions, Frame, Trajectory,
    DEFAULT_TOL,
};
pub use swap::{dual_rail_index, register_swap};
pub use sweep::{linspace, sweep_fig4, sweep_point, SweepOptions, SweepRow, SweepTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwapError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("invalid dot parameters: {0}")]
    InvalidDot(String),
    #[error("invalid mode: {0}")]
    InvalidMode(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),
    #[error("step size violation: {0}")]
    StepSize(String),
    #[error("grid aliasing: {0}")]
    Aliasing(String),
    #[error("integrator failed: {0}")]
    Integrator(String),
    #[error("success probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("register is not GHZ-class (max Schmidt deviation {0:e})")]
    NotGhzClass(f64),
}

/// Three-level dot with transition `|0⟩ ↔ |e⟩` at `w1` and `|1⟩` at `w2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelDot {
    /// rad/s
    pub w1: f64,
    /// rad/s
    pub w2: f64,
    /// Decay `|e⟩ → |0⟩`, 1/s.
    pub gamma1: f64,
    /// Decay `|e⟩ → |1⟩`, 1/s.
    pub gamma2: f64,
}

impl ThreeLevelDot {
    pub fn validate(&self) -> Result<(), SwapError> {
        let finite = [self.w1, self.w2, self.gamma1, self.gamma2].iter().all(|x| x.is_finite());
        if !finite || self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(SwapError::InvalidDot("decay rates must be finite and >= 0".into()));
        }
        if !(self.w1 > self.w2) || self.w2 < 0.0 {
            return Err(SwapError::InvalidDot(format!("need w1 > w2 >= 0, got w1={} w2={}", self.w1, self.w2)));
        }
        Ok(())
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma1 + self.gamma2
    }
}

/// Gaussian input mode `f(k) = (2/πd²)^{1/4} exp(−(k − center)²/d²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    /// rad/s
    pub d: f64,
    /// rad/s
    pub center: f64,
}

impl GaussianMode {
    pub fn validate(&self) -> Result<(), SwapError> {
        if !(self.d > 0.0) || !self.d.is_finite() || !self.center.is_finite() {
            return Err(SwapError::InvalidMode(format!("bandwidth {} must be finite and > 0", self.d)));
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        (2.0 / (std::f64::consts::PI * self.d * self.d)).powf(0.25)
    }

    pub fn value(&self, k: f64) -> f64 {
        let x = (k - self.center) / self.d;
        self.peak() * (-x * x).exp()
    }
}

/// Uniform grid on `[k_min, k_max]` with trapezoid weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

/// Smallest grid accepted.
pub const MIN_POINTS: usize = 64;
/// Point count used when the revival bound does not ask for more.
pub const DEFAULT_POINTS: usize = 1024;

impl SpectralGrid {
    pub fn new(k_min: f64, k_max: f64, n_k: usize) -> Result<Self, SwapError> {
        if !(k_min < k_max) || !k_min.is_finite() || !k_max.is_finite() {
            return Err(SwapError::InvalidGrid(format!("need k_min < k_max, got [{k_min}, {k_max}]")));
        }
        if n_k < MIN_POINTS {
            return Err(SwapError::InvalidGrid(format!("n_k = {n_k} < {MIN_POINTS}")));
        }
        Ok(Self { k_min, k_max, n_k })
    }

    /// `[center − half_width, center + half_width]`.
    pub fn centered(center: f64, half_width: f64, n_k: usize) -> Result<Self, SwapError> {
        Self::new(center - half_width, center + half_width, n_k)
    }

    /// Default half-width `max(6d, 20(Γ1 + Γ2))`.
    pub fn default_half_width(dot: &ThreeLevelDot, mode: &GaussianMode) -> f64 {
        (6.0 * mode.d).max(20.0 * dot.gamma_total())
    }

    /// Points needed so the grid's revival time `2π/Δk` exceeds `1.25 t_end`.
    pub fn points_for(half_width: f64, t_end: f64) -> usize {
        let need = (1.25 * 2.0 * half_width * t_end / (2.0 * std::f64::consts::PI)).ceil() as usize + 1;
        need.max(DEFAULT_POINTS)
    }

    /// Default grid around the mode center for a run up to `t_end`, with
    /// spacing at most `d/2`.
    pub fn for_run(dot: &ThreeLevelDot, mode: &GaussianMode, t_end: f64) -> Result<Self, SwapError> {
        let w = Self::default_half_width(dot, mode);
        let resolve = (4.0 * w / mode.d).ceil() as usize + 1;
        Self::centered(mode.center, w, Self::points_for(w, t_end).max(resolve))
    }

    pub fn spacing(&self) -> f64 {
        (self.k_max - self.k_min) / (self.n_k - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_k).map(|i| self.k_min + h * i as f64).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_k];
        w[0] = h / 2.0;
        w[self.n_k - 1] = h / 2.0;
        w
    }

    /// Time after which a discrete grid spuriously refocuses emitted light.
    pub fn revival_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing()
    }
}

/// Samples the mode on the grid; the grid must cover `center ± 6d`.
pub fn gaussian_mode(mode: &GaussianMode, grid: &SpectralGrid) -> Result<Vec<C64>, SwapError> {
    mode.validate()?;
    if grid.k_min > mode.center - 6.0 * mode.d || grid.k_max < mode.center + 6.0 * mode.d {
        return Err(SwapError::GridTooNarrow(format!(
            "[{}, {}] does not cover {} ± 6·{}",
            grid.k_min, grid.k_max, mode.center, mode.d
        )));
    }
    let f: Vec<C64> = grid.points().iter().map(|&k| C64::new(mode.value(k), 0.0)).collect();
    let norm: f64 = f.iter().zip(grid.weights()).map(|(x, w)| w * x.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(SwapError::GridTooNarrow(format!("discrete mode norm {norm} (grid too coarse)")));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_peak_and_norm() {
        let m = GaussianMode { d: 1.0, center: 5.0 };
        let g = SpectralGrid::centered(5.0, 8.0, 1025).unwrap();
        let f = gaussian_mode(&m, &g).unwrap();
        assert!((f[512].re - m.peak()).abs() < 1e-15);
        assert!((m.peak() - (2.0 / std::f64::consts::PI).powf(0.25)).abs() < 1e-15);
        let half = GaussianMode { d: 0.5, ..m };
        assert!((half.peak() / m.peak() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn grid_checks() {
        assert!(SpectralGrid::new(1.0, 0.0, 100).is_err());
        assert!(SpectralGrid::new(0.0, 1.0, 10).is_err());
        let g = SpectralGrid::new(-1.0, 3.0, 101).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 4.0).abs() < 1e-12);
        let m = GaussianMode { d: 1.0, center: 0.0 };
        assert!(matches!(gaussian_mode(&m, &g), Err(SwapError::GridTooNarrow(_))));
        assert!(m.validate().is_ok());
        assert!(GaussianMode { d: 0.0, center: 0.0 }.validate().is_err());
    }

    #[test]
    fn dot_validation() {
        let ok = ThreeLevelDot { w1: 10.0, w2: 5.0, gamma1: 1.0, gamma2: 1.0 };
        assert!(ok.validate().is_ok());
        assert!(ThreeLevelDot { gamma1: -1.0, ..ok }.validate().is_err());
        assert!(ThreeLevelDot { w2: 11.0, ..ok }.validate().is_err());
    }
}
