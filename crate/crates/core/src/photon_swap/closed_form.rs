use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GaussianMode, SpectralGrid, SwapError, ThreeLevelDot};
use crate::C64;

const MIN_NODES: usize = 4001;
const MAX_NODES: usize = 1 << 20;

/// The printed double-time-integral expressions, evaluated as written.
///
/// `None` marks a value that overflowed `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub t: f64,
    /// `g2` on the grid's detunings of the emission rail.
    pub g2: Option<Vec<C64>>,
    pub p_closed: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonParams {
    pub dot: ThreeLevelDot,
    pub mode: GaussianMode,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: ComparisonParams,
    pub p_ode: f64,
    pub p_closed: Option<f64>,
    pub abs_diff: Option<f64>,
}

impl ComparisonReport {
    pub fn new(dot: &ThreeLevelDot, mode: &GaussianMode, closed: &ClosedForm, p_ode: f64) -> Self {
        let abs_diff = closed.p_closed.map(|p| (p - p_ode).abs()).filter(|d| d.is_finite());
        Self { params: ComparisonParams { dot: *dot, mode: *mode, t: closed.t }, p_ode, p_closed: closed.p_closed, abs_diff }
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Cumulative trapezoid of samples spaced `h` apart.
fn cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// `P(t) = ∫₀ᵗ dt′ Γ1Γ2 d/√(2π) |∫₀^{t′} dt″ e^{−d²t″²/4 + (Γ1+Γ2)t″/2}|²` and
/// `g2(k) = −√(Γ1Γ2 d)/(2π)^{3/4} e^{−itδ′} ∫₀ᵗ dt′ ∫₀^{t′} dt″ e^{−d²t″²/4 + (Γ1+Γ2)t″/2}`.
pub fn eq16_closed_form(dot: &ThreeLevelDot, mode: &GaussianMode, grid: &SpectralGrid, t: f64) -> Result<ClosedForm, SwapError> {
    dot.validate()?;
    mode.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SwapError::StepSize(format!("t = {t} must be finite and >= 0")));
    }
    let deltas: Vec<f64> = grid.points().iter().map(|k| dot.w1 - k).collect();
    if t == 0.0 {
        return Ok(ClosedForm { t, g2: Some(vec![C64::new(0.0, 0.0); grid.n_k]), p_closed: Some(0.0) });
    }
    let gc = dot.gamma_total();
    let scale = mode.d.max(gc);
    let nodes = ((t * scale * 200.0).ceil() as usize + 1).clamp(MIN_NODES, MAX_NODES);
    let h = t / (nodes - 1) as f64;
    let integrand: Vec<f64> = (0..nodes)
        .map(|i| {
            let s = h * i as f64;
            (-mode.d * mode.d * s * s / 4.0 + gc * s / 2.0).exp()
        })
        .collect();
    let inner = cumulative(&integrand, h);
    let prefactor = dot.gamma1 * dot.gamma2 * mode.d / (2.0 * PI).sqrt();
    let squared: Vec<f64> = inner.iter().map(|x| x * x).collect();
    let p = cumulative(&squared, h).last().copied().map(|x| prefactor * x).and_then(finite);
    let p = if prefactor == 0.0 { Some(0.0) } else { p };
    let double = cumulative(&inner, h).last().copied().and_then(finite);
    let amp = -(dot.gamma1 * dot.gamma2 * mode.d).sqrt() / (2.0 * PI).powf(0.75);
    let g2 = double.map(|x| deltas.iter().map(|dl| C64::from_polar(amp * x, -t * dl)).collect::<Vec<_>>());
    let g2 = g2.filter(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    Ok(ClosedForm { t, g2, p_closed: p })
}
