//! Exact time evolution `ψ(t) = exp(−iHt)·ψ(0)` with ħ = 1.

use nalgebra::DMatrix;

use super::{HilbertError, LinearMap, Repr, StateVector, HERMITIAN_TOL};
use crate::C64;

/// Largest dimension handled by dense eigendecomposition.
pub const DENSE_EIG_MAX_DIM: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpMethod {
    /// Pick by representation and dimension.
    Auto,
    Diagonal,
    Eigen,
    /// Scaled Taylor series of the action `exp(−iHt)·v`.
    Taylor,
}

pub fn evolve(state: &StateVector, h: &LinearMap, t: f64) -> Result<StateVector, HilbertError> {
    evolve_with(state, h, t, ExpMethod::Auto)
}

pub fn evolve_with(state: &StateVector, h: &LinearMap, t: f64, method: ExpMethod) -> Result<StateVector, HilbertError> {
    if !h.layout().compatible(state.layout()) {
        return Err(HilbertError::LayoutMismatch);
    }
    if !h.is_hermitian() {
        return Err(HilbertError::NotHermitian(h.hermitian_defect()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(HilbertError::NegativeTime(t));
    }
    let method = match (method, h.repr()) {
        (ExpMethod::Auto, Repr::Diagonal(_)) => ExpMethod::Diagonal,
        (ExpMethod::Auto, _) if h.dim() <= DENSE_EIG_MAX_DIM => ExpMethod::Eigen,
        (ExpMethod::Auto, _) => ExpMethod::Taylor,
        (m, _) => m,
    };
    let out = match method {
        ExpMethod::Diagonal => match h.repr() {
            Repr::Diagonal(d) => state
                .amplitudes()
                .iter()
                .zip(d)
                .map(|(a, e)| a * C64::from_polar(1.0, -e.re * t))
                .collect(),
            _ => return Err(HilbertError::InvalidLayout("diagonal fast path requires a diagonal map".into())),
        },
        ExpMethod::Eigen => {
            let u = unitary(h, t)?;
            let v = nalgebra::DVector::from_column_slice(state.amplitudes());
            (u * v).iter().copied().collect()
        }
        ExpMethod::Taylor => taylor_action(h, t, state.amplitudes()),
        ExpMethod::Auto => unreachable!(),
    };
    StateVector::normalized(out, state.layout().clone())
}

/// Dense `exp(−iHt)` from the Hermitian eigendecomposition.
pub fn unitary(h: &LinearMap, t: f64) -> Result<DMatrix<C64>, HilbertError> {
    let m = h.to_dense();
    let defect = (&m - m.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
    if defect > HERMITIAN_TOL {
        return Err(HilbertError::NotHermitian(defect));
    }
    // symmetrize away the round-off before the eigensolver sees it
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let phases = eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&phases) * v.adjoint())
}

/// `exp(−iHt)·v` by splitting `t` so every substep has `‖H‖₁·dt ≤ 1/2`, then
/// summing the Taylor series until terms drop below round-off.
fn taylor_action(h: &LinearMap, t: f64, v: &[C64]) -> Vec<C64> {
    let norm = h.one_norm() * t;
    let steps = ((norm / 0.5).ceil() as usize).max(1);
    let dt = t / steps as f64;
    let mut cur = v.to_vec();
    let mut term = vec![C64::new(0.0, 0.0); v.len()];
    let mut next = vec![C64::new(0.0, 0.0); v.len()];
    let factor = C64::new(0.0, -dt);
    for _ in 0..steps {
        term.copy_from_slice(&cur);
        for k in 1..=60 {
            h.mul_vec_into(&term, &mut next);
            let scale = factor / k as f64;
            let mut tnorm = 0.0;
            for ((t_, n_), c) in term.iter_mut().zip(&next).zip(cur.iter_mut()) {
                *t_ = n_ * scale;
                *c += *t_;
                tnorm += t_.norm_sqr();
            }
            if tnorm.sqrt() < 1e-17 {
                break;
            }
        }
    }
    cur
}
