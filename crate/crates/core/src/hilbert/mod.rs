//! Finite-dimensional Hilbert-space engine.
//!
//! States and maps are immutable values over a [`SubsystemLayout`]. Basis
//! ordering is big-endian: for layout `[d0, d1, …]` the flat index of digits
//! `(x0, x1, …)` is `((x0·d1 + x1)·d2 + …)`. Global phases are never removed
//! automatically; compare states with [`fidelity`] or
//! [`StateVector::phase_invariant_distance`].

mod evolve;
mod layout;
mod map;
mod state;

use nalgebra::DMatrix;
use thiserror::Error;

pub use evolve::{evolve, evolve_with, unitary, ExpMethod, DENSE_EIG_MAX_DIM};
pub use layout::SubsystemLayout;
pub use map::{apply_local, kron, LinearMap, Repr};
pub use state::StateVector;

use crate::C64;

/// Tolerance on `‖ψ‖ − 1` for anything called normalized.
pub const NORM_TOL: f64 = 1e-9;
/// Tolerance on `max|M − M†|` for the Hermitian flag.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `max|P² − P|` for projectors.
pub const IDEMPOTENT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("layouts differ")]
    LayoutMismatch,
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("operator is not hermitian (max |M - M†| = {0:e})")]
    NotHermitian(f64),
    #[error("evolution time must be finite and >= 0, got {0}")]
    NegativeTime(f64),
    #[error("state norm {0} is not 1")]
    NotNormalized(f64),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("projector is not idempotent (max |P² - P| = {0:e})")]
    NotIdempotent(f64),
    #[error("requested measurement branch has zero probability")]
    ZeroProbability,
    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),
}

/// Kronecker product of states, leftmost slowest-varying.
pub fn tensor_states(states: &[&StateVector]) -> Result<StateVector, HilbertError> {
    let (first, rest) = states.split_first().ok_or(HilbertError::DimensionMismatch { expected: 1, found: 0 })?;
    let mut amps = first.amplitudes().to_vec();
    let mut layout = first.layout().clone();
    for s in rest {
        amps = amps
            .iter()
            .flat_map(|a| s.amplitudes().iter().map(move |b| a * b))
            .collect();
        layout = layout.concat(s.layout());
    }
    StateVector::normalized(amps, layout)
}

/// Kronecker product of maps on concatenated layouts.
pub fn tensor_maps(maps: &[&LinearMap]) -> Result<LinearMap, HilbertError> {
    let (first, rest) = maps.split_first().ok_or(HilbertError::DimensionMismatch { expected: 1, found: 0 })?;
    let all_diag = maps.iter().all(|m| matches!(m.repr(), Repr::Diagonal(_)));
    let mut layout = first.layout().clone();
    if all_diag {
        let mut diag = match first.repr() {
            Repr::Diagonal(d) => d.clone(),
            _ => unreachable!(),
        };
        for m in rest {
            let Repr::Diagonal(d) = m.repr() else { unreachable!() };
            diag = diag.iter().flat_map(|a| d.iter().map(move |b| a * b)).collect();
            layout = layout.concat(m.layout());
        }
        return LinearMap::diagonal(diag, layout);
    }
    let mut mat = first.to_dense();
    for m in rest {
        mat = mat.kronecker(&m.to_dense());
        layout = layout.concat(m.layout());
    }
    LinearMap::dense(mat, layout)
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, HilbertError> {
    Ok(a.inner(b)?.norm_sqr().min(1.0))
}

/// Schmidt coefficients (descending) across `part | complement`.
pub fn schmidt_spectrum(state: &StateVector, part: &[usize]) -> Result<Vec<f64>, HilbertError> {
    let n = state.layout().len();
    if part.is_empty() || part.len() >= n {
        return Err(HilbertError::InvalidBipartition(format!("{part:?} is not a proper nonempty subset of {n} subsystems")));
    }
    map::check_disjoint(part)?;
    if let Some(&bad) = part.iter().find(|&&p| p >= n) {
        return Err(HilbertError::IndexOutOfRange { index: bad, len: n });
    }
    let mut a: Vec<usize> = part.to_vec();
    a.sort_unstable();
    let b: Vec<usize> = (0..n).filter(|i| !a.contains(i)).collect();
    let order: Vec<usize> = a.iter().chain(&b).copied().collect();
    let permuted = state.permuted(&order)?;
    let da: usize = a.iter().map(|&i| state.layout().dims()[i]).product();
    let db = state.dim() / da;
    // row-major (da × db) reshape of the permuted amplitudes
    let m = DMatrix::from_row_slice(da, db, permuted.amplitudes());
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(sv)
}

/// Every proper bipartition of `n` subsystems, listed once (the side that
/// excludes the last subsystem).
pub fn bipartitions(n: usize) -> Vec<Vec<usize>> {
    if n < 2 {
        return Vec::new();
    }
    (1u64..(1u64 << (n - 1)))
        .map(|mask| (0..n - 1).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

/// Projects `subsystem` with `projector` and renormalizes.
///
/// Returns the collapsed state and the outcome probability.
pub fn partial_project(
    state: &StateVector,
    subsystem: usize,
    projector: &LinearMap,
) -> Result<(StateVector, f64), HilbertError> {
    let layout = state.layout();
    if subsystem >= layout.len() {
        return Err(HilbertError::IndexOutOfRange { index: subsystem, len: layout.len() });
    }
    let d = layout.dims()[subsystem];
    if projector.dim() != d {
        return Err(HilbertError::DimensionMismatch { expected: d, found: projector.dim() });
    }
    let p = projector.to_dense();
    let defect = (&p * &p - &p).iter().map(|x| x.norm()).fold(0.0, f64::max);
    if defect > IDEMPOTENT_TOL {
        return Err(HilbertError::NotIdempotent(defect));
    }
    let mut amps = state.amplitudes().to_vec();
    apply_local(&mut amps, layout, &p, &[subsystem])?;
    let prob: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if prob <= 1e-20 {
        return Err(HilbertError::ZeroProbability);
    }
    let collapsed = StateVector::normalized(amps, layout.clone())?;
    Ok((collapsed, prob.min(1.0)))
}

/// Rank-one projector `|k⟩⟨k|` on a `dim`-level subsystem.
pub fn basis_projector(dim: usize, k: usize) -> Result<LinearMap, HilbertError> {
    let mut d = vec![C64::new(0.0, 0.0); dim];
    *d.get_mut(k).ok_or(HilbertError::IndexOutOfRange { index: k, len: dim })? = C64::new(1.0, 0.0);
    LinearMap::diagonal(d, SubsystemLayout::single(dim, "p")?)
}

/// Pauli matrices and friends as dense 2×2 blocks.
pub mod pauli {
    use nalgebra::DMatrix;

    use crate::C64;

    fn m(a: [[C64; 2]; 2]) -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
    }

    const O: C64 = C64::new(0.0, 0.0);
    const I1: C64 = C64::new(1.0, 0.0);
    const IM: C64 = C64::new(0.0, 1.0);

    pub fn id() -> DMatrix<C64> {
        m([[I1, O], [O, I1]])
    }
    pub fn x() -> DMatrix<C64> {
        m([[O, I1], [I1, O]])
    }
    pub fn y() -> DMatrix<C64> {
        m([[O, -IM], [IM, O]])
    }
    pub fn z() -> DMatrix<C64> {
        m([[I1, O], [O, -I1]])
    }
}
