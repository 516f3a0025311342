use nalgebra::DMatrix;

use super::{HilbertError, StateVector, SubsystemLayout, HERMITIAN_TOL};
use crate::C64;

/// Storage backing a [`LinearMap`].
#[derive(Clone, Debug, PartialEq)]
pub enum Repr {
    Dense(DMatrix<C64>),
    /// Row-wise `(column, value)` lists.
    Sparse(Vec<Vec<(usize, C64)>>),
    Diagonal(Vec<C64>),
}

/// Operator on the space of a [`SubsystemLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    repr: Repr,
    layout: SubsystemLayout,
    hermitian: bool,
}

impl LinearMap {
    pub fn dense(matrix: DMatrix<C64>, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        let dim = layout.total_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(HilbertError::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        Ok(Self::from_repr(Repr::Dense(matrix), layout))
    }

    pub fn diagonal(diag: Vec<C64>, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        if diag.len() != layout.total_dim() {
            return Err(HilbertError::DimensionMismatch { expected: layout.total_dim(), found: diag.len() });
        }
        Ok(Self::from_repr(Repr::Diagonal(diag), layout))
    }

    pub fn sparse(rows: Vec<Vec<(usize, C64)>>, layout: SubsystemLayout) -> Result<Self, HilbertError> {
        let dim = layout.total_dim();
        if rows.len() != dim || rows.iter().flatten().any(|&(c, _)| c >= dim) {
            return Err(HilbertError::DimensionMismatch { expected: dim, found: rows.len() });
        }
        Ok(Self::from_repr(Repr::Sparse(rows), layout))
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self::from_repr(Repr::Diagonal(vec![C64::new(1.0, 0.0); d]), layout)
    }

    fn from_repr(repr: Repr, layout: SubsystemLayout) -> Self {
        let mut m = Self { repr, layout, hermitian: false };
        m.hermitian = m.hermitian_defect() <= HERMITIAN_TOL;
        m
    }

    /// Embeds a local operator acting on `targets` (in that order) into `layout`.
    pub fn embed(local: &DMatrix<C64>, targets: &[usize], layout: &SubsystemLayout) -> Result<Self, HilbertError> {
        let sub = layout.select(targets)?;
        check_disjoint(targets)?;
        let d_loc = sub.total_dim();
        if local.nrows() != d_loc || local.ncols() != d_loc {
            return Err(HilbertError::DimensionMismatch { expected: d_loc, found: local.nrows() });
        }
        let strides = layout.strides();
        let offsets = local_offsets(&sub, targets, &strides);
        let dim = layout.total_dim();
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for base in base_indices(layout, targets) {
            for (r, &ro) in offsets.iter().enumerate() {
                let row = &mut rows[base + ro];
                for (c, &co) in offsets.iter().enumerate() {
                    let v = local[(r, c)];
                    if v != C64::new(0.0, 0.0) {
                        row.push((base + co, v));
                    }
                }
            }
        }
        Self::sparse(rows, layout.clone())
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Diagonal(v) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v)),
            Repr::Sparse(rows) => {
                let mut m = DMatrix::zeros(d, d);
                for (r, row) in rows.iter().enumerate() {
                    for &(c, v) in row {
                        m[(r, c)] += v;
                    }
                }
                m
            }
        }
    }

    /// Largest entry of `|M − M†|`.
    pub fn hermitian_defect(&self) -> f64 {
        match &self.repr {
            Repr::Diagonal(v) => v.iter().map(|x| x.im.abs() * 2.0).fold(0.0, f64::max),
            _ => {
                let m = self.to_dense();
                (&m - m.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max)
            }
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[C64], out: &mut [C64]) {
        match &self.repr {
            Repr::Diagonal(d) => out.iter_mut().zip(d.iter().zip(v)).for_each(|(o, (a, b))| *o = a * b),
            Repr::Sparse(rows) => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o = row.iter().map(|&(c, x)| x * v[c]).sum();
                }
            }
            Repr::Dense(m) => {
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..v.len()).map(|c| m[(r, c)] * v[c]).sum();
                }
            }
        }
    }

    /// `M·ψ` without renormalization.
    pub fn apply(&self, state: &StateVector) -> Result<Vec<C64>, HilbertError> {
        if !self.layout.compatible(state.layout()) {
            return Err(HilbertError::LayoutMismatch);
        }
        Ok(self.mul_vec(state.amplitudes()))
    }

    pub fn expectation(&self, state: &StateVector) -> Result<C64, HilbertError> {
        let mv = self.apply(state)?;
        Ok(state.amplitudes().iter().zip(&mv).map(|(a, b)| a.conj() * b).sum())
    }

    /// Induced 1-norm (max column sum).
    pub fn one_norm(&self) -> f64 {
        let d = self.dim();
        match &self.repr {
            Repr::Diagonal(v) => v.iter().map(|x| x.norm()).fold(0.0, f64::max),
            Repr::Dense(m) => (0..d).map(|c| m.column(c).iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max),
            Repr::Sparse(rows) => {
                let mut col = vec![0.0; d];
                for row in rows {
                    for &(c, v) in row {
                        col[c] += v.norm();
                    }
                }
                col.into_iter().fold(0.0, f64::max)
            }
        }
    }

    /// Largest entry of `|M†M − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.to_dense();
        let p = m.adjoint() * &m;
        let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
        (p - id).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Sum of two maps on the same layout.
    pub fn add(&self, other: &Self) -> Result<Self, HilbertError> {
        if !self.layout.compatible(&other.layout) {
            return Err(HilbertError::LayoutMismatch);
        }
        let repr = match (&self.repr, &other.repr) {
            (Repr::Diagonal(a), Repr::Diagonal(b)) => Repr::Diagonal(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            (Repr::Dense(_), _) | (_, Repr::Dense(_)) => Repr::Dense(self.to_dense() + other.to_dense()),
            _ => {
                let mut rows = self.sparse_rows();
                for (r, extra) in other.sparse_rows().into_iter().enumerate() {
                    for (c, v) in extra {
                        match rows[r].iter_mut().find(|(cc, _)| *cc == c) {
                            Some(e) => e.1 += v,
                            None => rows[r].push((c, v)),
                        }
                    }
                }
                Repr::Sparse(rows)
            }
        };
        Ok(Self::from_repr(repr, self.layout.clone()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m * C64::new(s, 0.0)),
            Repr::Diagonal(v) => Repr::Diagonal(v.iter().map(|x| x * s).collect()),
            Repr::Sparse(rows) => Repr::Sparse(rows.iter().map(|r| r.iter().map(|&(c, v)| (c, v * s)).collect()).collect()),
        };
        Self { repr, layout: self.layout.clone(), hermitian: self.hermitian }
    }

    fn sparse_rows(&self) -> Vec<Vec<(usize, C64)>> {
        match &self.repr {
            Repr::Sparse(rows) => rows.clone(),
            Repr::Diagonal(v) => v.iter().enumerate().map(|(i, &x)| vec![(i, x)]).collect(),
            Repr::Dense(m) => (0..m.nrows())
                .map(|r| (0..m.ncols()).filter(|&c| m[(r, c)] != C64::new(0.0, 0.0)).map(|c| (c, m[(r, c)])).collect())
                .collect(),
        }
    }
}

pub(crate) fn check_disjoint(targets: &[usize]) -> Result<(), HilbertError> {
    for (i, a) in targets.iter().enumerate() {
        if targets[i + 1..].contains(a) {
            return Err(HilbertError::InvalidBipartition(format!("repeated subsystem {a}")));
        }
    }
    Ok(())
}

/// Flat offsets of every local basis state of `targets`.
fn local_offsets(sub: &SubsystemLayout, targets: &[usize], strides: &[usize]) -> Vec<usize> {
    (0..sub.total_dim())
        .map(|i| sub.digits(i).iter().zip(targets).map(|(&x, &t)| x * strides[t]).sum())
        .collect()
}

/// Flat indices whose digits on `targets` are all zero.
fn base_indices(layout: &SubsystemLayout, targets: &[usize]) -> Vec<usize> {
    let dims = layout.dims();
    let strides = layout.strides();
    (0..layout.total_dim())
        .filter(|&i| targets.iter().all(|&t| (i / strides[t]) % dims[t] == 0))
        .collect()
}

/// Applies a dense local operator on `targets` to a flat amplitude vector in place.
pub fn apply_local(
    amplitudes: &mut [C64],
    layout: &SubsystemLayout,
    local: &DMatrix<C64>,
    targets: &[usize],
) -> Result<(), HilbertError> {
    if amplitudes.len() != layout.total_dim() {
        return Err(HilbertError::DimensionMismatch { expected: layout.total_dim(), found: amplitudes.len() });
    }
    check_disjoint(targets)?;
    let sub = layout.select(targets)?;
    let d_loc = sub.total_dim();
    if local.nrows() != d_loc || local.ncols() != d_loc {
        return Err(HilbertError::DimensionMismatch { expected: d_loc, found: local.nrows() });
    }
    let strides = layout.strides();
    let offsets = local_offsets(&sub, targets, &strides);
    let mut buf = vec![C64::new(0.0, 0.0); d_loc];
    for base in base_indices(layout, targets) {
        for (slot, &o) in buf.iter_mut().zip(&offsets) {
            *slot = amplitudes[base + o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            amplitudes[base + o] = (0..d_loc).map(|c| local[(r, c)] * buf[c]).sum();
        }
    }
    Ok(())
}

/// Kronecker product of dense matrices, leftmost slowest.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}
