use nalgebra::{DMatrix, DVector};

use super::{codeword, CatError, CavitySpec};
use crate::hilbert::{HilbertError, StateVector, SubsystemLayout};
use crate::C64;

/// Unitary on dot ⊗ dot ⊗ cavity sending
/// `|00⟩|vac⟩ → |0⟩|0⟩|C_α^+⟩` and `|11⟩|vac⟩ → |0⟩|1⟩|C_{iα}^+⟩`,
/// completed to the full space by Gram–Schmidt over the basis vectors.
#[derive(Clone, Debug)]
pub struct Encoder {
    spec: CavitySpec,
    u: DMatrix<C64>,
}

impl Encoder {
    pub fn new(spec: &CavitySpec) -> Result<Self, CatError> {
        spec.validate()?;
        let d = spec.dim();
        let dim = 4 * d;
        let mut out0 = DVector::zeros(dim);
        let mut out1 = DVector::zeros(dim);
        for (n, (a, b)) in codeword(spec.alpha, 0, spec.n_max)?.iter().zip(codeword(spec.alpha, 1, spec.n_max)?).enumerate() {
            out0[n] = *a;
            out1[d + n] = b;
        }
        let mut cols: Vec<DVector<C64>> = vec![out0, out1];
        for k in 0..dim {
            if cols.len() == dim {
                break;
            }
            let mut v = DVector::zeros(dim);
            v[k] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for c in &cols {
                    let p = c.dotc(&v);
                    v -= c * p;
                }
            }
            let n = v.norm();
            if n > 1e-6 {
                cols.push(v / C64::new(n, 0.0));
            }
        }
        let mut u = DMatrix::zeros(dim, dim);
        let (i0, i1) = (0, 3 * d);
        u.set_column(i0, &cols[0]);
        u.set_column(i1, &cols[1]);
        let mut rest = cols.into_iter().skip(2);
        for j in (0..dim).filter(|&j| j != i0 && j != i1) {
            u.set_column(j, &rest.next().expect("complete basis"));
        }
        Ok(Self { spec: *spec, u })
    }

    pub fn layout(&self) -> SubsystemLayout {
        SubsystemLayout::new(vec![2, 2, self.spec.dim()], vec!["dot_a".into(), "dot_b".into(), "cavity".into()]).unwrap()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.u
    }

    fn check(&self, state: &StateVector) -> Result<(), CatError> {
        if state.layout().dims() != self.layout().dims() {
            return Err(HilbertError::LayoutMismatch.into());
        }
        Ok(())
    }

    pub fn encode(&self, state: &StateVector) -> Result<StateVector, CatError> {
        self.check(state)?;
        let a = state.amplitudes();
        let w = a[0].norm_sqr() + a[3 * self.spec.dim()].norm_sqr();
        if w < 1.0 - 1e-6 {
            return Err(CatError::NotInCodeSpace(w));
        }
        let out = &self.u * DVector::from_column_slice(a);
        Ok(StateVector::normalized(out.iter().copied().collect(), self.layout())?)
    }

    /// Exact inverse of [`Encoder::encode`].
    pub fn decode(&self, state: &StateVector) -> Result<StateVector, CatError> {
        self.check(state)?;
        let out = self.u.adjoint() * DVector::from_column_slice(state.amplitudes());
        Ok(StateVector::normalized(out.iter().copied().collect(), self.layout())?)
    }
}

pub fn encode(state: &StateVector, cavity: &CavitySpec) -> Result<StateVector, CatError> {
    Encoder::new(cavity)?.encode(state)
}

pub fn decode(state: &StateVector, cavity: &CavitySpec) -> Result<StateVector, CatError> {
    Encoder::new(cavity)?.decode(state)
}
