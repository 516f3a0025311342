use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cat_amplitudes, dot, CatError, CavitySpec, Parity};
use crate::hilbert::{HilbertError, StateVector, SubsystemLayout};
use crate::spin_register::{execute, merge_steps, PulseSpec, Schedule, Step, MERGE_DELTA};
use crate::C64;

/// Largest dense dimension [`ChainState::to_state_vector`] will build.
pub const MAX_DENSE_DIM: usize = 1 << 22;

/// Code word for logical value `bit`: `|C_α^+⟩` or `|C_{iα}^+⟩`.
pub fn codeword(alpha: C64, bit: usize, n_max: usize) -> Result<Vec<C64>, CatError> {
    let a = if bit == 0 { alpha } else { alpha * C64::i() };
    cat_amplitudes(a, Parity::Even, n_max)
}

/// One term `weight · |register⟩ ⊗ modes[0] ⊗ modes[1] ⊗ …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Register basis index, leftmost qubit most significant.
    pub register: usize,
    pub weight: C64,
    /// Unnormalized Fock amplitudes per cavity.
    pub modes: Vec<Vec<C64>>,
}

/// Register qubits entangled with a chain of cavities, held as a sum of
/// product branches.
///
/// Loss, no-jump decay, parity projection and recovery all act on one
/// cavity at a time, so this form is exact and stays small: a chain built
/// from a two-branch register keeps two branches unless recovery is applied
/// to a state outside its code space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub n_register: usize,
    /// Register qubit whose value selects the code word.
    pub carrier: usize,
    pub n_max: usize,
    pub branches: Vec<Branch>,
}

const PRUNE_TOL: f64 = 1e-28;

impl ChainState {
    /// Register with no cavities attached yet.
    pub fn bare(register: &StateVector, carrier: usize, n_max: usize) -> Result<Self, CatError> {
        let dims = register.layout().dims();
        if dims.iter().any(|&d| d != 2) {
            return Err(HilbertError::InvalidLayout("register must be qubits".into()).into());
        }
        if carrier >= dims.len() {
            return Err(HilbertError::IndexOutOfRange { index: carrier, len: dims.len() }.into());
        }
        let branches = register
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, a)| Branch { register: i, weight: *a, modes: Vec::new() })
            .collect();
        Ok(Self { n_register: dims.len(), carrier, n_max, branches })
    }

    /// `Σ_r ψ_r |r⟩ ⊗_j |W_{ℓ(r)}(α_j)⟩` with `ℓ(r)` the carrier bit.
    pub fn ideal(register: &StateVector, carrier: usize, alphas: &[C64], n_max: usize) -> Result<Self, CatError> {
        let mut s = Self::bare(register, carrier, n_max)?;
        let words: Vec<[Vec<C64>; 2]> = alphas
            .iter()
            .map(|&a| Ok([codeword(a, 0, n_max)?, codeword(a, 1, n_max)?]))
            .collect::<Result<_, CatError>>()?;
        for b in s.branches.iter_mut() {
            let l = (b.register >> (s.n_register - 1 - carrier)) & 1;
            b.modes = words.iter().map(|w| w[l].clone()).collect();
        }
        Ok(s)
    }

    pub fn n_cavities(&self) -> usize {
        self.branches.first().map_or(0, |b| b.modes.len())
    }

    pub fn label(&self, register: usize) -> usize {
        (register >> (self.n_register - 1 - self.carrier)) & 1
    }

    /// `Σ_{bb'} w̄_b w_b' δ_{r r'} Π_j ⟨φ_bj| diag(weights_j) |φ_b'j⟩`;
    /// `None` entries mean the identity on that cavity.
    fn quadratic(&self, diag: &[Option<Vec<f64>>]) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for a in &self.branches {
            for b in self.branches.iter().filter(|b| b.register == a.register) {
                let mut term = a.weight.conj() * b.weight;
                for (j, (x, y)) in a.modes.iter().zip(&b.modes).enumerate() {
                    term *= match diag.get(j).and_then(|d| d.as_ref()) {
                        Some(w) => x.iter().zip(y).zip(w).map(|((p, q), s)| p.conj() * q * s).sum(),
                        None => dot(x, y),
                    };
                }
                total += term;
            }
        }
        total
    }

    pub fn norm_sqr(&self) -> f64 {
        self.quadratic(&[]).re
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64, CatError> {
        if self.n_register != other.n_register || self.n_cavities() != other.n_cavities() || self.n_max != other.n_max {
            return Err(HilbertError::LayoutMismatch.into());
        }
        let mut total = C64::new(0.0, 0.0);
        for a in &self.branches {
            for b in other.branches.iter().filter(|b| b.register == a.register) {
                let mut term = a.weight.conj() * b.weight;
                for (x, y) in a.modes.iter().zip(&b.modes) {
                    term *= dot(x, y);
                }
                total += term;
            }
        }
        Ok(total)
    }

    /// Rescales to unit norm and returns the previous squared norm.
    pub fn normalize(&mut self) -> Result<f64, CatError> {
        self.prune();
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(HilbertError::ZeroNorm.into());
        }
        let s = n.sqrt();
        self.branches.iter_mut().for_each(|b| b.weight /= s);
        Ok(n)
    }

    fn prune(&mut self) {
        let norms: Vec<f64> = self
            .branches
            .iter()
            .map(|b| b.weight.norm_sqr() * b.modes.iter().map(|m| m.iter().map(|x| x.norm_sqr()).sum::<f64>()).product::<f64>())
            .collect();
        let total: f64 = norms.iter().sum();
        let mut i = 0;
        self.branches.retain(|_| {
            i += 1;
            norms[i - 1] > PRUNE_TOL * total
        });
    }

    /// Squared norm after no-jump decay `exp(−κ_j τ a_j†a_j / 2)` on every cavity.
    pub fn decayed_norm_sqr(&self, kappa_tau: &[f64]) -> f64 {
        let d = self.n_max + 1;
        let diag: Vec<Option<Vec<f64>>> =
            kappa_tau.iter().map(|&kt| Some((0..d).map(|n| (-kt * n as f64).exp()).collect())).collect();
        self.quadratic(&diag).re
    }

    /// `⟨ψ|a_j†a_j|ψ⟩` (unnormalized).
    pub fn photon_number(&self, cavity: usize) -> f64 {
        let mut diag: Vec<Option<Vec<f64>>> = vec![None; self.n_cavities()];
        diag[cavity] = Some((0..=self.n_max).map(|n| n as f64).collect());
        self.quadratic(&diag).re
    }

    /// Squared norm of the parity-`sign` component of cavity `j`.
    pub fn parity_weight(&self, cavity: usize, parity: Parity) -> f64 {
        let mut diag: Vec<Option<Vec<f64>>> = vec![None; self.n_cavities()];
        diag[cavity] = Some((0..=self.n_max).map(|n| if parity.keeps(n) { 1.0 } else { 0.0 }).collect());
        self.quadratic(&diag).re
    }

    pub(crate) fn map_mode(&mut self, cavity: usize, mut f: impl FnMut(&mut Vec<C64>)) {
        for b in self.branches.iter_mut() {
            f(&mut b.modes[cavity]);
        }
    }

    /// Applies the no-jump decay without renormalizing.
    pub fn decay(&mut self, kappa_tau: &[f64]) {
        for (j, &kt) in kappa_tau.iter().enumerate() {
            if kt == 0.0 {
                continue;
            }
            self.map_mode(j, |m| {
                for (n, x) in m.iter_mut().enumerate() {
                    *x *= (-kt * n as f64 / 2.0).exp();
                }
            });
        }
    }

    /// Applies the annihilation operator on one cavity without renormalizing.
    pub fn annihilate(&mut self, cavity: usize) {
        self.map_mode(cavity, |m| {
            let d = m.len();
            for n in 0..d - 1 {
                m[n] = m[n + 1] * ((n + 1) as f64).sqrt();
            }
            m[d - 1] = C64::new(0.0, 0.0);
        });
    }

    /// Register amplitudes after projecting every cavity onto the code word
    /// selected by the carrier (unnormalized). This is the clean-ancilla
    /// component of the inverse encoding.
    pub fn decoded_register(&self, alphas: &[C64]) -> Result<Vec<C64>, CatError> {
        if alphas.len() != self.n_cavities() {
            return Err(CatError::SyndromeLength { expected: self.n_cavities(), found: alphas.len() });
        }
        let words: Vec<[Vec<C64>; 2]> = alphas
            .iter()
            .map(|&a| Ok([codeword(a, 0, self.n_max)?, codeword(a, 1, self.n_max)?]))
            .collect::<Result<_, CatError>>()?;
        let mut out = vec![C64::new(0.0, 0.0); 1 << self.n_register];
        for b in &self.branches {
            let l = self.label(b.register);
            let mut amp = b.weight;
            for (m, w) in b.modes.iter().zip(&words) {
                amp *= dot(&w[l], m);
            }
            out[b.register] += amp;
        }
        Ok(out)
    }

    /// `|⟨ideal(register, α_j)|ψ⟩|² / ⟨ψ|ψ⟩`.
    pub fn logical_fidelity(&self, register: &StateVector, alphas: &[C64]) -> Result<f64, CatError> {
        if register.dim() != 1 << self.n_register {
            return Err(HilbertError::DimensionMismatch { expected: 1 << self.n_register, found: register.dim() }.into());
        }
        let dec = self.decoded_register(alphas)?;
        let ov: C64 = register.amplitudes().iter().zip(&dec).map(|(a, b)| a.conj() * b).sum();
        Ok((ov.norm_sqr() / self.norm_sqr()).min(1.0))
    }

    /// Dense vector over register qubits ⊗ cavities.
    pub fn to_state_vector(&self) -> Result<StateVector, CatError> {
        let k = self.n_cavities();
        let d = self.n_max + 1;
        let cav_dim = d.checked_pow(k as u32).unwrap_or(usize::MAX);
        let dim = cav_dim.saturating_mul(1 << self.n_register);
        if dim > MAX_DENSE_DIM {
            return Err(CatError::TooLarge(dim));
        }
        let mut dims = vec![2; self.n_register];
        let mut labels: Vec<String> = (0..self.n_register).map(|i| format!("dot{i}")).collect();
        dims.extend(std::iter::repeat(d).take(k));
        labels.extend((0..k).map(|j| format!("cavity{j}")));
        let layout = SubsystemLayout::new(dims, labels)?;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        for b in &self.branches {
            let mut prod = vec![b.weight];
            for m in &b.modes {
                prod = prod.iter().flat_map(|p| m.iter().map(move |x| p * x)).collect();
            }
            let off = b.register * cav_dim;
            for (i, x) in prod.into_iter().enumerate() {
                amps[off + i] += x;
            }
        }
        Ok(StateVector::normalized(amps, layout)?)
    }
}

fn check_cavity(state: &ChainState, j: usize) -> Result<(), CatError> {
    if j >= state.n_cavities() {
        return Err(CatError::CavityOutOfRange { index: j, n: state.n_cavities() });
    }
    Ok(())
}

/// Projective measurement of `exp(iπ a_j†a_j)`.
///
/// Returns `(outcome, collapsed state, outcome probability)`.
pub fn parity_measure<R: Rng + ?Sized>(state: &ChainState, cavity: usize, rng: &mut R) -> Result<(i8, ChainState, f64), CatError> {
    check_cavity(state, cavity)?;
    let total = state.norm_sqr();
    let p_even = (state.parity_weight(cavity, Parity::Even) / total).clamp(0.0, 1.0);
    let u: f64 = rng.gen();
    let (parity, p) = if u < p_even { (Parity::Even, p_even) } else { (Parity::Odd, 1.0 - p_even) };
    let mut out = state.clone();
    out.map_mode(cavity, |m| {
        for (n, x) in m.iter_mut().enumerate() {
            if !parity.keeps(n) {
                *x = C64::new(0.0, 0.0);
            }
        }
    });
    out.normalize()?;
    Ok((parity.sign(), out, p))
}

/// Recovery after a parity round.
///
/// Every cavity with syndrome −1 is mapped by
/// `R = |W_0⟩⟨Ṽ_0| + |W_1⟩⟨Ṽ_1|`, where `V_0 = |C_{α'}^−⟩`,
/// `V_1 = i|C_{iα'}^−⟩` are the post-loss code words at the cavity's current
/// amplitude `α' = tracked[j]`, `Ṽ` is their dual basis, and `W` are the
/// nominal code words at `specs[j].alpha`. Cavities with syndrome +1 are left
/// alone.
pub fn repump_correct(state: &ChainState, syndrome: &[i8], tracked: &[C64], specs: &[CavitySpec]) -> Result<ChainState, CatError> {
    let k = state.n_cavities();
    for len in [syndrome.len(), tracked.len(), specs.len()] {
        if len != k {
            return Err(CatError::SyndromeLength { expected: k, found: len });
        }
    }
    let mut out = state.clone();
    for j in (0..k).filter(|&j| syndrome[j] < 0) {
        let n_max = out.n_max;
        let v0 = cat_amplitudes(tracked[j], Parity::Odd, n_max)?;
        let v1: Vec<C64> = cat_amplitudes(tracked[j] * C64::i(), Parity::Odd, n_max)?.into_iter().map(|x| x * C64::i()).collect();
        let w = [codeword(specs[j].alpha, 0, n_max)?, codeword(specs[j].alpha, 1, n_max)?];
        let g01 = dot(&v0, &v1);
        // G = [[1, g01], [ḡ01, 1]]
        let det = C64::new(1.0, 0.0) - g01 * g01.conj();
        let ginv = [[C64::new(1.0, 0.0) / det, -g01 / det], [-g01.conj() / det, C64::new(1.0, 0.0) / det]];
        let mut next = Vec::with_capacity(out.branches.len() * 2);
        for b in &out.branches {
            let p = [dot(&v0, &b.modes[j]), dot(&v1, &b.modes[j])];
            for (i, wi) in w.iter().enumerate() {
                let x = ginv[i][0] * p[0] + ginv[i][1] * p[1];
                if x.norm_sqr() > 0.0 {
                    let mut nb = b.clone();
                    nb.weight *= x;
                    nb.modes[j] = wi.clone();
                    next.push(nb);
                }
            }
        }
        out.branches = next;
        merge_duplicates(&mut out);
    }
    out.normalize()?;
    Ok(out)
}

/// Folds branches with equal register index and identical cavity vectors.
fn merge_duplicates(s: &mut ChainState) {
    let mut merged: Vec<Branch> = Vec::with_capacity(s.branches.len());
    for b in s.branches.drain(..) {
        match merged.iter_mut().find(|m| m.register == b.register && m.modes == b.modes) {
            Some(m) => m.weight += b.weight,
            None => merged.push(b),
        }
    }
    s.branches = merged;
}

/// Adds one cavity to a chain using a fresh Bell pair `(d1, d2)`.
///
/// The pair is merged with the carrier by the spin-register merge sequence
/// (carrier and `d1` as contacts, `d2` pulsed), its flip is undone, and the
/// pair is encoded into the new cavity; a CNOT from the carrier then clears
/// `d2`, leaving both dots free. Every operation touching the carrier is
/// diagonal, so each branch simply gains the code word of its carrier value.
pub fn extend_chain(state: &ChainState, fresh_bell: &StateVector, cavity: &CavitySpec) -> Result<ChainState, CatError> {
    cavity.validate()?;
    let k = state.n_cavities();
    if k > 0 && cavity.n_max != state.n_max {
        return Err(CatError::TruncationTooSmall { n_max: cavity.n_max, abs_alpha: cavity.alpha.norm(), needed: state.n_max });
    }
    if k > 0 {
        let alphas = vec![cavity.alpha; k];
        let reg = StateVector::normalized(state.decoded_register(&alphas)?, SubsystemLayout::qubits(state.n_register))
            .map_err(|_| CatError::NotChainForm(0.0))?;
        let f = state.logical_fidelity(&reg, &alphas)?;
        if f < 1.0 - 1e-6 {
            return Err(CatError::NotChainForm(f));
        }
    }
    if fresh_bell.layout().dims() != [2, 2] {
        return Err(HilbertError::LayoutMismatch.into());
    }
    let mut sched = Schedule::new(3);
    sched.extend(merge_steps(0, 1, 2, 1.0, 1.0, MERGE_DELTA));
    sched.push(Step::Pulse(PulseSpec { target: 2, angle: PI, phase: 0.0 }));
    for l in 0..2 {
        let q = StateVector::basis(SubsystemLayout::qubits(1), l)?;
        let s = crate::hilbert::tensor_states(&[&q, fresh_bell])?.with_layout(SubsystemLayout::qubits(3))?;
        let out = execute(&sched, &s)?;
        let f = out.amplitudes()[if l == 0 { 0 } else { 7 }].norm_sqr();
        if f < 1.0 - 1e-9 {
            return Err(CatError::BadBellPair(f));
        }
    }
    let words = [codeword(cavity.alpha, 0, cavity.n_max)?, codeword(cavity.alpha, 1, cavity.n_max)?];
    let mut out = state.clone();
    out.n_max = cavity.n_max;
    for b in out.branches.iter_mut() {
        let l = (b.register >> (state.n_register - 1 - state.carrier)) & 1;
        b.modes.push(words[l].clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;
    use crate::cat_code::{encode, Encoder};
    use crate::rng::stream;

    fn spec() -> CavitySpec {
        CavitySpec::new(C64::new(2.0, 0.0), 1.0).unwrap()
    }

    fn plus_chain(k: usize) -> ChainState {
        let s = spec();
        ChainState::ideal(&StateVector::plus(), 0, &vec![s.alpha; k], s.n_max).unwrap()
    }

    #[test]
    fn single_cavity_chain_matches_encoder() {
        let s = spec();
        let bare = ChainState::bare(&StateVector::plus(), 0, s.n_max).unwrap();
        let ext = extend_chain(&bare, &StateVector::ghz(2), &s).unwrap();
        // encoder output with the freed dot dropped
        let e = Encoder::new(&s).unwrap();
        let d = s.dim();
        let mut a = vec![C64::new(0.0, 0.0); 4 * d];
        a[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        a[3 * d] = C64::new(FRAC_1_SQRT_2, 0.0);
        let enc = encode(&StateVector::new(a, e.layout()).unwrap(), &s).unwrap();
        let dense = ext.to_state_vector().unwrap();
        for i in 0..2 * d {
            assert!((enc.amplitudes()[i] - dense.amplitudes()[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn extension_reaches_target() {
        let s = spec();
        let c1 = plus_chain(1);
        let c2 = extend_chain(&c1, &StateVector::ghz(2), &s).unwrap();
        assert_eq!(c2.n_cavities(), 2);
        assert!(c2.inner(&plus_chain(2)).unwrap().norm_sqr() >= 1.0 - 1e-12);
        let bad = StateVector::basis(SubsystemLayout::qubits(2), 1).unwrap();
        assert!(matches!(extend_chain(&c1, &bad, &s), Err(CatError::BadBellPair(_))));
        let mut lost = c1.clone();
        lost.annihilate(0);
        lost.normalize().unwrap();
        assert!(matches!(extend_chain(&lost, &StateVector::ghz(2), &s), Err(CatError::NotChainForm(_))));
    }

    #[test]
    fn parity_after_loss() {
        let mut rng = stream(1, 0);
        let c = plus_chain(2);
        let (o, c2, p) = parity_measure(&c, 1, &mut rng).unwrap();
        assert_eq!(o, 1);
        assert!((p - 1.0).abs() < 1e-6);
        let (o2, c3, _) = parity_measure(&c2, 1, &mut rng).unwrap();
        assert_eq!(o2, 1);
        assert!(c3.inner(&c2).unwrap().norm_sqr() > 1.0 - 1e-12);
        let mut lost = c.clone();
        lost.annihilate(1);
        lost.normalize().unwrap();
        let (o, _, p) = parity_measure(&lost, 1, &mut rng).unwrap();
        assert_eq!((o, (p - 1.0).abs() < 1e-6), (-1, true));
        let (o, _, _) = parity_measure(&lost, 0, &mut rng).unwrap();
        assert_eq!(o, 1);
        assert!(matches!(parity_measure(&c, 2, &mut rng), Err(CatError::CavityOutOfRange { .. })));
    }

    #[test]
    fn recovery_after_one_loss() {
        let s = spec();
        let c = plus_chain(2);
        let alphas = [s.alpha; 2];
        let mut lost = c.clone();
        lost.annihilate(0);
        lost.normalize().unwrap();
        let fixed = repump_correct(&lost, &[-1, 1], &alphas, &[s, s]).unwrap();
        assert_eq!(fixed.branches.len(), 2);
        let f = fixed.logical_fidelity(&StateVector::plus(), &alphas).unwrap();
        assert!(f >= 1.0 - 10.0 * (-8.0f64).exp(), "{f}");
        assert!(repump_correct(&c, &[1, 1], &alphas, &[s, s]).unwrap().inner(&c).unwrap().norm_sqr() > 1.0 - 1e-14);
        assert!(matches!(repump_correct(&c, &[1], &alphas, &[s, s]), Err(CatError::SyndromeLength { .. })));
    }

    #[test]
    fn dense_view_is_consistent() {
        let c = plus_chain(1);
        let v = c.to_state_vector().unwrap();
        assert_eq!(v.layout().dims(), &[2, 31]);
        let w1 = codeword(spec().alpha, 1, 30).unwrap();
        assert!((v.amplitudes()[31 + 4] - w1[4] * FRAC_1_SQRT_2).norm() < 1e-14);
    }
}
