use std::f64::consts::PI;

use super::schedule::{execute, initial_register, PulseSpec, Schedule, Step, TimingReport};
use super::{CouplingKind, SpinError};
use crate::hilbert::StateVector;

/// Relative phase imprinted by the merge π pulse; GHZ output requires π/2.
pub const MERGE_DELTA: f64 = PI / 2.0;

/// Ising layer `t = π/(4 J2)` on every pair, then a π/2 x-pulse on each
/// pair's second dot. Maps `|++⟩` to `e^{−iπ/4}(|00⟩ + |11⟩)/√2`.
pub fn bell_steps(pairs: &[(usize, usize)], j2: f64) -> Vec<Step> {
    let mut steps = vec![Step::Couple {
        coupling: CouplingKind::Ising,
        strength: j2,
        pairs: pairs.to_vec(),
        duration: PI / (4.0 * j2),
    }];
    steps.extend(pairs.iter().map(|&(_, b)| Step::Pulse(PulseSpec { target: b, angle: PI / 2.0, phase: 0.0 })));
    steps
}

/// Joins a GHZ-class block (reached through `contact_a`) with a Bell pair
/// `(contact_b, pulse_target)`:
///
/// 1. Ising `(contact_a, contact_b)` for `π/(4 J2)`;
/// 2. `Rz(−π/2)` on both contacts, giving a controlled-Z;
/// 3. π pulse on `pulse_target` about the axis at azimuth `−delta/2`;
/// 4. Heisenberg `(contact_b, pulse_target)` for `π/(8 J1)`.
///
/// With `delta = π/2` the pair ends in `|01⟩` or `|10⟩` depending on the
/// block branch, so `pulse_target` is flipped relative to the block.
pub fn merge_steps(contact_a: usize, contact_b: usize, pulse_target: usize, j1: f64, j2: f64, delta: f64) -> Vec<Step> {
    vec![
        Step::Couple { coupling: CouplingKind::Ising, strength: j2, pairs: vec![(contact_a, contact_b)], duration: PI / (4.0 * j2) },
        Step::ZRotation { target: contact_a, angle: -PI / 2.0 },
        Step::ZRotation { target: contact_b, angle: -PI / 2.0 },
        Step::Pulse(PulseSpec { target: pulse_target, angle: PI, phase: -delta / 2.0 }),
        Step::Couple {
            coupling: CouplingKind::Heisenberg,
            strength: j1,
            pairs: vec![(contact_b, pulse_target)],
            duration: PI / (8.0 * j1),
        },
    ]
}

/// Joins a GHZ-class block with one fresh `|+⟩` dot using one Ising and one
/// Heisenberg interval. The contact is rotated onto the x basis so the
/// controlled-Z leaves `(contact, single)` in `(|00⟩ ± |11⟩)/√2` per block
/// branch, after which the pair-merge tail applies. The contact ends flipped
/// relative to the block.
pub fn singleton_merge_steps(contact_a: usize, single: usize, j1: f64, j2: f64, delta: f64) -> Vec<Step> {
    vec![
        Step::Pulse(PulseSpec { target: contact_a, angle: PI / 2.0, phase: PI / 2.0 }),
        Step::Couple { coupling: CouplingKind::Ising, strength: j2, pairs: vec![(contact_a, single)], duration: PI / (4.0 * j2) },
        Step::ZRotation { target: contact_a, angle: -PI / 2.0 },
        Step::ZRotation { target: single, angle: -PI / 2.0 },
        Step::Pulse(PulseSpec { target: single, angle: PI / 2.0, phase: -PI / 2.0 }),
        Step::Pulse(PulseSpec { target: single, angle: PI, phase: -delta / 2.0 }),
        Step::Couple {
            coupling: CouplingKind::Heisenberg,
            strength: j1,
            pairs: vec![(contact_a, single)],
            duration: PI / (8.0 * j1),
        },
    ]
}

fn x_flip(target: usize) -> Step {
    Step::Pulse(PulseSpec { target, angle: PI, phase: 0.0 })
}

#[derive(Clone, Debug)]
pub struct BellConstruction {
    /// State after the Ising interval, before the pulse.
    pub intermediate: StateVector,
    pub bell: StateVector,
    /// Interaction time `π/(4 J2)` in seconds.
    pub duration: f64,
    pub schedule: Schedule,
}

/// Two dots from `|++⟩` to `(|00⟩ + |11⟩)/√2` up to global phase.
pub fn build_bell(j2: f64) -> Result<BellConstruction, SpinError> {
    if !(j2 > 0.0) || !j2.is_finite() {
        return Err(SpinError::BadStrength(j2));
    }
    let steps = bell_steps(&[(0, 1)], j2);
    let start = initial_register(2);
    let first = Schedule { n_dots: 2, steps: steps[..1].to_vec() };
    let intermediate = execute(&first, &start)?;
    let schedule = Schedule { n_dots: 2, steps };
    let bell = execute(&schedule, &start)?;
    Ok(BellConstruction { intermediate, bell, duration: PI / (4.0 * j2), schedule })
}

/// Merges two GHZ-class blocks of `state` with the standard phase Δ = π/2.
///
/// Contacts are the first dots of each block. A two-dot `block_b` is merged
/// with [`merge_steps`]; a one-dot `block_b` with [`singleton_merge_steps`].
pub fn merge_blocks(state: &StateVector, block_a: &[usize], block_b: &[usize], j1: f64, j2: f64) -> Result<StateVector, SpinError> {
    merge_blocks_with_delta(state, block_a, block_b, j1, j2, MERGE_DELTA)
}

pub fn merge_blocks_with_delta(
    state: &StateVector,
    block_a: &[usize],
    block_b: &[usize],
    j1: f64,
    j2: f64,
    delta: f64,
) -> Result<StateVector, SpinError> {
    let (&ca, &cb) = match (block_a.first(), block_b.first()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(SpinError::InvalidSchedule("blocks must be nonempty".into())),
    };
    if let Some(&shared) = block_a.iter().find(|d| block_b.contains(d)) {
        return Err(SpinError::SameBlock(shared, if shared == ca { cb } else { ca }));
    }
    for &s in [j1, j2].iter() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SpinError::BadStrength(s));
        }
    }
    let steps = match block_b {
        [b] => singleton_merge_steps(ca, *b, j1, j2, delta),
        [b, t] => merge_steps(ca, *b, *t, j1, j2, delta),
        _ => return Err(SpinError::InvalidSchedule("block B must hold one or two dots".into())),
    };
    let sched = Schedule { n_dots: state.layout().len(), steps };
    execute(&sched, state)
}

/// Schedule building an `n`-dot GHZ-class register from `|+⟩^⊗n`.
///
/// All Bell pairs `(0,1), (2,3), …` are formed in one Ising interval; the
/// growing block (contact dot 0) then absorbs each next pair left to right,
/// and finally a leftover odd dot. Each merge costs one Ising and one
/// Heisenberg interval and is followed by an x π pulse undoing its flip, so
/// the result is `(|0…0⟩ + e^{iθ}|1…1⟩)/√2`.
pub fn plan_ghz(n: usize, j1: f64, j2: f64) -> Result<(Schedule, TimingReport), SpinError> {
    if n < 2 {
        return Err(SpinError::TooFewDots(n));
    }
    for &s in [j1, j2].iter() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SpinError::BadStrength(s));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect();
    let mut sched = Schedule::new(n);
    sched.extend(bell_steps(&pairs, j2));
    for &(b, t) in &pairs[1..] {
        sched.extend(merge_steps(0, b, t, j1, j2, MERGE_DELTA));
        sched.push(x_flip(t));
    }
    if n % 2 == 1 {
        sched.extend(singleton_merge_steps(0, n - 1, j1, j2, MERGE_DELTA));
        sched.push(x_flip(0));
    }
    sched.validate()?;
    let timing = sched.timing();
    Ok((sched, timing))
}
