use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{pair_matrix, pulse_matrix, rz_matrix, CouplingKind, CouplingSpec, SpinError};
use crate::hilbert::{apply_local, tensor_states, unitary, LinearMap, StateVector, SubsystemLayout};
use crate::C64;

/// Instantaneous rotation of one dot about an equatorial axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub target: usize,
    /// π/2 or π.
    pub angle: f64,
    /// Azimuth of the rotation axis.
    pub phase: f64,
}

impl PulseSpec {
    fn validate(&self, n: usize) -> Result<(), SpinError> {
        if self.target >= n {
            return Err(SpinError::DotOutOfRange { index: self.target, n });
        }
        let ok = [PI / 2.0, PI].iter().any(|a| (self.angle - a).abs() < 1e-12);
        if !ok || !self.phase.is_finite() {
            return Err(SpinError::InvalidSchedule(format!("pulse angle {} must be π/2 or π", self.angle)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    /// Simultaneous couplings of one kind on disjoint pairs for `duration`.
    Couple {
        coupling: CouplingKind,
        strength: f64,
        pairs: Vec<(usize, usize)>,
        duration: f64,
    },
    Pulse(PulseSpec),
    /// `exp(−i·angle/2·Z)` on one dot.
    ZRotation { target: usize, angle: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n_dots: usize,
    pub steps: Vec<Step>,
}

/// Interaction-time budget of a schedule; pulses are free.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub n: usize,
    pub t_ising_steps: usize,
    pub t_heisenberg_steps: usize,
    /// Seconds.
    pub total: f64,
}

impl TimingReport {
    /// Closed-form total for `n` dots with `[m/2]` the floor of `m/2`.
    pub fn formula(n: usize, j1: f64, j2: f64) -> Self {
        let ising = (n + 1) / 2;
        let heis = n.saturating_sub(1) / 2;
        Self {
            n,
            t_ising_steps: ising,
            t_heisenberg_steps: heis,
            total: ising as f64 * PI / (4.0 * j2) + heis as f64 * PI / (8.0 * j1),
        }
    }

    pub fn combine(&self, other: &Self) -> Self {
        Self {
            n: self.n.max(other.n),
            t_ising_steps: self.t_ising_steps + other.t_ising_steps,
            t_heisenberg_steps: self.t_heisenberg_steps + other.t_heisenberg_steps,
            total: self.total + other.total,
        }
    }
}

impl Schedule {
    pub fn new(n_dots: usize) -> Self {
        Self { n_dots, steps: Vec::new() }
    }

    pub fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    pub fn extend(&mut self, steps: impl IntoIterator<Item = Step>) {
        self.steps.extend(steps);
    }

    /// Appends `other`'s steps; the dot count grows to cover both.
    pub fn concat(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.n_dots = s.n_dots.max(other.n_dots);
        s.steps.extend(other.steps.iter().cloned());
        s
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let n = self.n_dots;
        for step in &self.steps {
            match step {
                Step::Couple { coupling, strength, pairs, duration } => {
                    if !(*duration > 0.0) || !duration.is_finite() {
                        return Err(SpinError::InvalidSchedule(format!("duration {duration} must be > 0")));
                    }
                    if pairs.is_empty() {
                        return Err(SpinError::InvalidSchedule("coupling layer without pairs".into()));
                    }
                    let mut used = Vec::new();
                    for &p in pairs {
                        CouplingSpec { kind: *coupling, strength: *strength, pair: p }.validate(n)?;
                        if used.contains(&p.0) || used.contains(&p.1) {
                            return Err(SpinError::InvalidSchedule(format!("dot reused within one layer at {p:?}")));
                        }
                        used.extend([p.0, p.1]);
                    }
                }
                Step::Pulse(p) => p.validate(n)?,
                Step::ZRotation { target, angle } => {
                    if *target >= n {
                        return Err(SpinError::DotOutOfRange { index: *target, n });
                    }
                    if !angle.is_finite() {
                        return Err(SpinError::InvalidSchedule("non-finite z rotation".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn timing(&self) -> TimingReport {
        let mut r = TimingReport { n: self.n_dots, t_ising_steps: 0, t_heisenberg_steps: 0, total: 0.0 };
        for step in &self.steps {
            if let Step::Couple { coupling, duration, .. } = step {
                match coupling {
                    CouplingKind::Ising => r.t_ising_steps += 1,
                    CouplingKind::Heisenberg => r.t_heisenberg_steps += 1,
                }
                r.total += duration;
            }
        }
        r
    }

    pub fn interaction_steps(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, Step::Couple { .. })).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SpinError> {
        let sched: Self = serde_json::from_str(s).map_err(|e| SpinError::InvalidSchedule(e.to_string()))?;
        sched.validate()?;
        Ok(sched)
    }

    /// Full-register Hamiltonian of a coupling layer, for cross-checks.
    pub fn layer_hamiltonian(step: &Step, layout: &SubsystemLayout) -> Result<Option<LinearMap>, SpinError> {
        let Step::Couple { coupling, strength, pairs, .. } = step else { return Ok(None) };
        let mut total: Option<LinearMap> = None;
        for &p in pairs {
            let h = super::hamiltonian(&CouplingSpec { kind: *coupling, strength: *strength, pair: p }, layout)?;
            total = Some(match total {
                None => h,
                Some(t) => t.add(&h)?,
            });
        }
        Ok(total)
    }
}

/// `|+⟩^⊗n`, the register state every schedule starts from.
pub fn initial_register(n: usize) -> StateVector {
    let plus = StateVector::plus();
    let parts: Vec<&StateVector> = std::iter::repeat(&plus).take(n.max(1)).collect();
    tensor_states(&parts).expect("qubit product").with_layout(SubsystemLayout::uniform(n.max(1), 2, "dot").unwrap()).unwrap()
}

/// Runs `schedule` on `initial`, applying each coupling as an exact two-dot
/// unitary.
pub fn execute(schedule: &Schedule, initial: &StateVector) -> Result<StateVector, SpinError> {
    schedule.validate()?;
    let layout = initial.layout().clone();
    if layout.len() < schedule.n_dots {
        return Err(SpinError::InvalidSchedule(format!(
            "schedule for {} dots on a {}-subsystem state",
            schedule.n_dots,
            layout.len()
        )));
    }
    let mut amps = initial.amplitudes().to_vec();
    let two = SubsystemLayout::qubits(2);
    for step in &schedule.steps {
        match step {
            Step::Couple { coupling, strength, pairs, duration } => {
                let h = LinearMap::dense(pair_matrix(*coupling, *strength), two.clone())?;
                let u: DMatrix<C64> = unitary(&h, *duration)?;
                for &(a, b) in pairs {
                    apply_local(&mut amps, &layout, &u, &[a, b])?;
                }
            }
            Step::Pulse(p) => apply_local(&mut amps, &layout, &pulse_matrix(p.angle, p.phase), &[p.target])?,
            Step::ZRotation { target, angle } => apply_local(&mut amps, &layout, &rz_matrix(*angle), &[*target])?,
        }
    }
    Ok(StateVector::normalized(amps, layout)?)
}
