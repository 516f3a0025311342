use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extend_chain, parity_measure, repump_correct, CatError, CavitySpec, ChainState};
use crate::hilbert::{StateVector, SubsystemLayout};
use crate::rng::{derived_seed, stream};
use crate::C64;

/// Syndrome schedule: parity of every cavity is read at `tau_syn, 2 tau_syn, …`
/// up to `duration`; `corrected` selects whether recovery follows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    /// Seconds; an integer multiple of `tau_syn`.
    pub duration: f64,
    pub tau_syn: f64,
    pub corrected: bool,
}

impl ProtocolSpec {
    pub fn rounds(&self) -> Result<usize, CatError> {
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(CatError::InvalidProtocol(format!("duration {} must be >= 0", self.duration)));
        }
        if !(self.tau_syn > 0.0) || !self.tau_syn.is_finite() {
            return Err(CatError::InvalidProtocol(format!("tau_syn {} must be > 0", self.tau_syn)));
        }
        let r = self.duration / self.tau_syn;
        if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
            return Err(CatError::InvalidProtocol(format!("duration {} is not a multiple of tau_syn {}", self.duration, self.tau_syn)));
        }
        Ok(r.round() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub corrected: bool,
    /// Per cavity, absolute jump times.
    pub jump_times: Vec<Vec<f64>>,
    pub syndrome_times: Vec<f64>,
    /// Per cavity, one ±1 outcome per syndrome time.
    pub parity_outcomes: Vec<Vec<i8>>,
    /// Deterministic cavity amplitudes at the end of the run.
    pub tracked_alpha: Vec<C64>,
    pub final_state: ChainState,
    pub logical_fidelity: f64,
}

impl TrajectoryRecord {
    pub fn jump_counts(&self) -> Vec<usize> {
        self.jump_times.iter().map(Vec::len).collect()
    }

    /// Number of parity outcomes that disagree with `(−1)^(jumps since the
    /// previous syndrome time)` relative to the parity left by that round:
    /// `+1` after recovery, the previous outcome without it.
    pub fn syndrome_mismatches(&self) -> usize {
        let mut bad = 0;
        for (times, outcomes) in self.jump_times.iter().zip(&self.parity_outcomes) {
            let mut prev = 0.0;
            let mut reference = 1i8;
            for (&ts, &o) in self.syndrome_times.iter().zip(outcomes) {
                let n = times.iter().filter(|&&t| t > prev && t <= ts).count();
                let expected = if n % 2 == 0 { reference } else { -reference };
                if o != expected {
                    bad += 1;
                }
                if !self.corrected {
                    reference = o;
                }
                prev = ts;
            }
        }
        bad
    }
}

/// Waiting-time Monte Carlo over `[t0, t1]`: no-jump decay until the
/// squared norm reaches `threshold`, then a jump in cavity `j` chosen with
/// weight `κ_j ⟨n_j⟩`.
fn evolve_interval(
    state: &mut ChainState,
    specs: &[CavitySpec],
    t0: f64,
    t1: f64,
    rng: &mut ChaCha8Rng,
    threshold: &mut f64,
    jumps: &mut [Vec<f64>],
) -> Result<(), CatError> {
    let kt = |tau: f64| -> Vec<f64> { specs.iter().map(|s| s.kappa * tau).collect() };
    let mut t = t0;
    loop {
        let span = t1 - t;
        if state.decayed_norm_sqr(&kt(span)) > *threshold {
            state.decay(&kt(span));
            let n = state.normalize()?;
            *threshold /= n;
            return Ok(());
        }
        let (mut lo, mut hi) = (0.0, span);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if state.decayed_norm_sqr(&kt(mid)) > *threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        state.decay(&kt(hi));
        state.normalize()?;
        let rates: Vec<f64> = specs.iter().enumerate().map(|(j, s)| s.kappa * state.photon_number(j)).collect();
        let mut u = rng.gen::<f64>() * rates.iter().sum::<f64>();
        let mut j = rates.len() - 1;
        for (i, r) in rates.iter().enumerate() {
            if u < *r {
                j = i;
                break;
            }
            u -= r;
        }
        state.annihilate(j);
        state.normalize()?;
        t += hi;
        jumps[j].push(t);
        *threshold = rng.gen();
    }
}

fn check_specs(state: &ChainState, specs: &[CavitySpec]) -> Result<(), CatError> {
    if specs.len() != state.n_cavities() {
        return Err(CatError::SyndromeLength { expected: state.n_cavities(), found: specs.len() });
    }
    for s in specs {
        s.validate()?;
        if s.n_max != state.n_max {
            return Err(CatError::InvalidProtocol(format!("cavity n_max {} differs from state n_max {}", s.n_max, state.n_max)));
        }
    }
    Ok(())
}

fn decay_tracked(tracked: &mut [C64], specs: &[CavitySpec], dt: f64) {
    for (a, s) in tracked.iter_mut().zip(specs) {
        *a *= (-s.kappa * dt / 2.0).exp();
    }
}

/// Free photon-loss evolution for `duration` with no syndrome extraction.
///
/// Fidelity is taken against the register decoded from `state` at the
/// nominal amplitudes, with code words at the decayed amplitudes.
pub fn loss_trajectory(state: &ChainState, duration: f64, specs: &[CavitySpec], seed: u64) -> Result<TrajectoryRecord, CatError> {
    check_specs(state, specs)?;
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(CatError::InvalidProtocol(format!("duration {duration} must be >= 0")));
    }
    let nominal: Vec<C64> = specs.iter().map(|s| s.alpha).collect();
    let logical = StateVector::normalized(state.decoded_register(&nominal)?, SubsystemLayout::qubits(state.n_register)).ok();
    let mut rng = stream(seed, 0);
    let mut threshold = rng.gen();
    let mut jumps = vec![Vec::new(); specs.len()];
    let mut s = state.clone();
    s.normalize()?;
    evolve_interval(&mut s, specs, 0.0, duration, &mut rng, &mut threshold, &mut jumps)?;
    let mut tracked = nominal;
    decay_tracked(&mut tracked, specs, duration);
    let logical_fidelity = match &logical {
        Some(l) => s.logical_fidelity(l, &tracked)?,
        None => 0.0,
    };
    Ok(TrajectoryRecord {
        seed,
        corrected: false,
        jump_times: jumps,
        syndrome_times: Vec::new(),
        parity_outcomes: vec![Vec::new(); specs.len()],
        tracked_alpha: tracked,
        final_state: s,
        logical_fidelity,
    })
}

/// Loss evolution interleaved with parity rounds, followed by recovery when
/// `protocol.corrected`. Jumps and measurement outcomes draw from separate
/// streams of `seed`, so paired runs share their first jump record.
pub fn run_protocol(
    initial: &ChainState,
    logical: &StateVector,
    specs: &[CavitySpec],
    protocol: &ProtocolSpec,
    seed: u64,
) -> Result<TrajectoryRecord, CatError> {
    check_specs(initial, specs)?;
    let rounds = protocol.rounds()?;
    let k = specs.len();
    let mut jump_rng = stream(seed, 0);
    let mut meas_rng = stream(seed, 1);
    let mut threshold = jump_rng.gen();
    let mut state = initial.clone();
    state.normalize()?;
    let mut tracked: Vec<C64> = specs.iter().map(|s| s.alpha).collect();
    let mut jumps = vec![Vec::new(); k];
    let mut outcomes = vec![Vec::with_capacity(rounds); k];
    let mut syndrome_times = Vec::with_capacity(rounds);
    for r in 1..=rounds {
        let (t0, t1) = ((r - 1) as f64 * protocol.tau_syn, r as f64 * protocol.tau_syn);
        evolve_interval(&mut state, specs, t0, t1, &mut jump_rng, &mut threshold, &mut jumps)?;
        decay_tracked(&mut tracked, specs, protocol.tau_syn);
        let mut syndrome = vec![1i8; k];
        for (j, s) in syndrome.iter_mut().enumerate() {
            let (o, next, _) = parity_measure(&state, j, &mut meas_rng)?;
            state = next;
            *s = o;
            outcomes[j].push(o);
        }
        syndrome_times.push(t1);
        if protocol.corrected && syndrome.iter().any(|&s| s < 0) {
            state = repump_correct(&state, &syndrome, &tracked, specs)?;
            for (j, s) in syndrome.iter().enumerate() {
                if *s < 0 {
                    tracked[j] = specs[j].alpha;
                }
            }
        }
    }
    let logical_fidelity = state.logical_fidelity(logical, &tracked)?;
    Ok(TrajectoryRecord {
        seed,
        corrected: protocol.corrected,
        jump_times: jumps,
        syndrome_times,
        parity_outcomes: outcomes,
        tracked_alpha: tracked,
        final_state: state,
        logical_fidelity,
    })
}

/// Encodes `logical` into `k` cavities, one fresh Bell pair per cavity.
pub fn build_chain(logical: &StateVector, carrier: usize, k: usize, cavity: &CavitySpec) -> Result<ChainState, CatError> {
    let mut s = ChainState::bare(logical, carrier, cavity.n_max)?;
    let bell = StateVector::ghz(2);
    for _ in 0..k {
        s = extend_chain(&s, &bell, cavity)?;
    }
    Ok(s)
}

/// `n` trajectories with seeds `derived_seed(base_seed, i)`, in index order.
/// Runs on the current rayon pool; the result does not depend on its size.
pub fn run_ensemble(
    initial: &ChainState,
    logical: &StateVector,
    specs: &[CavitySpec],
    protocol: &ProtocolSpec,
    base_seed: u64,
    n: usize,
) -> Result<Vec<TrajectoryRecord>, CatError> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| run_protocol(initial, logical, specs, protocol, derived_seed(base_seed, i)))
        .collect()
}

/// Paired comparison of recovery against no recovery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmComparison {
    pub n: usize,
    pub mean_corrected: f64,
    pub mean_uncorrected: f64,
    pub mean_difference: f64,
    pub stderr_difference: f64,
    /// `mean_difference / stderr_difference`; infinite when every pair differs equally.
    pub significance: f64,
}

pub fn compare_arms(corrected: &[TrajectoryRecord], uncorrected: &[TrajectoryRecord]) -> Result<ArmComparison, CatError> {
    if corrected.len() != uncorrected.len() || corrected.is_empty() {
        return Err(CatError::InvalidProtocol("arms must be nonempty and of equal size".into()));
    }
    if corrected.iter().zip(uncorrected).any(|(a, b)| a.seed != b.seed) {
        return Err(CatError::InvalidProtocol("arms are not seed-paired".into()));
    }
    let n = corrected.len();
    let nf = n as f64;
    let mean = |v: &[TrajectoryRecord]| v.iter().map(|r| r.logical_fidelity).sum::<f64>() / nf;
    let diffs: Vec<f64> = corrected.iter().zip(uncorrected).map(|(a, b)| a.logical_fidelity - b.logical_fidelity).collect();
    let md = diffs.iter().sum::<f64>() / nf;
    let var = if n > 1 { diffs.iter().map(|d| (d - md).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    let se = (var / nf).sqrt();
    let significance = if se > 0.0 {
        md / se
    } else if md > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(ArmComparison {
        n,
        mean_corrected: mean(corrected),
        mean_uncorrected: mean(uncorrected),
        mean_difference: md,
        stderr_difference: se,
        significance,
    })
}

#[derive(Serialize)]
struct CsvRow {
    seed: u64,
    cavity: usize,
    jump_count: usize,
    final_logical_fidelity: f64,
    corrected: u8,
}

/// One row per trajectory and cavity.
pub fn write_trajectory_csv<W: Write>(records: &[TrajectoryRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        for (cavity, jump_count) in r.jump_counts().into_iter().enumerate() {
            w.serialize(CsvRow {
                seed: r.seed,
                cavity,
                jump_count,
                final_logical_fidelity: r.logical_fidelity,
                corrected: r.corrected as u8,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
