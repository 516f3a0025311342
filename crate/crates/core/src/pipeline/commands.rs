use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OutputFormat, PipelineConfig, PipelineError, RunReport};
use crate::cat_code::{build_chain, compare_arms, run_ensemble, CatError, CavitySpec, ProtocolSpec, TrajectoryRecord};
use crate::hilbert::{fidelity, StateVector, SubsystemLayout};
use crate::photon_swap::{
    eq16_closed_form, integrate_dynamics, register_swap, sweep_fig4, ComparisonReport, GaussianMode, SpectralGrid,
    SwapError, ThreeLevelDot, Trajectory,
};
use crate::polarization::{convert_register, pair_photons, DualRailState, PolarizationState};
use crate::spin_register::{apply_correction, execute, ghz_correction, initial_register, max_schmidt_deviation, plan_ghz};
use crate::C64;

const GHZ_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Ghz,
    Protect,
    Swap,
    Sweep,
    Pipeline,
}

/// Validates `config`, then runs `command` on a pool of `run.workers` threads.
pub fn run_command(command: Command, config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.run.workers.unwrap_or(0))
        .build()
        .map_err(|e| PipelineError::stage("setup", e))?;
    pool.install(|| match command {
        Command::Ghz => cmd_ghz(config),
        Command::Protect => cmd_protect(config),
        Command::Swap => cmd_swap(config),
        Command::Sweep => cmd_sweep(config),
        Command::Pipeline => cmd_pipeline(config),
    })
}

/// Amplitudes with their tensor layout, for JSON output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&StateVector> for StateDump {
    fn from(s: &StateVector) -> Self {
        Self {
            dims: s.layout().dims().to_vec(),
            labels: s.layout().labels().to_vec(),
            re: s.amplitudes().iter().map(|a| a.re).collect(),
            im: s.amplitudes().iter().map(|a| a.im).collect(),
        }
    }
}

fn tag<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::stage(stage, e)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::Io { path: dir.join(name), message: e.to_string() };
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join(name), bytes).map_err(io)
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write(dir, name, text.as_bytes())
}

fn write_table<T: Serialize>(config: &PipelineConfig, stem: &str, rows: &[T]) -> Result<(), PipelineError> {
    let dir = &config.run.out_dir;
    match config.run.format {
        OutputFormat::Json => write_json(dir, &format!("{stem}.json"), &rows),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r).map_err(|e| PipelineError::stage(stem, e))?;
            }
            let bytes = w.into_inner().map_err(|e| PipelineError::stage(stem, e))?;
            write(dir, &format!("{stem}.csv"), &bytes)
        }
    }
}

fn finish(report: RunReport) -> Result<RunReport, PipelineError> {
    write_json(&report.config.run.out_dir, "report.json", &report)?;
    Ok(report)
}

/// GHZ register from the planned schedule, with its local correction.
fn prepare_register(config: &PipelineConfig, report: &mut RunReport) -> Result<(StateVector, StateVector), PipelineError> {
    let g = &config.ghz;
    let (schedule, timing) = plan_ghz(g.n_dots, g.j1, g.j2).map_err(tag("ghz"))?;
    let raw = execute(&schedule, &initial_register(g.n_dots)).map_err(tag("ghz"))?;
    let deviation = max_schmidt_deviation(&raw).map_err(tag("ghz"))?;
    let correction = ghz_correction(&raw).map_err(tag("ghz"))?;
    let corrected = apply_correction(&raw, &correction).map_err(tag("ghz"))?;
    let canonical = StateVector::ghz(g.n_dots).with_layout(corrected.layout().clone()).map_err(tag("ghz"))?;
    report.fidelity("ghz", fidelity(&corrected, &canonical).map_err(tag("ghz"))?)?;
    report.timing = Some(timing);
    report.detail("ghz_class", deviation <= GHZ_TOL);
    report.detail("max_schmidt_deviation", deviation);
    report.detail("interaction_steps", schedule.interaction_steps());
    report.detail("correction", &correction);
    report.detail("schedule_timing", schedule.timing());
    if deviation > GHZ_TOL {
        return Err(PipelineError::stage("ghz", format!("register is not GHZ-class (deviation {deviation:e})")));
    }
    Ok((raw, corrected))
}

pub fn cmd_ghz(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let mut report = RunReport::new("ghz", config);
    let (schedule, _) = plan_ghz(config.ghz.n_dots, config.ghz.j1, config.ghz.j2).map_err(|e| PipelineError::stage("ghz", e))?;
    let (raw, corrected) = prepare_register(config, &mut report)?;
    let dir = &config.run.out_dir;
    write_json(dir, "state.json", &serde_json::json!({ "raw": StateDump::from(&raw), "corrected": StateDump::from(&corrected) }))?;
    write_json(dir, "schedule.json", &schedule)?;
    finish(report)
}

#[derive(Serialize)]
struct TrajectoryRow {
    seed: u64,
    cavity: usize,
    jump_count: usize,
    final_logical_fidelity: f64,
    corrected: u8,
}

fn trajectory_rows(records: &[TrajectoryRecord]) -> Vec<TrajectoryRow> {
    records
        .iter()
        .flat_map(|r| {
            r.jump_counts().into_iter().enumerate().map(move |(cavity, jump_count)| TrajectoryRow {
                seed: r.seed,
                cavity,
                jump_count,
                final_logical_fidelity: r.logical_fidelity,
                corrected: u8::from(r.corrected),
            })
        })
        .collect()
}

fn cavity_spec(config: &PipelineConfig) -> Result<CavitySpec, CatError> {
    let p = &config.protect;
    let spec = CavitySpec::new(C64::new(p.alpha, 0.0), p.kappa)?;
    match p.n_max {
        Some(n) => spec.with_n_max(n),
        None => Ok(spec),
    }
}

fn protect_ensemble(
    config: &PipelineConfig,
    register: &StateVector,
    corrected: bool,
) -> Result<Vec<TrajectoryRecord>, PipelineError> {
    let p = &config.protect;
    let spec = cavity_spec(config).map_err(tag("protect"))?;
    let chain = build_chain(register, 0, p.n_cavities, &spec).map_err(tag("protect"))?;
    let protocol = ProtocolSpec { duration: p.duration, tau_syn: p.tau_syn, corrected };
    let specs = vec![spec; p.n_cavities];
    run_ensemble(&chain, register, &specs, &protocol, config.run.base_seed, p.n_trajectories).map_err(tag("protect"))
}

pub fn cmd_protect(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let mut report = RunReport::new("protect", config);
    let register = StateVector::ghz(config.ghz.n_dots);
    let corrected = protect_ensemble(config, &register, true)?;
    let uncorrected = protect_ensemble(config, &register, false)?;
    let cmp = compare_arms(&corrected, &uncorrected).map_err(|e| PipelineError::stage("protect", e))?;
    report.fidelity("corrected_mean", cmp.mean_corrected)?;
    report.fidelity("uncorrected_mean", cmp.mean_uncorrected)?;
    report.detail("comparison", cmp);
    let mismatches: usize = corrected.iter().chain(&uncorrected).map(|r| r.syndrome_mismatches()).sum();
    report.detail("syndrome_mismatches", mismatches);
    report.detail("n_max", cavity_spec(config).map(|s| s.n_max).ok());
    let mut rows = trajectory_rows(&corrected);
    rows.extend(trajectory_rows(&uncorrected));
    write_table(config, "trajectories", &rows)?;
    finish(report)
}

fn swap_error(stage: &str, e: SwapError) -> PipelineError {
    match e {
        SwapError::Aliasing(_) | SwapError::Integrator(_) => PipelineError::NonConvergence { stage: stage.into(), message: e.to_string() },
        other => PipelineError::stage(stage, other),
    }
}

fn swap_setup(config: &PipelineConfig) -> (ThreeLevelDot, GaussianMode) {
    let s = &config.swap;
    let dot = ThreeLevelDot { w1: s.w1, w2: s.w2, gamma1: s.gamma1, gamma2: s.gamma2 };
    (dot, GaussianMode { d: s.d, center: s.w1 })
}

fn run_swap(config: &PipelineConfig) -> Result<(Trajectory, ThreeLevelDot, GaussianMode), PipelineError> {
    let s = &config.swap;
    let (dot, mode) = swap_setup(config);
    let grid = SpectralGrid::for_run(&dot, &mode, s.t_end).map_err(|e| swap_error("swap", e))?;
    let dt = s.dt.unwrap_or_else(|| 1.0 / (20.0 * dot.gamma_total().max(mode.d)));
    let traj = integrate_dynamics(&dot, &mode, &grid, s.t_end, dt).map_err(|e| swap_error("swap", e))?;
    Ok((traj, dot, mode))
}

#[derive(Serialize)]
struct SwapRow {
    t: f64,
    p: f64,
    norm: f64,
}

pub fn cmd_swap(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let mut report = RunReport::new("swap", config);
    let (traj, dot, mode) = run_swap(config)?;
    let p_end = traj.final_p();
    report.heralds.insert("swap".into(), p_end);
    report.detail("p_final", p_end);
    report.detail("max_norm_defect", traj.max_norm_defect());
    report.detail("n_k", traj.grid.n_k);
    report.detail("steps", traj.steps);
    let mut times = vec![*traj.times.last().expect("samples")];
    if let Some(&t5) = traj.times.iter().min_by(|a, b| (*a - 5.0).abs().total_cmp(&(*b - 5.0).abs())) {
        if t5 < times[0] {
            times.insert(0, t5);
        }
    }
    for t in times {
        let closed = eq16_closed_form(&dot, &mode, &traj.grid, t).map_err(|e| swap_error("swap", e))?;
        report.discrepancies.push(ComparisonReport::new(&dot, &mode, &closed, traj.p_at(t)));
    }
    let rows: Vec<SwapRow> = traj.times.iter().zip(&traj.p).zip(&traj.norm).map(|((&t, &p), &norm)| SwapRow { t, p, norm }).collect();
    write_table(config, "swap", &rows)?;
    write_json(&config.run.out_dir, "comparison.json", &report.discrepancies)?;
    finish(report)
}

pub fn cmd_sweep(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let mut report = RunReport::new("sweep", config);
    let opts = config.sweep.options(&config.swap);
    let table = sweep_fig4(&opts).map_err(|e| swap_error("sweep", e))?;
    write_table(config, "sweep", &table.rows)?;
    let unconverged = table.rows.iter().filter(|r| !r.converged).count();
    report.detail("rows", table.rows.len());
    report.detail("unconverged", unconverged);
    if let Some(best) = table.max_row() {
        report.detail("max", best);
        let dot = ThreeLevelDot { w1: opts.w1, w2: opts.w2, gamma1: best.gamma, gamma2: best.gamma };
        let mode = GaussianMode { d: best.d, center: opts.w1 };
        let grid = SpectralGrid::for_run(&dot, &mode, best.t_end).map_err(|e| swap_error("sweep", e))?;
        let closed = eq16_closed_form(&dot, &mode, &grid, best.t_end).map_err(|e| swap_error("sweep", e))?;
        report.discrepancies.push(ComparisonReport::new(&dot, &mode, &closed, best.p_longtime));
    }
    write_json(&config.run.out_dir, "comparison.json", &report.discrepancies)?;
    let report = finish(report)?;
    if unconverged > 0 {
        return Err(PipelineError::NonConvergence {
            stage: "sweep".into(),
            message: format!("{unconverged} of {} points did not reach a plateau", table.rows.len()),
        });
    }
    Ok(report)
}

/// GHZ → cavity protection → decode → swap → photon pairing → polarization.
///
/// The final fidelity averages, over trajectories, the weight kept by the
/// clean-ancilla decode times the overlap of the output with the
/// polarization GHZ state. Trajectories whose decoded register is no longer
/// GHZ-class count as failures.
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let n = config.ghz.n_dots;
    if n % 2 == 1 {
        return Err(PipelineError::Config(vec![format!("pipeline needs an even ghz.n_dots to pair photons, got {n}")]));
    }
    let mut report = RunReport::new("pipeline", config);
    let (_, register) = prepare_register(config, &mut report)?;
    let records = protect_ensemble(config, &register, true)?;
    let mean_logical = records.iter().map(|r| r.logical_fidelity).sum::<f64>() / records.len() as f64;
    report.fidelity("protect_mean_logical", mean_logical)?;

    let p_swap = match config.swap.p_success {
        Some(p) => p,
        None => run_swap(config)?.0.final_p(),
    };
    if !(p_swap > 0.0) {
        return Err(PipelineError::stage("swap", format!("swap success probability {p_swap} is zero")));
    }
    let m = n / 2;
    let conv = &config.conversion;
    let herald_swap = p_swap.powi(n as i32);
    let herald_pair = conv.detector_efficiency.powi(m as i32);
    let herald_conv = conv.herald_per_photon().powi(m as i32);
    let target = PolarizationState::ghz(m);
    let layout = SubsystemLayout::qubits(n);
    let outcomes: Vec<Option<f64>> = records
        .par_iter()
        .map(|r| -> Result<Option<f64>, PipelineError> {
            let decoded = r.final_state.decoded_register(&r.tracked_alpha).map_err(|e| PipelineError::stage("decode", e))?;
            let kept: f64 = decoded.iter().map(|a| a.norm_sqr()).sum::<f64>() / r.final_state.norm_sqr();
            if kept < 1e-12 {
                return Ok(None);
            }
            let reg = StateVector::normalized(decoded, layout.clone()).map_err(|e| PipelineError::stage("decode", e))?;
            let photons = match register_swap(&reg, &vec![p_swap; n]) {
                Ok((ph, _)) => ph,
                Err(SwapError::NotGhzClass(_)) => return Ok(None),
                Err(e) => return Err(PipelineError::stage("swap", e)),
            };
            let dual = DualRailState::new(photons).map_err(|e| PipelineError::stage("pairing", e))?;
            let (paired, _) = pair_photons(&dual, conv).map_err(|e| PipelineError::stage("pairing", e))?;
            let (pol, _) = convert_register(&paired, conv).map_err(|e| PipelineError::stage("conversion", e))?;
            let f = fidelity(pol.state(), target.state()).map_err(|e| PipelineError::stage("conversion", e))?;
            Ok(Some(kept.min(1.0) * f))
        })
        .collect::<Result<_, _>>()?;
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    let final_fidelity = outcomes.iter().map(|o| o.unwrap_or(0.0)).sum::<f64>() / outcomes.len() as f64;
    report.fidelity("final", final_fidelity)?;
    report.heralds.insert("swap".into(), herald_swap);
    report.heralds.insert("pairing".into(), herald_pair);
    report.heralds.insert("conversion".into(), herald_conv);
    report.heralds.insert("total".into(), herald_swap * herald_pair * herald_conv);
    report.detail("trajectories", records.len());
    report.detail("failed_trajectories", failed);
    report.detail("polarization_photons", m);
    report.detail("p_swap_per_dot", p_swap);
    finish(report)
}
