//! One line per acceptance criterion; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{c, dense_schedule, max_diff, plus_register, rk4_oracle};
use multiphoton::cat_code::{build_chain, cat, cat_overlap_closed_form, compare_arms, run_ensemble, CavitySpec, Encoder, Parity, ProtocolSpec};
use multiphoton::hilbert::{bipartitions, fidelity, schmidt_spectrum, StateVector};
use multiphoton::photon_swap::{
    eq16_closed_form, integrate_dynamics, sweep_fig4, ComparisonReport, GaussianMode, SpectralGrid, SweepOptions,
    ThreeLevelDot,
};
use multiphoton::pipeline::{run_command, Command, PipelineConfig};
use multiphoton::polarization::ConversionSpec;
use multiphoton::spin_register::{
    apply_correction, bell_steps, build_bell, execute, ghz_correction, initial_register, is_ghz_class, merge_blocks,
    merge_blocks_with_delta, plan_ghz, Schedule, TimingReport,
};
use multiphoton::C64;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

const J: f64 = 1e8;

fn bell_construction() -> Outcome {
    let b = build_bell(J).map_err(|e| e.to_string())?;
    let f = fidelity(&b.bell, &StateVector::ghz(2)).unwrap();
    check(f >= 1.0 - 1e-10, format!("Bell fidelity {f}"))?;
    let m = C64::from_polar(0.5, -PI / 4.0);
    let p = C64::from_polar(0.5, PI / 4.0);
    let dev = max_diff(b.intermediate.amplitudes(), &[m, p, p, m]);
    check(dev < 1e-10, format!("intermediate amplitudes off by {dev:e}"))?;
    let sched = Schedule { n_dots: 2, steps: bell_steps(&[(0, 1)], J) };
    let oracle = dense_schedule(&sched, &plus_register(2));
    let dev_oracle = max_diff(b.bell.amplitudes(), &oracle);
    check(dev_oracle < 1e-10, format!("dense oracle differs by {dev_oracle:e}"))?;
    Ok(format!("fidelity 1-{:.1e}, intermediate dev {dev:.1e}", 1.0 - f))
}

fn four_dot_ghz() -> Outcome {
    let pairs = execute(&Schedule { n_dots: 4, steps: bell_steps(&[(0, 1), (2, 3)], J) }, &initial_register(4)).unwrap();
    let merged = merge_blocks(&pairs, &[0, 1], &[2, 3], J, J).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let parts = bipartitions(4);
    check(parts.len() == 7, "expected 7 bipartitions")?;
    for part in &parts {
        let s = schmidt_spectrum(&merged, part).unwrap();
        worst = worst.max((s[0] - FRAC_1_SQRT_2).abs()).max((s[1] - FRAC_1_SQRT_2).abs());
        worst = s[2..].iter().fold(worst, |w, v| w.max(v.abs()));
    }
    check(worst <= 1e-8, format!("Schmidt deviation {worst:e}"))?;
    let corr = ghz_correction(&merged).map_err(|e| e.to_string())?;
    check(corr.x_flips.len() == 1, format!("correction uses {} X flips", corr.x_flips.len()))?;
    let fixed = apply_correction(&merged, &corr).unwrap();
    let f = fidelity(&fixed, &StateVector::ghz(4)).unwrap();
    check(f >= 1.0 - 1e-8, format!("corrected fidelity {f}"))?;

    let mut steps = bell_steps(&[(0, 1), (2, 3)], J);
    steps.extend(multiphoton::spin_register::merge_steps(0, 2, 3, J, J, PI / 2.0));
    let oracle = dense_schedule(&Schedule { n_dots: 4, steps }, &plus_register(4));
    let dev = max_diff(merged.amplitudes(), &oracle);
    check(dev < 1e-10, format!("16-dim dense oracle differs by {dev:e}"))?;

    let control = merge_blocks_with_delta(&pairs, &[0, 1], &[2, 3], J, J, 0.0).unwrap();
    check(!is_ghz_class(&control, 1e-8), "zero-phase control passed the GHZ-class check")?;
    Ok(format!("Schmidt dev {worst:.1e}, X on dot {:?}, Z angle {:.4}, fidelity 1-{:.1e}, oracle dev {dev:.1e}, control rejected", corr.x_flips, corr.z_angle, 1.0 - f))
}

fn timing_formula() -> Outcome {
    let mut rows = Vec::new();
    for n in 2..=10 {
        let (sched, t) = plan_ghz(n, J, J).map_err(|e| e.to_string())?;
        check(
            (t.t_ising_steps, t.t_heisenberg_steps) == ((n + 1) / 2, (n - 1) / 2),
            format!("n={n}: steps ({}, {})", t.t_ising_steps, t.t_heisenberg_steps),
        )?;
        check(sched.timing() == t, format!("n={n}: schedule timing differs from report"))?;
        let f = TimingReport::formula(n, J, J);
        check((f.total - t.total).abs() < 1e-22, format!("n={n}: formula total differs"))?;
        let ratio = t.total / (n as f64 * 1e-8);
        check(ratio.log10().abs() < 1.0, format!("n={n}: total {:e} s not within a decade of n*1e-8", t.total))?;
        rows.push(format!("{n}:{:.2e}", t.total));
    }
    Ok(format!("totals [s] {}", rows.join(" ")))
}

fn cat_structure() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut overlaps = Vec::new();
    for alpha in [1.0, 1.5, 2.0, 2.5] {
        let n_max = 80;
        let a = cat(c(alpha, 0.0), Parity::Even, n_max).unwrap();
        let b = cat(c(0.0, alpha), Parity::Even, n_max).unwrap();
        let fock = a.inner(&b).unwrap().norm();
        let closed = cat_overlap_closed_form(c(alpha, 0.0)).norm();
        worst = worst.max((fock - closed).abs());
        check(closed <= 4.0 * (-alpha * alpha).exp(), format!("alpha={alpha}: overlap {closed} above e^-|a|^2 scale"))?;
        overlaps.push(format!("{alpha}:{fock:.3e}"));
    }
    check(worst < 1e-8, format!("Fock sum vs closed form {worst:e}"))?;
    let mut worst_rt: f64 = 0.0;
    for alpha in [1.0, 1.5, 2.0, 2.5] {
        let spec = CavitySpec::new(c(alpha, 0.0), 0.0).unwrap();
        let e = Encoder::new(&spec).unwrap();
        let d = spec.dim();
        let mut v = vec![c(0.0, 0.0); 4 * d];
        v[0] = c(0.6, 0.0);
        v[3 * d] = c(0.0, 0.8);
        let input = StateVector::new(v, e.layout()).unwrap();
        let back = e.decode(&e.encode(&input).unwrap()).unwrap();
        worst_rt = worst_rt.max(1.0 - fidelity(&back, &input).unwrap());
    }
    check(worst_rt <= 1e-8, format!("round trip infidelity {worst_rt:e}"))?;
    Ok(format!("|overlap| {}, max dev {worst:.1e}, round trip 1-{worst_rt:.1e}", overlaps.join(" ")))
}

fn protect_setup() -> (CavitySpec, StateVector, multiphoton::cat_code::ChainState) {
    let spec = CavitySpec::new(c(2.0, 0.0), 1.0).unwrap();
    let register = StateVector::ghz(4);
    let chain = build_chain(&register, 0, 3, &spec).unwrap();
    (spec, register, chain)
}

fn parity_exactness() -> Outcome {
    let (spec, register, chain) = protect_setup();
    let mut exceptions = 0;
    let mut outcomes = 0;
    let mut jumps = 0;
    for corrected in [true, false] {
        let protocol = ProtocolSpec { duration: 0.2, tau_syn: 0.05, corrected };
        let records = run_ensemble(&chain, &register, &[spec; 3], &protocol, 5, 1000).map_err(|e| e.to_string())?;
        for r in &records {
            check(r.syndrome_times.len() == 4, "expected 4 syndrome rounds")?;
            for (times, seq) in r.jump_times.iter().zip(&r.parity_outcomes) {
                jumps += times.len();
                let mut prev_t = 0.0;
                let mut prev_parity = 1i8;
                for (&ts, &o) in r.syndrome_times.iter().zip(seq) {
                    let k = times.iter().filter(|&&t| t > prev_t && t <= ts).count();
                    let flip = if k % 2 == 0 { 1 } else { -1 };
                    // after recovery the cavity is back to even parity
                    let reference = if corrected { 1 } else { prev_parity };
                    if o != reference * flip {
                        exceptions += 1;
                    }
                    outcomes += 1;
                    prev_parity = o;
                    prev_t = ts;
                }
            }
        }
    }
    check(exceptions == 0, format!("{exceptions} parity outcomes disagree with jump counts"))?;
    Ok(format!("{outcomes} outcomes over 2x1000 trajectories, {jumps} jumps, 0 exceptions"))
}

fn correction_gain() -> Outcome {
    let (spec, register, chain) = protect_setup();
    let mut rows = Vec::new();
    for kt in [0.05, 0.1, 0.2] {
        let arm = |corrected| {
            let protocol = ProtocolSpec { duration: kt, tau_syn: 0.05, corrected };
            run_ensemble(&chain, &register, &[spec; 3], &protocol, 20240901, 1000)
        };
        let cmp = compare_arms(&arm(true).map_err(|e| e.to_string())?, &arm(false).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        check(
            cmp.mean_corrected > cmp.mean_uncorrected && cmp.significance >= 3.0,
            format!("kt={kt}: corrected {} uncorrected {} at {:.1} sigma", cmp.mean_corrected, cmp.mean_uncorrected, cmp.significance),
        )?;
        rows.push(format!("kt={kt}: {:.3} vs {:.3} ({:.1} sigma)", cmp.mean_corrected, cmp.mean_uncorrected, cmp.significance));
    }
    Ok(rows.join("; "))
}

fn swap_setup(gamma: f64, d: f64, t_end: f64) -> (ThreeLevelDot, GaussianMode, SpectralGrid, f64) {
    let dot = ThreeLevelDot { w1: 1e6, w2: 5e5, gamma1: gamma, gamma2: gamma };
    let mode = GaussianMode { d, center: dot.w1 };
    let grid = SpectralGrid::for_run(&dot, &mode, t_end).unwrap();
    let dt = 1.0 / (20.0 * dot.gamma_total().max(d));
    (dot, mode, grid, dt)
}

fn scattering_dynamics() -> Outcome {
    let (dot, mode, grid, dt) = swap_setup(1.0, 1.0, 20.0);
    let tr = integrate_dynamics(&dot, &mode, &grid, 20.0, dt).map_err(|e| e.to_string())?;
    let mut norm = tr.max_norm_defect();
    for (d, g) in [(0.1f64, 10.0f64), (10.0, 0.1), (3.0, 3.0)] {
        let t = (6.0 / d).max(5.0 / g);
        let (dot, mode, grid, dt) = swap_setup(g, d, t);
        norm = norm.max(integrate_dynamics(&dot, &mode, &grid, t, dt).map_err(|e| e.to_string())?.max_norm_defect());
    }
    check(norm <= 1e-6, format!("norm defect {norm:e}"))?;

    let dark = ThreeLevelDot { gamma2: 0.0, ..dot };
    let dark_grid = SpectralGrid::for_run(&dark, &mode, 20.0).unwrap();
    let dark_p = integrate_dynamics(&dark, &mode, &dark_grid, 20.0, dt).map_err(|e| e.to_string())?.p;
    check(dark_p.iter().all(|&p| p == 0.0), "dark transition emitted")?;

    let fine = 4 * (grid.n_k - 1) + 1;
    let (p_oracle, oracle_norm) = rk4_oracle(&dot, &mode, grid.k_min, grid.k_max, fine, 20.0, dt / 8.0);
    let diff = (tr.final_p() - p_oracle).abs();
    check(diff < 1e-4 && oracle_norm < 1e-6, format!("RK4 oracle differs by {diff:e}"))?;

    let mut scale_dev: f64 = 0.0;
    for s in [0.5, 4.0] {
        let (dot, mode, grid, dt) = swap_setup(s, s, 20.0 / s);
        let scaled = integrate_dynamics(&dot, &mode, &grid, 20.0 / s, dt).map_err(|e| e.to_string())?;
        check(scaled.p.len() == tr.p.len(), "rescaled run has a different sample count")?;
        scale_dev = scaled.p.iter().zip(&tr.p).map(|(a, b)| (a - b).abs()).fold(scale_dev, f64::max);
    }
    check(scale_dev <= 1e-6, format!("rescaling changes P by {scale_dev:e}"))?;
    Ok(format!(
        "P(20)={:.6}, norm defect {norm:.1e}, dark P=0 exactly, RK4 4x diff {diff:.1e}, rescaling dev {scale_dev:.1e}",
        tr.final_p()
    ))
}

fn fig4_reproduction() -> Outcome {
    let opts = SweepOptions::default();
    check(opts.n_d == 20 && opts.n_gamma == 20 && opts.d_range == (0.1, 10.0) && opts.gamma_range == (0.1, 10.0), "default sweep box changed")?;
    let table = sweep_fig4(&opts).map_err(|e| e.to_string())?;
    check(table.rows.len() == 400, format!("{} rows", table.rows.len()))?;
    check(table.all_converged(), format!("{} points unconverged", table.rows.iter().filter(|r| !r.converged).count()))?;
    check(table.rows.iter().all(|r| (0.0..=1.0).contains(&r.p_longtime)), "P outside [0, 1]")?;
    let best = table.max_row().unwrap().clone();
    let dot = ThreeLevelDot { w1: opts.w1, w2: opts.w2, gamma1: best.gamma, gamma2: best.gamma };
    let mode = GaussianMode { d: best.d, center: opts.w1 };
    let grid = SpectralGrid::for_run(&dot, &mode, best.t_end).unwrap();
    let closed = eq16_closed_form(&dot, &mode, &grid, best.t_end).map_err(|e| e.to_string())?;
    let report = ComparisonReport::new(&dot, &mode, &closed, best.p_longtime);
    println!("    discrepancy report at the maximum: {}", serde_json::to_string(&report).unwrap());
    let (dot, mode, grid, dt) = swap_setup(1.0, 1.0, 20.0);
    let p_ref = integrate_dynamics(&dot, &mode, &grid, 20.0, dt).map_err(|e| e.to_string())?.final_p();
    let closed = eq16_closed_form(&dot, &mode, &grid, 20.0).map_err(|e| e.to_string())?;
    let report = ComparisonReport::new(&dot, &mode, &closed, p_ref);
    println!("    discrepancy report at d=gamma=1: {}", serde_json::to_string(&report).unwrap());
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    let _ = fs::create_dir_all("target");
    let _ = fs::write(Path::new("target").join("acceptance_sweep.csv"), csv);
    // the property checks of criterion 7 must hold when the surface stays below 0.9
    if best.p_longtime < 0.9 {
        scattering_dynamics().map_err(|e| format!("surface max below 0.9 and dynamics checks fail: {e}"))?;
        return Ok(format!(
            "documented outcome: 400/400 converged, surface max P={:.4} at d={}, gamma={} is below the expected 0.9; dynamics checks pass; discrepancy report emitted",
            best.p_longtime, best.d, best.gamma
        ));
    }
    Ok(format!("400/400 converged, surface max P={:.4} at d={}, gamma={}", best.p_longtime, best.d, best.gamma))
}

fn ideal_pipeline() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.ghz.n_dots = 8;
    cfg.protect.kappa = 0.0;
    cfg.swap.p_success = Some(1.0);
    cfg.conversion = ConversionSpec::ideal();
    cfg.run.out_dir = dir.path().to_path_buf();
    let report = run_command(Command::Pipeline, &cfg).map_err(|e| e.to_json())?;
    let f = report.fidelities["final"];
    check(f >= 1.0 - 1e-6, format!("final fidelity {f}"))?;
    check(report.details["polarization_photons"] == 4, "expected 4 photons")?;
    check(report.heralds["total"] == 1.0, format!("ideal herald {}", report.heralds["total"]))?;

    let mut lossy = cfg.clone();
    lossy.swap.p_success = Some(0.9);
    lossy.conversion = ConversionSpec { eta_bbo: 0.7, detector_efficiency: 0.8 };
    lossy.protect.n_trajectories = 10;
    let r = run_command(Command::Pipeline, &lossy).map_err(|e| e.to_json())?;
    let exact = 0.9f64.powi(8) * 0.8f64.powi(4) * (0.7f64 * 0.8).powi(4);
    check((r.heralds["total"] / exact - 1.0).abs() < 1e-14, format!("herald {} vs {exact}", r.heralds["total"]))?;
    Ok(format!("4-photon fidelity 1-{:.1e}, herald 1 (lossy check {exact:.6e})", 1.0 - f))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir).unwrap().map(|e| (e.as_ref().unwrap().file_name().to_string_lossy().into_owned(), fs::read(e.unwrap().path()).unwrap())).collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut base = PipelineConfig::default();
    base.run.out_dir = dir.path().join("out");
    base.run.base_seed = 77;
    base.protect.n_trajectories = 200;
    base.swap.t_end = 8.0;
    base.sweep.n_d = 2;
    base.sweep.n_gamma = 2;
    base.sweep.d_range = (1.0, 10.0);
    base.sweep.gamma_range = (1.0, 10.0);
    let mut checked = 0;
    for command in [Command::Ghz, Command::Protect, Command::Swap, Command::Sweep, Command::Pipeline] {
        let mut first = None;
        for workers in [1, 2, 4] {
            let _ = fs::remove_dir_all(&base.run.out_dir);
            let mut cfg = base.clone();
            cfg.run.workers = Some(workers);
            let report = run_command(command, &cfg).map_err(|e| e.to_json())?;
            let files = snapshot(&cfg.run.out_dir);
            let this = (report.to_json(), files);
            match &first {
                None => first = Some(this),
                Some(prev) => check(prev == &this, format!("{command:?} output differs at {workers} workers"))?,
            }
            checked += 1;
        }
    }
    Ok(format!("5 commands x 3 worker counts ({checked} runs), all outputs byte-identical"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 10] = [
        ("1 Bell construction", bell_construction, Duration::from_secs(1)),
        ("2 four-dot GHZ schedule", four_dot_ghz, Duration::from_secs(5)),
        ("3 timing formula", timing_formula, Duration::from_secs(1)),
        ("4 cat-state structure", cat_structure, Duration::from_secs(5)),
        ("5 parity syndrome exactness", parity_exactness, Duration::from_secs(60)),
        ("6 error-correction gain", correction_gain, Duration::from_secs(300)),
        ("7 scattering dynamics", scattering_dynamics, Duration::from_secs(120)),
        ("8 surface sweep", fig4_reproduction, Duration::from_secs(600)),
        ("9 ideal end-to-end pipeline", ideal_pipeline, Duration::from_secs(60)),
        ("10 determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {:.1} s, limit {:.0} s", elapsed.as_secs_f64(), limit.as_secs_f64())),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS criterion {name} [{:.2} s]: {msg}", elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name} [{:.2} s]: {msg}", elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
