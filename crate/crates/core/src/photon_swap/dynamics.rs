use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{gaussian_mode, GaussianMode, SpectralGrid, SwapError, ThreeLevelDot};
use crate::C64;

/// Local error target per step, in units of the state norm.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest phase a grid mode may advance within one sampling interval.
const CFL_LIMIT: f64 = PI;
const MIN_STEPS_PER_SCALE: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Amplitudes `g(k)` with explicit `e^{±iδt}` couplings.
    Rotating,
    /// `b(k) = g(k) e^{iδt}`: autonomous, with free evolution `iδ b`.
    Lab,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    pub frame: Frame,
    pub tol: f64,
    /// Keep every `store_every`-th sampled state; 0 keeps only the first and last.
    pub store_every: usize,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { frame: Frame::Rotating, tol: DEFAULT_TOL, store_every: 0 }
    }
}

/// Rotating-frame amplitudes at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub t: f64,
    pub g1: Vec<C64>,
    pub g2: Vec<C64>,
    pub g3: C64,
}

impl AmplitudeState {
    pub fn norm_sqr(&self, weights: &[f64]) -> f64 {
        let field: f64 = self.g1.iter().zip(&self.g2).zip(weights).map(|((a, b), w)| w * (a.norm_sqr() + b.norm_sqr())).sum();
        field + self.g3.norm_sqr()
    }

    /// `∫dk |g2(k)|²`.
    pub fn emitted(&self, weights: &[f64]) -> f64 {
        self.g2.iter().zip(weights).map(|(a, w)| w * a.norm_sqr()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: SpectralGrid,
    pub times: Vec<f64>,
    /// `P(t)` at every sample time.
    pub p: Vec<f64>,
    /// Total norm at every sample time.
    pub norm: Vec<f64>,
    pub states: Vec<AmplitudeState>,
    pub steps: usize,
    pub rejected: usize,
}

impl Trajectory {
    pub fn final_p(&self) -> f64 {
        *self.p.last().expect("at least one sample")
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `P` at the sample closest to `t`.
    pub fn p_at(&self, t: f64) -> f64 {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.p[i]
    }
}

pub fn swap_probability(trajectory: &Trajectory) -> Vec<f64> {
    trajectory.p.clone()
}

pub fn integrate_dynamics(
    dot: &ThreeLevelDot,
    mode: &GaussianMode,
    grid: &SpectralGrid,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, SwapError> {
    integrate_with(dot, mode, grid, t_end, dt, &DynamicsOptions::default())
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Right-hand side of the coupled amplitude equations on a `[g1 | g2 | g3]`
/// vector.
struct System {
    n: usize,
    frame: Frame,
    c1: f64,
    c2: f64,
    weights: Vec<f64>,
    deltas: Vec<f64>,
    delta0: f64,
    spacing: f64,
}

impl System {
    fn eval(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.n;
        let (g1, rest) = y.split_at(n);
        let (g2, g3) = rest.split_at(n);
        let g3 = g3[0];
        let (d1, rest) = dy.split_at_mut(n);
        let (d2, d3) = rest.split_at_mut(n);
        let mut acc = C64::new(0.0, 0.0);
        match self.frame {
            Frame::Rotating => {
                // e^{iδ_i t} with δ_i = δ_0 − i·Δ
                let mut p = C64::from_polar(1.0, self.delta0 * t);
                let step = C64::from_polar(1.0, -self.spacing * t);
                for i in 0..n {
                    let q = g3 * p.conj();
                    d1[i] = q * -self.c1;
                    d2[i] = q * -self.c2;
                    acc += p * (g1[i] * self.c1 + g2[i] * self.c2) * self.weights[i];
                    p *= step;
                }
            }
            Frame::Lab => {
                for i in 0..n {
                    let id = C64::new(0.0, self.deltas[i]);
                    d1[i] = id * g1[i] - g3 * self.c1;
                    d2[i] = id * g2[i] - g3 * self.c2;
                    acc += (g1[i] * self.c1 + g2[i] * self.c2) * self.weights[i];
                }
            }
        }
        d3[0] = acc;
    }

    fn error_norm(&self, e: &[C64]) -> f64 {
        let n = self.n;
        let field: f64 = (0..n).map(|i| self.weights[i] * (e[i].norm_sqr() + e[n + i].norm_sqr())).sum();
        (field + e[2 * n].norm_sqr()).sqrt()
    }

    /// `(∫|g2|², total norm²)`; both are frame independent.
    fn populations(&self, y: &[C64]) -> (f64, f64) {
        let n = self.n;
        let (mut one, mut two) = (0.0, 0.0);
        for i in 0..n {
            one += self.weights[i] * y[i].norm_sqr();
            two += self.weights[i] * y[n + i].norm_sqr();
        }
        (two, one + two + y[2 * n].norm_sqr())
    }

    fn to_state(&self, t: f64, y: &[C64]) -> AmplitudeState {
        let n = self.n;
        let (mut g1, mut g2) = (y[..n].to_vec(), y[n..2 * n].to_vec());
        if self.frame == Frame::Lab {
            for i in 0..n {
                let ph = C64::from_polar(1.0, -self.deltas[i] * t);
                g1[i] *= ph;
                g2[i] *= ph;
            }
        }
        AmplitudeState { t, g1, g2, g3: y[2 * n] }
    }
}

/// Step-size update shared by both steppers; returns whether the step is
/// accepted and advances `t` if so.
fn control(en: f64, hs: f64, last: bool, h: &mut f64, t: &mut f64, t_target: f64) -> Result<bool, SwapError> {
    if !en.is_finite() {
        return Err(SwapError::Integrator(format!("non-finite error estimate at t = {t}")));
    }
    if en <= 1.0 {
        *t = if last { t_target } else { *t + hs };
        let grow = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        if !last || grow < 1.0 {
            *h = hs * grow;
        }
        Ok(true)
    } else {
        *h = hs * (0.9 * en.powf(-0.2)).clamp(0.1, 1.0);
        if *h < 1e-14 * t_target.abs().max(1.0) {
            return Err(SwapError::Integrator(format!("step size underflow at t = {t}")));
        }
        Ok(false)
    }
}

/// `out = y + Σ_j c_j k_j`.
fn combine<const M: usize>(out: &mut [C64], y: &[C64], ks: [&[C64]; M], cs: [f64; M]) {
    let n = out.len();
    let y = &y[..n];
    let ks = ks.map(|k| &k[..n]);
    for i in 0..n {
        let mut v = y[i];
        for j in 0..M {
            v += ks[j][i] * cs[j];
        }
        out[i] = v;
    }
}

struct Stepper {
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
    err: Vec<C64>,
    zero: Vec<C64>,
    fresh: bool,
    steps: usize,
    rejected: usize,
}

impl Stepper {
    fn new(len: usize) -> Self {
        Self {
            k: vec![vec![C64::new(0.0, 0.0); len]; 7],
            tmp: vec![C64::new(0.0, 0.0); len],
            err: vec![C64::new(0.0, 0.0); len],
            zero: vec![C64::new(0.0, 0.0); len],
            fresh: true,
            steps: 0,
            rejected: 0,
        }
    }

    /// Advances `y` from `t` to exactly `t_target` with adaptive steps.
    fn advance(&mut self, sys: &System, t: &mut f64, y: &mut [C64], t_target: f64, h: &mut f64, tol: f64) -> Result<(), SwapError> {
        if self.fresh {
            sys.eval(*t, y, &mut self.k[0]);
            self.fresh = false;
        }
        while *t < t_target {
            let remaining = t_target - *t;
            let last = *h >= remaining;
            let hs = if last { remaining } else { *h };
            let k = &self.k;
            let a = |s: usize, j: usize| A[s][j] * hs;
            combine(&mut self.tmp, y, [&k[0]], [a(1, 0)]);
            sys.eval(*t + C[1] * hs, &self.tmp, &mut self.k[1]);
            let k = &self.k;
            combine(&mut self.tmp, y, [&k[0], &k[1]], [a(2, 0), a(2, 1)]);
            sys.eval(*t + C[2] * hs, &self.tmp, &mut self.k[2]);
            let k = &self.k;
            combine(&mut self.tmp, y, [&k[0], &k[1], &k[2]], [a(3, 0), a(3, 1), a(3, 2)]);
            sys.eval(*t + C[3] * hs, &self.tmp, &mut self.k[3]);
            let k = &self.k;
            combine(&mut self.tmp, y, [&k[0], &k[1], &k[2], &k[3]], [a(4, 0), a(4, 1), a(4, 2), a(4, 3)]);
            sys.eval(*t + C[4] * hs, &self.tmp, &mut self.k[4]);
            let k = &self.k;
            combine(&mut self.tmp, y, [&k[0], &k[1], &k[2], &k[3], &k[4]], [a(5, 0), a(5, 1), a(5, 2), a(5, 3), a(5, 4)]);
            sys.eval(*t + C[5] * hs, &self.tmp, &mut self.k[5]);
            let k = &self.k;
            combine(&mut self.tmp, y, [&k[0], &k[2], &k[3], &k[4], &k[5]], [a(6, 0), a(6, 2), a(6, 3), a(6, 4), a(6, 5)]);
            sys.eval(*t + hs, &self.tmp, &mut self.k[6]);
            // tmp holds the 5th-order solution; k[6] is its derivative
            let k = &self.k;
            let e = |j: usize| E[j] * hs;
            combine(&mut self.err, &self.zero, [&k[0], &k[2], &k[3], &k[4], &k[5], &k[6]], [e(0), e(2), e(3), e(4), e(5), e(6)]);
            let en = sys.error_norm(&self.err) / tol;
            if control(en, hs, last, h, t, t_target)? {
                y.copy_from_slice(&self.tmp);
                self.k.swap(0, 6);
                self.steps += 1;
            } else {
                self.rejected += 1;
            }
        }
        Ok(())
    }
}

/// Dormand–Prince in the rotating frame using the structure of the equations:
/// field derivatives depend only on `g3` and `t`, so every stage reduces to
/// projections of the step-start field plus the closed-form kernel
/// `K(τ) = Σ_i w_i e^{iδ_i τ}`. Arithmetically equivalent to the generic
/// stepper on the full `2n + 1` system, with two grid passes per step.
struct KernelStepper {
    n: usize,
    c1: f64,
    c2: f64,
    weights: Vec<f64>,
    delta0: f64,
    delta_last: f64,
    spacing: f64,
    steps: usize,
    rejected: usize,
}

const PROJ_STAGES: [usize; 6] = [0, 1, 2, 3, 4, 5];
const UPDATE_STAGES: [usize; 5] = [0, 2, 3, 4, 5];

impl KernelStepper {
    fn new(sys: &System) -> Self {
        Self {
            n: sys.n,
            c1: sys.c1,
            c2: sys.c2,
            weights: sys.weights.clone(),
            delta0: sys.delta0,
            delta_last: sys.deltas[sys.n - 1],
            spacing: sys.spacing,
            steps: 0,
            rejected: 0,
        }
    }

    fn kernel(&self, tau: f64) -> C64 {
        let x = self.spacing * tau;
        let half = (0.5 * x).sin();
        let n = self.n as f64;
        let dirichlet = if half == 0.0 { n } else { (0.5 * n * x).sin() / half };
        let head = C64::from_polar(1.0, self.delta0 * tau);
        let tail = C64::from_polar(1.0, self.delta_last * tau);
        (head * C64::from_polar(dirichlet, -0.5 * (n - 1.0) * x) - (head + tail) * 0.5) * self.spacing
    }

    fn phasors<const M: usize>(&self, taus: [f64; M]) -> ([C64; M], [C64; M]) {
        (taus.map(|t| C64::from_polar(1.0, self.delta0 * t)), taus.map(|t| C64::from_polar(1.0, -self.spacing * t)))
    }

    /// `Σ_i w_i e^{iδ_i τ} (c1 g1_i + c2 g2_i)` for each stage time.
    fn projections(&self, y: &[C64], taus: [f64; 6]) -> [C64; 6] {
        let n = self.n;
        let (g1, g2, w) = (&y[..n], &y[n..2 * n], &self.weights[..n]);
        let (mut p, r) = self.phasors(taus);
        let mut acc = [C64::new(0.0, 0.0); 6];
        for i in 0..n {
            let s = (g1[i] * self.c1 + g2[i] * self.c2) * w[i];
            for j in 0..6 {
                acc[j] += p[j] * s;
                p[j] *= r[j];
            }
        }
        acc
    }

    fn update(&self, y: &mut [C64], taus: [f64; 5], coef: [C64; 5]) {
        let n = self.n;
        let (g1, rest) = y.split_at_mut(n);
        let g2 = &mut rest[..n];
        let (p, r) = self.phasors(taus);
        let (mut p, r) = (p.map(|z| z.conj()), r.map(|z| z.conj()));
        for i in 0..n {
            let mut q = C64::new(0.0, 0.0);
            for j in 0..5 {
                q += p[j] * coef[j];
                p[j] *= r[j];
            }
            g1[i] -= q * self.c1;
            g2[i] -= q * self.c2;
        }
    }

    fn advance(&mut self, t: &mut f64, y: &mut [C64], t_target: f64, h: &mut f64, tol: f64) -> Result<(), SwapError> {
        let n = self.n;
        let csq = self.c1 * self.c1 + self.c2 * self.c2;
        let zero = C64::new(0.0, 0.0);
        while *t < t_target {
            let remaining = t_target - *t;
            let last = *h >= remaining;
            let hs = if last { remaining } else { *h };
            let taus = C.map(|c| *t + c * hs);
            let d = self.projections(y, PROJ_STAGES.map(|j| taus[j]));
            let mut kmat = [[zero; 7]; 7];
            for (m, row) in kmat.iter_mut().enumerate() {
                for (l, v) in row.iter_mut().enumerate() {
                    *v = self.kernel((C[m] - C[l]) * hs);
                }
            }
            let g3 = y[2 * n];
            let mut gs = [g3; 7];
            let mut k3 = [d[0]; 7];
            for j in 1..7 {
                let mut g = g3;
                let mut k = d[j.min(5)];
                for l in 0..j {
                    g += k3[l] * (hs * A[j][l]);
                    k -= gs[l] * kmat[j][l] * (csq * hs * A[j][l]);
                }
                gs[j] = g;
                k3[j] = k;
            }
            let e3: C64 = (0..7).map(|l| k3[l] * (hs * E[l])).sum();
            let mut field = zero;
            for l in 0..7 {
                for m in 0..7 {
                    field += gs[l] * gs[m].conj() * kmat[m][l] * (E[l] * E[m]);
                }
            }
            let field = (csq * hs * hs * field.re).max(0.0);
            let en = (field + e3.norm_sqr()).sqrt() / tol;
            if control(en, hs, last, h, t, t_target)? {
                let coef = UPDATE_STAGES.map(|l| gs[l] * (hs * A[6][l]));
                self.update(y, UPDATE_STAGES.map(|l| taus[l]), coef);
                y[2 * n] = gs[6];
                self.steps += 1;
            } else {
                self.rejected += 1;
            }
        }
        Ok(())
    }
}

/// Integrates from `g1 = f, g2 = 0, g3 = 0` at `t = 0` to `t_end`, sampling
/// every `dt` (rounded down so samples tile `[0, t_end]`).
///
/// `dt` must give at least 20 samples per `1/max(Γ1 + Γ2, d)` and advance
/// no grid mode by more than π; the run must end before the grid revival.
pub fn integrate_with(
    dot: &ThreeLevelDot,
    mode: &GaussianMode,
    grid: &SpectralGrid,
    t_end: f64,
    dt: f64,
    opts: &DynamicsOptions,
) -> Result<Trajectory, SwapError> {
    integrate_impl(dot, mode, grid, t_end, dt, opts, false)
}

fn integrate_impl(
    dot: &ThreeLevelDot,
    mode: &GaussianMode,
    grid: &SpectralGrid,
    t_end: f64,
    dt: f64,
    opts: &DynamicsOptions,
    generic_only: bool,
) -> Result<Trajectory, SwapError> {
    dot.validate()?;
    let f = gaussian_mode(mode, grid)?;
    if dot.w2 < grid.k_max - grid.k_min {
        return Err(SwapError::GridTooNarrow(format!("rails overlap: w2 = {} < grid span {}", dot.w2, grid.k_max - grid.k_min)));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() || !(dt > 0.0) || !dt.is_finite() {
        return Err(SwapError::StepSize(format!("need t_end >= 0 and dt > 0, got {t_end}, {dt}")));
    }
    if !(opts.tol > 0.0) {
        return Err(SwapError::StepSize(format!("tolerance {} must be > 0", opts.tol)));
    }
    let fastest = dot.gamma_total().max(mode.d);
    if dt * fastest * MIN_STEPS_PER_SCALE > 1.0 + 1e-12 {
        return Err(SwapError::StepSize(format!("dt = {dt} exceeds 1/(20·{fastest})")));
    }
    let deltas: Vec<f64> = grid.points().iter().map(|k| dot.w1 - k).collect();
    let wmax = deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if dt * wmax > CFL_LIMIT {
        return Err(SwapError::StepSize(format!("dt·max|δ| = {} > π", dt * wmax)));
    }
    if t_end >= grid.revival_time() {
        return Err(SwapError::Aliasing(format!("t_end = {t_end} reaches the grid revival time {}", grid.revival_time())));
    }
    let n = grid.n_k;
    let sys = System {
        n,
        frame: opts.frame,
        c1: (dot.gamma1 / (2.0 * PI)).sqrt(),
        c2: (dot.gamma2 / (2.0 * PI)).sqrt(),
        weights: grid.weights(),
        delta0: deltas[0],
        spacing: grid.spacing(),
        deltas,
    };
    let mut y = Vec::with_capacity(2 * n + 1);
    y.extend_from_slice(&f);
    y.extend(std::iter::repeat(C64::new(0.0, 0.0)).take(n + 1));

    let samples = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut times = Vec::with_capacity(samples + 1);
    let mut p = Vec::with_capacity(samples + 1);
    let mut norm = Vec::with_capacity(samples + 1);
    let mut states = vec![sys.to_state(0.0, &y)];
    let mut record = |t: f64, y: &[C64]| {
        let (emitted, total) = sys.populations(y);
        times.push(t);
        p.push(emitted.clamp(0.0, 1.0));
        norm.push(total);
    };
    record(0.0, &y);
    let mut generic = Stepper::new(y.len());
    let mut kernel = KernelStepper::new(&sys);
    let use_kernel = opts.frame == Frame::Rotating && !generic_only;
    let mut t = 0.0;
    let mut h = (0.5 / wmax.max(fastest)).min(if samples > 0 { t_end / samples as f64 } else { 1.0 });
    for j in 1..=samples {
        let target = t_end * j as f64 / samples as f64;
        if use_kernel {
            kernel.advance(&mut t, &mut y, target, &mut h, opts.tol)?;
        } else {
            generic.advance(&sys, &mut t, &mut y, target, &mut h, opts.tol)?;
        }
        record(t, &y);
        if j == samples || (opts.store_every > 0 && j % opts.store_every == 0) {
            states.push(sys.to_state(t, &y));
        }
    }
    let (steps, rejected) = if use_kernel { (kernel.steps, kernel.rejected) } else { (generic.steps, generic.rejected) };
    let traj = Trajectory { grid: *grid, times, p, norm, states, steps, rejected };
    let drift = traj.max_norm_defect();
    if drift > 1e-4 {
        return Err(SwapError::Aliasing(format!("norm drift {drift:e}")));
    }
    Ok(traj)
}
