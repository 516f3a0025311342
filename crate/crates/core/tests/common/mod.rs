#![allow(dead_code)]

use std::f64::consts::PI;

use multiphoton::photon_swap::{GaussianMode, ThreeLevelDot};
use multiphoton::spin_register::{CouplingKind, Schedule, Step};
use multiphoton::C64;
use nalgebra::{DMatrix, DVector};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// exp(−iHt) by scaling and squaring a truncated Taylor series.
pub fn taylor_exp(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let dim = h.nrows();
    let a = h * c(0.0, -t);
    let norm: f64 = a.iter().map(|x| x.norm()).sum::<f64>().max(1e-300);
    let s = (norm.log2().ceil().max(0.0) as i32) + 1;
    let a = a * c(0.5f64.powi(s), 0.0);
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..40 {
        term = &term * &a * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

pub fn paulis() -> [DMatrix<C64>; 4] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Tensor product over `n` qubits with `ops` placed at their sites, big-endian.
pub fn on_sites(n: usize, ops: &[(usize, &DMatrix<C64>)]) -> DMatrix<C64> {
    let id = &paulis()[0];
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for site in 0..n {
        let op = ops.iter().find(|(s, _)| *s == site).map(|(_, o)| *o).unwrap_or(id);
        m = m.kronecker(op);
    }
    m
}

/// Brute-force propagation of a spin schedule with dense 2^n generators.
pub fn dense_schedule(schedule: &Schedule, psi: &[C64]) -> Vec<C64> {
    let n = schedule.n_dots;
    let [_, x, y, z] = paulis();
    let dim = 1 << n;
    let mut v = DVector::from_column_slice(psi);
    for step in &schedule.steps {
        let (h, t) = match step {
            Step::Couple { coupling, strength, pairs, duration } => {
                let mut h = DMatrix::from_element(dim, dim, c(0.0, 0.0));
                for &(a, b) in pairs {
                    let terms: Vec<&DMatrix<C64>> = match coupling {
                        CouplingKind::Ising => vec![&z],
                        CouplingKind::Heisenberg => vec![&x, &y, &z],
                    };
                    for p in terms {
                        h += on_sites(n, &[(a, p), (b, p)]) * c(*strength, 0.0);
                    }
                }
                (h, *duration)
            }
            Step::Pulse(p) => {
                let axis = &x * c(p.phase.cos(), 0.0) + &y * c(p.phase.sin(), 0.0);
                (on_sites(n, &[(p.target, &(axis * c(p.angle / 2.0, 0.0)))]), 1.0)
            }
            Step::ZRotation { target, angle } => (on_sites(n, &[(*target, &(&z * c(angle / 2.0, 0.0)))]), 1.0),
        };
        // rescale so the series sees an O(1) generator
        let scale = h.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1.0);
        v = taylor_exp(&(h / c(scale, 0.0)), t * scale) * v;
    }
    v.iter().copied().collect()
}

pub fn plus_register(n: usize) -> Vec<C64> {
    let a = (1.0 / (1usize << n) as f64).sqrt();
    vec![c(a, 0.0); 1 << n]
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Fixed-step classical RK4 on the rotating-frame amplitude equations, built
/// from scratch on its own grid. Returns `P(t_end)` and the worst norm defect.
pub fn rk4_oracle(dot: &ThreeLevelDot, mode: &GaussianMode, k_min: f64, k_max: f64, n: usize, t_end: f64, h: f64) -> (f64, f64) {
    let dk = (k_max - k_min) / (n - 1) as f64;
    let ks: Vec<f64> = (0..n).map(|i| k_min + dk * i as f64).collect();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { dk / 2.0 } else { dk }).collect();
    let delta: Vec<f64> = ks.iter().map(|k| dot.w1 - k).collect();
    let a1 = (dot.gamma1 / (2.0 * PI)).sqrt();
    let a2 = (dot.gamma2 / (2.0 * PI)).sqrt();
    let peak = (2.0 / (PI * mode.d * mode.d)).powf(0.25);
    let mut g1: Vec<C64> = ks.iter().map(|k| C64::new(peak * (-(k - mode.center).powi(2) / (mode.d * mode.d)).exp(), 0.0)).collect();
    let mut g2 = vec![C64::new(0.0, 0.0); n];
    let mut g3 = C64::new(0.0, 0.0);

    let rhs = |t: f64, g1: &[C64], g2: &[C64], g3: C64, d1: &mut [C64], d2: &mut [C64]| -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            let e = C64::from_polar(1.0, delta[i] * t);
            d1[i] = -a1 * g3 * e.conj();
            d2[i] = -a2 * g3 * e.conj();
            s += w[i] * e * (a1 * g1[i] + a2 * g2[i]);
        }
        s
    };

    let steps = (t_end / h).round() as usize;
    let h = t_end / steps as f64;
    let z = C64::new(0.0, 0.0);
    let (mut k1a, mut k1b) = (vec![z; n], vec![z; n]);
    let (mut k2a, mut k2b) = (vec![z; n], vec![z; n]);
    let (mut k3a, mut k3b) = (vec![z; n], vec![z; n]);
    let (mut k4a, mut k4b) = (vec![z; n], vec![z; n]);
    let (mut ta, mut tb) = (vec![z; n], vec![z; n]);
    let mut worst: f64 = 0.0;
    for s in 0..steps {
        let t = s as f64 * h;
        let k1c = rhs(t, &g1, &g2, g3, &mut k1a, &mut k1b);
        for i in 0..n {
            ta[i] = g1[i] + 0.5 * h * k1a[i];
            tb[i] = g2[i] + 0.5 * h * k1b[i];
        }
        let k2c = rhs(t + 0.5 * h, &ta, &tb, g3 + 0.5 * h * k1c, &mut k2a, &mut k2b);
        for i in 0..n {
            ta[i] = g1[i] + 0.5 * h * k2a[i];
            tb[i] = g2[i] + 0.5 * h * k2b[i];
        }
        let k3c = rhs(t + 0.5 * h, &ta, &tb, g3 + 0.5 * h * k2c, &mut k3a, &mut k3b);
        for i in 0..n {
            ta[i] = g1[i] + h * k3a[i];
            tb[i] = g2[i] + h * k3b[i];
        }
        let k4c = rhs(t + h, &ta, &tb, g3 + h * k3c, &mut k4a, &mut k4b);
        for i in 0..n {
            g1[i] += h / 6.0 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i]);
            g2[i] += h / 6.0 * (k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i]);
        }
        g3 += h / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        let norm: f64 = (0..n).map(|i| w[i] * (g1[i].norm_sqr() + g2[i].norm_sqr())).sum::<f64>() + g3.norm_sqr();
        worst = worst.max((norm - 1.0).abs());
    }
    let p = (0..n).map(|i| w[i] * g2[i].norm_sqr()).sum();
    (p, worst)
}
