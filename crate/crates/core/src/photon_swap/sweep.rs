use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate_with, DynamicsOptions, GaussianMode, SpectralGrid, SwapError, ThreeLevelDot};

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub d_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub n_d: usize,
    pub n_gamma: usize,
    /// Starting run length; `None` uses `max(6/d, 10/(Γ1+Γ2))`.
    pub t_end: Option<f64>,
    pub w1: f64,
    pub w2: f64,
    pub plateau_tol: f64,
    pub max_doublings: u32,
    pub samples_per_scale: f64,
    pub tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            d_range: (0.1, 10.0),
            gamma_range: (0.1, 10.0),
            n_d: 20,
            n_gamma: 20,
            t_end: None,
            w1: 1e6,
            w2: 5e5,
            plateau_tol: 1e-3,
            max_doublings: 3,
            samples_per_scale: 20.0,
            tol: super::DEFAULT_TOL,
        }
    }
}

impl SweepOptions {
    pub fn validate(&self) -> Result<(), SwapError> {
        let (d0, d1) = self.d_range;
        let (g0, g1) = self.gamma_range;
        if !(d0 > 0.0 && d1 >= d0 && g0 >= 0.0 && g1 >= g0) || ![d0, d1, g0, g1].iter().all(|x| x.is_finite()) {
            return Err(SwapError::InvalidGrid(format!("bad sweep ranges d {:?}, gamma {:?}", self.d_range, self.gamma_range)));
        }
        if self.n_d == 0 || self.n_gamma == 0 {
            return Err(SwapError::InvalidGrid("sweep resolution must be >= 1".into()));
        }
        if !(self.plateau_tol > 0.0) || !(self.samples_per_scale >= 20.0) {
            return Err(SwapError::InvalidGrid("plateau_tol > 0 and samples_per_scale >= 20 required".into()));
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) || !t.is_finite() {
                return Err(SwapError::StepSize(format!("t_end = {t} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn d_values(&self) -> Vec<f64> {
        linspace(self.d_range.0, self.d_range.1, self.n_d)
    }

    pub fn gamma_values(&self) -> Vec<f64> {
        linspace(self.gamma_range.0, self.gamma_range.1, self.n_gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: f64,
    pub gamma: f64,
    pub p_longtime: f64,
    #[serde(with = "flag")]
    pub converged: bool,
    pub t_end: f64,
    pub n_k: usize,
}

mod flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        Ok(u8::deserialize(d)? != 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn max_row(&self) -> Option<&SweepRow> {
        self.rows.iter().max_by(|a, b| a.p_longtime.total_cmp(&b.p_longtime))
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Long-time swap probability at one `(d, Γ = Γ1 = Γ2)` point.
///
/// The run length doubles until `|P(T) − P(0.9T)| ≤ plateau_tol`, at most
/// `max_doublings` times; a point that never settles is returned with
/// `converged = false`.
pub fn sweep_point(d: f64, gamma: f64, opts: &SweepOptions) -> Result<SweepRow, SwapError> {
    let dot = ThreeLevelDot { w1: opts.w1, w2: opts.w2, gamma1: gamma, gamma2: gamma };
    let mode = GaussianMode { d, center: opts.w1 };
    let gc = dot.gamma_total();
    let mut t_end = opts.t_end.unwrap_or_else(|| {
        let t = 6.0 / d;
        if gc > 0.0 { t.max(10.0 / gc) } else { t }
    });
    let fastest = gc.max(d);
    let dyn_opts = DynamicsOptions { tol: opts.tol, ..Default::default() };
    let mut attempt = 0;
    loop {
        let grid = SpectralGrid::for_run(&dot, &mode, t_end)?;
        let samples = ((t_end * fastest * opts.samples_per_scale / 10.0).ceil() as usize).max(1) * 10;
        let traj = integrate_with(&dot, &mode, &grid, t_end, t_end / samples as f64, &dyn_opts)?;
        let p_end = traj.final_p();
        let p_tail = traj.p[samples * 9 / 10];
        let converged = (p_end - p_tail).abs() <= opts.plateau_tol;
        if converged || attempt >= opts.max_doublings {
            return Ok(SweepRow { d, gamma, p_longtime: p_end, converged, t_end, n_k: grid.n_k });
        }
        attempt += 1;
        t_end *= 2.0;
    }
}

/// Evaluates every `(d, Γ)` pair (d outer, Γ inner) in parallel; rows are
/// returned in grid order.
pub fn sweep_fig4(opts: &SweepOptions) -> Result<SweepTable, SwapError> {
    opts.validate()?;
    let ds = opts.d_values();
    let gs = opts.gamma_values();
    let points: Vec<(f64, f64)> = ds.iter().flat_map(|&d| gs.iter().map(move |&g| (d, g))).collect();
    let rows = points.par_iter().map(|&(d, g)| sweep_point(d, g, opts)).collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.1, 10.0, 20);
        assert_eq!(v.len(), 20);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[19], 10.0);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn zero_decay_point_is_zero() {
        let opts = SweepOptions::default();
        let row = sweep_point(1.0, 0.0, &opts).unwrap();
        assert_eq!(row.p_longtime, 0.0);
        assert!(row.converged);
    }

    #[test]
    fn small_sweep_rows_in_order() {
        let opts = SweepOptions { d_range: (1.0, 2.0), gamma_range: (1.0, 2.0), n_d: 2, n_gamma: 2, ..Default::default() };
        let t = sweep_fig4(&opts).unwrap();
        let keys: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.d, r.gamma)).collect();
        assert_eq!(keys, vec![(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]);
        assert!(t.all_converged());
        assert!(t.rows.iter().all(|r| (0.0..=1.0).contains(&r.p_longtime)));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("d,gamma,p_longtime,converged,t_end,n_k\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
