use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::photon_swap::SweepOptions;
use crate::polarization::ConversionSpec;

use super::PipelineError;

/// Prefix of environment overrides, `EP_<SECTION>__<FIELD>=<json or text>`.
pub const ENV_PREFIX: &str = "EP_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    /// Rates and bandwidths in one common reference unit.
    Dimensionless,
    /// rad/s and seconds.
    Si,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GhzSection {
    pub n_dots: usize,
    /// Heisenberg coupling, Hz.
    pub j1: f64,
    /// Ising coupling, Hz.
    pub j2: f64,
}

impl Default for GhzSection {
    fn default() -> Self {
        Self { n_dots: 4, j1: 1e8, j2: 1e8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtectSection {
    pub alpha: f64,
    /// Fock truncation; `None` picks the smallest safe value for `alpha`.
    pub n_max: Option<usize>,
    pub kappa: f64,
    pub tau_syn: f64,
    pub duration: f64,
    pub n_cavities: usize,
    pub n_trajectories: usize,
}

impl Default for ProtectSection {
    fn default() -> Self {
        Self { alpha: 2.0, n_max: None, kappa: 1.0, tau_syn: 0.05, duration: 0.1, n_cavities: 3, n_trajectories: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwapSection {
    pub unit: Unit,
    pub w1: f64,
    pub w2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub d: f64,
    pub t_end: f64,
    /// Sampling interval; `None` uses `1/(20·max(Γ1 + Γ2, d))`.
    pub dt: Option<f64>,
    /// Per-dot success probability used downstream; `None` takes `P(t_end)`.
    pub p_success: Option<f64>,
}

impl Default for SwapSection {
    fn default() -> Self {
        Self {
            unit: Unit::Dimensionless,
            w1: 1e6,
            w2: 5e5,
            gamma1: 1.0,
            gamma2: 1.0,
            d: 1.0,
            t_end: 20.0,
            dt: None,
            p_success: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub unit: Unit,
    pub d_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub n_d: usize,
    pub n_gamma: usize,
    pub t_end: Option<f64>,
    /// Times the run length may double while looking for a plateau.
    pub max_doublings: u32,
}

impl Default for SweepSection {
    fn default() -> Self {
        let o = SweepOptions::default();
        Self { unit: Unit::Dimensionless, d_range: o.d_range, gamma_range: o.gamma_range, n_d: o.n_d, n_gamma: o.n_gamma, t_end: o.t_end, max_doublings: o.max_doublings }
    }
}

impl SweepSection {
    pub fn options(&self, swap: &SwapSection) -> SweepOptions {
        SweepOptions {
            d_range: self.d_range,
            gamma_range: self.gamma_range,
            n_d: self.n_d,
            n_gamma: self.n_gamma,
            t_end: self.t_end,
            max_doublings: self.max_doublings,
            w1: swap.w1,
            w2: swap.w2,
            ..SweepOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub format: OutputFormat,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { base_seed: 20240901, out_dir: PathBuf::from("out"), workers: None, format: OutputFormat::Csv }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub ghz: GhzSection,
    pub protect: ProtectSection,
    pub swap: SwapSection,
    pub sweep: SweepSection,
    pub conversion: ConversionSpec,
    pub run: RunSection,
}

fn positive(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0) || !v.is_finite() {
        errors.push(format!("{name} must be a finite positive number, got {v}"));
    }
}

fn non_negative(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v >= 0.0) || !v.is_finite() {
        errors.push(format!("{name} must be finite and >= 0, got {v}"));
    }
}

fn probability(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v <= 1.0) {
        errors.push(format!("{name} must lie in (0, 1], got {v}"));
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `EP_<SECTION>__<FIELD>` overrides. Values parse as JSON when
    /// possible and as plain strings otherwise.
    pub fn with_env<I, K, V>(&self, vars: I) -> Result<Self, PipelineError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut tree = serde_json::to_value(self).expect("config serializes");
        let mut errors = Vec::new();
        let mut overrides: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| k.as_ref().strip_prefix(ENV_PREFIX).map(|k| (k.to_string(), v.as_ref().to_string())))
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let Some((section, field)) = key.split_once("__") else {
                errors.push(format!("{ENV_PREFIX}{key}: expected {ENV_PREFIX}<SECTION>__<FIELD>"));
                continue;
            };
            let (section, field) = (section.to_lowercase(), field.to_lowercase());
            let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            match tree.get_mut(&section).and_then(Value::as_object_mut) {
                Some(obj) if obj.contains_key(&field) => {
                    obj.insert(field, value);
                }
                _ => errors.push(format!("{ENV_PREFIX}{key}: unknown setting {section}.{field}")),
            }
        }
        if !errors.is_empty() {
            return Err(PipelineError::Config(errors));
        }
        serde_json::from_value(tree).map_err(|e| PipelineError::Config(vec![e.to_string()]))
    }

    /// Every problem with the configuration, not just the first.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut e = Vec::new();
        let g = &self.ghz;
        if !(2..=10).contains(&g.n_dots) {
            e.push(format!("ghz.n_dots must lie in [2, 10], got {}", g.n_dots));
        }
        positive(&mut e, "ghz.j1", g.j1);
        positive(&mut e, "ghz.j2", g.j2);

        let p = &self.protect;
        positive(&mut e, "protect.alpha", p.alpha);
        non_negative(&mut e, "protect.kappa", p.kappa);
        positive(&mut e, "protect.tau_syn", p.tau_syn);
        non_negative(&mut e, "protect.duration", p.duration);
        if p.tau_syn > 0.0 && p.duration >= 0.0 {
            let r = p.duration / p.tau_syn;
            if (r - r.round()).abs() > 1e-9 * r.max(1.0) {
                e.push(format!("protect.duration ({}) must be a whole number of tau_syn ({})", p.duration, p.tau_syn));
            }
        }
        if p.n_cavities == 0 {
            e.push("protect.n_cavities must be >= 1".into());
        }
        if p.n_trajectories == 0 {
            e.push("protect.n_trajectories must be >= 1".into());
        }
        if let (Some(n), true) = (p.n_max, p.alpha > 0.0) {
            let need = crate::cat_code::min_n_max(p.alpha);
            if n < need {
                e.push(format!("protect.n_max = {n} is below the truncation guard {need} for alpha = {}", p.alpha));
            }
        }

        let s = &self.swap;
        non_negative(&mut e, "swap.gamma1", s.gamma1);
        non_negative(&mut e, "swap.gamma2", s.gamma2);
        positive(&mut e, "swap.d", s.d);
        positive(&mut e, "swap.t_end", s.t_end);
        positive(&mut e, "swap.w1", s.w1);
        positive(&mut e, "swap.w2", s.w2);
        if s.w2 >= s.w1 {
            e.push(format!("swap.w2 ({}) must be below swap.w1 ({})", s.w2, s.w1));
        }
        if let Some(dt) = s.dt {
            positive(&mut e, "swap.dt", dt);
        }
        if let Some(ps) = s.p_success {
            probability(&mut e, "swap.p_success", ps);
        }

        let w = &self.sweep;
        if w.unit != Unit::Dimensionless {
            e.push("sweep.unit must be \"dimensionless\"".into());
        }
        positive(&mut e, "sweep.d_range[0]", w.d_range.0);
        non_negative(&mut e, "sweep.gamma_range[0]", w.gamma_range.0);
        if w.d_range.1 < w.d_range.0 || w.gamma_range.1 < w.gamma_range.0 {
            e.push("sweep ranges must be ordered (lo, hi)".into());
        }
        if w.n_d == 0 || w.n_gamma == 0 {
            e.push("sweep.n_d and sweep.n_gamma must be >= 1".into());
        }
        if let Some(t) = w.t_end {
            positive(&mut e, "sweep.t_end", t);
        }

        probability(&mut e, "conversion.eta_bbo", self.conversion.eta_bbo);
        probability(&mut e, "conversion.detector_efficiency", self.conversion.detector_efficiency);
        if self.run.workers == Some(0) {
            e.push("run.workers must be >= 1".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(e))
        }
    }
}
