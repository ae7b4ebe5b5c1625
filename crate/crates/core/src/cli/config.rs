//! Sweep configuration: a TOML document validated into [`SweepConfig`].
//!
//! ```toml
//! unit = "gamma"              # label echoed to the manifest
//! outputs = ["mean_n", "entropy", "qfield"]
//! truncation = "auto"         # or a level count, e.g. 40
//!
//! [model]
//! g = 3347.0
//! kappa = 6.0
//! gamma = 1.0                 # default 1
//! delta_omega_c = 435.0
//! delta = 23907.0             # or delta_omega_q; Δω_q = Δω_c + δ
//! eps_d = 13.0                # or [re, im]
//!
//! [[axes]]
//! name = "eps_d"              # eps_d | delta_omega_c | delta_omega_q | delta_over_g
//! min = 0.0
//! max = 20.0
//! count = 41
//! spacing = "linear"          # or "log"
//!
//! [grid]                      # optional; auto-sized when absent
//! x_min = -4.0
//! x_max = 4.0
//! y_min = -4.0
//! y_max = 4.0
//! nx = 101
//! ny = 101
//!
//! [adaptive]                  # optional tuning of truncation = "auto"
//! start = 40
//! max_fock = 128
//! rel_tol = 1e-3
//! ```

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{AdaptiveTruncation, ModelParams};
use crate::quasiprob::PhaseSpaceGrid;
use crate::semiclassical::Equation;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Syntax(String),
    #[error("invalid `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    EpsD,
    DeltaOmegaC,
    DeltaOmegaQ,
    DeltaOverG,
}

impl AxisName {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::EpsD => "eps_d",
            Self::DeltaOmegaC => "delta_omega_c",
            Self::DeltaOmegaQ => "delta_omega_q",
            Self::DeltaOverG => "delta_over_g",
        }
    }

    /// Sets this coordinate on a parameter template.
    ///
    /// `eps_d` sets the drive magnitude and keeps its phase; `delta_omega_c`
    /// moves the drive frequency, so Δω_q follows and δ is unchanged;
    /// `delta_over_g` sets δ = value·g with the qubit below the cavity.
    pub fn apply(&self, p: ModelParams, value: f64) -> ModelParams {
        match self {
            Self::EpsD => {
                let phase = if p.eps_d.norm() > 0.0 {
                    p.eps_d / p.eps_d.norm()
                } else {
                    C64::new(1.0, 0.0)
                };
                p.with_drive(phase * value)
            }
            Self::DeltaOmegaC => p.with_drive_detuning(value),
            Self::DeltaOmegaQ => ModelParams {
                delta_omega_q: value,
                ..p
            },
            Self::DeltaOverG => ModelParams {
                delta_omega_q: p.delta_omega_c + value * p.g,
                ..p
            },
        }
    }
}

impl fmt::Display for AxisName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    return self.max;
                }
                let t = k as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + t * (self.max - self.min),
                    Spacing::Log => self.min * (self.max / self.min).powf(t),
                }
            })
            .collect()
    }

    fn validate(&self, key: &str) -> Result<(), ConfigError> {
        if self.count == 0 {
            return Err(invalid(format!("{key}.count"), "must be >= 1"));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(invalid(format!("{key}.min"), "bounds must be finite"));
        }
        if self.max < self.min {
            return Err(invalid(format!("{key}.max"), "must be >= min"));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(invalid(format!("{key}.min"), "log spacing needs min > 0"));
        }
        if self.name == AxisName::EpsD && self.min < 0.0 {
            return Err(invalid(format!("{key}.min"), "drive magnitude must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    MeanA,
    MeanN,
    SigmaMinus,
    SigmaZ,
    Entropy,
    G2,
    Qfield,
    WfieldNumeric,
    WfieldAnalytic,
    Branches,
}

impl Output {
    pub const ALL: [Output; 10] = [
        Self::MeanA,
        Self::MeanN,
        Self::SigmaMinus,
        Self::SigmaZ,
        Self::Entropy,
        Self::G2,
        Self::Qfield,
        Self::WfieldNumeric,
        Self::WfieldAnalytic,
        Self::Branches,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Self::MeanA => "mean_a",
            Self::MeanN => "mean_n",
            Self::SigmaMinus => "sigma_minus",
            Self::SigmaZ => "sigma_z",
            Self::Entropy => "entropy",
            Self::G2 => "g2",
            Self::Qfield => "qfield",
            Self::WfieldNumeric => "wfield_numeric",
            Self::WfieldAnalytic => "wfield_analytic",
            Self::Branches => "branches",
        }
    }

    /// Outputs derived from the master-equation steady state.
    pub fn needs_steady_state(&self) -> bool {
        !matches!(self, Self::WfieldAnalytic | Self::Branches)
    }

    pub fn is_field(&self) -> bool {
        matches!(self, Self::Qfield | Self::WfieldNumeric | Self::WfieldAnalytic)
    }
}

/// Truncation policy of the steady-state solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    Fixed(usize),
    Auto,
}

impl std::str::FromStr for Truncation {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let n: usize = s
            .trim()
            .parse()
            .map_err(|_| invalid("truncation", format!("expected a level count or `auto`, got `{s}`")))?;
        Self::Fixed(n).validated()
    }
}

impl Truncation {
    fn validated(self) -> Result<Self, ConfigError> {
        match self {
            Self::Fixed(n) if n < 2 => Err(invalid("truncation", "need at least 2 Fock levels")),
            t => Ok(t),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTruncation {
    Levels(i64),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawComplex {
    Real(f64),
    Pair([f64; 2]),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    g: f64,
    kappa: f64,
    #[serde(default = "one")]
    gamma: f64,
    delta_omega_c: f64,
    delta_omega_q: Option<f64>,
    delta: Option<f64>,
    eps_d: RawComplex,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdaptive {
    start: Option<usize>,
    max_fock: Option<usize>,
    rel_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    unit: Option<String>,
    model: RawModel,
    #[serde(default)]
    axes: Vec<Axis>,
    outputs: Option<Vec<Output>>,
    truncation: Option<RawTruncation>,
    adaptive: Option<RawAdaptive>,
    grid: Option<PhaseSpaceGrid>,
    branch_equations: Option<Vec<Equation>>,
    dump_liouvillian: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    /// Unit label; all rates are plain numbers in that unit.
    pub unit: String,
    pub model: ModelParams,
    pub axes: Vec<Axis>,
    pub outputs: BTreeSet<Output>,
    pub truncation: Truncation,
    pub adaptive: AdaptiveTruncation,
    /// `None` sizes each field window from the solution.
    pub grid: Option<PhaseSpaceGrid>,
    pub branch_equations: Vec<Equation>,
    /// Write the Liouvillian of every solved point as a binary dump.
    pub dump_liouvillian: bool,
}

const UNITS: [&str; 3] = ["gamma", "kappa", "absolute"];

pub fn default_outputs() -> BTreeSet<Output> {
    [
        Output::MeanA,
        Output::MeanN,
        Output::SigmaMinus,
        Output::SigmaZ,
        Output::Entropy,
        Output::G2,
    ]
    .into_iter()
    .collect()
}

/// Equations that apply to the template: the dispersive set away from
/// resonance, the resonant set otherwise.
pub fn default_equations(p: &ModelParams) -> Vec<Equation> {
    let mut eqs = vec![Equation::Full];
    if p.delta() > 0.0 {
        eqs.extend([Equation::Kerr, Equation::Duffing]);
    } else {
        eqs.extend([Equation::SplitLorentzian, Equation::Phase]);
    }
    eqs
}

pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;

    let unit = raw.unit.unwrap_or_else(|| "gamma".to_string());
    if !UNITS.contains(&unit.as_str()) {
        return Err(invalid("unit", format!("expected one of {UNITS:?}")));
    }

    let m = raw.model;
    let delta_omega_q = match (m.delta_omega_q, m.delta) {
        (Some(_), Some(_)) => {
            return Err(invalid(
                "model.delta",
                "give either delta or delta_omega_q, not both",
            ))
        }
        (Some(q), None) => q,
        (None, Some(d)) => m.delta_omega_c + d,
        (None, None) => {
            return Err(invalid("model.delta_omega_q", "missing (or give model.delta)"))
        }
    };
    let eps_d = match m.eps_d {
        RawComplex::Real(v) => C64::new(v, 0.0),
        RawComplex::Pair([re, im]) => C64::new(re, im),
    };
    let model = ModelParams {
        g: m.g,
        kappa: m.kappa,
        gamma: m.gamma,
        delta_omega_c: m.delta_omega_c,
        delta_omega_q,
        eps_d,
    };
    model
        .validate()
        .map_err(|e| invalid("model", e.to_string()))?;

    if raw.axes.len() > 2 {
        return Err(invalid("axes", "at most 2 sweep axes"));
    }
    for (k, axis) in raw.axes.iter().enumerate() {
        axis.validate(&format!("axes[{k}]"))?;
    }
    let names: BTreeSet<AxisName> = raw.axes.iter().map(|a| a.name).collect();
    if names.len() != raw.axes.len() {
        return Err(invalid("axes", "axis names must be distinct"));
    }
    if names.contains(&AxisName::DeltaOmegaQ) && names.contains(&AxisName::DeltaOverG) {
        return Err(invalid(
            "axes",
            "delta_omega_q and delta_over_g both set the qubit detuning",
        ));
    }

    let outputs: BTreeSet<Output> = match raw.outputs {
        Some(list) if list.is_empty() => return Err(invalid("outputs", "must not be empty")),
        Some(list) => list.into_iter().collect(),
        None => default_outputs(),
    };

    let truncation = match raw.truncation {
        None => Truncation::Auto,
        Some(RawTruncation::Levels(n)) => {
            let n = usize::try_from(n).map_err(|_| invalid("truncation", "must be positive"))?;
            Truncation::Fixed(n).validated()?
        }
        Some(RawTruncation::Word(w)) => w.parse()?,
    };

    let mut adaptive = AdaptiveTruncation::default();
    if let Some(a) = raw.adaptive {
        if let Some(s) = a.start {
            if s < 2 {
                return Err(invalid("adaptive.start", "need at least 2 Fock levels"));
            }
            adaptive.start = Some(s);
        }
        if let Some(mx) = a.max_fock {
            if mx < 2 {
                return Err(invalid("adaptive.max_fock", "need at least 2 Fock levels"));
            }
            adaptive.max_fock = mx;
        }
        if let Some(t) = a.rel_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid("adaptive.rel_tol", "must be positive"));
            }
            adaptive.rel_tol = t;
        }
    }

    if let Some(g) = &raw.grid {
        g.validate().map_err(|e| invalid("grid", e.to_string()))?;
    }

    let cfg = SweepConfig {
        unit,
        model,
        axes: raw.axes,
        outputs,
        truncation,
        adaptive,
        grid: raw.grid,
        branch_equations: raw
            .branch_equations
            .unwrap_or_else(|| default_equations(&model)),
        dump_liouvillian: raw.dump_liouvillian.unwrap_or(false),
    };
    cfg.check_regime()?;
    Ok(cfg)
}

impl SweepConfig {
    /// Number of sweep points.
    pub fn point_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Parameters and axis values of every point, first axis major.
    pub fn points(&self) -> Vec<(Vec<usize>, Vec<f64>, ModelParams)> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut out = Vec::with_capacity(self.point_count());
        let mut idx = vec![0usize; self.axes.len()];
        loop {
            let coords: Vec<f64> = idx.iter().zip(&values).map(|(&i, v)| v[i]).collect();
            let mut p = self.model;
            for (axis, &v) in self.axes.iter().zip(&coords) {
                p = axis.name.apply(p, v);
            }
            out.push((idx.clone(), coords, p));
            // odometer, last axis fastest
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.axes[k].count {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    pub fn needs_steady_state(&self) -> bool {
        self.outputs.iter().any(Output::needs_steady_state)
    }

    pub fn has_fields(&self) -> bool {
        self.outputs.iter().any(Output::is_field)
    }

    pub(crate) fn check_regime(&self) -> Result<(), ConfigError> {
        if self.outputs.contains(&Output::WfieldAnalytic) {
            if self.model.g <= 0.0 {
                return Err(invalid(
                    "outputs",
                    "wfield_analytic needs g > 0 (dispersive regime)",
                ));
            }
            if let Some((_, _, p)) = self.points().into_iter().find(|(_, _, p)| p.delta() <= 0.0) {
                return Err(invalid(
                    "outputs",
                    format!(
                        "wfield_analytic requires the dispersive regime (delta > 0); \
                         delta = {} at delta_omega_c = {}",
                        p.delta(),
                        p.delta_omega_c
                    ),
                ));
            }
        }
        let resonant_only = [Equation::Kerr, Equation::Duffing];
        if self.outputs.contains(&Output::Branches) {
            for eq in &self.branch_equations {
                if resonant_only.contains(eq) && self.model.delta() == 0.0 && !self.sweeps_delta() {
                    return Err(invalid(
                        "branch_equations",
                        format!("`{eq}` needs a nonzero qubit-cavity detuning"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn sweeps_delta(&self) -> bool {
        self.axes
            .iter()
            .any(|a| matches!(a.name, AxisName::DeltaOmegaQ | AxisName::DeltaOverG))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
g = 10.0
kappa = 1.0
delta_omega_c = 0.5
delta = 50.0
eps_d = 1.0

[[axes]]
name = "eps_d"
min = 0.0
max = 2.0
count = 5
"#;

    #[test]
    fn minimal_config() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.unit, "gamma");
        assert_eq!(cfg.model.gamma, 1.0);
        assert_eq!(cfg.model.delta_omega_q, 50.5);
        assert_eq!(cfg.point_count(), 5);
        assert_eq!(cfg.truncation, Truncation::Auto);
        assert_eq!(cfg.outputs, default_outputs());
        assert_eq!(cfg.axes[0].values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn zero_count_names_key() {
        let text = MINIMAL.replace("count = 5", "count = 0");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("count"), "{err}");
    }

    #[test]
    fn analytic_wigner_needs_detuning() {
        let text = MINIMAL.replace("delta = 50.0", "delta = 0.0")
            .replace("[model]", "outputs = [\"wfield_analytic\"]\n[model]");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("dispersive"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("kappa = 1.0", "kappa = 1.0\nkapa = 2.0");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("kapa"), "{err}");
        let text = format!("colour = 1\n{MINIMAL}");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn complex_drive_and_truncation() {
        let text = MINIMAL
            .replace("eps_d = 1.0", "eps_d = [0.0, 2.0]")
            .replace("[model]", "truncation = 30\n[model]");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.model.eps_d, C64::new(0.0, 2.0));
        assert_eq!(cfg.truncation, Truncation::Fixed(30));
        // magnitude sweep keeps the phase
        let p = AxisName::EpsD.apply(cfg.model, 3.0);
        assert!((p.eps_d - C64::new(0.0, 3.0)).norm() < 1e-15);
        assert!(parse_config(&MINIMAL.replace("[model]", "truncation = 1\n[model]")).is_err());
        assert!(parse_config(&MINIMAL.replace("[model]", "truncation = \"many\"\n[model]")).is_err());
    }

    #[test]
    fn two_axes_order_and_log_spacing() {
        let text = format!(
            "{MINIMAL}\n[[axes]]\nname = \"delta_omega_c\"\nmin = 1.0\nmax = 100.0\ncount = 3\nspacing = \"log\"\n"
        );
        let cfg = parse_config(&text).unwrap();
        let pts = cfg.points();
        assert_eq!(pts.len(), 15);
        assert_eq!(pts[1].0, vec![0, 1]);
        assert_eq!(pts[3].0, vec![1, 0]);
        assert!((pts[1].1[1] - 10.0).abs() < 1e-12);
        // drive-frequency axis keeps delta
        assert!((pts[2].2.delta() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_ranges() {
        assert!(parse_config(&MINIMAL.replace("max = 2.0", "max = -1.0")).is_err());
        assert!(parse_config(&MINIMAL.replace("kappa = 1.0", "kappa = 0.0")).is_err());
        let both = MINIMAL.replace("delta = 50.0", "delta = 50.0\ndelta_omega_q = 3.0");
        assert!(parse_config(&both).unwrap_err().to_string().contains("delta"));
        let none = MINIMAL.replace("delta = 50.0", "");
        assert!(parse_config(&none).is_err());
        let three = format!(
            "{MINIMAL}\n[[axes]]\nname = \"delta_omega_c\"\nmin = 0\nmax = 1\ncount = 2\n[[axes]]\nname = \"delta_over_g\"\nmin = 0\nmax = 1\ncount = 2\n"
        );
        assert!(parse_config(&three).unwrap_err().to_string().contains("axes"));
    }

    #[test]
    fn no_axes_is_single_point() {
        let text = MINIMAL.split("[[axes]]").next().unwrap().to_string();
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.points().len(), 1);
        assert!(cfg.points()[0].0.is_empty());
    }
}
