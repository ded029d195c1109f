//! Run configuration files and run manifests.
//!
//! A config is a TOML document with the sections `model`, `grid`, `ic`,
//! `stepper`, `kernel`, `diagnostics` and `outputs`. Unknown keys are errors.
//! [`parse_config`] fills every default, so writing a parsed config back out
//! with [`RunConfig::to_toml`] and parsing it again yields the same value.
//!
//! A manifest is a normalized config plus a `[provenance]` table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{validate_functional_params, FunctionalParams, Violation};
use crate::grid::Grid;
use crate::io::sinks::CSV_NORMS;
use crate::kernels::{discretize_kernel, KernelSpec};
use crate::model::{InitialCondition, ModelParams, ParamError};
use crate::stepper::{
    stability_hint, OperatorKind, PositivityPolicy, StepperConfig, DEFAULT_BLOWUP_CAP,
    DEFAULT_POSITIVITY_FLOOR,
};

pub const OUTPUT_DIR_ENV: &str = "GM_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "gm-output";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    #[serde(default = "one_usize")]
    pub ny: usize,
    pub lx: f64,
    /// Ignored for `ny = 1`; defaults to `lx`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
}

impl GridSection {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        let ly = self.ly.unwrap_or(self.lx);
        Grid::new(self.nx, self.ny, self.lx, ly).map_err(|e| ConfigError::invalid("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    #[default]
    Local,
    Nonlocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    /// Defaults to the stability hint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub operator: OperatorChoice,
    #[serde(default = "one_u64")]
    pub record_every: u64,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
    #[serde(default = "yes")]
    pub fail_on_nonfinite: bool,
    #[serde(default)]
    pub positivity_policy: PositivityPolicy,
    #[serde(default = "default_cap")]
    pub blowup_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSection {
    Gaussian {
        sigma: f64,
        /// Defaults to `3 sigma`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoff_radius: Option<f64>,
    },
    RescaledBump {
        j: u32,
    },
}

impl KernelSection {
    pub fn spec(&self) -> KernelSpec {
        match *self {
            KernelSection::Gaussian {
                sigma,
                cutoff_radius,
            } => KernelSpec::Gaussian {
                sigma,
                cutoff_radius: cutoff_radius.unwrap_or(3.0 * sigma),
            },
            KernelSection::RescaledBump { j } => KernelSpec::RescaledBump { j },
        }
    }

    pub fn from_spec(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Gaussian {
                sigma,
                cutoff_radius,
            } => KernelSection::Gaussian {
                sigma,
                cutoff_radius: Some(cutoff_radius),
            },
            KernelSpec::RescaledBump { j } => KernelSection::RescaledBump { j },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Defaults per [`FunctionalParams::defaults_for`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "one_f64")]
    pub beta: f64,
    #[serde(default = "two_u32")]
    pub b: u32,
    /// Defaults to 1.05 times the Sylvester threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Exponents of the recorded `L^b` norms; 2 and 4 are always included.
    #[serde(default = "default_norms")]
    pub norms: Vec<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            alpha: None,
            beta: 1.0,
            b: 2,
            a: None,
            norms: default_norms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Defaults to `$GM_OUTPUT_DIR`, else `gm-output`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "yes")]
    pub heatmaps: bool,
    /// Write a snapshot pair every this many records; 0 keeps only the final state.
    #[serde(default)]
    pub snapshot_every: u64,
    #[serde(default = "default_scale")]
    pub heatmap_scale: u32,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            dir: None,
            csv: true,
            snapshots: true,
            heatmaps: true,
            snapshot_every: 0,
            heatmap_scale: default_scale(),
        }
    }
}

impl OutputsSection {
    pub fn dir(&self) -> PathBuf {
        self.dir.clone().unwrap_or_else(default_output_dir)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridSection,
    pub ic: InitialCondition,
    pub stepper: StepperSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

fn one_usize() -> usize {
    1
}
fn one_u64() -> u64 {
    1
}
fn one_f64() -> f64 {
    1.0
}
fn two_u32() -> u32 {
    2
}
fn yes() -> bool {
    true
}
fn default_floor() -> f64 {
    DEFAULT_POSITIVITY_FLOOR
}
fn default_cap() -> f64 {
    DEFAULT_BLOWUP_CAP
}
fn default_norms() -> Vec<f64> {
    CSV_NORMS.to_vec()
}
fn default_scale() -> u32 {
    4
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn param_error(section: &str, e: ParamError) -> ConfigError {
    match e {
        ParamError::Invalid { name, .. } => ConfigError::invalid(&format!("{section}.{name}"), e.to_string()),
    }
}

fn violation_key(v: &Violation) -> &'static str {
    match v {
        Violation::BetaWindow { .. } => "diagnostics.beta",
        Violation::AlphaBound { .. } => "diagnostics.alpha",
        Violation::SylvesterThreshold { .. } => "diagnostics.a",
        Violation::Exponent { .. } => "diagnostics.b",
        Violation::KineticExponents { .. } => "model",
    }
}

impl RunConfig {
    pub fn grid(&self) -> Grid {
        self.grid.build().expect("validated config")
    }

    pub fn operator(&self) -> OperatorKind {
        match (self.stepper.operator, &self.kernel) {
            (OperatorChoice::Nonlocal, Some(k)) => OperatorKind::Nonlocal(k.spec()),
            _ => OperatorKind::Local,
        }
    }

    pub fn functional_params(&self) -> FunctionalParams {
        let d = &self.diagnostics;
        let defaults = FunctionalParams::defaults_for(&self.model);
        FunctionalParams {
            alpha: d.alpha.unwrap_or(defaults.alpha),
            beta: d.beta,
            b: d.b,
            a: d.a.unwrap_or(defaults.a),
        }
    }

    /// Stepper settings; valid only on a normalized config.
    pub fn stepper_config(&self) -> StepperConfig {
        let s = &self.stepper;
        StepperConfig {
            dt: s.dt.expect("normalized config has dt"),
            t_end: s.t_end,
            operator: self.operator(),
            record_every: s.record_every,
            positivity_floor: s.positivity_floor,
            fail_on_nonfinite: s.fail_on_nonfinite,
            policy: s.positivity_policy,
            blowup_cap: s.blowup_cap,
        }
    }

    /// Fills every default and checks every constraint.
    pub fn normalize(mut self) -> Result<Self, ConfigError> {
        self.model.validate().map_err(|e| param_error("model", e))?;
        let grid = self.grid.build()?;
        if grid.ny() == 1 {
            self.grid.ly = None;
        } else if self.grid.ly.is_none() {
            self.grid.ly = Some(self.grid.lx);
        }
        self.ic.validate().map_err(|e| param_error("ic", e))?;

        let s = &self.stepper;
        if !(s.t_end >= 0.0 && s.t_end.is_finite()) {
            return Err(ConfigError::invalid("stepper.t_end", format!("t_end = {} must be finite and >= 0", s.t_end)));
        }
        if s.record_every < 1 {
            return Err(ConfigError::invalid("stepper.record_every", "record_every must be >= 1"));
        }
        if !(s.positivity_floor >= 0.0 && s.positivity_floor.is_finite()) {
            return Err(ConfigError::invalid("stepper.positivity_floor", "positivity_floor must be finite and >= 0"));
        }
        if !(s.blowup_cap > 0.0) {
            return Err(ConfigError::invalid("stepper.blowup_cap", "blowup_cap must be > 0"));
        }

        let discrete = match (self.stepper.operator, &self.kernel) {
            (OperatorChoice::Nonlocal, None) => {
                return Err(ConfigError::invalid("kernel", "operator = \"nonlocal\" requires a [kernel] section"));
            }
            (_, Some(k)) => {
                let spec = k.spec();
                let d = discretize_kernel(&spec, &grid).map_err(|e| ConfigError::invalid("kernel", e.to_string()))?;
                self.kernel = Some(KernelSection::from_spec(spec));
                (self.stepper.operator == OperatorChoice::Nonlocal).then_some(d)
            }
            (OperatorChoice::Local, None) => None,
        };

        match self.stepper.dt {
            Some(dt) => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(ConfigError::invalid("stepper.dt", format!("dt = {dt} must be > 0")));
                }
                let t_end = self.stepper.t_end;
                if t_end > 0.0 && dt > t_end {
                    return Err(ConfigError::invalid("stepper.dt", format!("dt = {dt} must not exceed t_end = {t_end}")));
                }
            }
            None => {
                let t_end = self.stepper.t_end;
                let cap = if t_end > 0.0 { t_end } else { f64::INFINITY };
                self.stepper.dt = Some(stability_hint(&self.model, &grid, discrete.as_ref(), cap));
            }
        }

        let defaults = FunctionalParams::defaults_for(&self.model);
        self.diagnostics.alpha.get_or_insert(defaults.alpha);
        self.diagnostics.a.get_or_insert(defaults.a);
        if let Err(violations) = validate_functional_params(&self.functional_params(), &self.model) {
            let v = &violations[0];
            let rest: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(ConfigError::invalid(violation_key(v), rest.join("; ")));
        }

        let norms = &mut self.diagnostics.norms;
        if let Some(bad) = norms.iter().find(|b| !(**b >= 1.0 && b.is_finite())) {
            return Err(ConfigError::invalid("diagnostics.norms", format!("norm exponent {bad} must be finite and >= 1")));
        }
        norms.extend_from_slice(&CSV_NORMS);
        norms.sort_by(f64::total_cmp);
        norms.dedup();

        if self.outputs.heatmap_scale < 1 {
            return Err(ConfigError::invalid("outputs.heatmap_scale", "heatmap_scale must be >= 1"));
        }
        if self.outputs.dir.is_none() {
            self.outputs.dir = Some(default_output_dir());
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parses, normalizes and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    raw.normalize()
}

/// Reads a config or a run manifest; provenance is ignored.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_manifest(&text).map(|(config, _)| config)
}

/// Facts about a finished run that are not part of its config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub dt_used: f64,
    pub steps: u64,
    pub clamp_count: u64,
}

pub fn manifest_toml(config: &RunConfig, provenance: &Provenance) -> String {
    let mut table: toml::Table = toml::Table::try_from(config).expect("config serializes");
    table.insert(
        "provenance".into(),
        toml::Value::try_from(provenance).expect("provenance serializes"),
    );
    toml::to_string(&table).expect("manifest serializes")
}

/// Splits a manifest back into its config and provenance.
pub fn parse_manifest(text: &str) -> Result<(RunConfig, Option<Provenance>), ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let provenance = match table.remove("provenance") {
        Some(v) => Some(v.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?),
        None => None,
    };
    let config: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    Ok((config.normalize()?, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOCAL: &str = r#"
[model]
p = 2.0
q = 2.0
r = 1.0
s = 0.0
b1 = 0.5
b2 = 1.0
sigma1 = 0.0
sigma2 = 0.0
d1 = 0.3
d2 = 30.0

[grid]
nx = 100
ny = 100
lx = 100.0

[ic]
base_u = 0.1
base_v = 0.1
noise_amp = 0.01
seed = 1

[stepper]
t_end = 200.0

[outputs]
dir = "out"
"#;

    #[test]
    fn local_without_kernel_is_valid() {
        let c = parse_config(LOCAL).unwrap();
        assert_eq!(c.model.d1, 0.3);
        assert_eq!(c.model.d2, 30.0);
        assert_eq!((c.grid.nx, c.grid.ny), (100, 100));
        assert!((c.stepper.dt.unwrap() - 0.0075).abs() < 1e-15);
        assert_eq!(c.diagnostics.norms, vec![2.0, 4.0]);
        assert_eq!(c.operator(), OperatorKind::Local);
    }

    #[test]
    fn normalization_is_idempotent() {
        let c = parse_config(LOCAL).unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn beta_out_of_window() {
        let text = format!("{LOCAL}\n[diagnostics]\nbeta = 2.5\n");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("diagnostics.beta"), "{msg}");
        assert!(msg.contains("1 ≤ β < min{2,γ}"), "{msg}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = LOCAL.replace("t_end = 200.0", "t_end = 200.0\nsigma = 0.6");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
    }

    #[test]
    fn nonlocal_needs_kernel() {
        let text = LOCAL.replace("t_end = 200.0", "t_end = 200.0\noperator = \"nonlocal\"");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, .. } if key == "kernel"));
        let text = format!("{text}\n[kernel]\nfamily = \"gaussian\"\nsigma = 0.6\n");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.operator(), OperatorKind::Nonlocal(KernelSpec::gaussian(0.6)));
    }

    #[test]
    fn manifest_round_trip() {
        let c = parse_config(LOCAL).unwrap();
        let p = Provenance {
            version: "x".into(),
            seed: 1,
            dt_used: 0.0075,
            steps: 26667,
            clamp_count: 0,
        };
        let (c2, p2) = parse_manifest(&manifest_toml(&c, &p)).unwrap();
        assert_eq!(c, c2);
        assert_eq!(Some(p), p2);
    }
}
