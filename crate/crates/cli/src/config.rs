//! Run configuration: a JSON document with model, kernel, analysis and
//! output sections. Unknown keys are rejected everywhere.

use std::path::PathBuf;

use rgscale_core::corrmodels::{CommutatorProfile, CommutatorShape, FamilySpec, SpectralShape};
use rgscale_core::qmc::QmcConfig;
use rgscale_core::scaling::{Mode, Sampler};
use rgscale_core::smearing::Profile;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<FamilySpec<f64>>,
    #[serde(default)]
    pub kernel: KernelConfig,
    pub analysis: Analysis,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub k2_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("rgscale-out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// A list of values, or an evenly / geometrically spaced range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Linear { linspace: Span },
    Geometric { geomspace: Span },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let v = match self {
            Grid::List(v) => v.clone(),
            Grid::Linear { linspace: s } => {
                check_span(s)?;
                (0..s.count)
                    .map(|k| s.start + (s.stop - s.start) * k as f64 / (s.count - 1) as f64)
                    .collect()
            }
            Grid::Geometric { geomspace: s } => {
                check_span(s)?;
                if !(s.start > 0.0 && s.stop > 0.0) {
                    return Err("geomspace needs positive start and stop".into());
                }
                let (a, b) = (s.start.ln(), s.stop.ln());
                (0..s.count)
                    .map(|k| (a + (b - a) * k as f64 / (s.count - 1) as f64).exp())
                    .collect()
            }
        };
        if v.is_empty() {
            return Err("empty grid".into());
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err("grid values must be finite".into());
        }
        Ok(v)
    }
}

fn check_span(s: &Span) -> Result<(), String> {
    if s.count < 2 {
        return Err("grid span needs count >= 2".into());
    }
    if !(s.start.is_finite() && s.stop.is_finite()) {
        return Err("grid span bounds must be finite".into());
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Analysis {
    Truncate(TruncateConfig),
    ScaleRun(ScaleRunConfig),
    FitExponent(FitConfig),
    Classify(ClassifyConfig),
    Quantum(QuantumConfig),
    Slowdown(SlowdownConfig),
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::Truncate(_) => "truncate",
            Analysis::ScaleRun(_) => "scale-run",
            Analysis::FitExponent(_) => "fit-exponent",
            Analysis::Classify(_) => "classify",
            Analysis::Quantum(_) => "quantum",
            Analysis::Slowdown(_) => "slowdown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    CumulantsToMoments,
    MomentsToCumulants,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    pub key: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncateConfig {
    pub direction: Direction,
    /// Explicit hierarchy table.
    #[serde(default)]
    pub entries: Vec<TableEntry>,
    /// Alternatively: points at which the model's truncated functions are
    /// evaluated for every subset (cumulants_to_moments only).
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRunConfig {
    pub l: usize,
    pub gamma: f64,
    pub x: Vec<Vec<f64>>,
    pub r_grid: Grid,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub sampler: Option<Sampler>,
    #[serde(default)]
    pub enforce_support: bool,
}

fn default_mode() -> Mode {
    Mode::Block
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    MethodOne,
    MethodTwo,
    EmpiricalGamma,
    CrossValidate,
    Probe,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: FitMethod,
    /// Method One fit window `[r_lo, r_hi]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_alpha_step")]
    pub alpha_step: f64,
    #[serde(default)]
    pub cutoffs: Option<Grid>,
    #[serde(default)]
    pub r_grid: Option<Grid>,
    #[serde(default)]
    pub separation: Option<f64>,
    /// Weighting exponent for the Fourier probe.
    #[serde(default)]
    pub probe_alpha: Option<f64>,
    #[serde(default)]
    pub lambda_grid: Option<Grid>,
    #[serde(default = "default_p0")]
    pub p0: f64,
}

fn default_points() -> usize {
    16
}

fn default_alpha_step() -> f64 {
    0.05
}

fn default_p0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub l: usize,
    pub alpha_prime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub n: usize,
    pub alpha_2: f64,
    pub rows: Vec<ChannelConfig>,
    #[serde(default = "default_tie")]
    pub tie_tolerance: f64,
    #[serde(default)]
    pub confirm: Option<ConfirmConfig>,
}

fn default_tie() -> f64 {
    rgscale_core::classifier::DEFAULT_TIE_TOLERANCE
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfirmConfig {
    #[serde(default)]
    pub r_grid: Option<Grid>,
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub qmc: Option<QmcConfig>,
    #[serde(default)]
    pub tail_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumConfig {
    #[serde(default)]
    pub commutator: Option<CommutatorConfig>,
    #[serde(default)]
    pub kms: Option<KmsConfig>,
    #[serde(default)]
    pub constancy: Option<ConstancyConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorConfig {
    pub profile: CommutatorProfile<f64>,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub r_grid: Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KmsConfig {
    pub shape: CommutatorShape<f64>,
    pub beta: f64,
    #[serde(default)]
    pub atom: f64,
    pub t_grid: Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstancyConfig {
    pub atom: f64,
    pub beta: f64,
    pub t_grid: Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlowdownConfig {
    pub shape: SpectralShape,
    pub delta: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub beta: f64,
    pub t_grid: Grid,
    pub r_grid: Grid,
}

fn one() -> f64 {
    1.0
}

/// Applies `a.b.c=value` overrides to the raw document. The value is read
/// as JSON when it parses, as a string otherwise.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<(), String> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| format!("override '{item}' is not of the form key=value"))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cur = &mut *doc;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            cur = match cur {
                Value::Object(map) => {
                    if last {
                        map.insert(part.to_string(), value.clone());
                        break;
                    }
                    map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(arr) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| format!("override '{path}': '{part}' indexes an array"))?;
                    let len = arr.len();
                    let slot = arr
                        .get_mut(idx)
                        .ok_or_else(|| format!("override '{path}': index {idx} out of range ({len})"))?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => return Err(format!("override '{path}': '{part}' is not inside an object")),
            };
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_set_nested_values() {
        let mut v: Value = serde_json::json!({"analysis": {"kind": "scale_run", "l": 2, "x": [[0.0], [5.0]]}});
        apply_overrides(
            &mut v,
            &["analysis.l=3".into(), "analysis.x.1=[7.0]".into(), "output.directory=out".into()],
        )
        .unwrap();
        assert_eq!(v["analysis"]["l"], 3);
        assert_eq!(v["analysis"]["x"][1][0], 7.0);
        assert_eq!(v["output"]["directory"], "out");
        assert!(apply_overrides(&mut v, &["noequals".into()]).is_err());
    }

    #[test]
    fn grids() {
        let g: Grid = serde_json::from_str(r#"{"geomspace": {"start": 1, "stop": 100, "count": 3}}"#).unwrap();
        let v = g.values().unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
        let g: Grid = serde_json::from_str(r#"{"linspace": {"start": -1, "stop": 1, "count": 5}}"#).unwrap();
        assert_eq!(g.values().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(serde_json::from_str::<Grid>(r#"{"logspace": {}}"#).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"analysis": {"kind": "classify", "n": 2, "alpha_2": 1.0, "rows": [], "bogus": 1}}"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
        let bad = r#"{"model": {"kind": "power_law", "n": 1, "alpha": 0.5, "extra": 2}, "analysis": {"kind": "classify", "n": 2, "alpha_2": 1.0, "rows": []}}"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
        let good = r#"{"model": {"kind": "power_law", "n": 1, "alpha": 0.5}, "analysis": {"kind": "classify", "n": 2, "alpha_2": 1.0, "rows": []}}"#;
        assert!(serde_json::from_str::<RunConfig>(good).is_ok());
    }
}
