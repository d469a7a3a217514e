//! Experiment configuration (TOML).
//!
//! Top level keys `domain`, `metric`, `resolution` and `seed` are required;
//! one optional table per subcommand carries its parameters. Unknown keys are
//! rejected everywhere.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::geometry::{GridDomain, MaskSpec, MetricField, MetricPreset};
use crate::recovery::ScaleMode;
use crate::{Error, Result};

pub const REQUIRED_KEYS: [&str; 4] = ["domain", "metric", "resolution", "seed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub metric: MetricConfig,
    /// Nodes per axis; studies use every entry, single runs use the first.
    pub resolution: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub green: GreenConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub separate: SeparateConfig,
    #[serde(default)]
    pub jets: JetsConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub recover: RecoverConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum DomainConfig {
    Box {
        #[serde(default = "zero3")]
        lo: [f64; 3],
        #[serde(default = "one3")]
        hi: [f64; 3],
    },
    BoxMinusBox {
        #[serde(default = "zero3")]
        lo: [f64; 3],
        #[serde(default = "one3")]
        hi: [f64; 3],
        inner_lo: [f64; 3],
        inner_hi: [f64; 3],
    },
    BoxMinusColumn {
        #[serde(default = "zero3")]
        lo: [f64; 3],
        #[serde(default = "one3")]
        hi: [f64; 3],
        column_lo: [f64; 2],
        column_hi: [f64; 2],
    },
}

fn zero3() -> [f64; 3] {
    [0.0; 3]
}
fn one3() -> [f64; 3] {
    [1.0; 3]
}

impl DomainConfig {
    pub fn build(&self, n: usize) -> Result<GridDomain> {
        let (lo, hi, mask) = match self {
            DomainConfig::Box { lo, hi } => (*lo, *hi, MaskSpec::Box),
            DomainConfig::BoxMinusBox { lo, hi, inner_lo, inner_hi } => (
                *lo,
                *hi,
                MaskSpec::BoxMinusBox {
                    lo: *inner_lo,
                    hi: *inner_hi,
                },
            ),
            DomainConfig::BoxMinusColumn {
                lo,
                hi,
                column_lo,
                column_hi,
            } => (
                *lo,
                *hi,
                MaskSpec::BoxMinusColumn {
                    lo: *column_lo,
                    hi: *column_hi,
                },
            ),
        };
        GridDomain::build(lo, hi, [n; 3], mask)
    }
}

/// A named preset or a metric field file (6 components, upper triangle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricConfig {
    Preset(MetricPreset),
    File {
        file: PathBuf,
    },
}

impl MetricConfig {
    pub fn build(&self, dom: &GridDomain) -> Result<MetricField> {
        match self {
            MetricConfig::Preset(p) => MetricField::from_preset(dom, p),
            MetricConfig::File { file } => crate::geometry::io::read_metric(file, dom),
        }
    }

    pub fn preset(&self) -> Option<&MetricPreset> {
        match self {
            MetricConfig::Preset(p) => Some(p),
            MetricConfig::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    #[serde(default = "default_dictionary_size")]
    pub size: usize,
    /// Defaults to the experiment seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_dictionary_size() -> usize {
    40
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            size: default_dictionary_size(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    /// Dictionary entry whose harmonic extension is written.
    #[serde(default = "one")]
    pub control_index: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenConfig {
    #[serde(default = "center")]
    pub source: [f64; 3],
    #[serde(default = "off_center")]
    pub kernel_point: [f64; 3],
    /// Coordinate direction of a gradient kernel; a value kernel when absent.
    #[serde(default)]
    pub direction: Option<usize>,
    #[serde(default)]
    pub stencil: StencilName,
}

fn center() -> [f64; 3] {
    [0.5; 3]
}
fn off_center() -> [f64; 3] {
    [0.4, 0.55, 0.6]
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            source: center(),
            kernel_point: off_center(),
            direction: None,
            stencil: StencilName::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StencilName {
    #[default]
    SecondOrder,
    ThirdOrder,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// Explicit control points; otherwise `n_points` seeded interior points.
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
    #[serde(default = "two")]
    pub n_points: usize,
}

fn two() -> usize {
    2
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            points: vec![],
            n_points: two(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparateConfig {
    #[serde(default = "sep_a")]
    pub a: [f64; 3],
    #[serde(default = "sep_b")]
    pub b: [f64; 3],
    /// Target quaternions `[scalar, v¹, v², v³]`.
    #[serde(default = "sep_ha")]
    pub h_a: [f64; 4],
    #[serde(default = "sep_hb")]
    pub h_b: [f64; 4],
}

fn sep_a() -> [f64; 3] {
    [0.35, 0.4, 0.5]
}
fn sep_b() -> [f64; 3] {
    [0.65, 0.6, 0.45]
}
fn sep_ha() -> [f64; 4] {
    [1.0, 0.5, -0.25, 0.75]
}
fn sep_hb() -> [f64; 4] {
    [-0.5, 0.0, 1.0, -0.5]
}

impl Default for SeparateConfig {
    fn default() -> Self {
        SeparateConfig {
            a: sep_a(),
            b: sep_b(),
            h_a: sep_ha(),
            h_b: sep_hb(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetsConfig {
    #[serde(default = "center_points")]
    pub points: Vec<[f64; 3]>,
    #[serde(default = "rank_threshold")]
    pub threshold: f64,
}

fn center_points() -> Vec<[f64; 3]> {
    vec![[0.5; 3]]
}
fn rank_threshold() -> f64 {
    1e-3
}

impl Default for JetsConfig {
    fn default() -> Self {
        JetsConfig {
            points: center_points(),
            threshold: rank_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    #[serde(default = "max_degree")]
    pub max_degree: usize,
    #[serde(default = "n_pairs")]
    pub pairs: usize,
}

fn max_degree() -> usize {
    4
}
fn n_pairs() -> usize {
    20
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            max_degree: max_degree(),
            pairs: n_pairs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    #[serde(default = "n_samples")]
    pub samples: usize,
    /// Directory of harmonic sample field files; generated from the
    /// dictionary and the configured metric when absent.
    #[serde(default)]
    pub samples_dir: Option<PathBuf>,
    #[serde(default = "center")]
    pub anchor: [f64; 3],
    #[serde(default)]
    pub mode: ScaleMode,
}

fn n_samples() -> usize {
    40
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            samples: n_samples(),
            samples_dir: None,
            anchor: center(),
            mode: ScaleMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Number of dictionary gradient fields in the uniqueness probe basis.
    #[serde(default = "probe_fields")]
    pub probe_fields: usize,
    /// Normal axis of the probe and identity patch.
    #[serde(default = "two")]
    pub patch_axis: usize,
}

fn probe_fields() -> usize {
    20
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            probe_fields: probe_fields(),
            patch_axis: two(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    /// Dirichlet solve against a manufactured solution.
    #[default]
    Manufactured,
    /// `rot∘grad` and `div∘rot` on smooth seeded fields.
    Calculus,
    /// Row sum of the value Poisson kernel at the box center.
    PoissonRowSum,
    /// The conformal change identity on a fixed interior region.
    Conformal,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default)]
    pub study: StudyKind,
}

/// Parses a config, listing every missing required key at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| !table.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing required keys: {}", missing.join(", "))));
    }
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.resolution.is_empty() || cfg.resolution.iter().any(|&n| n < 5) {
        return Err(Error::Config("resolution must list sizes of at least 5".into()));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
resolution = [17]
domain = { kind = "box" }
metric = { preset = "flat" }
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.dictionary.size, 40);
        assert_eq!(c.control.n_points, 2);
        assert_eq!(c.metric, MetricConfig::Preset(MetricPreset::Flat));
    }

    #[test]
    fn empty_config_lists_missing_keys() {
        let e = parse_config("").unwrap_err().to_string();
        for k in REQUIRED_KEYS {
            assert!(e.contains(k), "{e}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config(&format!("{MINIMAL}\nbogus = 1\n")).is_err());
        assert!(parse_config(&format!("{MINIMAL}\n[jets]\nthreshhold = 1e-3\n")).is_err());
    }

    #[test]
    fn presets_and_domains() {
        let text = r#"
seed = 1
resolution = [9, 17]
domain = { kind = "box-minus-box", inner_lo = [0.4, 0.4, 0.4], inner_hi = [0.6, 0.6, 0.6] }
metric = { preset = "conformal-sine", amplitude = 0.2 }
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.metric, MetricConfig::Preset(MetricPreset::ConformalSine { amplitude: 0.2 }));
        let d = c.domain.build(9).unwrap();
        assert_eq!(d.n_components(), 2);
    }
}
