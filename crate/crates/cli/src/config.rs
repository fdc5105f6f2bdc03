//! Run configuration: TOML document, defaults and aggregated validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use lgvortex_core::{Scheme, VortexParams};
use serde::{Deserialize, Deserializer, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("could not parse configuration: {0}")]
    Parse(String),
    /// Every violated field, one message each.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

/// TOML integers and floats both accepted for real-valued fields.
fn real<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Number {
        Int(i64),
        Float(f64),
    }
    Ok(match Number::deserialize(d)? {
        Number::Int(i) => i as f64,
        Number::Float(f) => f,
    })
}

fn optional_real<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    real(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSection {
    pub n: i64,
    #[serde(deserialize_with = "real")]
    pub e: f64,
    #[serde(deserialize_with = "real")]
    pub v: f64,
    /// Defaults to `12 / (e v)`.
    #[serde(default, deserialize_with = "optional_real", skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default = "default_m_r")]
    pub m_r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_m_xy")]
    pub m_xy: usize,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Zero threshold in units of `e v`.
    #[serde(default = "default_tol_zero", deserialize_with = "real")]
    pub tol_zero: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { m_xy: default_m_xy(), scheme: Scheme::default() }
    }
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self { k: default_k(), tol_zero: default_tol_zero(), seed: 0 }
    }
}

fn default_m_r() -> usize {
    2048
}
fn default_m_xy() -> usize {
    128
}
fn default_k() -> usize {
    6
}
fn default_tol_zero() -> f64 {
    1e-3
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_format_version() -> u32 {
    FORMAT_VERSION
}
fn default_pipeline() -> Vec<Stage> {
    vec![Stage::All]
}

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Profile,
    Background,
    Spectrum,
    Index,
    Algebra,
    Bosonmap,
    All,
}

impl Stage {
    pub const ORDERED: [Stage; 6] = [Stage::Profile, Stage::Background, Stage::Spectrum, Stage::Index, Stage::Algebra, Stage::Bosonmap];

    /// Stages whose results this stage consumes.
    pub fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Profile => &[],
            Stage::Background => &[Stage::Profile],
            Stage::Spectrum => &[Stage::Background],
            Stage::Index => &[Stage::Spectrum],
            Stage::Algebra => &[Stage::Index],
            Stage::Bosonmap => &[Stage::Spectrum],
            Stage::All => &[Stage::Profile, Stage::Background, Stage::Spectrum, Stage::Index, Stage::Algebra, Stage::Bosonmap],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Profile => "profile",
            Stage::Background => "background",
            Stage::Spectrum => "spectrum",
            Stage::Index => "index",
            Stage::Algebra => "algebra",
            Stage::Bosonmap => "bosonmap",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ORDERED.iter().chain(&[Stage::All]).find(|st| st.name() == s).copied().ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Requested stages together with everything they depend on, in order.
pub fn expand_pipeline(requested: &[Stage]) -> Vec<Stage> {
    let mut set = BTreeSet::new();
    let mut stack: Vec<Stage> = requested.to_vec();
    while let Some(s) = stack.pop() {
        if s != Stage::All && !set.insert(s) {
            continue;
        }
        stack.extend_from_slice(s.requires());
    }
    set.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    #[serde(default = "default_pipeline")]
    pub pipeline: Vec<Stage>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub vortex: VortexSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub spectral: SpectralSection,
}

impl RunConfig {
    /// Configuration with every default applied.
    pub fn new(n: i64, e: f64, v: f64) -> Self {
        let mut c = RunConfig {
            format_version: FORMAT_VERSION,
            pipeline: default_pipeline(),
            output_dir: default_output_dir(),
            vortex: VortexSection { n, e, v, r_max: None, m_r: default_m_r() },
            grid: GridSection::default(),
            spectral: SpectralSection::default(),
        };
        c.fill_defaults();
        c
    }

    /// Replace unset optional fields by their derived defaults.
    pub fn fill_defaults(&mut self) {
        if self.vortex.r_max.is_none() && self.vortex.e > 0.0 && self.vortex.v > 0.0 {
            self.vortex.r_max = Some(12.0 / (self.vortex.e * self.vortex.v));
        }
    }

    pub fn params(&self) -> VortexParams {
        let VortexSection { n, e, v, r_max, m_r } = self.vortex;
        VortexParams { n, e, v, r_max: r_max.unwrap_or(12.0 / (e * v)), m_r }
    }

    /// Zero threshold in absolute units.
    pub fn tol_zero(&self) -> f64 {
        self.spectral.tol_zero * self.params().ev()
    }

    /// Every violated precondition, prefixed with its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self.params().violations().into_iter().map(|m| format!("vortex.{m}")).collect();
        if self.grid.m_xy < 64 {
            out.push(format!("grid.m_xy must be >= 64, got {}", self.grid.m_xy));
        }
        if self.spectral.k == 0 {
            out.push("spectral.k must be >= 1".to_string());
        }
        if !(self.spectral.tol_zero > 0.0 && self.spectral.tol_zero.is_finite()) {
            out.push(format!("spectral.tol_zero must be positive, got {}", self.spectral.tol_zero));
        }
        if self.format_version != FORMAT_VERSION {
            out.push(format!("format_version must be {FORMAT_VERSION}, got {}", self.format_version));
        }
        if self.pipeline.is_empty() {
            out.push("pipeline must name at least one stage".to_string());
        }
        if self.output_dir.as_os_str().is_empty() {
            out.push("output_dir must not be empty".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Validation(v))
        }
    }

    /// Effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parse and validate a TOML configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.fill_defaults();
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("pipeline = [\"all\"]\n[vortex]\nn = 1\ne = 1\nv = 1\n").unwrap();
        assert_eq!(c.vortex.r_max, Some(12.0));
        assert_eq!(c.vortex.m_r, 2048);
        assert_eq!(c.grid.m_xy, 128);
        assert_eq!(c.spectral.k, 6);
        assert_eq!(c.spectral.tol_zero, 1e-3);
        assert_eq!(c.spectral.seed, 0);
        assert_eq!(c.format_version, 1);
        assert_eq!(c, RunConfig { pipeline: vec![Stage::All], ..RunConfig::new(1, 1.0, 1.0) });
    }

    #[test]
    fn negative_vorticity_names_the_field() {
        match parse_config("[vortex]\nn = -1\ne = 1\nv = 1\n") {
            Err(ConfigError::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].starts_with("vortex.n"), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_are_listed() {
        match parse_config("[vortex]\nn = -1\ne = 0\nv = 1\n[grid]\nm_xy = 10\n") {
            Err(ConfigError::Validation(v)) => {
                assert!(v.iter().any(|m| m.starts_with("vortex.n")), "{v:?}");
                assert!(v.iter().any(|m| m.starts_with("vortex.e")), "{v:?}");
                assert!(v.iter().any(|m| m.starts_with("grid.m_xy")), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config("[vortex]\nn = 1\ne = 1\nv = 1\nkappa = 0.5\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("colour = 1\n[vortex]\nn = 1\ne = 1\nv = 1\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn effective_config_round_trips() {
        let c = parse_config("pipeline = [\"profile\", \"index\"]\n[vortex]\nn = 2\ne = 2\nv = 0.5\n[grid]\nscheme = \"central4\"\n").unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn pipeline_expands_dependencies_in_order() {
        assert_eq!(expand_pipeline(&[Stage::Profile]), vec![Stage::Profile]);
        assert_eq!(expand_pipeline(&[Stage::Algebra]), vec![Stage::Profile, Stage::Background, Stage::Spectrum, Stage::Index, Stage::Algebra]);
        assert_eq!(expand_pipeline(&[Stage::All]), Stage::ORDERED.to_vec());
    }
}
