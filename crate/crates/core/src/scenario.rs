//! Scenario files: a pair of process specifications, a grid and estimator budgets.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "geometric-eta",
//!   "x":     { "x0": 1.0, "drift": {...}, "diffusion": {...}, "jump": {...}, "levy": {...} },
//!   "xstar": { ... },
//!   "grid":  { "horizon": 1.0, "n_steps": 400, "n_paths": 100000, "seed": 1 },
//!   "budgets": { "constants_paths": 2000, ... }
//! }
//! ```
//!
//! Unknown fields are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::characteristics::CharacteristicsConfig;
use crate::error::{Error, Result};
use crate::flow::{default_start_grid, DEFAULT_SAFETY_FACTOR};
use crate::measure::LevyMeasureSpec;
use crate::process::ProcessSpec;
use crate::simulate::GridConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Budgets of the estimators run on a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Paths per start point for the flow constants.
    pub constants_paths: usize,
    /// Number of start points in `[x0/2, 2 x0]`; ignored when `start_points` is set.
    pub start_grid_size: usize,
    pub start_points: Option<Vec<f64>>,
    pub safety_factor: f64,
    pub characteristics: CharacteristicsConfig,
    /// Reference level `K` of the reported condition `Theta <= K`.
    pub theta_limit: f64,
    /// Paths whose node records are written to the trace file.
    pub trace_paths: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            constants_paths: 2000,
            start_grid_size: 9,
            start_points: None,
            safety_factor: DEFAULT_SAFETY_FACTOR,
            characteristics: CharacteristicsConfig::default(),
            theta_limit: 10.0,
            trace_paths: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Report directory; the command line `--out` takes precedence.
    pub dir: Option<String>,
    pub trace_format: Option<TraceFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub x: ProcessSpec,
    pub xstar: ProcessSpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Scenario {
    pub fn new(name: impl Into<String>, x: ProcessSpec, xstar: ProcessSpec, grid: GridConfig) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            x,
            xstar,
            grid,
            budgets: Budgets::default(),
            output: OutputConfig::default(),
        }
    }

    /// Parses and validates. Errors carry the line and column of the offending input.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            Error::Scenario(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "schema_version {} not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.x.x0 != self.xstar.x0 {
            return Err(Error::Scenario(format!(
                "x.x0 = {} and xstar.x0 = {} must agree",
                self.x.x0, self.xstar.x0
            )));
        }
        self.grid.validate()?;
        self.x.validate(self.grid.horizon)?;
        self.xstar.validate(self.grid.horizon)?;
        let b = &self.budgets;
        if b.constants_paths < 2 {
            return Err(Error::Scenario("budgets.constants_paths must be at least 2".into()));
        }
        if b.start_points.as_ref().map_or(b.start_grid_size == 0, |p| p.is_empty()) {
            return Err(Error::Scenario("start grid is empty".into()));
        }
        if !(b.safety_factor >= 1.0) {
            return Err(Error::Scenario("budgets.safety_factor must be >= 1".into()));
        }
        if !(b.theta_limit > 0.0) {
            return Err(Error::Scenario("budgets.theta_limit must be positive".into()));
        }
        Ok(())
    }

    pub fn start_grid(&self) -> Vec<f64> {
        match &self.budgets.start_points {
            Some(p) => p.clone(),
            None => default_start_grid(self.x.x0, self.budgets.start_grid_size),
        }
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_string(self).expect("scenario serializes"))
    }

    /// Key of the flow constants: depends only on `xstar`, the grid without its path
    /// budget and the constants budgets.
    pub fn constants_key(&self) -> String {
        let mut grid = self.grid.clone();
        grid.n_paths = 0;
        let key = serde_json::json!({
            "xstar": self.xstar,
            "grid": grid,
            "constants_paths": self.budgets.constants_paths,
            "start_grid": self.start_grid(),
            "safety_factor": self.budgets.safety_factor,
        });
        hash_json(&key.to_string())
    }

    /// `|log(beta / alpha)|` when both compensators are time-homogeneous gamma measures.
    pub fn gamma_tv(&self) -> Option<f64> {
        match (&self.x.levy, &self.xstar.levy) {
            (LevyMeasureSpec::GammaLevy { shape_rate: a }, LevyMeasureSpec::GammaLevy { shape_rate: b })
                if self.x.levy.is_time_homogeneous() && self.xstar.levy.is_time_homogeneous() =>
            {
                crate::measure::frullani_tv(a.at(0.0), b.at(0.0)).ok()
            }
            _ => None,
        }
    }

    /// Returns a copy with `value` written at the dotted JSON `path`
    /// (for example `xstar.diffusion.value`), validated again.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Scenario> {
        let mut v = serde_json::to_value(self)?;
        let mut cur = &mut v;
        for key in path.split('.') {
            cur = match cur {
                serde_json::Value::Object(m) => m
                    .get_mut(key)
                    .ok_or_else(|| Error::Scenario(format!("no field `{key}` in parameter path `{path}`")))?,
                serde_json::Value::Array(a) => {
                    let i: usize = key
                        .parse()
                        .map_err(|_| Error::Scenario(format!("`{key}` is not an index in `{path}`")))?;
                    let len = a.len();
                    a.get_mut(i)
                        .ok_or_else(|| Error::Scenario(format!("index {i} out of range ({len}) in `{path}`")))?
                }
                _ => return Err(Error::Scenario(format!("`{path}` does not name a scenario field"))),
            };
        }
        if !cur.is_number() {
            return Err(Error::Scenario(format!("`{path}` is not a numeric field")));
        }
        *cur = if cur.is_u64() && value >= 0.0 && value.fract() == 0.0 {
            serde_json::json!(value as u64)
        } else {
            serde_json::json!(value)
        };
        let s: Scenario = serde_json::from_value(v).map_err(|e| Error::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }
}

fn hash_json(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Scenario {
        Scenario::new(
            "geo",
            ProcessSpec::geometric(1.0, 0.05, 0.2, 0.1, 1.0),
            ProcessSpec::geometric(1.0, 0.05, 0.2, 0.12, 1.0),
            GridConfig::new(1.0, 100, 1000, 7),
        )
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
        assert_eq!(back.to_json(), s.to_json());
    }

    #[test]
    fn unknown_fields_rejected_with_position() {
        let mut v = serde_json::to_value(sample()).unwrap();
        v["grid"]["n_stepz"] = serde_json::json!(3);
        let text = serde_json::to_string_pretty(&v).unwrap();
        let err = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("n_stepz") && err.contains("line"), "{err}");
    }

    #[test]
    fn initial_values_must_agree() {
        let mut s = sample();
        s.xstar.x0 = 2.0;
        assert!(Scenario::from_json(&s.to_json()).is_err());
    }

    #[test]
    fn parameter_override() {
        let s = sample();
        let t = s.with_parameter("xstar.jump.slope", 0.1).unwrap();
        assert_eq!(t.xstar, t.x);
        assert_ne!(t.hash(), s.hash());
        assert_eq!(s.constants_key(), s.with_parameter("grid.n_paths", 5.0).unwrap().constants_key());
        assert!(s.with_parameter("xstar.jump.nope", 1.0).is_err());
        assert!(s.with_parameter("name", 1.0).is_err());
    }

    #[test]
    fn gamma_pair_tv() {
        let mut s = sample();
        s.x.levy = LevyMeasureSpec::gamma(1.0);
        s.xstar.levy = LevyMeasureSpec::gamma(2.0);
        assert!((s.gamma_tv().unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(sample().gamma_tv().is_none());
    }
}
