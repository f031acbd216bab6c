use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, ManifoldModel};
use crate::potential::PExponent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("`{field}` out of range: {message}")]
    Range { field: &'static str, message: String },
    #[error("`model`: {0}")]
    Model(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Flat,
    Cone {
        a: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_min: Option<f64>,
    },
    PowerWarp {
        alpha: f64,
    },
    PositiveCap {
        k: f64,
    },
    CustomSpline {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<ManifoldModel, GeometryError> {
        match self {
            ModelSpec::Flat => Ok(ManifoldModel::flat()),
            ModelSpec::Cone { a, r_min: None } => ManifoldModel::cone(*a),
            ModelSpec::Cone { a, r_min: Some(r) } => ManifoldModel::cone_with_boundary(*a, *r),
            ModelSpec::PowerWarp { alpha } => ManifoldModel::power_warp(*alpha),
            ModelSpec::PositiveCap { k } => ManifoldModel::positive_cap(*k),
            ModelSpec::CustomSpline { knots, values } => ManifoldModel::custom_spline(knots.clone(), values.clone()),
        }
    }

    /// Specs for the standard model library.
    pub fn library() -> Vec<ModelSpec> {
        vec![
            ModelSpec::Flat,
            ModelSpec::Cone { a: 0.8, r_min: None },
            ModelSpec::PowerWarp { alpha: 1.5 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

/// A fixed exponent, or `"auto"` to pick one from the fitted growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PSpec {
    Value(f64),
    Auto(Auto),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Solve,
    Monotone,
    Contradict,
    CheckIdentities,
    WillmoreExpansion,
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Solve => "solve",
            ScenarioName::Monotone => "monotone",
            ScenarioName::Contradict => "contradict",
            ScenarioName::CheckIdentities => "check-identities",
            ScenarioName::WillmoreExpansion => "willmore-expansion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative gradient tolerance of the energy minimizer.
    pub variational: f64,
    /// Finite-difference step in the level parameter.
    pub dt: f64,
    pub ode_step: f64,
    pub horizon: f64,
    pub pinch_threshold: f64,
    /// Number of sampled levels.
    pub levels: usize,
    /// Margin passed to the exponent selection when `p` is `"auto"`.
    pub auto_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            variational: 1e-10,
            dt: 1e-3,
            ode_step: 1e-3,
            horizon: 20.0,
            pinch_threshold: 0.01,
            levels: 64,
            auto_margin: 0.5,
        }
    }
}

fn default_r0() -> f64 {
    1.0
}

fn default_grid() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub p: PSpec,
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Defaults to `1e4 · r0` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub scenario: ScenarioName,
    /// Treat `{r = r0}` as the boundary of the manifold.
    #[serde(default)]
    pub boundary: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Seed for the sampled radii of the identity checks.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(model: ModelSpec, p: PSpec, scenario: ScenarioName) -> Self {
        RunConfig {
            model,
            p,
            r0: default_r0(),
            r_max: None,
            grid: default_grid(),
            scenario,
            boundary: false,
            tolerances: Tolerances::default(),
            output: None,
            format: Format::Csv,
            seed: 0,
        }
    }

    pub fn r_max_or_default(&self) -> f64 {
        self.r_max.unwrap_or(crate::potential::DEFAULT_RANGE_FACTOR * self.r0)
    }

    /// The model as configured, with `{r = r0}` as boundary in boundary mode.
    pub fn manifold(&self) -> Result<ManifoldModel, GeometryError> {
        let model = self.model.build()?;
        if self.boundary {
            model.with_boundary(self.r0)
        } else {
            Ok(model)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |field, message: String| Err(ConfigError::Range { field, message });
        if let PSpec::Value(p) = self.p {
            if PExponent::new(p).is_err() {
                return range("p", format!("p = {p} must lie in the open interval (1, 2)"));
            }
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return range("r0", format!("r0 = {} must be positive", self.r0));
        }
        if let Some(r_max) = self.r_max {
            if !(r_max.is_finite() && r_max >= 10.0 * self.r0) {
                return range("r_max", format!("r_max = {r_max} must be finite and at least 10 r0"));
            }
        }
        if self.grid < 16 {
            return range("grid", format!("grid = {} must be at least 16", self.grid));
        }
        let t = &self.tolerances;
        for (field, v) in [
            ("tolerances.variational", t.variational),
            ("tolerances.dt", t.dt),
            ("tolerances.ode_step", t.ode_step),
            ("tolerances.horizon", t.horizon),
            ("tolerances.pinch_threshold", t.pinch_threshold),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return range(field, format!("{v} must be positive"));
            }
        }
        if t.ode_step >= t.horizon {
            return range("tolerances.ode_step", "must be smaller than the horizon".into());
        }
        if t.levels < 4 {
            return range("tolerances.levels", format!("{} must be at least 4", t.levels));
        }
        if !(t.auto_margin > 0.0 && t.auto_margin < 1.0) {
            return range("tolerances.auto_margin", format!("{} must lie in (0, 1)", t.auto_margin));
        }
        let model = self.manifold()?;
        if !model.contains(self.r0) {
            return range(
                "r0",
                format!("r0 = {} outside the model domain [{}, {}]", self.r0, model.r_min, model.r_max),
            );
        }
        Ok(())
    }
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(r#"{"model":{"kind":"flat"},"p":1.5,"r0":1.0,"scenario":"monotone"}"#).unwrap();
        assert_eq!(c.grid, 4096);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.r_max_or_default(), 1e4);
        assert_eq!(c.scenario, ScenarioName::Monotone);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse_config(r#"{"model":{"kind":"flat"},"p":2.0,"scenario":"solve"}"#).unwrap_err();
        assert!(e.to_string().contains("(1, 2)"), "{e}");

        let e = parse_config(r#"{"model":{"kind":"flat"},"p":1.5,"scenario":"solve","colour":1}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Schema { .. }), "{e}");

        let e = parse_config(r#"{"model":{"kind":"cone","a":0.8,"b":1},"p":1.5,"scenario":"solve"}"#).unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");

        let e = parse_config(r#"{"model":{"kind":"flat"},"p":1.5,"scenario":"solve","tolerances":{"dt":-1}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("tolerances.dt"), "{e}");

        let e = parse_config(r#"{"model":{"kind":"flat"},"p":"often","scenario":"solve"}"#).unwrap_err();
        assert!(e.to_string().contains("`p`"), "{e}");

        assert!(parse_config(r#"{"model":{"kind":"cone","a":-1},"p":1.5,"scenario":"solve"}"#).is_err());
    }

    #[test]
    fn accepts_negatively_curved_cone_and_auto() {
        let c = parse_config(r#"{"model":{"kind":"cone","a":1.2},"p":"auto","scenario":"contradict"}"#).unwrap();
        assert_eq!(c.p, PSpec::Auto(Auto::Auto));
        assert_eq!(c.model, ModelSpec::Cone { a: 1.2, r_min: None });
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::new(ModelSpec::PowerWarp { alpha: 1.5 }, PSpec::Auto(Auto::Auto), ScenarioName::CheckIdentities);
        c.r_max = Some(1e5);
        c.output = Some("out/run.csv".into());
        c.format = Format::Json;
        c.tolerances.levels = 12;
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);

        let c = RunConfig::new(
            ModelSpec::CustomSpline {
                knots: vec![0.0, 0.5, 1.0, 1.5, 2.0],
                values: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            },
            PSpec::Value(1.25),
            ScenarioName::WillmoreExpansion,
        );
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(parse_config(&text).unwrap(), c);
    }
}
