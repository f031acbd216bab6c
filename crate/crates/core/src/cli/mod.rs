//! Configuration, scenario dispatch and report output for the command-line
//! front end.

mod config;
mod emit;
mod report;

pub use config::{parse_config, Auto, ConfigError, Format, ModelSpec, PSpec, RunConfig, ScenarioName, Tolerances};
pub use emit::{emit, format_value, render_csv, render_json, render_sidecar, EmitError};
pub use report::{level_rows, random_radii, run, LevelRow, RunError, ScenarioReport, IDENTITY_SAMPLES};
