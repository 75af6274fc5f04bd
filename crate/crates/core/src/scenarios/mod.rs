//! Scenario files and the built-in driving scenarios.
//!
//! A scenario fixes everything the pipeline needs: the grid abstraction,
//! labels, environment chain, task formulas, violation costs and synthesis
//! settings. [`compile`] turns it into automata, models and the product MDP.

mod builtin;
mod compile;
mod config;
mod risk_field;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use builtin::{gen_construction, gen_intersection, gen_pedestrian, gen_reach_avoid, PEDESTRIAN_THRESHOLDS};
pub use compile::{compile, validate, CompiledScenario};
pub use config::{
    ActionsSpec, EnvState, EnvTransition, EnvironmentSection, GridSection, LabelsSection, Region, ScenarioConfig,
    SpecSection, SynthesisSection, VehicleSection,
};
pub use risk_field::{risk_field, write_risk_field_csv, RiskField};

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// `path` is the dotted location of the offending field.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot build the product: {0}")]
    Product(#[from] crate::product::ProductError),
    #[error("cannot build the abstraction: {0}")]
    Vehicle(#[from] crate::vehicle::VehicleError),
    #[error("cannot compose the models: {0}")]
    Model(#[from] crate::models::ModelError),
}

impl ScenarioError {
    pub fn schema(path: impl Into<String>, message: impl ToString) -> ScenarioError {
        ScenarioError::Schema {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Field path of a schema error.
    pub fn path(&self) -> Option<&str> {
        match self {
            ScenarioError::Schema { path, .. } => Some(path),
            _ => None,
        }
    }
}

/// File format, chosen by extension: `.json` is JSON, anything else TOML.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn of(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

/// Parses and validates scenario text.
pub fn from_str(text: &str, format: Format) -> Result<ScenarioConfig, ScenarioError> {
    // Both formats go through a JSON value so parse errors carry a field path.
    let value: serde_json::Value = match format {
        Format::Json => serde_json::from_str(text).map_err(|e| ScenarioError::schema("", e))?,
        Format::Toml => toml::from_str(text).map_err(|e| ScenarioError::schema("", e.message()))?,
    };
    let config: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::schema(if path == "." { String::new() } else { path }, e.into_inner())
    })?;
    validate(&config)?;
    Ok(config)
}

pub fn to_string(config: &ScenarioConfig, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(config).expect("scenario serializes"),
        Format::Toml => toml::to_string_pretty(config).expect("scenario serializes"),
    }
}

pub fn load(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_str(&text, Format::of(path))
}

pub fn save(config: &ScenarioConfig, path: &Path) -> Result<(), ScenarioError> {
    std::fs::write(path, to_string(config, Format::of(path))).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Built-in scenario by name.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "construction" => Some(gen_construction()),
        "pedestrian" => Some(gen_pedestrian()),
        "intersection" => Some(gen_intersection()),
        "reach_avoid" => Some(gen_reach_avoid()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["construction", "pedestrian", "intersection", "reach_avoid"];

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_path(r: Result<ScenarioConfig, ScenarioError>) -> String {
        match r {
            Err(e) => e.path().expect("schema error").to_string(),
            Ok(_) => panic!("accepted an invalid scenario"),
        }
    }

    #[test]
    fn builtins_round_trip_in_both_formats() {
        for name in BUILTIN_NAMES {
            let c = builtin(name).unwrap();
            for f in [Format::Toml, Format::Json] {
                assert_eq!(from_str(&to_string(&c, f), f).unwrap(), c, "{name} {f:?}");
            }
        }
        assert!(builtin("nowhere").is_none());
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(Format::of(Path::new("a/b.json")), Format::Json);
        assert_eq!(Format::of(Path::new("a/b.JSON")), Format::Json);
        assert_eq!(Format::of(Path::new("a/b.toml")), Format::Toml);
        assert_eq!(Format::of(Path::new("a/b")), Format::Toml);
    }

    #[test]
    fn gamma_must_lie_in_open_interval() {
        for g in [1.0, 0.0, -0.5, 1.2] {
            let mut c = gen_pedestrian();
            c.synthesis.gamma = g;
            let text = to_string(&c, Format::Json);
            assert_eq!(schema_path(from_str(&text, Format::Json)), "synthesis.gamma");
        }
    }

    #[test]
    fn uncovered_violation_names_the_missing_cost() {
        let mut c = gen_intersection();
        c.costs.remove("n");
        assert_eq!(schema_path(validate(&c).map(|_| c)), "costs.n");
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let text = to_string(&gen_pedestrian(), Format::Json).replace("\"gamma\"", "\"gama\"");
        let err = from_str(&text, Format::Json).unwrap_err();
        assert_eq!(err.path(), Some("synthesis.gama"));
        let text = to_string(&gen_pedestrian(), Format::Toml).replace("nx = 12", "nx = \"twelve\"");
        assert_eq!(schema_path(from_str(&text, Format::Toml)), "grid.nx");
    }

    #[test]
    fn syntax_errors_are_schema_errors_at_the_root() {
        assert_eq!(schema_path(from_str("{", Format::Json)), "");
        assert_eq!(schema_path(from_str("grid = [", Format::Toml)), "");
    }

    #[test]
    fn bad_references_are_located() {
        let mut c = gen_pedestrian();
        c.environment.transitions[1].to = "elsewhere".into();
        assert_eq!(schema_path(validate(&c).map(|_| c)), "environment.transitions[1].to");

        let mut c = gen_pedestrian();
        c.spec.cosafe = "G t".into();
        assert_eq!(schema_path(validate(&c).map(|_| c)), "spec.cosafe");

        let mut c = gen_pedestrian();
        c.labels.cells.insert("q".into(), vec![Region::cell(0, 0)]);
        assert_eq!(schema_path(validate(&c).map(|_| c)), "labels.cells.q");

        let mut c = gen_pedestrian();
        c.labels.cells.get_mut("c").unwrap().push(Region::cell(12, 0));
        assert_eq!(schema_path(validate(&c).map(|_| c)), "labels.cells.c[1]");

        let mut c = gen_pedestrian();
        c.synthesis.r_th_grid.push(f64::NAN);
        assert_eq!(schema_path(validate(&c).map(|_| c)), "synthesis.r_th_grid[4]");
    }

    #[test]
    fn load_and_save_use_the_extension() {
        let dir = std::env::temp_dir().join(format!("riskplan-scn-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let c = gen_construction();
        for file in ["c.toml", "c.json"] {
            let path = dir.join(file);
            save(&c, &path).unwrap();
            assert_eq!(load(&path).unwrap(), c);
        }
        let text = std::fs::read_to_string(dir.join("c.json")).unwrap();
        assert!(text.trim_start().starts_with('{'));
        assert!(matches!(load(&dir.join("missing.toml")), Err(ScenarioError::Io { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
