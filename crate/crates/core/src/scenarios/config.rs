use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::product::TieBreak;
use crate::synth::DEFAULT_PENALTY;
use crate::vehicle::{ActionDef, BicycleParams, MpcParams};

/// A scenario file. Cells are addressed as `[ix, iy]`; see the README for
/// a field-by-field description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub grid: GridSection,
    pub labels: LabelsSection,
    pub environment: EnvironmentSection,
    pub spec: SpecSection,
    pub costs: BTreeMap<String, f64>,
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub mpc: MpcParams,
}

fn schema_version() -> u32 {
    crate::SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub cell_size: f64,
    #[serde(default)]
    pub origin: [f64; 2],
    pub start: [usize; 2],
    pub actions: ActionsSpec,
}

/// Either a named preset (`"king"`: stay plus the eight neighbours) or an
/// explicit list of motion primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionsSpec {
    Preset(String),
    Custom(Vec<ActionDef>),
}

/// Inclusive cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x: [usize; 2],
    pub y: [usize; 2],
}

impl Region {
    pub fn cell(ix: usize, iy: usize) -> Region {
        Region { x: [ix, ix], y: [iy, iy] }
    }

    pub fn rect(x0: usize, x1: usize, y0: usize, y1: usize) -> Region {
        Region { x: [x0, x1], y: [y0, y1] }
    }

    pub fn contains(&self, ix: usize, iy: usize) -> bool {
        self.x[0] <= ix && ix <= self.x[1] && self.y[0] <= iy && iy <= self.y[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsSection {
    pub ap: Vec<String>,
    /// Propositions attached to vehicle cells.
    #[serde(default)]
    pub cells: BTreeMap<String, Vec<Region>>,
    /// Proposition that holds when the vehicle shares a cell with an
    /// environment agent (see `EnvState::occupies`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvState {
    pub name: String,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub occupies: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvTransition {
    pub from: String,
    pub to: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub initial: String,
    pub states: Vec<EnvState>,
    #[serde(default)]
    pub transitions: Vec<EnvTransition>,
}

impl EnvironmentSection {
    /// One state with a self-loop.
    pub fn static_env() -> Self {
        EnvironmentSection {
            initial: "static".into(),
            states: vec![EnvState {
                name: "static".into(),
                labels: vec![],
                occupies: vec![],
            }],
            transitions: vec![EnvTransition {
                from: "static".into(),
                to: "static".into(),
                p: 1.0,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecSection {
    pub cosafe: String,
    pub safety: String,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub gamma: f64,
    /// Absent means no risk bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_th: Option<f64>,
    #[serde(default)]
    pub relaxed: bool,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    /// Thresholds swept by `--rth-grid` when none are given on the command line.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub r_th_grid: Vec<f64>,
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}

/// Bicycle parameters plus the closed-loop settings of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleSection {
    pub wheelbase: f64,
    pub dt: f64,
    pub noise: [f64; 4],
    pub v_min: f64,
    pub v_max: f64,
    pub phi_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Initial heading (rad) and speed (m/s) at the start cell centre.
    pub heading: f64,
    pub speed: f64,
    /// Integration steps per abstract step.
    pub substeps: usize,
    /// Default abstract step cap for simulation.
    pub steps: usize,
}

impl Default for VehicleSection {
    fn default() -> Self {
        let b = BicycleParams::default();
        VehicleSection {
            wheelbase: b.wheelbase,
            dt: b.dt,
            noise: b.noise,
            v_min: b.v_min,
            v_max: b.v_max,
            phi_max: b.phi_max,
            a_min: b.a_min,
            a_max: b.a_max,
            heading: 0.0,
            speed: 0.0,
            substeps: 20,
            steps: 100,
        }
    }
}

impl VehicleSection {
    pub fn bicycle(&self) -> BicycleParams {
        BicycleParams {
            wheelbase: self.wheelbase,
            dt: self.dt,
            noise: self.noise,
            v_min: self.v_min,
            v_max: self.v_max,
            phi_max: self.phi_max,
            a_min: self.a_min,
            a_max: self.a_max,
        }
    }
}
