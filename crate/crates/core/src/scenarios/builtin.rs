//! The built-in scenarios. Transition probabilities of the environment
//! chains and the grid geometry are illustrative defaults, not measured data.

use std::collections::BTreeMap;

use super::{
    ActionsSpec, EnvState, EnvTransition, EnvironmentSection, GridSection, LabelsSection, Region, ScenarioConfig,
    SpecSection, SynthesisSection, VehicleSection,
};
use crate::product::TieBreak;
use crate::synth::DEFAULT_PENALTY;
use crate::vehicle::{ActionDef, MpcParams};

/// Heading is weighted up from the library default so that a lane change
/// is followed by a straight move without drifting a row further.
fn mpc() -> MpcParams {
    MpcParams {
        q: [1.0, 1.0, 1.0, 0.1],
        ..MpcParams::default()
    }
}

/// Risk thresholds of the pedestrian study.
pub const PEDESTRIAN_THRESHOLDS: [f64; 4] = [0.1, 1.0, 5.0, 10.0];

fn costs(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn cells(entries: Vec<(&str, Vec<Region>)>) -> BTreeMap<String, Vec<Region>> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn aps(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn state(name: &str, labels: &[&str], occupies: Vec<[usize; 2]>) -> EnvState {
    EnvState {
        name: name.into(),
        labels: aps(labels),
        occupies,
    }
}

fn edge(from: &str, to: &str, p: f64) -> EnvTransition {
    EnvTransition {
        from: from.into(),
        to: to.into(),
        p,
    }
}

fn synthesis(gamma: f64, r_th: Option<f64>) -> SynthesisSection {
    SynthesisSection {
        gamma,
        r_th,
        relaxed: false,
        penalty: DEFAULT_PENALTY,
        r_th_grid: Vec::new(),
    }
}

fn vehicle(speed: f64) -> VehicleSection {
    VehicleSection {
        speed,
        noise: [1e-4, 1e-4, 1e-5, 1e-4],
        ..VehicleSection::default()
    }
}

/// Road along x: row 0 is sidewalk, rows 1-3 the forward lane, row 4 the
/// opposite lane. Construction blocks the lane centre at x = 5..6 and the
/// target spans the two upper lane rows at the far end. Lane changes can
/// overshoot by one row, which is the only way to violate while bypassing;
/// the opposite-lane side is the shorter way to the target.
pub fn gen_construction() -> ScenarioConfig {
    let lateral = |name: &str, dy: i32| ActionDef::new(name, &[(1, dy, 0.8), (1, 0, 0.1), (1, 2 * dy, 0.1)]);
    ScenarioConfig {
        schema_version: crate::SCHEMA_VERSION,
        name: "construction".into(),
        description: "construction zone in the forward lane".into(),
        grid: GridSection {
            nx: 10,
            ny: 5,
            cell_size: 4.0,
            origin: [0.0, 0.0],
            start: [0, 2],
            actions: ActionsSpec::Custom(vec![
                ActionDef::new("stay", &[(0, 0, 1.0)]),
                ActionDef::new("east", &[(1, 0, 0.8), (0, 0, 0.1), (2, 0, 0.1)]),
                lateral("north_east", 1),
                lateral("south_east", -1),
            ]),
        },
        labels: LabelsSection {
            ap: aps(&["t", "c", "s", "o"]),
            cells: cells(vec![
                ("t", vec![Region::rect(9, 9, 2, 3)]),
                ("c", vec![Region::rect(5, 6, 2, 2)]),
                ("s", vec![Region::rect(0, 9, 0, 0)]),
                ("o", vec![Region::rect(0, 9, 4, 4)]),
            ]),
            occupancy: None,
        },
        environment: EnvironmentSection::static_env(),
        spec: SpecSection {
            cosafe: "F t".into(),
            safety: "G (!c & !o & !s)".into(),
            tie_break: TieBreak::Violation,
        },
        costs: costs(&[("c", 10.0), ("s", 5.0), ("o", 2.0)]),
        synthesis: synthesis(0.9, None),
        vehicle: vehicle(2.0),
        mpc: mpc(),
    }
}

/// Single-lane road, 12 cells long, with a crosswalk at cells 7-8 and the
/// target at the end. The pedestrian steps onto the crosswalk at once and
/// clears it in four stages, each left with probability 0.95 per step, so
/// an aggressive driver may gamble on the last stage being over in time.
/// `stay` rolls forward one cell with probability 0.05, so a cautious
/// policy waits further back. `drive` covers two cells and may overshoot
/// by one; `creep` covers one and may stall.
pub fn gen_pedestrian() -> ScenarioConfig {
    const ADVANCE: f64 = 0.95;
    const LINGER: f64 = 0.05;
    const STAGES: [&str; 4] = ["entering", "crossing_near", "crossing_far", "leaving"];
    let mut states = vec![state("approaching", &[], vec![])];
    let mut transitions = vec![edge("approaching", STAGES[0], 1.0)];
    for (k, name) in STAGES.iter().enumerate() {
        states.push(state(name, &["p"], vec![]));
        let next = STAGES.get(k + 1).copied().unwrap_or("exited");
        transitions.push(edge(name, name, LINGER));
        transitions.push(edge(name, next, ADVANCE));
    }
    states.push(state("exited", &[], vec![]));
    transitions.push(edge("exited", "exited", 1.0));
    ScenarioConfig {
        schema_version: crate::SCHEMA_VERSION,
        name: "pedestrian".into(),
        description: "pedestrian crossing ahead".into(),
        grid: GridSection {
            nx: 12,
            ny: 1,
            cell_size: 4.0,
            origin: [0.0, 0.0],
            start: [0, 0],
            actions: ActionsSpec::Custom(vec![
                ActionDef::new("stay", &[(0, 0, 0.95), (1, 0, 0.05)]),
                ActionDef::new("creep", &[(1, 0, 0.9), (0, 0, 0.1)]),
                ActionDef::new("drive", &[(2, 0, 0.8), (1, 0, 0.1), (3, 0, 0.1)]),
            ]),
        },
        labels: LabelsSection {
            ap: aps(&["t", "p", "c"]),
            cells: cells(vec![
                ("t", vec![Region::rect(11, 11, 0, 0)]),
                ("c", vec![Region::rect(7, 8, 0, 0)]),
            ]),
            occupancy: None,
        },
        environment: EnvironmentSection {
            initial: "approaching".into(),
            states,
            transitions,
        },
        spec: SpecSection {
            cosafe: "F t".into(),
            safety: "G (p -> !c)".into(),
            tie_break: TieBreak::Violation,
        },
        costs: costs(&[("p&c", 300.0)]),
        synthesis: SynthesisSection {
            r_th_grid: PEDESTRIAN_THRESHOLDS.to_vec(),
            ..synthesis(0.9, Some(1.0))
        },
        vehicle: vehicle(2.0),
        mpc: mpc(),
    }
}

/// 8 x 5 grid with an east-west road (rows 1-3) crossing a north-south road
/// (columns 3-4). The environment pairs a traffic light with an opponent
/// that always advances one row north along column 4, wrapping around.
pub fn gen_intersection() -> ScenarioConfig {
    const LIGHT_STAY: f64 = 0.8;
    let mut states = Vec::new();
    let mut transitions = Vec::new();
    for light in ["red", "green"] {
        for pos in 0..4usize {
            let labels: &[&str] = if light == "green" { &["g"] } else { &[] };
            states.push(state(&format!("{light}_{pos}"), labels, vec![[4, pos]]));
            let next = (pos + 1) % 4;
            for to in ["red", "green"] {
                let p = if to == light { LIGHT_STAY } else { 1.0 - LIGHT_STAY };
                transitions.push(edge(&format!("{light}_{pos}"), &format!("{to}_{next}"), p));
            }
        }
    }
    ScenarioConfig {
        schema_version: crate::SCHEMA_VERSION,
        name: "intersection".into(),
        description: "signalised intersection with a crossing opponent".into(),
        grid: GridSection {
            nx: 8,
            ny: 5,
            cell_size: 4.0,
            origin: [0.0, 0.0],
            start: [0, 2],
            actions: ActionsSpec::Preset("king".into()),
        },
        labels: LabelsSection {
            ap: aps(&["t", "v", "g", "i", "n"]),
            cells: cells(vec![
                ("t", vec![Region::cell(7, 2)]),
                ("i", vec![Region::rect(3, 4, 1, 3)]),
                (
                    "n",
                    vec![
                        Region::rect(0, 2, 0, 0),
                        Region::rect(5, 7, 0, 0),
                        Region::rect(0, 2, 4, 4),
                        Region::rect(5, 7, 4, 4),
                    ],
                ),
            ]),
            occupancy: Some("v".into()),
        },
        environment: EnvironmentSection {
            initial: "red_0".into(),
            states,
            transitions,
        },
        spec: SpecSection {
            cosafe: "F t".into(),
            safety: "G (!g -> !i) & G (!n & !v)".into(),
            tie_break: TieBreak::Violation,
        },
        costs: costs(&[("v", 10.0), ("n", 5.0), ("i", 3.0)]),
        synthesis: synthesis(0.9, Some(1.0)),
        vehicle: vehicle(0.0),
        mpc: mpc(),
    }
}

/// 10 x 10 area split by a wall along row 5. A one-cell gap at column 6 lies
/// on the direct line to the target, and either diagonal slip there hits
/// the wall. The two-cell opening at the left edge is a longer detour that
/// can be passed without risk.
pub fn gen_reach_avoid() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: crate::SCHEMA_VERSION,
        name: "reach_avoid".into(),
        description: "reach the target while avoiding the obstacle".into(),
        grid: GridSection {
            nx: 10,
            ny: 10,
            cell_size: 4.0,
            origin: [0.0, 0.0],
            start: [0, 0],
            actions: ActionsSpec::Preset("king".into()),
        },
        labels: LabelsSection {
            ap: aps(&["t", "o"]),
            cells: cells(vec![
                ("t", vec![Region::rect(8, 9, 8, 9)]),
                ("o", vec![Region::rect(2, 5, 5, 5), Region::rect(7, 9, 5, 5)]),
            ]),
            occupancy: None,
        },
        environment: EnvironmentSection::static_env(),
        spec: SpecSection {
            cosafe: "F t".into(),
            safety: "G !o".into(),
            tie_break: TieBreak::Violation,
        },
        costs: costs(&[("o", 1.0)]),
        synthesis: SynthesisSection {
            r_th_grid: vec![0.01, 0.1],
            ..synthesis(0.95, Some(0.01))
        },
        vehicle: vehicle(0.0),
        mpc: mpc(),
    }
}
