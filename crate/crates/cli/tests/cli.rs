use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn riskplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskplan")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Work {
        let w = Work { dir: TempDir::new().unwrap() };
        let o = riskplan(&["generate", "all", "--out", s(&w.path("scn"))]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        w
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn scenario(&self, name: &str) -> PathBuf {
        self.path(&format!("scn/{name}.toml"))
    }

    fn synthesize(&self, name: &str, out: &str, extra: &[&str]) -> Output {
        let scn = self.scenario(name);
        let out = self.path(out);
        let mut args = vec!["synthesize", "--scenario", s(&scn), "--out", s(&out)];
        args.extend_from_slice(extra);
        riskplan(&args)
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn pedestrian_synthesis_writes_policy_and_manifest() {
    let w = Work::new();
    let o = w.synthesize("pedestrian", "ped", &["--rth", "0.1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sol = json(&w.path("ped/solution.json"));
    assert_eq!(sol["status"], "optimal");
    assert!(sol["risk"].as_f64().unwrap() <= 0.1 + 1e-8);
    let pol = json(&w.path("ped/policy.json"));
    assert_eq!(pol["r_th"], 0.1);
    let m = json(&w.path("ped/manifest.json"));
    assert_eq!(m["overrides"]["r_th"], 0.1);
    assert_eq!(m["invocation"]["command"], "synthesize");
    for file in ["solution.json", "policy.json", "manifest.json"] {
        assert_eq!(json(&w.path(&format!("ped/{file}")))["schema_version"], 1, "{file}");
    }
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["solution.json", "policy.json"]);
    assert!(m["timings_ms"]["compile"].as_f64().is_some());
    let hash = m["scenario"]["sha256"].as_str().unwrap();
    assert_eq!(pol["scenario_sha256"], hash);
    assert_eq!(hash.len(), 64);
}

#[test]
fn forced_violation_is_infeasible_until_relaxed() {
    let dir = TempDir::new().unwrap();
    let scn = fixture("chain_to_violation.toml");
    let out = dir.path().join("a");
    let o = riskplan(&["synthesize", "--scenario", s(&scn), "--rth", "0.5", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--relaxed"));
    assert_eq!(json(&out.join("solution.json"))["status"], "infeasible");
    assert!(!out.join("policy.json").exists());

    let out = dir.path().join("b");
    let o = riskplan(&["synthesize", "--scenario", s(&scn), "--rth", "0.5", "--relaxed", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sol = json(&out.join("solution.json"));
    assert!((sol["risk"].as_f64().unwrap() - 0.81).abs() < 1e-9);
    assert!((sol["slack"].as_f64().unwrap() - 0.31).abs() < 1e-9);
}

#[test]
fn invalid_overrides_fail_without_outputs() {
    let w = Work::new();
    let o = w.synthesize("pedestrian", "bad", &["--gamma", "1.2"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("synthesis.gamma"), "{}", stderr(&o));
    assert!(!w.path("bad").exists());
    let o = w.synthesize("pedestrian", "bad", &["--solver", "glpk"]);
    assert_eq!(code(&o), 1);
    assert!(!w.path("bad").exists());
    assert_eq!(code(&riskplan(&["frobnicate"])), 1);
    assert_eq!(code(&riskplan(&["synthesize", "--scenario", "x.toml", "--rth", "1", "--rth-grid", "1,2"])), 1);
    let o = riskplan(&["synthesize", "--scenario", "/nonexistent/x.toml"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn evaluate_matches_the_lp_and_checks_the_scenario() {
    let w = Work::new();
    assert_eq!(code(&w.synthesize("construction", "c", &[])), 0);
    let pol = w.path("c/policy.json");
    let scn = w.scenario("construction");
    let o = riskplan(&["evaluate", "--policy", s(&pol), "--scenario", s(&scn)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["schema_version"], 1);
    assert!(m["abs_diff"]["reward"].as_f64().unwrap() <= 1e-6);
    assert!(m["abs_diff"]["risk"].as_f64().unwrap() <= 1e-6);
    assert!(m.get("rollout").is_none());

    let out = w.path("eval");
    let o = riskplan(&["evaluate", "--policy", s(&pol), "--scenario", s(&scn), "--rollouts", "2000", "--seed", "9", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let m = json(&out.join("metrics.json"));
    let r = &m["rollout"];
    assert_eq!(r["n"], 2000);
    let diff = (r["reward_mean"].as_f64().unwrap() - m["oracle"]["reward"].as_f64().unwrap()).abs();
    assert!(diff <= 4.0 * r["reward_stderr"].as_f64().unwrap() + 1e-12);

    let other = w.scenario("pedestrian");
    let o = riskplan(&["evaluate", "--policy", s(&pol), "--scenario", s(&other)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("hash mismatch"));
}

#[test]
fn simulate_is_reproducible_and_reaches_the_target() {
    let w = Work::new();
    assert_eq!(code(&w.synthesize("construction", "c", &["--rth", "1"])), 0);
    let pol = w.path("c/policy.json");
    let scn = w.scenario("construction");
    let run = |out: &str, extra: &[&str]| {
        let out = w.path(out);
        let mut args = vec!["simulate", "--policy", s(&pol), "--scenario", s(&scn), "--out", s(&out)];
        args.extend_from_slice(extra);
        let o = riskplan(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(out.join("trajectory.csv")).unwrap()
    };
    let a = run("s1", &["--seed", "1"]);
    let b = run("s2", &["--seed", "1"]);
    assert_eq!(a, b);
    let last = a.lines().last().unwrap();
    assert!(last.ends_with("\"{t}\""), "{last}");
    assert_eq!(run("s0", &["--steps", "0"]), "t,px,py,theta,v,phi,a,cell,q_cs,q_s,letter\n");
}

#[test]
fn risk_field_export_tracks_the_threshold() {
    let w = Work::new();
    let scn = w.scenario("reach_avoid");
    let mut fields = Vec::new();
    for r in ["0.01", "0.1"] {
        let o = w.synthesize("reach_avoid", &format!("ra{r}"), &["--rth", r]);
        assert_eq!(code(&o), 0);
        let out = w.path(&format!("rf{r}"));
        let sol = w.path(&format!("ra{r}/solution.json"));
        let o = riskplan(&["export-risk-field", "--solution", s(&sol), "--scenario", s(&scn), "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let text = fs::read_to_string(out.join("risk_field.csv")).unwrap();
        let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
        assert_eq!(rows.len(), 100);
        fields.push(rows.iter().map(|r| r[4].parse::<f64>().unwrap()).collect::<Vec<_>>());
    }
    assert!(fields[0].iter().zip(&fields[1]).filter(|(a, b)| (*a - *b).abs() > 1e-6).count() >= 5);

    let dir = TempDir::new().unwrap();
    let chain = fixture("chain_to_violation.toml");
    let out = dir.path().join("inf");
    riskplan(&["synthesize", "--scenario", s(&chain), "--rth", "0.5", "--out", s(&out)]);
    let o = riskplan(&["export-risk-field", "--solution", s(&out.join("solution.json")), "--scenario", s(&chain), "--out", s(&dir.path().join("rf"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("optimal"));
}

#[test]
fn manifests_replay_to_identical_outputs() {
    let w = Work::new();
    assert_eq!(code(&w.synthesize("pedestrian", "p", &["--scenario-grid", "--dump-product"])), 0);
    let m = json(&w.path("p/manifest.json"));
    let listed: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert!(listed.contains(&"product.json") && listed.contains(&"rth_10/policy.json"));
    assert!(listed.contains(&"rth_0.1/problem.lp"));
    assert_eq!(json(&w.path("p/product.json"))["schema_version"], 1);

    let pol = w.path("p/rth_10/policy.json");
    let scn = w.scenario("pedestrian");
    let sim = w.path("sim");
    let o = riskplan(&["simulate", "--policy", s(&pol), "--scenario", s(&scn), "--seed", "5", "--out", s(&sim)]);
    assert_eq!(code(&o), 0);

    for manifest in [w.path("p/manifest.json"), sim.join("manifest.json")] {
        let o = riskplan(&["replay", s(&manifest)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("all identical"));
    }
    let again = w.path("sim/replay/trajectory.csv");
    assert_eq!(fs::read(again).unwrap(), fs::read(sim.join("trajectory.csv")).unwrap());

    let mut text = fs::read_to_string(&scn).unwrap();
    text.push_str("\n# edited\n");
    fs::write(&scn, text).unwrap();
    let o = riskplan(&["replay", s(&sim.join("manifest.json"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("hash mismatch"));
}

#[test]
fn log_level_comes_from_the_environment() {
    let w = Work::new();
    let scn = w.scenario("reach_avoid");
    let out = w.path("ra");
    let o = Command::new(env!("CARGO_BIN_EXE_riskplan"))
        .args(["synthesize", "--scenario", s(&scn), "--out", s(&out)])
        .env("RISKPLAN_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("decision variables"), "{}", stderr(&o));
}
