use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vardram(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vardram")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = vardram(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn default_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_trace_then_run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("idle.trace.gz");
    let out = ok(&["gen-trace", "--kind", "idle-heavy", "--seed", "3", "--requests", "1500", "--out", s(&trace)]);
    assert!(out.contains("1500 requests"));

    let reports = dir.path().join("reports");
    let cfg = default_config();
    for scenario in ["PV", "VAR"] {
        let line = ok(&["run", "--config", s(&cfg), "--scenario", scenario, "--trace", s(&trace), "--out", s(&reports)]);
        assert!(line.starts_with(scenario), "{line}");
        assert!(reports.join(format!("{scenario}.json")).exists());
        assert!(reports.join(format!("{scenario}.banks.csv")).exists());
    }

    let json = dir.path().join("cmp.json");
    let text = ok(&[
        "compare",
        "--baseline",
        s(&reports.join("PV.json")),
        "--candidate",
        s(&reports.join("VAR.json")),
        "--json",
        s(&json),
    ]);
    assert!(text.contains("energy.total_nj"));
    let cmp: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    let total = cmp["rows"].as_array().unwrap().iter().find(|r| r["metric"] == "energy.total_nj").unwrap();
    assert!(total["delta_pct"].as_f64().unwrap() < 0.0);
}

#[test]
fn run_all_writes_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "[synthetic]\nrequests = 300\n").unwrap();
    let out = ok(&["run", "--config", s(&cfg), "--all", "--seed", "5", "--out", s(dir.path())]);
    assert_eq!(out.lines().count(), 8);
    for name in ["IDEAL", "PV", "VAR", "ID-LP", "PV-LP", "VAR-LP", "VAR-N-R", "VAR-LP-R"] {
        let r: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("{name}.json"))).unwrap()).unwrap();
        assert_eq!(r["label"], name);
        assert_eq!(r["seed"], 5);
    }
}

#[test]
fn gen_map_output_is_usable_as_a_config_input() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("map.txt");
    let out = ok(&["gen-map", "--seed", "11", "--out", s(&map)]);
    assert!(out.contains("32x32"));
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "variation_map = \"map.txt\"\nseed = 11\n[synthetic]\nrequests = 200\n").unwrap();
    let a = ok(&["run", "--config", s(&cfg), "--scenario", "VAR", "--out", s(&dir.path().join("a"))]);
    let b = ok(&["run", "--scenario", "VAR", "--seed", "11", "--out", s(&dir.path().join("b"))]);
    assert!(a.starts_with("VAR") && b.starts_with("VAR"));
    // the map file reproduces the sampled map, so both reports agree apart from the trace
    let ra = std::fs::read_to_string(dir.path().join("a/VAR.json")).unwrap();
    let rb = std::fs::read_to_string(dir.path().join("b/VAR.json")).unwrap();
    let severity = |t: &str| {
        let v: serde_json::Value = serde_json::from_str(t).unwrap();
        v["banks"].as_array().unwrap().iter().map(|b| b["severity"].as_f64().unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(severity(&ra), severity(&rb));
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = vardram(&["run", "--scenario", "NOPE", "--out", s(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown scenario"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[refresh]\nmultiplierr = \"4x\"\n").unwrap();
    let o = vardram(&["run", "--config", s(&bad), "--out", s(dir.path())]);
    assert!(!o.status.success());

    let o = vardram(&["compare", "--baseline", "/nonexistent.json", "--candidate", "/nonexistent.json"]);
    assert!(!o.status.success());
    assert!(!vardram(&["gen-trace", "--kind", "zigzag", "--out", "x"]).status.success());
}
