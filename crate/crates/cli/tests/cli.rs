use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn blk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blk"))
        .args(args)
        .env_remove("BLK_THREADS")
        .output()
        .expect("blk runs")
}

fn small_scenario() -> Value {
    json!({
        "seed": 7,
        "start": "2020-01-01",
        "days": 740,
        "lattice": { "rows": 6, "cols": 6, "origin": [0.0, 0.0], "cell": 0.01, "borough_block": 3 },
        "covariates": [
            { "name": "density", "mean": 100, "sd": 10, "gradient": [30, 0] },
            { "name": "older_pct", "mean": 15, "sd": 3 }
        ],
        "streams": [
            {
                "name": "las",
                "categories": [["ambulance", 1.0]],
                "base_rate": 6,
                "seasonal_amplitude": 0.2,
                "seasonal_peak_day": 15,
                "background_share": 0.5,
                "covariate_effects": [{ "name": "density", "coef": 0.3 }],
                "hotspots": [{ "center": [0.02, 0.03], "radius": 0.01, "weight": 1.0 }]
            },
            {
                "name": "lfb",
                "categories": [["fire", 0.5], ["false_alarm", 0.5]],
                "base_rate": 3,
                "temperature_coupling": 0.02,
                "background_share": 0.5,
                "hotspots": [{ "center": [0.03, 0.03], "radius": 0.01, "weight": 1.0 }]
            }
        ]
    })
}

fn small_config() -> Value {
    json!({
        "seed": 3,
        "inputs": { "scenario": "scenario.json" },
        "sarimax": { "p_max": 1, "q_max": 0, "d_set": [0], "seasonal": false, "restarts": 1 },
        "spatial": { "n_perm": 99 },
        "gwr": { "covariates": ["density", "older_pct"], "bandwidth": 20 },
        "kde": { "bandwidth": 0.01, "grid": 40 },
        "comap": { "stream": "las", "dims": [{ "dim": "hour_of_day", "bins": 3 }], "overlap": 0.25 }
    })
}

fn setup(config: &Value) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("scenario.json"), small_scenario().to_string()).unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    (dir, path)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON in stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn missing_input_file_exits_2_naming_the_field() {
    let (dir, cfg) = setup(&json!({
        "seed": 1,
        "inputs": { "incidents": "nope.csv", "areas": "scenario.json", "weather": "scenario.json" }
    }));
    let o = blk(&["pipeline", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["field"], "inputs.incidents");
    assert!(e["message"].as_str().unwrap().contains("nope.csv"));
}

#[test]
fn missing_seed_and_unknown_fields_are_config_errors() {
    let (dir, cfg) = setup(&json!({ "inputs": { "scenario": "scenario.json" } }));
    let o = blk(&["ingest", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "seed");

    let mut c = small_config();
    c["spatial"]["permutations"] = json!(5);
    let (dir, cfg) = setup(&c);
    let o = blk(&["moran", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["field"].as_str().unwrap().starts_with("spatial"));

    let (dir, cfg) = setup(&small_config());
    let o = blk(&["ingest", "--config", s(&cfg), "--out", s(&dir.path().join("out")), "--s", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "aggregation.period");
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn pipeline_twice_gives_identical_manifests() {
    let (dir, cfg) = setup(&small_config());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = blk(&["pipeline", "--config", s(&cfg), "--out", s(&a), "--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = blk(&["pipeline", "--config", s(&cfg), "--out", s(&b)]);
    assert!(o.status.success());
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma, mb);
    assert!(ma["outputs"].as_array().unwrap().len() >= 8);
    assert_eq!(ma["seed"], 3);
    let stages: Vec<_> = ma["stages"].as_array().unwrap().iter().map(|s| s["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["ingest", "decompose", "fit", "moran", "lisa", "gwr", "kde", "comap", "rank", "render"]);
    for o in ma["outputs"].as_array().unwrap() {
        assert!(a.join(o["path"].as_str().unwrap()).is_file());
    }
}

#[test]
fn seed_override_changes_the_hash_and_permutation_results() {
    let (dir, cfg) = setup(&small_config());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(blk(&["moran", "--config", s(&cfg), "--out", s(&a)]).status.success());
    assert!(blk(&["moran", "--config", s(&cfg), "--out", s(&b), "--seed", "4", "--n-perm", "199"]).status.success());
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_ne!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(mb["seed"], 4);
    let outputs: Vec<_> = ma["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert_eq!(outputs, ["spatial/moran.json"]);
    let m: Value = serde_json::from_str(&fs::read_to_string(b.join("spatial/moran.json")).unwrap()).unwrap();
    assert_eq!(m["las_lfb"]["n_perm"], 199);
}

#[test]
fn monthly_period_and_log_response() {
    let (dir, cfg) = setup(&small_config());
    let out = dir.path().join("m");
    let o = blk(&["decompose", "--config", s(&cfg), "--out", s(&out), "--s", "12"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stl: Value = serde_json::from_str(&fs::read_to_string(out.join("decompose/stl.json")).unwrap()).unwrap();
    assert_eq!(stl["las"]["period"], 12);
    assert_eq!(stl["las"]["trend"].as_array().unwrap().len(), 25);

    let o = blk(&["gwr", "--config", s(&cfg), "--out", s(&out), "--log1p", "--bandwidth", "15"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bw: Value = serde_json::from_str(&fs::read_to_string(out.join("gwr/bandwidth.json")).unwrap()).unwrap();
    assert_eq!(bw["log1p"], true);
    assert_eq!(bw["spec"]["bandwidth"], 15.0);
}

#[test]
fn stage_failure_writes_error_json_and_exits_1() {
    let mut c = small_config();
    c["gwr"]["covariates"] = json!(["density", "no_such_column"]);
    let (dir, cfg) = setup(&c);
    let out = dir.path().join("out");
    let o = blk(&["pipeline", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let e: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(e["stage"], "gwr");
    assert!(e["error"].as_str().unwrap().contains("no_such_column"));
    // stages before the failure ran, later ones did not
    assert!(out.join("spatial/lisa.csv").is_file());
    assert!(!out.join("kde").exists());
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn synth_writes_the_four_inputs() {
    let (dir, _) = setup(&small_config());
    let out = dir.path().join("data");
    let o = blk(&["synth", "--scenario", s(&dir.path().join("scenario.json")), "--out", s(&out)]);
    assert!(o.status.success());
    for f in ["incidents.csv", "areas.geojson", "weather.csv", "covariates.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}
