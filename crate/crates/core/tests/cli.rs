use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geocensus"))
}

fn scenario(name: &str) -> String {
    format!("{}/scenarios/{name}.toml", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[surface]\nfamily = \"cosh-waist\"\nradius = 2.0\n").unwrap();
    let out = bin().args(["scan", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("radius"));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = bin()
        .args(["census", "--config", "/nonexistent/census.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().arg("descend").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_prints_json_without_out_dir() {
    let out = bin()
        .args(["scan", "--config", &scenario("unique-waist")])
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["provenance"], "parallel_scan");
    assert_eq!(recs[0]["index"]["classification"], "nondegenerate_minimum");
}

#[test]
fn index_of_a_stored_loop() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = geocensus::census::CensusConfig::load(scenario("bulge").as_ref()).unwrap();
    let m = cfg.metric_arc::<f64>().unwrap();
    let waist = geocensus::loop_space::BrokenLoop::parallel(m, 0.0, 1, 128, cfg.connect_options()).unwrap();
    let file = dir.path().join("waist.txt");
    geocensus::loop_space::write_loop(&waist, &file).unwrap();
    let out = bin()
        .args(["index", "--config", &scenario("bulge"), "--loop"])
        .arg(&file)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["iterates"][0]["ind_omega"], 3);
    assert!((v["mind"].as_f64().unwrap() - 4.0).abs() < 0.01);
}

#[test]
fn verify_single_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--scenario", "monotone", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("monotone") && stdout.contains("PASS"));
    assert!(dir.path().join("verify.json").exists());
    let out = bin().args(["verify", "--scenario", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_flag_writes_minimax_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["pass", "--config", &scenario("double-well"), "--trace", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let traces: Vec<_> = std::fs::read_dir(dir.path().join("trace")).unwrap().collect();
    assert_eq!(traces.len(), 1);
    let csv = std::fs::read_to_string(dir.path().join("census.csv")).unwrap();
    assert!(csv.contains("mountain_pass"));
}
