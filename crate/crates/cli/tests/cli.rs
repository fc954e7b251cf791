use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_grelax");

fn grelax(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

/// The shipped default shrunk to something that runs in well under a second.
fn small_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> String {
    let mut config: Value = serde_json::from_str(include_str!("../configs/default.json")).unwrap();
    config["grid"]["n_steps"] = 64.into();
    config["pde"]["nx"] = 120.into();
    config["m_paths"] = 256.into();
    config["n_list"] = serde_json::json!([2, 4]);
    edit(&mut config);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = grelax(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), |c| c["band"]["sigma_min"] = (-0.5).into());
    let out = grelax(&["expect", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sigma_min"), "stderr: {stderr}");
}

#[test]
fn missing_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), |c| {
        c.as_object_mut().unwrap().remove("seed");
    });
    let out = grelax(&["expect", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn expect_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), |_| {});
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let status = grelax(&["expect", "--config", &config, "--out", out.to_str().unwrap()]).status;
        assert!(status.success());
    }
    let first = std::fs::read(a.join("expect.json")).unwrap();
    assert_eq!(first, std::fs::read(b.join("expect.json")).unwrap());
}

#[test]
fn seed_and_paths_overrides_take_effect() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), |_| {});
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(grelax(&["expect", "--config", &config, "--out", a.to_str().unwrap()]).status.success());
    let args = ["expect", "--config", &config, "--out", b.to_str().unwrap(), "--seed", "7", "--paths", "128"];
    assert!(grelax(&args).status.success());
    let (ja, jb) = (read_json(&a.join("expect.json")), read_json(&b.join("expect.json")));
    assert_eq!(jb["seed"], 7);
    assert_eq!(jb["n_paths"], 128);
    assert_ne!(ja["estimate"]["value"], jb["estimate"]["value"]);
}

/// With a degenerate band the G-heat equation is the heat equation, and
/// `cos(2x)` decays as `exp(-2 sigma^2 t)`.
#[test]
fn gheat_with_singleton_band_matches_heat_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let sigma: f64 = 0.8;
    let config = small_config(dir.path(), |c| {
        c["band"] = serde_json::json!({ "sigma_min": sigma, "sigma_max": sigma });
        c["family"]["levels"] = serde_json::json!([sigma]);
        c["family"]["piecewise"] = serde_json::json!([]);
        c["pde"]["nx"] = 400.into();
    });
    let out = grelax(&["gheat", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let summary = read_json(&dir.path().join("gheat.json"));
    let at_origin = summary["value_at_origin"].as_f64().unwrap();
    assert!((at_origin - (-2.0 * sigma * sigma).exp()).abs() < 1e-3, "{at_origin}");

    let csv = std::fs::read_to_string(dir.path().join("gheat.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,u,sigma"));
    let mut worst: f64 = 0.0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let exact = (-2.0 * sigma * sigma * v[0]).exp() * (2.0 * v[1]).cos();
        // The boundary of the visible domain is far from the hidden padding.
        worst = worst.max((v[2] - exact).abs());
    }
    assert!(worst < 1e-3, "max deviation {worst}");
}

#[test]
fn every_cheap_subcommand_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path(), |_| {});
    let cases: [(&str, &[&str]); 5] = [
        ("paths", &["paths.json", "paths.csv"]),
        ("chatter", &["chatter.json", "chatter.csv", "control.csv"]),
        ("solve", &["solve.json", "stability.csv"]),
        ("cost", &["cost.json", "cost_stability.csv"]),
        ("gheat", &["gheat.json", "gheat.csv"]),
    ];
    for (command, files) in cases {
        let out = dir.path().join(command);
        let run = grelax(&[command, "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(run.status.success(), "{command}: {}", String::from_utf8_lossy(&run.stderr));
        for file in files {
            assert!(out.join(file).is_file(), "{command} did not write {file}");
        }
    }
}
