use std::path::Path;
use std::process::{Command, Output};

use geoclass::pipeline::RunManifest;
use geoclass::synthetic::{write_fixture, FixtureConfig};

fn geoclass(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoclass")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn digests(dir: &Path) -> std::collections::BTreeMap<String, String> {
    RunManifest::load(dir).unwrap().expect("manifest written").outputs
}

#[test]
fn subcommands_one_by_one_match_run_all() {
    let tmp = tempfile::tempdir().unwrap();
    let (files, _) = write_fixture(tmp.path(), 5, &FixtureConfig { k: None, ..FixtureConfig::default() }).unwrap();
    let cfg = files.config.to_str().unwrap();
    let all = tmp.path().join("all");
    let staged = tmp.path().join("staged");

    let out = geoclass(&["run-all", "--config", cfg, "--out-dir", all.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for sub in ["validate-input", "kselect", "fit", "evaluate", "profile", "external-validate", "export-geojson"] {
        let out = geoclass(&[sub, "--config", cfg, "--out-dir", staged.to_str().unwrap()]);
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = digests(&all);
    assert_eq!(a.len(), 23);
    assert_eq!(a, digests(&staged));
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let (files, _) = write_fixture(tmp.path(), 5, &FixtureConfig::default()).unwrap();
    let out_dir = tmp.path().join("o");
    let out = geoclass(&[
        "fit",
        "--config",
        files.config.to_str().unwrap(),
        "--k",
        "4",
        "--restarts",
        "20",
        "--seed",
        "77",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("model.json")).unwrap()).unwrap();
    assert_eq!(model["k"], 4);
    assert_eq!(model["restarts"], 20);
    assert_eq!(model["seed"], 77);
}

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let (files, _) = write_fixture(tmp.path(), 5, &FixtureConfig { k: None, ..FixtureConfig::default() }).unwrap();
    let cfg = files.config.to_str().unwrap();

    // fit with neither k nor an earlier kselect run
    let out = geoclass(&["fit", "--config", cfg]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fit"));

    // configuration without a seed
    let text = std::fs::read_to_string(&files.config).unwrap();
    let unseeded = tmp.path().join("unseeded.ini");
    std::fs::write(&unseeded, text.lines().filter(|l| !l.starts_with("seed")).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(geoclass(&["validate-input", "--config", unseeded.to_str().unwrap()]).status.code(), Some(2));

    // a malformed count in the district table
    let table = std::fs::read_to_string(&files.district_table).unwrap();
    let mut lines: Vec<String> = table.lines().map(str::to_string).collect();
    let cells: Vec<&str> = lines[3].split(',').collect();
    let broken: Vec<String> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| if i == cells.len() - 1 { "abc".into() } else { c.to_string() })
        .collect();
    lines[3] = broken.join(",");
    std::fs::write(&files.district_table, lines.join("\n") + "\n").unwrap();
    let out = geoclass(&["validate-input", "--config", cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    // the manifest is still written
    assert!(tmp.path().join("out").join("manifest.json").exists());
}

#[test]
fn help_lists_every_subcommand() {
    let out = geoclass(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in
        ["validate-input", "fit", "kselect", "evaluate", "profile", "external-validate", "export-geojson", "run-all"]
    {
        assert!(text.contains(sub), "missing {sub}");
    }
}
