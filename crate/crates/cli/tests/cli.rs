use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tmsurf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmsurf"))
        .current_dir(dir)
        .args(args)
        .env_clear()
        .output()
        .expect("spawn tmsurf")
}

fn tmsurf_env(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmsurf"))
        .current_dir(dir)
        .args(args)
        .env_clear()
        .envs(env.iter().copied())
        .output()
        .expect("spawn tmsurf")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema_check(v: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../schema/envelope.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn lambda_matches_fourier_oracle() {
    let dir = TempDir::new().unwrap();
    let out = tmsurf(
        dir.path(),
        &["lambda", "--n", "24", "--out", "l.json", "--csv", "l.csv"],
    );
    ok(&out);
    let v = read_json(&dir.path().join("l.json"));
    schema_check(&v);
    let oracle = &v["oracles"][0];
    assert_eq!(oracle["name"], "lambda_2");
    assert!(oracle["relative_error"].as_f64().unwrap() < 0.01, "{oracle}");
    let csv = std::fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert!(csv.starts_with("vertex,x,y,z,v0\n"));
    assert_eq!(csv.lines().count(), 24 * 24 + 1);
}

#[test]
fn rerun_is_byte_identical() {
    let runs: Vec<TempDir> = (0..2).map(|_| TempDir::new().unwrap()).collect();
    for dir in &runs {
        ok(&tmsurf(
            dir.path(),
            &[
                "maximize", "--n", "12", "--alpha", "0", "--eps", "1,0.5", "--out", "m.json",
            ],
        ));
        ok(&tmsurf(
            dir.path(),
            &["green", "--n", "16", "--x0", "3", "--out", "g.json", "--csv", "g.csv"],
        ));
    }
    for name in ["m.json", "g.json"] {
        let (a, b) = (
            read_json(&runs[0].path().join(name)),
            read_json(&runs[1].path().join(name)),
        );
        let bytes = |v: &Value| serde_json::to_vec(&v["payload"]).unwrap();
        assert_eq!(bytes(&a), bytes(&b));
        assert_eq!(a["mesh_hash"], b["mesh_hash"]);
        assert_eq!(a["config"], b["config"]);
    }
    let csv = |d: &TempDir| std::fs::read(d.path().join("g.csv")).unwrap();
    assert_eq!(csv(&runs[0]), csv(&runs[1]));
}

#[test]
fn invalid_p_is_a_config_error_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let out = tmsurf(dir.path(), &["lambda", "--n", "8", "--p", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`p`"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn config_file_errors_cite_the_line() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("c.toml"), "surface = torus\nn = 8\nwibble = 3\n").unwrap();
    let out = tmsurf(dir.path(), &["--config", "c.toml", "lambda"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config line 3"));

    std::fs::write(dir.path().join("d.toml"), "n = 8\np = two\n").unwrap();
    let out = tmsurf(dir.path(), &["--config", "d.toml", "lambda"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("field `p` (config line 2)"), "{err}");
}

#[test]
fn flags_override_env_override_file() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("c.toml"), "n = 12\nx0 = 0\nalpha = 0\n").unwrap();
    let out = tmsurf_env(
        dir.path(),
        &["--config", "c.toml", "green", "--x0", "5", "--out", "g.json"],
        &[("TMS_N", "16"), ("TMS_X0", "7")],
    );
    ok(&out);
    let v = read_json(&dir.path().join("g.json"));
    assert_eq!(v["config"]["n"], "16");
    assert_eq!(v["config"]["x0"], "5");
    assert_eq!(v["config"]["alpha"], "0");
    assert_eq!(v["payload"]["green"]["x0"], 5);
}

#[test]
fn stored_results_chain_into_reports() {
    let dir = TempDir::new().unwrap();
    ok(&tmsurf(
        dir.path(),
        &[
            "maximize",
            "--n",
            "16",
            "--alpha",
            "0",
            "--eps",
            "1,0.5,0.2",
            "--out",
            "m.json",
        ],
    ));
    ok(&tmsurf(
        dir.path(),
        &["green", "--n", "16", "--x0", "0", "--out", "g.json", "--csv", "g.csv"],
    ));
    ok(&tmsurf(
        dir.path(),
        &[
            "blowup-report",
            "--input",
            "m.json",
            "--out",
            "b.json",
            "--csv",
            "b.csv",
        ],
    ));
    ok(&tmsurf(
        dir.path(),
        &[
            "bound-compare",
            "--input",
            "m.json",
            "--green",
            "g.json",
            "--out",
            "c.json",
        ],
    ));

    let m = read_json(&dir.path().join("m.json"));
    let b = read_json(&dir.path().join("b.json"));
    let c = read_json(&dir.path().join("c.json"));
    for v in [&m, &b, &c] {
        schema_check(v);
    }
    assert_eq!(b["mesh_hash"], m["mesh_hash"]);
    let mass = b["payload"]["bubble_mass"].as_f64().unwrap();
    assert!((mass - 1.0).abs() < 1e-6);
    assert_eq!(b["payload"]["reports"].as_array().unwrap().len(), 3);
    let rows = c["payload"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["j_value"].as_f64() < r["bound"].as_f64()));
    assert!(c["payload"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn mismatched_meshes_are_rejected() {
    let dir = TempDir::new().unwrap();
    ok(&tmsurf(
        dir.path(),
        &["maximize", "--n", "12", "--alpha", "0", "--eps", "1", "--out", "m.json"],
    ));
    ok(&tmsurf(
        dir.path(),
        &["green", "--n", "16", "--x0", "0", "--out", "g.json"],
    ));
    let out = tmsurf(dir.path(), &["bound-compare", "--input", "m.json", "--green", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh"));

    let out = tmsurf(dir.path(), &["blowup-report", "--input", "g.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bound_violation_exits_four_after_writing() {
    let dir = TempDir::new().unwrap();
    ok(&tmsurf(
        dir.path(),
        &["maximize", "--n", "12", "--alpha", "0", "--eps", "1", "--out", "m.json"],
    ));
    ok(&tmsurf(
        dir.path(),
        &["green", "--n", "12", "--x0", "0", "--out", "g.json"],
    ));
    let path = dir.path().join("m.json");
    let mut m = read_json(&path);
    m["payload"]["path"][0]["j_value"] = Value::from(100.0);
    std::fs::write(&path, serde_json::to_vec(&m).unwrap()).unwrap();
    let out = tmsurf(
        dir.path(),
        &[
            "bound-compare",
            "--input",
            "m.json",
            "--green",
            "g.json",
            "--out",
            "c.json",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    let c = read_json(&dir.path().join("c.json"));
    assert_eq!(c["payload"]["violations"].as_array().unwrap().len(), 1);
}

#[test]
fn part_iii_cli_beats_bound() {
    let dir = TempDir::new().unwrap();
    let out = tmsurf(
        dir.path(),
        &[
            "testfn",
            "part-iii",
            "--n",
            "64",
            "--eps",
            "3e-2,1e-2",
            "--out",
            "t.json",
            "--csv",
            "t.csv",
        ],
    );
    ok(&out);
    let v = read_json(&dir.path().join("t.json"));
    schema_check(&v);
    assert_eq!(v["payload"]["report"]["all_pass"], true);
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(csv.lines().count() > 10);
}

#[test]
fn part_i_cli_rejects_small_alpha() {
    let dir = TempDir::new().unwrap();
    let out = tmsurf(
        dir.path(),
        &["testfn", "part-i", "--n", "32", "--alpha", "0.5*lambda_p"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn atomic_write_leaves_no_temporaries() {
    let dir = TempDir::new().unwrap();
    ok(&tmsurf(
        dir.path(),
        &["green", "--n", "16", "--x0", "0", "--out", "g.json", "--csv", "g.csv"],
    ));
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["g.csv", "g.json"]);
}

#[test]
fn empty_maximizer_list_gives_empty_table() {
    let dir = TempDir::new().unwrap();
    ok(&tmsurf(
        dir.path(),
        &["maximize", "--n", "16", "--alpha", "0", "--eps", "1", "--out", "m.json"],
    ));
    ok(&tmsurf(
        dir.path(),
        &["green", "--n", "16", "--x0", "0", "--out", "g.json"],
    ));
    let path = dir.path().join("m.json");
    let mut m = read_json(&path);
    m["payload"]["path"] = Value::Array(Vec::new());
    std::fs::write(&path, serde_json::to_vec(&m).unwrap()).unwrap();
    let out = tmsurf(
        dir.path(),
        &[
            "bound-compare",
            "--input",
            "m.json",
            "--green",
            "g.json",
            "--out",
            "c.json",
            "--csv",
            "c.csv",
        ],
    );
    ok(&out);
    let c = read_json(&dir.path().join("c.json"));
    assert!(c["payload"]["rows"].as_array().unwrap().is_empty());
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv, "eps,j_value,bound,gap,crossing\n");
}
