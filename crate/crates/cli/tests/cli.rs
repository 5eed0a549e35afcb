use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_honrep"))
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs/product_choice.json")
}

fn bundled_doc() -> Value {
    serde_json::from_str(&std::fs::read_to_string(bundled()).unwrap()).unwrap()
}

fn write_spec(dir: &Path, doc: &Value) -> PathBuf {
    let p = dir.join("spec.json");
    std::fs::write(&p, serde_json::to_string_pretty(doc).unwrap()).unwrap();
    p
}

fn run(args: &[&str], spec: &Path) -> Output {
    bin()
        .args(args)
        .arg("--spec")
        .arg(spec)
        .env("HONREP_WORKERS", "2")
        .output()
        .unwrap()
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad json ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn solve_product_choice() {
    let out = run(&["solve"], &bundled());
    assert_eq!(code(&out), 0);
    let v = json_of(&out);
    assert_eq!(v["stackelberg"]["expected"], json!(0.5));
    assert_eq!(v["v1_prime"]["value"], json!(0.0));
    assert_eq!(v["v1_prime"]["subset"], json!(["L"]));
    assert_eq!(v["lambda_bar"], json!(0.5));
    assert_eq!(v["minmax"]["expected"], json!(0.0));
    assert_eq!(v["assumptions"]["a1_singletons"], json!(true));
}

#[test]
fn bad_probabilities_name_the_section() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = bundled_doc();
    doc["environment"][2]["p"] = json!(0.39);
    let out = run(&["solve"], &write_spec(dir.path(), &doc));
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("environment"));
}

#[test]
fn unknown_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = bundled_doc();
    doc["game"]["colour"] = json!("blue");
    let out = run(&["solve"], &write_spec(dir.path(), &doc));
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_spec_is_an_input_error() {
    let out = run(&["solve"], Path::new("/nonexistent/spec.json"));
    assert_eq!(code(&out), 2);
}

#[test]
fn single_action_game_is_degenerate_but_valid() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "game": {
            "theta": ["only"],
            "a": ["X"],
            "b": ["N", "T"],
            "u1": [[[0, 1]]],
            "u2": [[0, 1]]
        },
        "environment": [{"theta": "only", "subset": ["X"], "p": 1.0}],
        "sim": {"seeds": 2, "delta": 0.9}
    });
    let spec = write_spec(dir.path(), &doc);
    let out = run(&["solve"], &spec);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["stackelberg"]["expected"], json!(1.0));
    assert_eq!(v["v1_prime"]["value"], json!(1.0));
    let out = run(&["simulate"], &spec);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert!((v["payoff"]["mean"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        "--seeds",
        "1",
        "--seed",
        "42",
        "--json-indent",
        "0",
    ];
    let a = run(&args, &bundled());
    let b = run(&args, &bundled());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = run(
        &[
            "simulate",
            "--seeds",
            "1",
            "--seed",
            "43",
            "--json-indent",
            "0",
        ],
        &bundled(),
    );
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn worker_count_does_not_change_results() {
    let go = |w: &str| {
        bin()
            .args(["simulate", "--seeds", "8", "--json-indent", "0", "--spec"])
            .arg(bundled())
            .env("HONREP_WORKERS", w)
            .output()
            .unwrap()
    };
    let a = go("1");
    let b = go("4");
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&go("zero")), 2);
}

#[test]
fn preannounce_needs_a_tremble() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = bundled_doc();
    doc["sim"].as_object_mut().unwrap().remove("eta");
    let spec = write_spec(dir.path(), &doc);
    let out = run(
        &["simulate", "--variant", "preannounce", "--seeds", "2"],
        &spec,
    );
    assert_eq!(code(&out), 2);
    let out = run(
        &["simulate", "--variant", "preannounce", "--seeds", "2"],
        &bundled(),
    );
    assert_eq!(code(&out), 0);
}

#[test]
fn unknown_variant_is_an_input_error() {
    let out = run(&["simulate", "--variant", "sideways"], &bundled());
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_bundled_spec_passes() {
    let out = run(&["verify"], &bundled());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = json_of(&out);
    assert_eq!(v["passed"], json!(true));
    let names: Vec<&str> = v["sections"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"low_payoff_profile"));
    assert!(names.contains(&"payoff_bound"));
}

#[test]
fn zero_bad_period_budget_fails_verification() {
    let out = run(&["verify", "--override-t-bar", "0"], &bundled());
    assert_eq!(code(&out), 1);
    assert_eq!(json_of(&out)["passed"], json!(false));
}

#[test]
fn violated_assumption_is_skipped_not_failed() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc = bundled_doc();
    doc["environment"] = json!([
        {"theta": "good", "subset": ["L", "H"], "p": 0.5},
        {"theta": "bad", "subset": ["L", "H"], "p": 0.5}
    ]);
    doc["sim"].as_object_mut().unwrap().remove("eta");
    doc["bound"].as_object_mut().unwrap().remove("corollary3");
    let out = run(&["verify", "--seeds", "4"], &write_spec(dir.path(), &doc));
    let v = json_of(&out);
    let section = v["sections"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "payoff_bound")
        .unwrap();
    let checks = section["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert_eq!(c["status"], json!("skipped"));
        assert!(c["reason"].as_str().unwrap().contains("assumption failed"));
    }
}

#[test]
fn out_directory_receives_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = out_dir.to_str().unwrap();
    for cmd in ["solve", "bound", "verify"] {
        assert!(run(&[cmd, "--out", o, "--seeds", "2"], &bundled())
            .status
            .success());
    }
    let sim = run(
        &[
            "simulate",
            "--out",
            o,
            "--seeds",
            "2",
            "--trajectories",
            "1",
        ],
        &bundled(),
    );
    assert!(sim.status.success());
    for f in ["solve.json", "bound.json", "verify.json", "sim_result.json"] {
        let text = std::fs::read_to_string(out_dir.join(f)).unwrap();
        serde_json::from_str::<Value>(&text).unwrap();
    }
    let mut rdr = csv::Reader::from_path(out_dir.join("trajectories.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "episode");
    assert!(headers.iter().any(|h| h == "log_lr"));
    let rows = rdr.records().count();
    let horizon = json_of(&sim)["horizon"].as_u64().unwrap() as usize;
    assert_eq!(rows, horizon);
}

#[test]
fn json_indent_zero_is_compact() {
    let out = run(&["bound", "--json-indent", "0"], &bundled());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1);
}
