use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_barycenter"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, value: &Value) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn two_diracs() -> Value {
    json!({"measures": [
        {"points": [[0.0, 0.0]], "masses": [1.0]},
        {"points": [[2.0, 4.0]], "masses": [1.0]}
    ]})
}

#[test]
fn solve_two_diracs() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "in.json", &two_diracs());
    let out = dir.path().join("out.json");
    let o = run(&["solve", &input, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(&out);
    assert_eq!(r["barycenter"]["points"], json!([[1.0, 2.0]]));
    assert_eq!(r["barycenter"]["masses"], json!([1.0]));
    assert_eq!(r["total_cost"], json!(10.0));
}

#[test]
fn exact_solve_writes_fractions() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "in.json",
        &json!({"measures": [
            {"points": [[0.0]], "masses_exact": ["1"]},
            {"points": [[0.0], [2.0]], "masses_exact": ["1/2", "1/2"]}
        ]}),
    );
    let out = dir.path().join("out.json");
    let o = run(&["solve", &input, "-o", out.to_str().unwrap(), "--exact", "--sparse"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read(&out);
    assert_eq!(r["total_cost_exact"], json!("1"));
    assert_eq!(r["barycenter"]["masses_exact"], json!(["1/2", "1/2"]));

    let v = run(&["verify", out.to_str().unwrap(), &input]);
    assert_eq!(v.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(report["no_mass_splitting"], json!(true));
    assert_eq!(report["theorem2"], json!({"i": true, "ii": true, "iii": true, "iv": true}));
}

#[test]
fn verify_flags_a_tampered_transport() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "in.json",
        &json!({"measures": [
            {"points": [[0.0]], "masses": [1.0]},
            {"points": [[-1.0], [1.0]], "masses": [0.5, 0.5]}
        ]}),
    );
    let out = dir.path().join("out.json");
    assert_eq!(run(&["solve", &input, "-o", out.to_str().unwrap()]).status.code(), Some(0));
    let mut r = read(&out);
    // Route both atoms of the second measure through the first support point.
    let j = r["transports"][0]["entries"][0]["j"].clone();
    for e in r["transports"][1]["entries"].as_array_mut().unwrap() {
        e["j"] = j.clone();
    }
    r["transports"][0]["entries"] = json!([{"j": j, "k": 0, "mass": 1.0}]);
    let bad = write(&dir, "bad.json", &r);
    let v = run(&["verify", &bad, &input]);
    assert_eq!(v.status.code(), Some(1), "{}", String::from_utf8_lossy(&v.stderr));
    let report: Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(report["no_mass_splitting"], json!(false));
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.json");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["solve", "/nonexistent.json", "-o", out]).status.code(), Some(2));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(run(&["solve", garbage.to_str().unwrap(), "-o", out]).status.code(), Some(2));

    let bad_mass = write(&dir, "mass.json", &json!({"measures": [{"points": [[0.0]], "masses": [0.5]}]}));
    assert_eq!(run(&["solve", &bad_mass, "-o", out]).status.code(), Some(2));

    // 9 measures with 8 atoms each: 8^9 tuples exceed the default cap.
    let m = json!({"points": (0..8).map(|k| vec![k as f64 * 0.37]).collect::<Vec<_>>(), "masses": vec![0.125; 8]});
    let huge = write(&dir, "huge.json", &json!({"measures": vec![m; 9]}));
    assert_eq!(run(&["solve", &huge, "-o", out]).status.code(), Some(4));

    assert_eq!(run(&["solve"]).status.code(), Some(2));
    let o = bin().args(["centroids", &bad_mass]).env("BARYCENTER_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn centroids_report() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "in.json",
        &json!({"measures": [
            {"points": [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]], "masses": [0.25, 0.25, 0.5]},
            {"points": [[0.0, 2.0], [1.0, 1.0]], "masses": [0.5, 0.5]}
        ]}),
    );
    let o = bin().args(["centroids", &input]).env("BARYCENTER_THREADS", "2").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["count"], json!(6));
    assert_eq!(r["primal_variables"], json!(6 * 5 + 6));
    assert_eq!(r["primal_constraints"], json!(2 * 6 + 5));
    assert_eq!(r["sparsity_bound"], json!(4));
    assert_eq!(r["grid"]["extents"], json!([3, 3]));
    assert_eq!(r["grid"]["refined_extents"], json!([5, 5]));
}

#[test]
fn demo_solve_dump_and_plot() {
    let dir = TempDir::new().unwrap();
    let demo = dir.path().join("demo.json");
    assert_eq!(run(&["demo", "california", "-o", demo.to_str().unwrap()]).status.code(), Some(0));
    let d = read(&demo);
    assert_eq!(d["measures"].as_array().unwrap().len(), 8);

    let small = write(
        &dir,
        "small.json",
        &json!({"measures": [
            {"points": [[0.0, 0.0], [1.0, 0.0]], "masses": [0.5, 0.5]},
            {"points": [[0.0, 3.0], [2.0, 1.0]], "masses": [0.25, 0.75]}
        ]}),
    );
    let out = dir.path().join("out.json");
    let svg = dir.path().join("out.svg");
    let lp = dir.path().join("out.lp");
    let o = run(&[
        "solve",
        &small,
        "-o",
        out.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
        "--dump-lp",
        lp.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dump = std::fs::read_to_string(&lp).unwrap();
    // 16 transport entries with two nonzeros each, 4 central masses with one per measure

    assert_eq!(dump.lines().next().unwrap(), "lp rows 12 cols 20 nnz 40");
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    let plot = dir.path().join("plot.svg");
    let args = ["plot", out.to_str().unwrap(), &small, "-o", plot.to_str().unwrap(), "--transport-to", "1"];
    assert_eq!(run(&args).status.code(), Some(0));
    let first = std::fs::read(&plot).unwrap();
    assert_eq!(run(&args).status.code(), Some(0));
    assert_eq!(first, std::fs::read(&plot).unwrap());
    let text = String::from_utf8(first).unwrap();
    let r = read(&out);
    assert_eq!(text.matches("<line").count(), r["transports"][1]["entries"].as_array().unwrap().len());

    let line = ["plot", out.to_str().unwrap(), &small, "-o", plot.to_str().unwrap(), "--transport-to", "5"];
    assert_eq!(run(&line).status.code(), Some(2));
}

#[test]
fn oracle_summary() {
    let o = run(&["oracle", "--seed", "5", "--count", "6", "--max-n", "2", "--max-support", "2", "--denominator", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["count"], json!(6));
    assert_eq!(r["passed"], json!(6));
    assert_eq!(r["failed"], json!(0));
    assert_eq!(r["instances"].as_array().unwrap().len(), 6);
}
