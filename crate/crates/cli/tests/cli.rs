use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MODEL: &str = r#"{
  "labels": ["building", "contents", "profits"],
  "marginals": [
    {"p": 0.45, "mu": 0.5, "sigma": 0.9},
    {"p": 0.35, "mu": -0.2, "sigma": 1.2},
    {"p": 0.25, "mu": -1.0, "sigma": 1.4}
  ],
  "correlation": [[1.0, 0.6, 0.4], [0.6, 1.0, 0.5], [0.4, 0.5, 1.0]]
}"#;

fn combfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combfit"))
        .args(args)
        .env_remove("COMBFIT_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// A temp dir holding `model.json` and `claims.csv` with `rows` rows.
    fn new(rows: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("model.json"), MODEL).unwrap();
        let f = Self { dir };
        let o = combfit(&[
            "simulate",
            "--model",
            s(&f.path("model.json")),
            "--rows",
            &rows.to_string(),
            "--seed",
            "11",
            "-o",
            s(&f.path("claims.csv")),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }
}

fn schema(name: &str) -> Value {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = jsonschema::validator_for(&schema(name)).expect("schema compiles");
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn without_timestamp(mut v: Value) -> Value {
    v["provenance"]["generated_at"] = Value::Null;
    v
}

#[test]
fn missing_input_exits_2() {
    let o = combfit(&["stats", "-i", "/nonexistent/claims.csv"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
}

#[test]
fn unreadable_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "a,b\n1,2\n3\n").unwrap();
    assert_eq!(code(&combfit(&["stats", "-i", s(&p)])), 2);
}

#[test]
fn negative_claim_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("neg.csv");
    fs::write(&p, "a,b\n1,-2\n").unwrap();
    let o = combfit(&["stats", "-i", s(&p)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 0"));
}

#[test]
fn stochastic_commands_require_a_seed() {
    let f = Fixture::new(200);
    let claims = f.path("claims.csv");
    assert_eq!(code(&combfit(&["fit", "-i", s(&claims)])), 2);
    assert_eq!(code(&combfit(&["bootstrap", "-i", s(&claims), "-B", "5"])), 2);
    assert_eq!(code(&combfit(&["simulate", "--model", s(&f.path("model.json"))])), 2);
    assert_eq!(code(&combfit(&["bench", "--dims", "2"])), 2);
}

#[test]
fn seed_falls_back_to_environment() {
    let f = Fixture::new(50);
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_combfit"));
        c.args(args).env_remove("COMBFIT_SEED");
        if let Some(e) = env {
            c.env("COMBFIT_SEED", e);
        }
        c.output().unwrap()
    };
    let model = f.path("model.json");
    let a = run(Some("5"), &["simulate", "--model", s(&model), "--rows", "20"]);
    let b = run(None, &["simulate", "--model", s(&model), "--rows", "20", "--seed", "5"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn existing_output_needs_force() {
    let f = Fixture::new(100);
    let out = f.path("stats.json");
    fs::write(&out, "keep").unwrap();
    let o = combfit(&["stats", "-i", s(&f.path("claims.csv")), "-o", s(&out)]);
    assert_eq!(code(&o), 2);
    assert_eq!(fs::read_to_string(&out).unwrap(), "keep");
    let o = combfit(&["stats", "-i", s(&f.path("claims.csv")), "-o", s(&out), "--force"]);
    assert_eq!(code(&o), 0);
    assert_eq!(f.json("stats.json")["n_days"], 100);
}

#[test]
fn simulate_is_reproducible_and_labelled() {
    let f = Fixture::new(10);
    let model = f.path("model.json");
    let a = combfit(&["simulate", "--model", s(&model), "--rows", "300", "--seed", "3"]);
    let b = combfit(&["simulate", "--model", s(&model), "--rows", "300", "--seed", "3"]);
    let c = combfit(&["simulate", "--model", s(&model), "--rows", "300", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("building,contents,profits\n"));
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn invalid_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    fs::write(&p, r#"{"marginals":[{"p":0.5,"mu":0,"sigma":1},{"p":0.5,"mu":0,"sigma":1}],"correlation":[[1,2],[2,1]]}"#).unwrap();
    assert_ne!(code(&combfit(&["simulate", "--model", s(&p), "--seed", "1"])), 0);
    fs::write(&p, "not json").unwrap();
    assert_eq!(code(&combfit(&["simulate", "--model", s(&p), "--seed", "1"])), 2);
}

#[test]
fn model_file_matches_schema() {
    let doc: Value = serde_json::from_str(MODEL).unwrap();
    assert_valid("model", &doc);
}

#[test]
fn stats_spearman_zero_mixed_validate() {
    let f = Fixture::new(600);
    let claims = f.path("claims.csv");
    for (cmd, file, schema_name) in [
        ("stats", "stats.json", "stats"),
        ("spearman", "spearman.json", "spearman"),
        ("zero-mixed", "zm.json", "zero_mixed"),
    ] {
        let o = combfit(&[cmd, "-i", s(&claims), "-o", s(&f.path(file))]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stdout.is_empty(), "{cmd} prints a table when writing to a file");
        let doc = f.json(file);
        assert_valid(schema_name, &doc);
        assert_eq!(doc["provenance"]["command"], cmd);
    }
    let zm = f.json("zm.json");
    let total: f64 = zm["zero_mixed"]["frequencies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["probability"].as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn json_goes_to_stdout_without_output() {
    let f = Fixture::new(100);
    let o = combfit(&["stats", "-i", s(&f.path("claims.csv"))]);
    let doc: Value = serde_json::from_slice(&o.stdout).expect("stdout is one JSON document");
    assert_eq!(doc["n_days"], 100);
}

#[test]
fn unit_conversion_is_consistent() {
    let f = Fixture::new(300);
    let text = fs::read_to_string(f.path("claims.csv")).unwrap();
    let mut lines = text.lines();
    let mut dkk = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let row: Vec<String> = line.split(',').map(|v| (v.parse::<f64>().unwrap() * 1e6).to_string()).collect();
        dkk.push_str(&row.join(","));
        dkk.push('\n');
    }
    fs::write(f.path("dkk.csv"), dkk).unwrap();
    combfit(&["stats", "-i", s(&f.path("claims.csv")), "-o", s(&f.path("a.json"))]);
    combfit(&["stats", "-i", s(&f.path("dkk.csv")), "--unit", "dkk", "-o", s(&f.path("b.json"))]);
    let (a, b) = (f.json("a.json"), f.json("b.json"));
    assert_eq!(a["co_jumps"], b["co_jumps"]);
    for (x, y) in a["columns"].as_array().unwrap().iter().zip(b["columns"].as_array().unwrap()) {
        assert_eq!(x["n_positive"], y["n_positive"]);
        let (mx, my) = (x["mean"].as_f64().unwrap(), y["mean"].as_f64().unwrap());
        assert!((mx - my).abs() <= 1e-9 * mx.abs().max(1.0));
    }
}

#[test]
fn column_restriction() {
    let f = Fixture::new(400);
    let claims = f.path("claims.csv");
    combfit(&["stats", "-i", s(&claims), "-o", s(&f.path("all.json"))]);
    let o = combfit(&["stats", "-i", s(&claims), "--columns", "building,profits", "-o", s(&f.path("two.json"))]);
    assert_eq!(code(&o), 0);
    let (all, two) = (f.json("all.json"), f.json("two.json"));
    assert_eq!(two["labels"], serde_json::json!(["building", "profits"]));
    assert_eq!(two["co_jumps"][0][1], all["co_jumps"][0][2]);
    assert_eq!(two["all_co_jumps"], all["co_jumps"][0][2]);
    let o = combfit(&["stats", "-i", s(&claims), "--columns", "nope"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn fit_is_reproducible_and_validates() {
    let f = Fixture::new(800);
    let claims = f.path("claims.csv");
    for name in ["a.json", "b.json"] {
        let o = combfit(&[
            "fit",
            "-i",
            s(&claims),
            "--seed",
            "9",
            "--mvn-tol",
            "1e-5",
            "-o",
            s(&f.path(name)),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = f.json("a.json");
    assert_valid("fit", &a);
    assert_eq!(a["provenance"]["seed"], 9);
    assert_eq!(a["provenance"]["mvn_tol"], 1e-5);
    assert_eq!(without_timestamp(a), without_timestamp(f.json("b.json")));
}

#[test]
fn non_convergence_exits_5_with_report() {
    let f = Fixture::new(300);
    let out = f.path("fit.json");
    let o = combfit(&[
        "fit",
        "-i",
        s(&f.path("claims.csv")),
        "--seed",
        "1",
        "--max-iter",
        "2",
        "--restarts",
        "1",
        "-o",
        s(&out),
    ]);
    assert_eq!(code(&o), 5);
    let doc = f.json("fit.json");
    assert_valid("fit", &doc);
    assert_eq!(doc["fit"]["converged"], false);
}

#[test]
fn bootstrap_is_reproducible_and_validates() {
    let f = Fixture::new(400);
    let claims = f.path("claims.csv");
    for name in ["a.json", "b.json"] {
        let o = combfit(&[
            "bootstrap",
            "-i",
            s(&claims),
            "--seed",
            "2",
            "-B",
            "12",
            "--mvn-tol",
            "1e-5",
            "--restarts",
            "1",
            "-o",
            s(&f.path(name)),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = f.json("a.json");
    assert_valid("bootstrap", &a);
    assert_eq!(a["bootstrap"]["replicas"].as_array().unwrap().len(), 12);
    assert_eq!(a["fit"]["ci"].as_array().unwrap().len(), 3);
    assert_eq!(without_timestamp(a), without_timestamp(f.json("b.json")));
}

#[test]
fn simulate_fit_round_trip_within_bootstrap_intervals() {
    let f = Fixture::new(2500);
    let o = combfit(&[
        "bootstrap",
        "-i",
        s(&f.path("claims.csv")),
        "--seed",
        "21",
        "-B",
        "100",
        "--mvn-tol",
        "1e-5",
        "--restarts",
        "1",
        "-o",
        s(&f.path("boot.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = f.json("boot.json");
    let truth = [0.6, 0.4, 0.5];
    for (iv, r) in doc["intervals"].as_array().unwrap().iter().zip(truth) {
        let (lo, hi) = (iv["lower"].as_f64().unwrap(), iv["upper"].as_f64().unwrap());
        assert!(lo <= r && r <= hi, "{}: {r} outside [{lo}, {hi}]", iv["name"]);
    }
    // The fitted model file feeds straight back into simulate.
    let o = combfit(&[
        "fit",
        "-i",
        s(&f.path("claims.csv")),
        "--seed",
        "21",
        "--mvn-tol",
        "1e-5",
        "--restarts",
        "1",
        "--model-out",
        s(&f.path("fitted.json")),
        "-o",
        s(&f.path("fit.json")),
    ]);
    assert_eq!(code(&o), 0);
    let fitted = f.json("fitted.json");
    assert_valid("model", &fitted);
    let o = combfit(&["simulate", "--model", s(&f.path("fitted.json")), "--rows", "5", "--seed", "1"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn bench_two_dimensions() {
    let o = combfit(&["bench", "--dims", "2,3", "--repetitions", "2", "--rows", "500", "--horizon", "200", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dim,comb_seconds,levy_seconds,levy_status,levy_processes");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2,") && lines[1].ends_with(",ok,3"));
    assert!(lines[2].ends_with(",ok,7"));
}

#[test]
fn bench_json_validates_and_marks_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let o = combfit(&[
        "bench",
        "--dims",
        "2,14",
        "--repetitions",
        "1",
        "--rows",
        "200",
        "--horizon",
        "50",
        "--seed",
        "1",
        "--json",
        "-o",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_valid("bench", &doc);
    assert_eq!(doc["bench"]["rows"][1]["levy_status"], "infeasible");
    assert_eq!(code(&combfit(&["bench", "--dims", "3,2", "--seed", "1"])), 2);
}
