use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn atlas(data: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlas"))
        .env("ATLAS_DATA", data)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn atlas")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn assert_valid(name: &str, doc: &Value) {
    let text = std::fs::read_to_string(schema_dir().join(format!("{name}.schema.json"))).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        panic!("{name} output violates its schema: {msgs:?}");
    };
}

fn stdout_json(o: &Output) -> Value {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn orbits_k1_fixed_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = atlas(
        &dir.path().join("data"),
        dir.path(),
        &[
            "--family", "standard", "--k", "1", "orbits", "--p", "0", "--q", "1",
        ],
    );
    let v = stdout_json(&o);
    assert_valid("orbits", &v);
    let orbits = v["orbits"].as_array().unwrap();
    assert_eq!(orbits.len(), 2);
    assert_eq!(v["index_sum"], 0);
    let file: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("orbits.json")).unwrap()).unwrap();
    assert_eq!(file, v);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = atlas(&data, dir.path(), &["orbits", "--q", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    let o = atlas(
        &data,
        dir.path(),
        &["--k", "0", "scan", "--y-range", "0.5,0.5"],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = atlas(
        &data,
        dir.path(),
        &["--k", "1", "orbits", "--p", "2", "--q", "4"],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = atlas(
        &data,
        dir.path(),
        &["--family", "bogus", "orbits", "--q", "1"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn detector_errors_exit_1_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = atlas(
        &dir.path().join("data"),
        dir.path(),
        &["--k", "1", "manifold", "--orbit", &"0".repeat(64)],
    );
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).expect("stderr is JSON");
    assert_valid("error", &err);

    // the elliptic k = 1 fixed point has no manifolds
    let data = dir.path().join("data");
    let v = stdout_json(&atlas(
        &data,
        dir.path(),
        &["--k", "1", "orbits", "--p", "0", "--q", "1"],
    ));
    let elliptic = v["orbits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["orbit"]["stability"] == "Elliptic")
        .unwrap();
    let id = elliptic["store_id"].as_str().unwrap();
    let o = atlas(&data, dir.path(), &["manifold", "--orbit", id]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "NotHyperbolic");
}

#[test]
fn scan_k0_is_flat_and_writes_portrait() {
    let dir = tempfile::tempdir().unwrap();
    let o = atlas(
        &dir.path().join("data"),
        dir.path(),
        &[
            "--k",
            "0",
            "scan",
            "--y-range",
            "0,0.5",
            "--rows",
            "8",
            "--steps",
            "1000",
            "--seeds",
            "4",
            "--portrait-steps",
            "50",
        ],
    );
    let v = stdout_json(&o);
    assert_valid("scan", &v);
    for row in v["rows"].as_array().unwrap() {
        let y = row["y"].as_f64().unwrap();
        assert!((row["rotation"].as_f64().unwrap() - y).abs() < 1e-12);
    }
    let svg = std::fs::read_to_string(dir.path().join("portrait.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let csv = std::fs::read_to_string(dir.path().join("portrait.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 50);
}

#[test]
fn manifold_and_classify_on_stored_saddle() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let v = stdout_json(&atlas(
        &data,
        dir.path(),
        &["--k", "1.5", "orbits", "--p", "0", "--q", "1"],
    ));
    let saddle = v["orbits"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["orbit"]["stability"] == "Hyperbolic")
        .unwrap();
    let id = saddle["store_id"].as_str().unwrap().to_string();

    let m = stdout_json(&atlas(
        &data,
        dir.path(),
        &["manifold", "--orbit", &id, "--arclength", "5"],
    ));
    assert_valid("manifold", &m);
    assert!(m["observed_max_gap"].as_f64().unwrap() <= 1e-3 + 1e-12);
    assert!(dir.path().join("manifold.csv").exists());

    let c = stdout_json(&atlas(
        &data,
        dir.path(),
        &[
            "classify",
            "--orbit",
            &id,
            "--arclength",
            "10",
            "--resolution",
            "0.0078125",
        ],
    ));
    assert_valid("classify", &c);
    assert_eq!(c["verdict"]["status"], "Essential");
    assert!(dir.path().join("mask.svg").exists());
}

#[test]
fn coverage_writes_csv_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&atlas(
        &dir.path().join("data"),
        dir.path(),
        &[
            "--k",
            "1.5",
            "coverage",
            "--grid",
            "16",
            "--saddles",
            "2",
            "--arclength",
            "5",
            "--delta",
            "0.05",
        ],
    ));
    assert_valid("coverage", &v);
    let total = v["h_fraction"].as_f64().unwrap()
        + v["e_fraction"].as_f64().unwrap()
        + v["unresolved_fraction"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16 * 16);
}

/// Regions, connect and report on a cheap k = 0.9 run; a warm replay must be
/// byte-identical.
#[test]
fn report_replays_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let regions = stdout_json(&atlas(
        &data,
        dir.path(),
        &[
            "--k",
            "0.9",
            "regions",
            "--y-range",
            "-0.3,0.3",
            "--scan",
            "8",
            "--q-max",
            "3",
            "--n-cert",
            "2e4",
            "--no-essentiality",
        ],
    ));
    assert_valid("regions", &regions);
    let central = regions["regions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| {
            r["region"]["lower"]["kind"] == "Barrier" && r["region"]["upper"]["kind"] == "Barrier"
        })
        .expect("a region bounded by two barriers");
    let id = central["store_id"].as_str().unwrap().to_string();

    let connect = stdout_json(&atlas(
        &data,
        dir.path(),
        &["connect", "--region", &id, "--steps", "1e5", "--seeds", "2"],
    ));
    assert_valid("connect", &connect);

    let args = [
        "report",
        "--region",
        &id,
        "--escape-seeds",
        "20",
        "--escape-cap",
        "1e4",
        "--q-max",
        "5",
        "--steps",
        "1e5",
        "--seeds",
        "2",
    ];
    let cold = atlas(&data, dir.path(), &args);
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let v = stdout_json(&cold);
    assert_valid("report", &v);
    let warm = atlas(&data, dir.path(), &args);
    assert!(warm.status.success());
    assert_eq!(cold.stdout, warm.stdout);
    assert_eq!(
        first,
        std::fs::read(dir.path().join("report.json")).unwrap()
    );

    // the scan overlay accepts the stored region
    let o = atlas(
        &data,
        dir.path(),
        &[
            "scan",
            "--region",
            &id,
            "--rows",
            "4",
            "--steps",
            "100",
            "--seeds",
            "2",
            "--portrait-steps",
            "10",
        ],
    );
    assert!(o.status.success());
}
