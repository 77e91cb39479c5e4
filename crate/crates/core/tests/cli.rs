//! End-to-end runs of the `rhj` binary: exit codes, the summary line and
//! the files it writes.

use std::path::Path;
use std::process::{Command, Output};

use rhj::discretize::io::{read_field_csv, read_json, CloudFile, GraphFile};

fn rhj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhj")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// `(status, suite, max_residual)` from the last stdout line.
fn summary(o: &Output) -> (String, String, f64) {
    let out = stdout(o);
    let last = out.lines().last().expect("summary line");
    let field = |key: &str| last.split_whitespace().find_map(|w| w.strip_prefix(key)).unwrap_or_else(|| panic!("{key} missing in {last:?}")).to_string();
    (field("STATUS="), field("SUITE="), field("MAX_RESIDUAL=").parse().unwrap())
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn sample_and_graph_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = path(dir.path(), "cloud.json");
    let o = rhj(&["sample", "--manifold", "torus", "--n", "64", "--seed", "3", "--out", &cloud]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(summary(&o).0, "ok");
    let c: CloudFile = read_json(Path::new(&cloud)).unwrap();
    assert_eq!(c.points.len(), 64);

    let graph = path(dir.path(), "graph.json");
    let o = rhj(&["graph", "--manifold", "sphere", "--n", "300", "--out", &graph]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("components=1"));
    let g: GraphFile = read_json(Path::new(&graph)).unwrap();
    assert_eq!(g.points.len(), 300);
    assert_eq!(g.edges.len(), g.lengths.len());
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    for out in [&a, &b] {
        assert_eq!(rhj(&["graph", "--manifold", "hyperbolic", "--n", "200", "--seed", "9", "--out", out]).status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn eikonal_square_grid_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (field, report) = (path(dir.path(), "u.csv"), path(dir.path(), "r.json"));
    let o = rhj(&["solve", "eikonal", "--manifold", "euclidean", "--dim", "2", "--cloud", "grid", "--n", "1600", "--boundary", "square", "--out", &field, "--report", &report]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let (status, suite, residual) = summary(&o);
    assert_eq!((status.as_str(), suite.as_str()), ("ok", "solve-eikonal"));
    let r: serde_json::Value = read_json(Path::new(&report)).unwrap();
    let h = r["h"].as_f64().unwrap();
    assert!(residual <= r["threshold"].as_f64().unwrap());
    assert!(r["error_vs_analytic"].as_f64().unwrap() <= 4.0 * h);
    assert_eq!(r["config"]["boundary"], "square");
    assert_eq!(read_field_csv(Path::new(&field)).unwrap().len(), 1600);
}

#[test]
fn manufactured_stationary_solve_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "r.json");
    let o = rhj(&["solve", "stationary", "--manifold", "sphere", "--n", "600", "--hamiltonian", r#"{"H": "linear", "f": "manufactured"}"#, "--report", &report]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value = read_json(Path::new(&report)).unwrap();
    assert!(r["error_vs_analytic"].as_f64().unwrap() <= 3.0 * r["h"].as_f64().unwrap());
    assert_eq!(r["solver"]["converged"], true);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = path(dir.path(), "config.json");
    std::fs::write(&config, r#"{"manifold": {"name": "circle"}, "n": 40, "seed": 5}"#).unwrap();
    let o = rhj(&["sample", "--config", &config]);
    assert!(stdout(&o).contains("n=40 manifold=circle"));
    let o = rhj(&["sample", "--config", &config, "--n", "25"]);
    assert!(stdout(&o).contains("n=25 manifold=circle"));
}

#[test]
fn table_profile_hamiltonian_is_accepted() {
    let spec = r#"{"H": {"table": [[0, 0], [1, 1.5], [2, 4]]}, "f": "const:0.5"}"#;
    let o = rhj(&["solve", "stationary", "--manifold", "circle", "--cloud", "grid", "--n", "120", "--k", "2", "--hamiltonian", spec]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn input_errors_exit_2() {
    let cases: [&[&str]; 7] = [
        &["solve", "eikonal", "--manifold", "sphere", "--n", "200"],
        &["solve", "eikonal", "--manifold", "sphere", "--n", "200", "--boundary", "square"],
        &["solve", "stationary", "--manifold", "sphere", "--n", "200"],
        &["check", "bogus"],
        &["sample", "--manifold", "klein"],
        &["sample", "--tol", "-1"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = rhj(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stdout(&o));
        assert_eq!(summary(&o).0, "error", "{args:?}");
    }
    let o = rhj(&["solve", "stationary", "--manifold", "sphere", "--n", "100", "--hamiltonian", r#"{"H": {"table": [[0, 1], [1, 0]]}, "f": "const:1"}"#]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_transport_passes() {
    let o = rhj(&["check", "transport", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(summary(&o).1, "transport");
}

#[test]
fn zero_tolerance_check_fails_with_named_assertion() {
    let o = rhj(&["check", "all", "--tol", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(summary(&o).0, "fail");
    assert!(stdout(&o).contains("first failure: "));
}

#[test]
fn pullback_demo_passes_and_reports_conditioning() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "r.json");
    let o = rhj(&["pullback-demo", "--n", "400", "--report", &report]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value = read_json(Path::new(&report)).unwrap();
    assert!(r["jacobian_condition"][0].as_f64().unwrap() >= 1.0);
    let o = rhj(&["pullback-demo", "--n", "400", "--identity"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("identity |G - F| max=0.000e0"));
}
