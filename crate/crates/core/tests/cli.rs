//! File round-trips and the `lrcd` binary.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use lrcd::{io, synth};

fn lrcd(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lrcd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synthetic_network_round_trips_through_files() {
    let cfg = synth::scenario_table2(0.2, -1.0, 4).unwrap();
    let s = synth::generate(&cfg).unwrap();
    let ids: Vec<String> = (0..s.net.n()).map(|i| format!("v{i}")).collect();
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "edges.txt", &io::edge_list_string(&ids, &s.net));
    let covs = write(dir.path(), "x.csv", &io::covariates_string(&ids, &s.x));
    let labels = write(
        dir.path(),
        "labels.csv",
        &io::labels_string(&ids, &s.c_true),
    );

    let data = io::load_dataset(Path::new(&edges), Some(Path::new(&covs))).unwrap();
    assert_eq!(data.n(), s.net.n());
    assert_eq!(data.net.edge_count(), s.net.edge_count());
    let index: HashMap<&str, usize> = data
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let back = |i: usize| index[ids[i].as_str()];
    for (i, j) in s.net.edges() {
        assert!(data.net.has_edge(back(i), back(j)), "edge {i}-{j} lost");
    }
    assert_eq!(data.x.names(), s.x.names());
    for i in 0..s.net.n() {
        for (a, b) in s.x.row(i).iter().zip(data.x.row(back(i))) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
    let read = io::load_labels(Path::new(&labels)).unwrap();
    let ours: Vec<(String, usize)> = ids.iter().cloned().zip(s.c_true.to_one_based()).collect();
    assert_eq!(read, ours);
}

#[test]
fn simulate_report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let out = out.to_str().unwrap();
    let args = [
        "simulate",
        "--scenario",
        "table2",
        "--p11",
        "0.22",
        "--beta0",
        "-1",
        "--replicates",
        "4",
        "--variant",
        "robust",
        "--variant",
        "poisson",
        "--compare-logistic",
        "--seed",
        "9",
        "--out",
        out,
    ];
    let first = lrcd(&args);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let a = std::fs::read(dir.path().join("sim/report.json")).unwrap();
    let a_csv = std::fs::read(dir.path().join("sim/ari.csv")).unwrap();
    let second = lrcd(&args);
    assert!(second.status.success());
    let b = std::fs::read(dir.path().join("sim/report.json")).unwrap();
    let b_csv = std::fs::read(dir.path().join("sim/ari.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a_csv, b_csv);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["replicates"].as_array().unwrap().len(), 16);
    assert_eq!(report["aggregates"].as_array().unwrap().len(), 4);
}

#[test]
fn fit_writes_report_and_labels() {
    let cfg = synth::scenario_table1(0.25, 0.0, 2).unwrap();
    let s = synth::generate(&cfg).unwrap();
    let ids: Vec<String> = (0..s.net.n()).map(|i| format!("n{i}")).collect();
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "e.txt", &io::edge_list_string(&ids, &s.net));
    let covs = write(dir.path(), "x.csv", &io::covariates_string(&ids, &s.x));
    let truth = write(dir.path(), "truth.csv", &io::labels_string(&ids, &s.c_true));
    let report = dir.path().join("fit.json");
    let labels = dir.path().join("labels.csv");
    let run = lrcd(&[
        "fit",
        "--edges",
        &edges,
        "--covariates",
        &covs,
        "--k",
        "2",
        "--variant",
        "poisson",
        "--restarts",
        "2",
        "--out",
        report.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["k"], 2);
    assert_eq!(json["coefficients"].as_array().unwrap().len(), 2);

    let ari = lrcd(&[
        "metrics",
        "ari",
        "--a",
        labels.to_str().unwrap(),
        "--b",
        &truth,
    ]);
    assert!(ari.status.success());
    let value: f64 = String::from_utf8_lossy(&ari.stdout).trim().parse().unwrap();
    assert!(value > 0.8, "ARI {value}");
}

#[test]
fn ingest_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let loop_edges = write(dir.path(), "loop.txt", "a a\n");
    let out = dir.path().join("r.json");
    let run = lrcd(&[
        "fit",
        "--edges",
        &loop_edges,
        "--k",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("line 1"));

    let edges = write(dir.path(), "e.txt", "a b\nb c\n");
    let covs = write(dir.path(), "x.csv", "node,x\na,1\nb,2\n");
    let run = lrcd(&[
        "fit",
        "--edges",
        &edges,
        "--covariates",
        &covs,
        "--k",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("\"c\""));
}

#[test]
fn fit_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(dir.path(), "e.txt", "a b\n");
    let covs = write(dir.path(), "x.csv", "node,x\na,1\nb,2\nc,3\nd,4\n");
    let out = dir.path().join("r.json");
    let run = lrcd(&[
        "fit",
        "--edges",
        &edges,
        "--covariates",
        &covs,
        "--k",
        "2",
        "--variant",
        "multinomial",
        "--restarts",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        run.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(!out.exists());
}
