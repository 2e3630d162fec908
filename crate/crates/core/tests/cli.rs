use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use toprel::pipeline::read_manifest;

fn toprel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toprel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(extra: Value) -> Value {
    let mut base = json!({
        "corpus": {"generate": {"preset": "trivial", "num_docs": 300}},
        "k": [2],
        "n_reps": 3,
        "seed": 5,
        "lda": {"alpha": 0.1, "iterations": 30, "burn_in": 10}
    });
    for (k, v) in extra.as_object().unwrap() {
        base[k] = v.clone();
    }
    base
}

fn write_config(dir: &Path, config: &Value) -> PathBuf {
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run(dir: &Path, command: &str, config: &Value) -> Output {
    let path = write_config(dir, config);
    let out = toprel(&["--config", path.to_str().unwrap(), command]);
    assert!(
        out.status.success(),
        "{command} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

#[test]
fn help_and_bad_flags() {
    assert_eq!(toprel(&["--help"]).status.code(), Some(0));
    assert_eq!(toprel(&["--version"]).status.code(), Some(0));
    assert_eq!(toprel(&["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(toprel(&[]).status.code(), Some(1));
}

#[test]
fn generate_is_byte_identical_and_creates_missing_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    for run_id in ["a", "b"] {
        let out = dir.path().join(run_id).join("nested");
        let config = small_config(json!({"out": out}));
        run(dir.path(), "generate", &config);
        manifests.push(read_manifest(&out.join("generate")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
    let files: Vec<&String> = manifests[0].files.keys().collect();
    assert!(files.contains(&&"corpus.csv".to_owned()));
    assert!(files.contains(&&"phi_true.csv".to_owned()));
    for f in files {
        let a = fs::read(dir.path().join("a/nested/generate").join(f)).unwrap();
        let b = fs::read(dir.path().join("b/nested/generate").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn single_replication_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(json!({"n_reps": 1, "out": dir.path().join("out")}));
    let path = write_config(dir.path(), &config);
    let out = toprel(&["--config", path.to_str().unwrap(), "reliability"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 replications"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(json!({"n_replications": 4}));
    let path = write_config(dir.path(), &config);
    let out = toprel(&["--config", path.to_str().unwrap(), "fit"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_then_reliability_over_a_k_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = small_config(json!({
        "k": [2, 3],
        "out": out,
        "degenerate": {"replace": 2, "source": 1},
        "subsets": [[1, 2]]
    }));
    run(dir.path(), "fit", &config);
    let fit = read_manifest(&out.join("fit")).unwrap();
    assert!(fit.files.contains_key("k3/rep002/phi.csv"));
    assert!(fit.files.contains_key("k2/seeds.json"));

    run(dir.path(), "align", &config);
    let (header, rows) = csv_rows(&out.join("align/k3/cosine.csv"));
    assert_eq!(header, ["replication", "ref_topic", "full", "matched"]);
    assert_eq!(rows.len(), 2 * 3);

    run(dir.path(), "reliability", &config);
    let rel = read_manifest(&out.join("reliability")).unwrap();
    assert!(rel.failures.is_empty(), "{:?}", rel.failures);
    for k in [2, 3] {
        for f in [
            "reliability.json",
            "topics.csv",
            "cosine_hist.svg",
            "subset-1-2/reliability.json",
        ] {
            assert!(rel.files.contains_key(&format!("k{k}/{f}")), "k{k}/{f}");
        }
        let report: Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("reliability/k{k}/reliability.json"))).unwrap())
                .unwrap();
        let sp = &report["coefficients"]["standard_practice"];
        assert!(sp["value"].as_f64().unwrap() <= 1.0);
        assert!(sp["label"].is_string());
        assert_eq!(report["provenance"]["seeds"].as_array().unwrap().len(), 3);
        let (header, rows) = csv_rows(&out.join(format!("reliability/k{k}/topics.csv")));
        assert_eq!(header[0], "topic");
        assert_eq!(report["provenance"]["dropped_topic"].as_u64(), Some(k as u64 - 1));
        assert_eq!(rows.len(), k - 1);
    }
}

#[test]
fn perturb_table_shape_and_unperturbed_fixed_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = small_config(json!({"out": out, "removal_schedule": [0, 2, 4]}));
    run(dir.path(), "perturb", &config);
    let (header, rows) = csv_rows(&out.join("perturb/k2/perturb.csv"));
    assert_eq!(header, ["mode", "removed", "metric", "value"]);
    assert_eq!(rows.len(), 2 * 3 * 4);
    for row in rows.iter().filter(|r| r[0] == "fixed" && r[1] == "0") {
        let v: f64 = row[3].parse().unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{row:?}");
    }
    assert!(fs::read_to_string(out.join("perturb/k2/perturb.svg"))
        .unwrap()
        .contains("<polyline"));
}

#[test]
fn downstream_tables_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = small_config(json!({
        "corpus": {"generate": {"preset": "trivial", "num_docs": 300, "label_strength": 5.0}},
        "k": [2, 3, 4],
        "out": out
    }));
    run(dir.path(), "downstream", &config);
    let (header, rows) = csv_rows(&out.join("downstream/accuracy.csv"));
    assert_eq!(header, ["k", "split", "min", "Q1", "Q2", "Q3", "max"]);
    let holdout: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == "holdout").collect();
    assert_eq!(holdout.len(), 3);
    for k in [2, 3, 4] {
        let (header, rows) = csv_rows(&out.join(format!("downstream/k{k}/word_weights.csv")));
        assert_eq!(header, ["term", "min", "Q1", "Q2", "Q3", "max"]);
        assert_eq!(rows.len(), 2);
        for r in rows {
            let q: Vec<f64> = r[1..].iter().map(|x| x.parse().unwrap()).collect();
            assert!(q.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn downstream_without_both_classes_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), "a b\nb c\nc a\na a\nb b\n").unwrap();
    fs::write(
        dir.path().join("c.labels.csv"),
        "doc_id,label\n0,1\n1,1\n2,1\n3,1\n4,1\n",
    )
    .unwrap();
    let config = small_config(json!({
        "corpus": {"file": {"path": "c.txt"}},
        "out": dir.path().join("out")
    }));
    let path = write_config(dir.path(), &config);
    let out = toprel(&["--config", path.to_str().unwrap(), "downstream"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("both classes"));
}

#[test]
fn downstream_without_labels_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(json!({"out": dir.path().join("out")}));
    let path = write_config(dir.path(), &config);
    let out = toprel(&["--config", path.to_str().unwrap(), "downstream"]);
    assert_eq!(out.status.code(), Some(1));
}
