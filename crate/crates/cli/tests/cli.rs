use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gquant(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gquant"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("failed to run gquant")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

const CONFIG: &str = r#"
dataset = "toy"
seed = 3
repetitions = 2
output = "results.csv"
quantifiers = ["cc", "pacc", "pacc+sis", "acc+nacc"]

[graph.sbm]
blocks = [60, 60, 60]
p_in = 0.1
p_out = 0.01

[[shifts]]
kind = "pps"
sample_size = 30

[[shifts]]
kind = "rw"
seeds_per_label = 2
sample_size = 30
"#;

#[test]
fn experiment_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    ok(&gquant(&["experiment", "--config", "exp.toml"], dir.path()));
    let first = fs::read(dir.path().join("results.csv")).unwrap();
    ok(&gquant(&["experiment", "--config", "exp.toml", "--output", "again.csv"], dir.path()));
    let second = fs::read(dir.path().join("again.csv")).unwrap();
    assert_eq!(first, second);

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "repetition,dataset,shift,classifier,quantifier,sample,sample_size,ae,rae,flags,error"
    );
    // 2 repetitions × (30 PPS + 6 RW samples) × 4 quantifiers
    assert_eq!(lines.count(), 2 * 36 * 4);

    ok(&gquant(&["aggregate", "--input", "results.csv", "--output", "summary.csv"], dir.path()));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("kind,dataset,shift,classifier,quantifier,n,failed,mean_ae,se_ae"));
    assert_eq!(summary.lines().filter(|l| l.starts_with("average,")).count(), 4);
}

#[test]
fn step_by_step_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&gquant(
        &[
            "gen-graph", "--blocks", "80,80", "--p-in", "0.1", "--p-out", "0.01", "--seed", "1", "--edges", "g.edges",
            "--labels", "g.labels",
        ],
        d,
    ));
    let graph = ["--edges", "g.edges", "--labels", "g.labels"];
    let with = |rest: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = vec![rest[0].to_string()];
        v.extend(graph.iter().map(|s| s.to_string()));
        v.extend(rest[1..].iter().map(|s| s.to_string()));
        v
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        gquant(&refs, d)
    };
    ok(&run(with(&["split", "--seed", "2", "--out-dir", "split"])));
    ok(&run(with(&["classify", "--train", "split/classifier_train.txt", "--method", "label-prop", "--out", "p.txt"])));
    ok(&run(with(&[
        "sample-shift", "--pool", "split/test.txt", "--sampler", "bfs", "--seeds-per-label", "1", "--sample-size", "20",
        "--out-dir", "bfs",
    ])));
    assert!(d.join("bfs/manifest.csv").exists());
    let out = run(with(&[
        "quantify", "--train", "split/quantifier_train.txt", "--predictions", "p.txt", "--sample",
        "bfs/sample_0000.txt", "--method", "pacc+sis+nacc",
    ]));
    ok(&out);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["method"], "PACC+SIS+NACC");
    let q: Vec<f64> = json["q"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(q.len(), 2);
    assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "quantifiers = []\nshifts = []\n[graph]\n").unwrap();
    assert_eq!(gquant(&["experiment", "--config", "bad.toml"], d).status.code(), Some(1));
    assert_eq!(gquant(&["no-such-command"], d).status.code(), Some(1));
    assert_eq!(gquant(&["experiment", "--config", "missing.toml"], d).status.code(), Some(1));
    assert_eq!(gquant(&["aggregate", "--input", "missing.csv", "--output", "o.csv"], d).status.code(), Some(2));
    fs::write(d.join("g.edges"), "0 1\n1\n").unwrap();
    fs::write(d.join("g.labels"), "0\n1\n").unwrap();
    let out = gquant(&["split", "--edges", "g.edges", "--labels", "g.labels", "--out-dir", "s"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
    assert_eq!(gquant(&["--version"], d).status.code(), Some(0));
}
