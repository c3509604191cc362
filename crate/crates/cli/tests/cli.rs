use std::path::Path;
use std::process::{Command, Output};

fn imbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imbench"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path) {
    let o = imbench(
        dir,
        &[
            "synth",
            "--n-samples",
            "400",
            "--n-classes",
            "3",
            "--exponent",
            "1",
            "--seed",
            "2",
            "--out",
            "d.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.join("d.toml").exists());
}

#[test]
fn synth_inspect_weights_train() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);

    let o = imbench(
        d,
        &[
            "inspect", "--data", "d.csv", "--schema", "d.toml", "--json", "r.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("necd"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let necd = report[0]["necd"].as_f64().unwrap();
    assert!(necd > 0.0 && necd < 1.0);

    let o = imbench(d, &["weights", "--data", "d.csv", "--schema", "d.toml"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for s in ["none", "inverse", "effective", "median", "class_2"] {
        assert!(text.contains(s), "{text}");
    }

    let o = imbench(
        d,
        &[
            "train",
            "--data",
            "d.csv",
            "--schema",
            "d.toml",
            "--family",
            "dt",
            "--weighting",
            "inverse",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("weighted f1"));
    assert!(d.join("m.json").exists());
}

#[test]
fn hpo_output_feeds_train() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let o = imbench(
        d,
        &[
            "hpo", "--data", "d.csv", "--schema", "d.toml", "--family", "dt", "--trials", "4",
            "--folds", "3", "--out", "p.json",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let o = imbench(
        d,
        &[
            "train", "--data", "d.csv", "--schema", "d.toml", "--family", "dt", "--params",
            "p.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let o = imbench(
        d,
        &[
            "train", "--data", "d.csv", "--schema", "d.toml", "--family", "gbt", "--params",
            "p.json",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        r#"
target = "y"
filter_thresholds = [1, 20, 40]
strategies = ["none", "inverse"]
families = ["dt", "gbt"]
n_runs = 2
workers = 2

[source]
kind = "synth"
n_samples = 500
n_classes = 4
n_features = 3
power_law_exponent = 1.0
seed = 5

[params.gbt]
n_estimators = 10
"#,
    )
    .unwrap();
    let o = imbench(d, &["bench", "--config", "exp.toml", "--out-dir", "out"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in [
        "results.csv",
        "summary.csv",
        "degradation.csv",
        "cd.svg",
        "cd.txt",
    ] {
        assert!(d.join("out").join(f).exists(), "{f}");
    }
    let results = std::fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 3 * 4 * 2);

    let o = imbench(
        d,
        &[
            "stats",
            "--results",
            "out/results.csv",
            "--alpha",
            "0.1",
            "--out-svg",
            "s.svg",
            "--out-text",
            "s.txt",
        ],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).contains("Friedman chi2(3, N=3)"));
    assert!(std::fs::read_to_string(d.join("s.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(imbench(d, &["--help"]).status.code(), Some(0));
    assert_eq!(imbench(d, &[]).status.code(), Some(1));
    assert_eq!(imbench(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        imbench(d, &["train", "--family", "dt"]).status.code(),
        Some(1)
    );
    assert_eq!(
        imbench(d, &["stats", "--results", "x.csv", "--alpha", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        imbench(d, &["synth", "--n-classes", "1", "--out", "a.csv"])
            .status
            .code(),
        Some(1)
    );

    let o = imbench(d, &["stats", "--results", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.csv"));
    assert_eq!(err.matches("No such file").count(), 1, "{err}");

    std::fs::write(d.join("bad.toml"), "target = 3\n").unwrap();
    assert_eq!(
        imbench(d, &["bench", "--config", "bad.toml", "--out-dir", "o"])
            .status
            .code(),
        Some(1)
    );
}
