use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use vesseltree::geodesic::GeodesicTree;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vesseltree"));
    c.env_remove("VESSELTREE_FILTER__QUANTILE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn metrics_row(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "volume_id,noise,rho,precision,recall,mean_error,acyclic");
    lines[1].split(',').map(String::from).collect()
}

#[test]
fn phantom_twice_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["phantom", "--kind", "tube", "--seed", "4", "--noise", "N1", "--output-dir", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["volume.vol", "gt.graph"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn eval_of_ground_truth_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(run(&["phantom", "--kind", "tree", "--seed", "2", "--output-dir", d]).status.success());
    let gt = dir.path().join("gt.graph");
    let gt = gt.to_str().unwrap();
    let o = run(&["eval", "--input", gt, "--gt", gt, "--output-dir", d]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = metrics_row(dir.path());
    assert_eq!(&row[3..], ["1", "1", "0", "true"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains(&row.join(",")));
}

#[test]
fn tube_pipeline_gives_a_single_perfect_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["pipeline", "--kind", "tube", "--output-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = metrics_row(dir.path());
    assert_eq!((row[2].as_str(), row[3].as_str(), row[4].as_str()), ("2", "1", "1"));
    let tree = GeodesicTree::read(&dir.path().join("tree.graph")).unwrap();
    assert!(tree.is_acyclic() && tree.component_count() == 1);
    let mut degree = vec![0; tree.nodes.len()];
    for e in &tree.edges {
        degree[e.a] += 1;
        degree[e.b] += 1;
    }
    // an unbranched chain of seed components is one path
    assert!(degree.iter().all(|&d| d <= 2), "{degree:?}");
}

#[test]
fn bad_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[filter]\nquantile = 1.5\n").unwrap();
    let o = run(&["phantom", "--config", cfg.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error code=2 kind=config field=filter.quantile "), "{err}");

    fs::write(&cfg, "[geodesic]\nepsilon = 1\n").unwrap();
    let o = run(&["extract", "--config", cfg.to_str().unwrap(), "--input", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("field=geodesic.epsilon "));

    let o = bin().env("VESSELTREE_FILTER__QUANTILE", "0").args(["phantom", "--output-dir", "x"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("field=filter.quantile "));
    assert_eq!(run(&["phantom", "--noise", "N7"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["filter", "--input", "/definitely/missing.vol", "--output-dir", d],
        vec!["extract", "--input", d, "--output-dir", d],
        vec!["eval", "--input", "/missing.graph", "--gt", "/missing.graph", "--output-dir", d],
        vec!["pipeline", "--config", "/missing.toml"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(3), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error code=3 kind=missing-input"));
    }
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().count() >= 10 && out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}
