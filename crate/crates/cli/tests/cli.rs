use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn entroq(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_entroq"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("ENTROQ_THREADS", t),
        None => cmd.env_remove("ENTROQ_THREADS"),
    };
    cmd.output().expect("binary runs")
}

/// Write a config whose `output_dir` points inside `dir`.
fn config(dir: &TempDir, name: &str, body: &str) -> String {
    let out = dir.path().join(format!("{name}-out"));
    let text = format!("output_dir = {:?}\n{body}", out.to_str().unwrap());
    let path = dir.path().join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &TempDir, name: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.path().join(format!("{name}-out/manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn listing_is_stable_and_complete() {
    let a = entroq(&["list"], None);
    let b = entroq(&["list"], None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        names,
        [
            "emergent",
            "entropy-limit",
            "fluct-covariance",
            "gibbs",
            "madelung-equivalence",
            "suppression",
            "wdw-ordering",
            "wdw-solve"
        ]
    );
}

#[test]
fn three_node_gibbs_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "gibbs", "experiment = \"gibbs\"\nseed = 1\n[space]\nhbar = 2.0\n[numerics]\nenergy = [0.0, 1.0, 4.0]\n");
    let out = entroq(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir, "gibbs");
    assert_eq!(m["pass"], true);
    assert!(m["checks"][0]["measured"].as_f64().unwrap() <= 1e-8);
    let csv = fs::read_to_string(dir.path().join("gibbs-out/gibbs.csv")).unwrap();
    let p: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let w = [1.0, (-1.0f64).exp(), (-4.0f64).exp()];
    let z: f64 = w.iter().sum();
    for (got, want) in p.iter().zip(w) {
        assert!((got - want / z).abs() < 1e-12, "{p:?}");
    }
}

#[test]
fn missing_seed_exits_two_without_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "noseed", "experiment = \"gibbs\"\n[numerics]\nenergy = [0.0, 1.0]\n");
    let out = entroq(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!dir.path().join("noseed-out").exists());
}

#[test]
fn validate_names_fields_and_suggests_experiments() {
    let dir = TempDir::new().unwrap();
    let ok = config(&dir, "ok", "experiment = \"wdw-ordering\"\nseed = 0\n");
    assert_eq!(entroq(&["validate", &ok], None).status.code(), Some(0));

    let bad_dt = config(&dir, "dt", "experiment = \"fluct-covariance\"\nseed = 0\n[numerics]\ndt = 0.0\nsamples = 10\n");
    let out = entroq(&["validate", &bad_dt], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerics.dt"));

    let typo = config(&dir, "typo", "experiment = \"emergnt\"\nseed = 0\n");
    let out = entroq(&["validate", &typo], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean `emergent`"));

    let unknown = config(&dir, "key", "experiment = \"gibbs\"\nseed = 0\nspeed = 3\n");
    assert_eq!(entroq(&["validate", &unknown], None).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one() {
    // On a fine grid the two orderings agree to better than the threshold.
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "fine", "experiment = \"wdw-ordering\"\nseed = 0\n[space]\nkind = \"frw\"\ncurvature = 1\na_points = 2000\n");
    let out = entroq(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(&dir, "fine");
    assert_eq!(m["pass"], false);
    let failed: Vec<&str> = m["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["ordering_difference"]);
}

#[test]
fn numerical_failure_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "margin",
        "experiment = \"entropy-limit\"\nseed = 0\n[numerics]\nsamples = 10\n[sweeps]\ndts = [1.0, 100.0]\n",
    );
    let out = entroq(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn artifacts_are_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let body = "experiment = \"fluct-covariance\"\nseed = 5\n[space]\nsites = 2\n[numerics]\ndt = 1e-2\nsamples = 20000\n";
    let a = config(&dir, "a", body);
    let b = config(&dir, "b", body);
    // Only reproducibility matters here, not whether the small batch passes.
    for (cfg, threads) in [(&a, "1"), (&b, "3")] {
        let code = entroq(&["run", cfg], Some(threads)).status.code();
        assert!(matches!(code, Some(0 | 1)), "{code:?}");
    }
    let (fa, fb) = (artifacts(&dir.path().join("a-out")), artifacts(&dir.path().join("b-out")));
    assert_eq!(fa.len(), 2);
    assert_eq!(fa, fb);
    assert_eq!(manifest(&dir, "a")["threads"], 1);
}

#[test]
fn bad_thread_cap_is_a_validation_error() {
    assert_eq!(entroq(&["list"], Some("many")).status.code(), Some(2));
}
