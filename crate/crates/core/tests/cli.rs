use std::path::PathBuf;
use std::process::{Command, Output};

fn clgnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clgnet")).args(args).output().unwrap()
}

fn network(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("networks").join(name);
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_kind(o: &Output) -> String {
    let v: serde_json::Value = serde_json::from_slice(&o.stderr).expect("stderr is one JSON object");
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn infer_prints_marginals() {
    let crop = network("extended_crop.json");
    let o = clgnet(&["infer", &crop, "-q", "Rain", "-e", "Profit=Even", "--points", "8"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("Drought") && out.contains("8 points/dim"), "{out}");
}

#[test]
fn infer_json_is_deterministic_without_timing() {
    let crop = network("extended_crop.json");
    let args = [
        "infer", &crop, "-q", "Price", "-q", "Buy", "--mc-samples", "500", "--seed", "9", "--mode", "sequential",
        "--json", "--no-timing",
    ];
    let (a, b) = (clgnet(&args), clgnet(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["backend"]["mode"], "sequential");
    let timing = v["timing"].as_object().unwrap();
    assert!(timing.values().all(|t| t.as_f64() == Some(0.0)));
}

#[test]
fn every_backend_flag_is_accepted() {
    let em = tempfile::NamedTempFile::new().unwrap();
    let path = em.path().to_str().unwrap();
    assert!(clgnet(&["generate", "emission", "--out", path]).status.success());
    let o = clgnet(&[
        "infer", path, "-q", "DustEmission", "-e", "MetalSensor=High", "--tree", "approximate", "--no-reduction",
        "--dim-cap", "4", "--points", "3", "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["backend"]["tree_mode"], "approximate");
    assert_eq!(v["backend"]["feature_reduction"], false);
}

#[test]
fn sample_reports_standard_errors() {
    let toy = network("xa_toy.json");
    let o = clgnet(&["sample", &toy, "-q", "A", "--samples", "20000", "--seed", "1", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = &v["marginals"][0]["probabilities"][0];
    let (value, se) = (p["value"].as_f64().unwrap(), p["se"].as_f64().unwrap());
    assert!((value - 0.5).abs() < 4.0 * se, "{value} +- {se}");
}

#[test]
fn dump_tree_shows_designated_clique() {
    let o = clgnet(&["dump-tree", &network("axyb.json")]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("designated C0 for A, B"));
}

#[test]
fn experiment_writes_csv() {
    let out = tempfile::NamedTempFile::new().unwrap();
    let path = out.path().to_str().unwrap();
    let o = clgnet(&["experiment", "joint-vs-sequential", "--quick", "--out", path]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(path).unwrap();
    assert!(csv.starts_with("sigmoid,slope,corr,kl_discrete,kl_continuous\n"));
}

#[test]
fn generated_chain_loads() {
    let out = tempfile::NamedTempFile::new().unwrap();
    let path = out.path().to_str().unwrap();
    assert!(clgnet(&["generate", "chain", "--n", "5", "--out", path]).status.success());
    let o = clgnet(&["infer", path, "-q", "A"]);
    assert!(o.status.success());
}

#[test]
fn failures_exit_nonzero_with_error_kind() {
    let crop = network("extended_crop.json");
    let cases: [(&[&str], &str); 6] = [
        (&["infer", "/no/such/file.json", "-q", "A"], "io"),
        (&["infer", &crop, "-q", "Nope"], "scope"),
        (&["infer", &crop, "-q", "Policy", "-q", "Price"], "out_of_clique_query"),
        (&["infer", &crop, "-q", "Rain", "--points", "0"], "config"),
        (&["experiment", "nope"], "config"),
        (&["infer", &crop], "usage"),
    ];
    for (args, kind) in cases {
        let o = clgnet(args);
        assert!(!o.status.success(), "{args:?}");
        assert_eq!(error_kind(&o), kind, "{args:?}");
    }
}
