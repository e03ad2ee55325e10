use std::path::PathBuf;

use clgnet::model::io::{load_network, to_json};
use clgnet::networks;
use clgnet::Error;

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("networks").join(name)
}

#[test]
fn bundled_files_match_builders() {
    let cases = [
        ("extended_crop.json", networks::extended_crop()),
        ("xa_toy.json", networks::xa_toy()),
        ("axyb.json", networks::axyb(0.5, networks::SHARP_SLOPE)),
        ("emission_base.json", networks::emission_base()),
    ];
    for (file, built) in cases {
        let loaded = load_network(bundled(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
        assert_eq!(loaded, built, "{file}");
    }
}

#[test]
fn crop_rain_prior_is_in_file() {
    let net = load_network(bundled("extended_crop.json")).unwrap();
    let rain = net.id("Rain").unwrap();
    let cpd = net.cpds().iter().find(|c| c.child() == rain).unwrap();
    let clgnet::model::Cpd::Table(t) = cpd else {
        panic!("Rain should have a table CPD");
    };
    assert_eq!(t.rows, vec![vec![0.35, 0.6, 0.05]]);
}

#[test]
fn chain_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for n in [1, 2, 8, 20] {
        let path = dir.path().join(format!("chain_{n}.json"));
        std::fs::write(&path, to_json(&networks::chain(n))).unwrap();
        let net = load_network(&path).unwrap();
        assert_eq!(net, networks::chain(n));
        assert_eq!(net.len(), n + 1);
    }
}

fn load_text(text: &str) -> Error {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    std::fs::write(&path, text).unwrap();
    load_network(&path).unwrap_err()
}

#[test]
fn cycle_file_names_the_cycle() {
    let text = r#"{
      "variables": [{"kind": "continuous", "name": "X"}, {"kind": "continuous", "name": "Y"}],
      "cpds": [
        {"kind": "clg", "child": "X", "discrete_parents": [], "continuous_parents": ["Y"],
         "entries": [{"intercept": 0.0, "weights": [1.0], "variance": 1.0}]},
        {"kind": "clg", "child": "Y", "discrete_parents": [], "continuous_parents": ["X"],
         "entries": [{"intercept": 0.0, "weights": [1.0], "variance": 1.0}]}
      ]
    }"#;
    let e = load_text(text);
    assert_eq!(e.kind(), "cycle");
    let msg = e.to_string();
    assert!(msg.contains('X') && msg.contains('Y'), "{msg}");
}

#[test]
fn softmax_on_continuous_child_is_invalid() {
    let text = r#"{
      "variables": [{"kind": "continuous", "name": "X"}, {"kind": "continuous", "name": "Y"}],
      "cpds": [
        {"kind": "clg", "child": "X", "discrete_parents": [], "continuous_parents": [],
         "entries": [{"intercept": 0.0, "weights": [], "variance": 1.0}]},
        {"kind": "softmax", "child": "Y", "discrete_parents": [], "continuous_parents": ["X"],
         "entries": [[{"bias": 0.0, "weights": [0.0]}, {"bias": 0.0, "weights": [1.0]}]]}
      ]
    }"#;
    assert_eq!(load_text(text).kind(), "validation");
}

#[test]
fn malformed_file_reports_its_path_and_location() {
    let text = r#"{"variables": [{"kind": "discrete", "name": "A", "states": "a1"}], "cpds": []}"#;
    let e = load_text(text);
    assert_eq!(e.kind(), "parse");
    let msg = e.to_string();
    assert!(msg.contains("net.json") && msg.contains("variables[0]"), "{msg}");
}

#[test]
fn unknown_reference_is_rejected() {
    let text = r#"{
      "variables": [{"kind": "continuous", "name": "X"}],
      "cpds": [{"kind": "clg", "child": "X", "discrete_parents": [], "continuous_parents": ["Ghost"],
                "entries": [{"intercept": 0.0, "weights": [1.0], "variance": 1.0}]}]
    }"#;
    assert!(load_text(text).to_string().contains("Ghost"));
}
