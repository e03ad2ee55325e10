//! The golden dust-emission posterior needs the original base network, which
//! is not bundled. Point CLGNET_EMISSION_BASE at its JSON to run the check.

use clgnet::model::io::load_network;
use clgnet::networks::with_emission_sensors;
use clgnet::pipeline::{run_infer, QueryRequest};

#[test]
fn dust_emission_given_high_sensors() {
    let Ok(path) = std::env::var("CLGNET_EMISSION_BASE") else {
        eprintln!("CLGNET_EMISSION_BASE not set; skipping the golden emission check");
        return;
    };
    let net = with_emission_sensors(&load_network(&path).unwrap()).unwrap();
    let e = vec!["MetalSensor=High".to_string(), "CO2Sensor=High".to_string()];
    let req = QueryRequest::parse(&net, &e, &["DustEmission".into()]).unwrap().with_points(20);
    let m = run_infer(&net, &req).unwrap().moments.unwrap();
    let (mean, var) = (m.mean[0], m.covariance[0][0]);
    assert!((mean - 3.419).abs() < 5e-3, "mean {mean}");
    assert!((var - 1.007).abs() < 5e-3, "variance {var}");
}
