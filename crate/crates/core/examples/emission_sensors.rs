//! Sensors with sigmoid CPDs on a CLG base network.
//!
//! Pass a base network JSON to use it instead of the bundled stand-in:
//! `cargo run --example emission_sensors -- base.json`

use clgnet::model::io::load_network;
use clgnet::networks::{emission_sensors, with_emission_sensors};
use clgnet::pipeline::{run_infer, QueryRequest};

fn main() -> clgnet::Result<()> {
    let net = match std::env::args().nth(1) {
        Some(path) => with_emission_sensors(&load_network(path)?)?,
        None => emission_sensors(),
    };
    let evidence = vec!["MetalSensor=High".to_string(), "CO2Sensor=High".to_string()];
    let req = QueryRequest::parse(&net, &evidence, &["DustEmission".into()])?.with_points(5);
    print!("{}", run_infer(&net, &req)?.to_text());
    Ok(())
}
