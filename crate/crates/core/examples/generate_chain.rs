//! Writes chain_n.json: `cargo run --example generate_chain -- 8 chain_8.json`

use clgnet::model::io::{load_network, to_json};
use clgnet::networks::chain;

fn main() -> clgnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = match args.next() {
        Some(s) => s.parse().map_err(|_| clgnet::Error::Config(format!("'{s}' is not a chain length")))?,
        None => 8,
    };
    let path = args.next().unwrap_or_else(|| format!("chain_{n}.json"));
    std::fs::write(&path, to_json(&chain(n)))?;
    // read it back so a broken file never goes unnoticed
    let net = load_network(&path)?;
    println!("wrote {path}: {} variables, {} CPDs", net.len(), net.cpds().len());
    Ok(())
}
