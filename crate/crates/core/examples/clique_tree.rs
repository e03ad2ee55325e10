//! Strong triangulation and the designated clique, exact and approximate.

use clgnet::cliquetree::{build_clique_tree, TreeMode};
use clgnet::networks::{axyb, emission_sensors, extended_crop, SHARP_SLOPE};

fn main() -> clgnet::Result<()> {
    for (name, net) in [("axyb", axyb(0.5, SHARP_SLOPE)), ("extended crop", extended_crop())] {
        println!("== {name}");
        print!("{}", build_clique_tree(&net, TreeMode::Exact)?.dump(&net));
    }

    // the approximate tree only needs the sensors' parents next to the sensors
    let net = emission_sensors();
    for mode in [TreeMode::Exact, TreeMode::Approximate] {
        let tree = build_clique_tree(&net, mode)?;
        let widest = tree.cliques.iter().map(|c| c.continuous.len()).max().unwrap_or(0);
        println!("== emission, {mode:?}: {} cliques, widest has {widest} continuous, strong {}", tree.len(), tree.is_strong(&net));
    }
    Ok(())
}
