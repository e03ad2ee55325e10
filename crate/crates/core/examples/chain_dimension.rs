//! A child of every X_i in an n-chain: one reduced dimension instead of n.

use clgnet::experiments::{chain_dim, ChainDimConfig};

fn main() -> clgnet::Result<()> {
    let cfg = ChainDimConfig {
        sizes: vec![1, 4, 8],
        points: vec![2, 3, 5, 10],
        direct_points: vec![2, 3, 4],
        samples: vec![100, 10_000],
        ..ChainDimConfig::default()
    };
    println!("{:>2} {:>18} {:>6} {:>8} {:>8} {:>10}", "n", "method", "points", "samples", "evals", "|error|");
    for r in chain_dim(&cfg)? {
        println!(
            "{:>2} {:>18} {:>6} {:>8} {:>8} {:>10.2e}",
            r.n, r.method, r.points_per_dim, r.samples, r.evaluations, r.abs_error
        );
    }
    Ok(())
}
