//! How much is lost by inserting A and B one at a time in A <- X -> Y -> B.

use clgnet::experiments::joint_vs_sequential_kl;
use clgnet::networks::{FLAT_SLOPE, SHARP_SLOPE};

fn main() -> clgnet::Result<()> {
    println!("{:>5} {:>12} {:>12} {:>12} {:>12}", "corr", "flat disc", "flat cont", "sharp disc", "sharp cont");
    for corr in [0.0, 0.25, 0.5, 0.75, 0.95] {
        let flat = joint_vs_sequential_kl(corr, FLAT_SLOPE, 40)?;
        let sharp = joint_vs_sequential_kl(corr, SHARP_SLOPE, 40)?;
        println!(
            "{corr:>5} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            flat.discrete, flat.continuous, sharp.discrete, sharp.continuous
        );
    }
    Ok(())
}
