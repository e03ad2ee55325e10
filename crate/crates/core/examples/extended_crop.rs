//! The extended crop network: engine at several grid sizes against likelihood weighting.

use clgnet::lw::{likelihood_weighting, LwConfig};
use clgnet::networks::extended_crop;
use clgnet::pipeline::{run_infer, QueryRequest};
use clgnet::Evidence;

fn main() -> clgnet::Result<()> {
    let net = extended_crop();
    let rain = net.id("Rain")?;

    let req = QueryRequest::parse(&net, &[], &["Price".into()])?;
    print!("{}", run_infer(&net, &req)?.to_text());

    let evidence = vec!["Profit=Even".to_string()];
    println!("\nP(Rain | Profit=Even)");
    for points in [3, 5, 8, 20] {
        let req = QueryRequest::parse(&net, &evidence, &["Rain".into()])?.with_points(points);
        let r = run_infer(&net, &req)?;
        println!("  {points:>2} points: {:?}", rounded(&r.result.probabilities));
    }

    let e = Evidence::parse(&net, &evidence)?;
    let lw = likelihood_weighting(&net, &e, &[rain], &LwConfig::new(500_000, 7))?;
    let m = lw.marginal(rain).expect("Rain was queried");
    let shown: Vec<String> = m.iter().map(|p| format!("{:.4}+-{:.4}", p.value, p.se)).collect();
    println!("  LW 5e5:    [{}]", shown.join(", "));
    Ok(())
}

fn rounded(p: &[f64]) -> Vec<f64> {
    p.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
