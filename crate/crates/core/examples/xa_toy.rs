//! X ~ N(0, 1) with a sigmoid child A: the smallest network with a CD CPD.

use clgnet::networks::xa_toy;
use clgnet::pipeline::{run_infer, QueryRequest};

fn main() -> clgnet::Result<()> {
    let net = xa_toy();

    let req = QueryRequest::parse(&net, &[], &["A".into()])?;
    print!("{}", run_infer(&net, &req)?.to_text());

    // the posterior over X given A is skewed; the engine reports its first two moments
    for points in [3, 5, 10] {
        let req = QueryRequest::parse(&net, &["A=a1".into()], &["X".into()])?.with_points(points);
        let r = run_infer(&net, &req)?;
        let (mean, cov) = r.result.components[0].as_ref().expect("a1 has positive probability");
        println!("{points:>2} points: E[X | a1] = {:.6}, Var = {:.6}", mean[0], cov[(0, 0)]);
    }
    Ok(())
}
