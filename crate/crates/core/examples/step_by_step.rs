//! The pipeline one phase at a time, with the insertion report.

use clgnet::cdinsert::{insert_cd_cpds, InsertConfig};
use clgnet::cliquetree::{build_clique_tree, TreeMode};
use clgnet::networks::axyb;
use clgnet::propagation::CalibratedTree;
use clgnet::Evidence;

fn main() -> clgnet::Result<()> {
    let net = axyb(0.75, 3.0);
    let tree = build_clique_tree(&net, TreeMode::Exact)?;
    let mut ct = CalibratedTree::initialize(&net, tree)?;
    ct.calibrate()?;
    println!("pending CD CPDs: {}", ct.pending().len());

    ct.enter_evidence(&Evidence::parse(&net, &["B=b1".into()])?)?;
    let report = insert_cd_cpds(&mut ct, &InsertConfig::default())?;
    println!(
        "ln P(e): {:.6} before insertion, {:.6} after",
        report.log_evidence_before, report.log_evidence_after
    );
    for c in &report.cliques {
        println!(
            "clique C{}: inserted {:?}, dims {}, {} evaluations",
            c.clique, c.inserted, c.max_dim, c.evaluations
        );
    }

    let q = ct.query_names(&["A", "X"])?;
    for (i, p) in q.probabilities.iter().enumerate() {
        if let Some((mean, cov)) = &q.components[i] {
            println!("A={i}: p {:.4}, E[X] {:.4}, Var[X] {:.4}", p, mean[0], cov[(0, 0)]);
        }
    }
    Ok(())
}
