//! End-to-end inference: tree, calibration, evidence, CD insertion, query.

use std::time::Instant;

use serde::Serialize;

use crate::assignment::decode;
use crate::cdinsert::{insert_cd_cpds, InsertConfig, InsertMode, InsertionReport};
use crate::cliquetree::{build_clique_tree, TreeMode};
use crate::error::{Error, Result};
use crate::model::{Evidence, Network, VarId};
use crate::propagation::{CalibratedTree, QueryResult};
use crate::quadrature::Backend;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRequest {
    pub evidence: Evidence,
    pub query: Vec<VarId>,
    pub insert: InsertConfig,
    pub tree_mode: TreeMode,
}

impl QueryRequest {
    pub fn new(query: Vec<VarId>) -> Self {
        QueryRequest {
            evidence: Evidence::new(),
            query,
            insert: InsertConfig::default(),
            tree_mode: TreeMode::Exact,
        }
    }

    /// Resolves `Name=state` / `Name=value` evidence and query names against `net`.
    pub fn parse(net: &Network, evidence: &[String], query: &[String]) -> Result<Self> {
        let evidence = Evidence::parse(net, evidence)?;
        let query = query.iter().map(|q| net.id(q)).collect::<Result<Vec<_>>>()?;
        if query.is_empty() {
            return Err(Error::Config("at least one query variable is required".into()));
        }
        Ok(QueryRequest {
            evidence,
            ..QueryRequest::new(query)
        })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.insert.backend = backend;
        self
    }

    pub fn with_points(self, points: usize) -> Self {
        self.with_backend(Backend::Quadrature { points })
    }

    pub fn with_mode(mut self, mode: InsertMode) -> Self {
        self.insert.mode = mode;
        self
    }

    pub fn with_evidence(mut self, evidence: Evidence) -> Self {
        self.evidence = evidence;
        self
    }
}

/// Builds the tree and runs every calibration phase for `req`.
pub fn prepare(net: &Network, req: &QueryRequest) -> Result<(CalibratedTree, InsertionReport, Timing)> {
    let mut timing = Timing::default();
    let start = Instant::now();
    let tree = build_clique_tree(net, req.tree_mode).map_err(Error::in_phase("building the clique tree"))?;
    let mut ct = CalibratedTree::initialize(net, tree).map_err(Error::in_phase("initializing potentials"))?;
    timing.build_ms = ms(start);

    let t = Instant::now();
    ct.calibrate().map_err(Error::in_phase("prior calibration"))?;
    timing.calibrate_ms = ms(t);

    let t = Instant::now();
    ct.enter_evidence(&req.evidence).map_err(Error::in_phase("evidence calibration"))?;
    timing.evidence_ms = ms(t);

    let t = Instant::now();
    let report = insert_cd_cpds(&mut ct, &req.insert).map_err(Error::in_phase("CD insertion"))?;
    timing.insert_ms = ms(t);
    timing.total_ms = ms(start);
    Ok((ct, report, timing))
}

/// Runs the whole pipeline and summarizes the posterior over the query.
pub fn run_infer(net: &Network, req: &QueryRequest) -> Result<ResultReport> {
    let start = Instant::now();
    let (ct, insertion, mut timing) = prepare(net, req)?;
    let t = Instant::now();
    let result = ct.query(&req.query).map_err(Error::in_phase("query"))?;
    timing.query_ms = ms(t);
    timing.total_ms = ms(start);
    Ok(ResultReport::new(net, req, &ct, &insertion, result, timing))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct Timing {
    pub build_ms: f64,
    pub calibrate_ms: f64,
    pub evidence_ms: f64,
    pub insert_ms: f64,
    pub query_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AssignmentReport {
    pub states: Vec<String>,
    pub probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MarginalReport {
    pub variable: String,
    pub states: Vec<String>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MomentReport {
    pub variables: Vec<String>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BackendReport {
    pub backend: String,
    pub mode: String,
    pub tree_mode: String,
    pub feature_reduction: bool,
    pub dim_cap: usize,
    /// Distinct integration dimensions used, ascending.
    pub integration_dims: Vec<usize>,
    pub evaluations: usize,
    /// Largest logit standard deviation per sigmoid or linear softmax.
    pub sharpness: Vec<(String, f64)>,
    pub exact_cpds: Vec<String>,
    pub dropped_entries: usize,
    pub cliques: usize,
    pub largest_clique_entries: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ResultReport {
    pub query: Vec<String>,
    pub evidence: Vec<String>,
    pub log_evidence: f64,
    pub evidence_probability: f64,
    pub discrete: Vec<String>,
    pub continuous: Vec<String>,
    pub assignments: Vec<AssignmentReport>,
    pub marginals: Vec<MarginalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentReport>,
    pub backend: BackendReport,
    pub timing: Timing,
    #[serde(skip)]
    pub result: QueryResult,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ResultReport {
    fn new(
        net: &Network,
        req: &QueryRequest,
        ct: &CalibratedTree,
        ins: &InsertionReport,
        result: QueryResult,
        timing: Timing,
    ) -> Self {
        let names = |ids: &[VarId]| ids.iter().map(|&v| net.name(v).to_string()).collect::<Vec<_>>();
        let state_name = |v: VarId, s: usize| net.variable(v).states()[s].clone();
        let assignments = result
            .probabilities
            .iter()
            .zip(&result.components)
            .enumerate()
            .map(|(i, (&p, c))| {
                let st = decode(i, &result.cards);
                AssignmentReport {
                    states: result.discrete.iter().zip(&st).map(|(&v, &s)| state_name(v, s)).collect(),
                    probability: p,
                    mean: c.as_ref().filter(|_| !result.continuous.is_empty()).map(|(m, _)| m.iter().copied().collect()),
                    covariance: c.as_ref().filter(|_| !result.continuous.is_empty()).map(|(_, s)| rows(s)),
                }
            })
            .collect();
        let marginals = result
            .discrete
            .iter()
            .map(|&v| MarginalReport {
                variable: net.name(v).to_string(),
                states: net.variable(v).states().to_vec(),
                probabilities: result.marginal(v).expect("query variable"),
            })
            .collect();
        let moments = result.moments().map(|m| MomentReport {
            variables: names(&result.continuous),
            mean: m.mean.iter().copied().collect(),
            covariance: rows(&m.cov),
        });
        let mut evidence: Vec<String> = req
            .evidence
            .discrete
            .iter()
            .map(|(&v, &s)| format!("{}={}", net.name(v), state_name(v, s)))
            .collect();
        evidence.extend(req.evidence.continuous.iter().map(|(&v, x)| format!("{}={x}", net.name(v))));
        let mut dims: Vec<usize> = ins.cliques.iter().map(|c| c.max_dim).collect();
        dims.sort();
        dims.dedup();
        let tree = ct.tree();
        let largest = tree
            .cliques
            .iter()
            .map(|c| c.discrete.iter().map(|&v| net.cardinality(v)).product::<usize>())
            .max()
            .unwrap_or(1);
        ResultReport {
            query: names(&req.query),
            evidence,
            log_evidence: result.log_evidence,
            evidence_probability: result.evidence_probability(),
            discrete: names(&result.discrete),
            continuous: names(&result.continuous),
            assignments,
            marginals,
            moments,
            backend: BackendReport {
                backend: ins.backend.describe(),
                mode: format!("{:?}", ins.mode).to_lowercase(),
                tree_mode: format!("{:?}", tree.mode).to_lowercase(),
                feature_reduction: req.insert.feature_reduction,
                dim_cap: req.insert.dim_cap,
                integration_dims: dims,
                evaluations: ins.evaluations(),
                sharpness: ins.cliques.iter().flat_map(|c| c.sharpness.clone()).collect(),
                exact_cpds: ins.cliques.iter().flat_map(|c| c.exact.clone()).collect(),
                dropped_entries: ins.cliques.iter().map(|c| c.dropped).sum(),
                cliques: tree.len(),
                largest_clique_entries: largest,
            },
            timing,
            result,
        }
    }

    /// Pretty JSON with the timing block zeroed, for reproducibility checks.
    pub fn to_json_without_timing(&self) -> String {
        let mut r = self.clone();
        r.timing = Timing::default();
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("P(e) = {:.6e}\n", self.evidence_probability));
        for m in &self.marginals {
            s.push_str(&format!("{}:\n", m.variable));
            for (st, p) in m.states.iter().zip(&m.probabilities) {
                s.push_str(&format!("  {st:<14} {p:.6}\n"));
            }
        }
        if !self.continuous.is_empty() {
            for a in &self.assignments {
                if let Some(mean) = &a.mean {
                    let label = if a.states.is_empty() { "all".to_string() } else { a.states.join(",") };
                    s.push_str(&format!("[{label}] p={:.6} mean={mean:.6?}\n", a.probability));
                    if let Some(c) = &a.covariance {
                        s.push_str(&format!("  cov={c:.6?}\n"));
                    }
                }
            }
            if let Some(m) = &self.moments {
                s.push_str(&format!("{} mean={:.6?}\n  cov={:.6?}\n", m.variables.join(","), m.mean, m.covariance));
            }
        }
        let b = &self.backend;
        s.push_str(&format!(
            "backend: {} ({}, {} tree), dims {:?}, {} evaluations\n",
            b.backend, b.mode, b.tree_mode, b.integration_dims, b.evaluations
        ));
        for (n, v) in &b.sharpness {
            s.push_str(&format!("  sharpness {n}: {v:.3}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks;

    #[test]
    fn toy_query_is_symmetric() {
        let net = networks::xa_toy();
        let req = QueryRequest::parse(&net, &[], &["A".into()]).unwrap();
        let r = run_infer(&net, &req).unwrap();
        assert!((r.marginals[0].probabilities[0] - 0.5).abs() < 1e-12);
        assert_eq!(r.backend.integration_dims, vec![1]);
    }

    #[test]
    fn reports_are_reproducible() {
        let net = networks::extended_crop();
        let req = QueryRequest::parse(&net, &["Profit=Even".into()], &["Rain".into(), "Price".into()])
            .unwrap()
            .with_backend(Backend::MonteCarlo { samples: 500, seed: 9 });
        let a = run_infer(&net, &req).unwrap().to_json_without_timing();
        let b = run_infer(&net, &req).unwrap().to_json_without_timing();
        assert_eq!(a, b);
    }

    #[test]
    fn marginals_sum_to_one() {
        let net = networks::extended_crop();
        let req = QueryRequest::parse(&net, &["Buy=No".into()], &["Rain".into(), "Profit".into()]).unwrap();
        let r = run_infer(&net, &req).unwrap();
        for m in &r.marginals {
            assert!((m.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn errors_carry_phase_labels() {
        let net = networks::chain(8);
        let req = QueryRequest::parse(&net, &[], &["A".into()]).unwrap();
        let mut req = req;
        req.insert.feature_reduction = false;
        let e = run_infer(&net, &req).unwrap_err();
        assert_eq!(e.kind(), "dimension_cap");
        assert!(e.to_string().starts_with("CD insertion"));
        assert!(matches!(e.root(), Error::DimensionCap { dim: 8, cap: 6 }));
    }
}
