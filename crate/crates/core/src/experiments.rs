//! Convergence and accuracy sweeps, written as CSV with one fixed header per experiment.

use std::time::Instant;

use serde::Serialize;

use crate::cdinsert::{InsertConfig, InsertMode};
use crate::error::{Error, Result};
use crate::kl::{cg_kl, collapsed_kl, discrete_kl, gaussian_kl, KlSplit};
use crate::lw::{likelihood_weighting, LwConfig};
use crate::model::{Evidence, Network};
use crate::networks;
use crate::pipeline::{prepare, QueryRequest};
use crate::propagation::QueryResult;
use crate::quadrature::Backend;

pub const NAMES: [&str; 3] = ["chain-dim", "joint-vs-sequential", "crop-convergence"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDimConfig {
    pub sizes: Vec<usize>,
    /// Points per dimension for the reduced (one-dimensional) integral.
    pub points: Vec<usize>,
    /// Points per dimension for the direct tensor grid.
    pub direct_points: Vec<usize>,
    pub samples: Vec<usize>,
    pub seed: u64,
    pub reference_points: usize,
}

impl Default for ChainDimConfig {
    fn default() -> Self {
        ChainDimConfig {
            sizes: vec![1, 8],
            points: vec![2, 3, 4, 5, 6, 8, 10, 15, 20],
            direct_points: vec![2, 3, 4, 5],
            samples: vec![10, 100, 1_000, 10_000, 100_000],
            seed: 1,
            reference_points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointVsSequentialConfig {
    pub correlations: Vec<f64>,
    pub slopes: Vec<(String, f64)>,
    pub points: usize,
}

impl Default for JointVsSequentialConfig {
    fn default() -> Self {
        JointVsSequentialConfig {
            correlations: vec![0.0, 0.25, 0.5, 0.75, 0.95],
            slopes: vec![("flat".into(), networks::FLAT_SLOPE), ("sharp".into(), networks::SHARP_SLOPE)],
            points: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CropConvergenceConfig {
    pub points: Vec<usize>,
    pub samples: Vec<usize>,
    /// LW runs averaged per sample count.
    pub runs: usize,
    pub seed: u64,
    pub reference_points: usize,
}

impl Default for CropConvergenceConfig {
    fn default() -> Self {
        CropConvergenceConfig {
            points: vec![2, 3, 4, 5, 8, 10, 15, 20, 30],
            samples: vec![1_000, 10_000, 100_000, 1_000_000],
            runs: 5,
            seed: 1,
            reference_points: 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    ChainDim(ChainDimConfig),
    JointVsSequential(JointVsSequentialConfig),
    CropConvergence(CropConvergenceConfig),
}

impl Experiment {
    /// Default configuration for a named experiment.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "chain-dim" => Ok(Experiment::ChainDim(ChainDimConfig::default())),
            "joint-vs-sequential" => Ok(Experiment::JointVsSequential(JointVsSequentialConfig::default())),
            "crop-convergence" => Ok(Experiment::CropConvergence(CropConvergenceConfig::default())),
            _ => Err(Error::Config(format!(
                "unknown experiment '{name}' (expected one of {})",
                NAMES.join(", ")
            ))),
        }
    }

    /// A smaller sweep of the same experiment.
    pub fn quick(self) -> Self {
        match self {
            Experiment::ChainDim(c) => Experiment::ChainDim(ChainDimConfig {
                points: vec![2, 3, 5, 10],
                direct_points: vec![2, 3],
                samples: vec![100, 1_000],
                ..c
            }),
            Experiment::JointVsSequential(c) => Experiment::JointVsSequential(JointVsSequentialConfig {
                correlations: vec![0.0, 0.5, 0.95],
                points: 20,
                ..c
            }),
            Experiment::CropConvergence(c) => Experiment::CropConvergence(CropConvergenceConfig {
                points: vec![3, 5, 10],
                samples: vec![1_000, 10_000],
                runs: 2,
                reference_points: 40,
                ..c
            }),
        }
    }

    pub fn run(&self) -> Result<String> {
        match self {
            Experiment::ChainDim(c) => to_csv(&chain_dim(c)?),
            Experiment::JointVsSequential(c) => to_csv(&joint_vs_sequential(c)?),
            Experiment::CropConvergence(c) => to_csv(&crop_convergence(c)?),
        }
    }
}

/// Runs a named experiment with its default (or quick) configuration.
pub fn run_experiment(name: &str, quick: bool) -> Result<String> {
    let e = Experiment::named(name)?;
    if quick {
        e.quick().run()
    } else {
        e.run()
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn solve(net: &Network, names: &[&str], evidence: &[&str], insert: InsertConfig) -> Result<(QueryResult, usize)> {
    let ev: Vec<String> = evidence.iter().map(|s| s.to_string()).collect();
    let q: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut req = QueryRequest::parse(net, &ev, &q)?;
    req.insert = insert;
    let (ct, report, _) = prepare(net, &req)?;
    Ok((ct.query(&req.query)?, report.evaluations()))
}

fn quadrature(points: usize) -> InsertConfig {
    InsertConfig {
        backend: Backend::Quadrature { points },
        ..InsertConfig::default()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ChainDimRow {
    pub n: usize,
    pub method: &'static str,
    pub points_per_dim: usize,
    pub samples: usize,
    pub evaluations: usize,
    pub p_a1: f64,
    pub abs_error: f64,
}

/// Error of P(A = a1) on the chain network against a high-order reduced rule.
pub fn chain_dim(c: &ChainDimConfig) -> Result<Vec<ChainDimRow>> {
    let mut rows = Vec::new();
    for &n in &c.sizes {
        let net = networks::chain(n);
        let (reference, _) = solve(&net, &["A"], &[], quadrature(c.reference_points))?;
        let truth = reference.probabilities[0];
        let mut push = |method, points_per_dim, samples, res: (QueryResult, usize)| {
            let p = res.0.probabilities[0];
            rows.push(ChainDimRow {
                n,
                method,
                points_per_dim,
                samples,
                evaluations: res.1,
                p_a1: p,
                abs_error: (p - truth).abs(),
            });
        };
        for &k in &c.points {
            push("quadrature-reduced", k, 0, solve(&net, &["A"], &[], quadrature(k))?);
        }
        for &k in &c.direct_points {
            let cfg = InsertConfig {
                feature_reduction: false,
                dim_cap: n.max(1),
                ..quadrature(k)
            };
            push("quadrature-direct", k, 0, solve(&net, &["A"], &[], cfg)?);
        }
        for &s in &c.samples {
            let cfg = InsertConfig {
                feature_reduction: false,
                backend: Backend::MonteCarlo { samples: s, seed: c.seed },
                ..InsertConfig::default()
            };
            push("monte-carlo", 0, s, solve(&net, &["A"], &[], cfg)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct JointVsSequentialRow {
    pub sigmoid: String,
    pub slope: f64,
    pub corr: f64,
    pub kl_discrete: f64,
    pub kl_continuous: f64,
}

/// KL(joint || sequential) over (A, B, X, Y) on A <- X -> Y -> B.
pub fn joint_vs_sequential_kl(corr: f64, slope: f64, points: usize) -> Result<KlSplit> {
    let net = networks::axyb(corr, slope);
    let q = ["A", "B", "X", "Y"];
    let (joint, _) = solve(&net, &q, &[], quadrature(points))?;
    let seq = InsertConfig {
        mode: InsertMode::Sequential,
        ..quadrature(points)
    };
    let (sequential, _) = solve(&net, &q, &[], seq)?;
    cg_kl(&joint, &sequential)
}

pub fn joint_vs_sequential(c: &JointVsSequentialConfig) -> Result<Vec<JointVsSequentialRow>> {
    let mut rows = Vec::new();
    for (label, slope) in &c.slopes {
        for &corr in &c.correlations {
            let kl = joint_vs_sequential_kl(corr, *slope, c.points)?;
            rows.push(JointVsSequentialRow {
                sigmoid: label.clone(),
                slope: *slope,
                corr,
                kl_discrete: kl.discrete,
                kl_continuous: kl.continuous,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CropRow {
    pub scenario: &'static str,
    pub method: &'static str,
    /// Points per dimension (engine) or sample count (lw).
    pub setting: usize,
    pub runs: usize,
    pub seconds: f64,
    pub kl: f64,
}

/// The two crop queries: P(Price) without evidence and P(Rain | Profit=Even).
pub const CROP_SCENARIOS: [(&str, &str, Option<&str>); 2] =
    [("price", "Price", None), ("rain-given-profit-even", "Rain", Some("Profit=Even"))];

/// KL of the engine at `points` per dimension from the engine at `reference` points,
/// for each of [`CROP_SCENARIOS`].
pub fn crop_engine_kl(points: usize, reference: usize) -> Result<[f64; 2]> {
    let net = networks::extended_crop();
    let mut out = [0.0; 2];
    for (i, (_, q, ev)) in CROP_SCENARIOS.iter().enumerate() {
        let ev: Vec<&str> = ev.iter().copied().collect();
        let (r, _) = solve(&net, &[q], &ev, quadrature(reference))?;
        let (e, _) = solve(&net, &[q], &ev, quadrature(points))?;
        out[i] = if r.continuous.is_empty() {
            discrete_kl(&r.probabilities, &e.probabilities)
        } else {
            collapsed_kl(&r, &e)?
        };
    }
    Ok(out)
}

pub fn crop_convergence(c: &CropConvergenceConfig) -> Result<Vec<CropRow>> {
    let net = networks::extended_crop();
    let mut rows = Vec::new();
    for (scenario, q, ev) in CROP_SCENARIOS {
        let ev: Vec<&str> = ev.into_iter().collect();
        let (reference, _) = solve(&net, &[q], &ev, quadrature(c.reference_points))?;
        let kl_of = |probabilities: &[f64], moments: Option<(f64, f64)>| -> Result<f64> {
            match moments {
                None => Ok(discrete_kl(&reference.probabilities, probabilities)),
                Some((m, v)) => {
                    let r = reference.moments().expect("continuous query");
                    gaussian_kl(
                        &r.mean,
                        &r.cov,
                        &nalgebra::dvector![m],
                        &nalgebra::dmatrix![v],
                    )
                }
            }
        };
        for &k in &c.points {
            let t = Instant::now();
            let (e, _) = solve(&net, &[q], &ev, quadrature(k))?;
            let seconds = t.elapsed().as_secs_f64();
            let moments = e.moments().map(|m| (m.mean[0], m.cov[(0, 0)]));
            rows.push(CropRow {
                scenario,
                method: "engine",
                setting: k,
                runs: 1,
                seconds,
                kl: kl_of(&e.probabilities, moments)?,
            });
        }
        let evidence = Evidence::parse(&net, &ev.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
        let var = net.id(q)?;
        for &s in &c.samples {
            let (mut kl, mut seconds) = (0.0, 0.0);
            for run in 0..c.runs {
                let t = Instant::now();
                let lw = likelihood_weighting(&net, &evidence, &[var], &LwConfig::new(s, c.seed + run as u64))?;
                seconds += t.elapsed().as_secs_f64();
                kl += match lw.moment(var) {
                    Some(m) => kl_of(&[], Some((m.mean.value, m.variance.value)))?,
                    None => {
                        let p: Vec<f64> = lw.marginal(var).expect("query").iter().map(|e| e.value).collect();
                        kl_of(&p, None)?
                    }
                };
            }
            rows.push(CropRow {
                scenario,
                method: "lw",
                setting: s,
                runs: c.runs,
                seconds: seconds / c.runs as f64,
                kl: kl / c.runs as f64,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name() {
        assert!(matches!(Experiment::named("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn one_dimensional_chain_at_five_points() {
        let cfg = ChainDimConfig {
            sizes: vec![1],
            points: vec![5],
            direct_points: vec![],
            samples: vec![],
            ..ChainDimConfig::default()
        };
        let rows = chain_dim(&cfg).unwrap();
        assert!(rows[0].abs_error < 1e-6, "{rows:?}");
    }

    #[test]
    fn headers_are_fixed() {
        let csv = run_experiment("joint-vs-sequential", true).unwrap();
        assert_eq!(csv.lines().next().unwrap(), "sigmoid,slope,corr,kl_discrete,kl_continuous");
        assert_eq!(csv.lines().count(), 1 + 2 * 3);
        let csv = run_experiment("chain-dim", true).unwrap();
        assert_eq!(
            csv.lines().next().unwrap(),
            "n,method,points_per_dim,samples,evaluations,p_a1,abs_error"
        );
    }

    #[test]
    fn independence_limit() {
        let kl = joint_vs_sequential_kl(0.0, networks::SHARP_SLOPE, 20).unwrap();
        assert!(kl.discrete <= 1e-9 && kl.continuous <= 1e-9);
    }
}
