//! Likelihood weighting over the full network, used as an independent oracle.
//!
//! Samples are drawn in topological order with [`ChaCha8Rng`]. Batch `b` uses
//! the seed given by the caller on stream `b`, so results do not depend on the
//! number of threads. Observed variables are not sampled; they multiply the
//! sample weight by their CPD's probability or density.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::assignment::{decode, table_size};
use crate::error::{Error, Result};
use crate::model::{eval_cd, Cpd, Evidence, Network, VarId};

pub const DEFAULT_BATCH: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LwConfig {
    pub samples: usize,
    pub seed: u64,
    pub batch: usize,
}

impl LwConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        LwConfig {
            samples,
            seed,
            batch: DEFAULT_BATCH,
        }
    }
}

/// A weighted estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Number of standard errors between the estimate and `truth`.
    pub fn z_score(&self, truth: f64) -> f64 {
        if self.se == 0.0 {
            if self.value == truth {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - truth).abs() / self.se
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousEstimate {
    pub var: VarId,
    pub mean: Estimate,
    pub variance: Estimate,
}

/// Estimates conditioned on one assignment of the discrete query variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentEstimate {
    pub states: Vec<usize>,
    pub probability: Estimate,
    pub continuous: Vec<ContinuousEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub samples: usize,
    pub seed: u64,
    pub effective_samples: f64,
    /// Samples whose weight is exactly zero.
    pub zero_weight: usize,
    pub log_evidence: f64,
    pub evidence_probability: Estimate,
    pub discrete: Vec<VarId>,
    pub cards: Vec<usize>,
    pub continuous: Vec<VarId>,
    /// Joint over the discrete query variables, last variable fastest.
    pub assignments: Vec<AssignmentEstimate>,
    /// Marginals of each discrete query variable.
    pub marginals: Vec<(VarId, Vec<Estimate>)>,
    /// Moments of each continuous query variable, all discrete states pooled.
    pub moments: Vec<ContinuousEstimate>,
}

impl EstimateReport {
    pub fn marginal(&self, v: VarId) -> Option<&[Estimate]> {
        self.marginals.iter().find(|(u, _)| *u == v).map(|(_, m)| m.as_slice())
    }

    pub fn moment(&self, v: VarId) -> Option<&ContinuousEstimate> {
        self.moments.iter().find(|m| m.var == v)
    }
}

/// One batch: log weights, discrete query index and continuous query values.
struct Batch {
    log_w: Vec<f64>,
    index: Vec<usize>,
    values: Vec<f64>,
}

fn draw_categorical(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total; take the last state with mass
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

fn sample_batch(
    net: &Network,
    order: &[VarId],
    e: &Evidence,
    disc_q: &[VarId],
    cards_q: &[usize],
    cont_q: &[VarId],
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Batch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Batch {
        log_w: Vec::with_capacity(n),
        index: Vec::with_capacity(n),
        values: Vec::with_capacity(n * cont_q.len()),
    };
    let mut disc = vec![0usize; net.len()];
    let mut cont = vec![0.0f64; net.len()];
    for _ in 0..n {
        let mut log_w = 0.0;
        for &v in order {
            let cpd = net.cpd(v);
            let row = net.parent_index(cpd.discrete_parents(), |p| disc[p.0]);
            match cpd {
                Cpd::Table(t) => {
                    let p = &t.rows[row];
                    disc[v.0] = match e.discrete.get(&v) {
                        Some(&s) => {
                            log_w += p[s].ln();
                            s
                        }
                        None => draw_categorical(&mut rng, p),
                    };
                }
                Cpd::Softmax(s) => {
                    let y: Vec<f64> = s.continuous_parents.iter().map(|p| cont[p.0]).collect();
                    let p = eval_cd(s, row, &y)?;
                    disc[v.0] = match e.discrete.get(&v) {
                        Some(&st) => {
                            log_w += p[st].ln();
                            st
                        }
                        None => draw_categorical(&mut rng, &p),
                    };
                }
                Cpd::Clg(c) => {
                    let entry = &c.entries[row];
                    let mean = entry.intercept
                        + entry
                            .weights
                            .iter()
                            .zip(&c.continuous_parents)
                            .map(|(w, p)| w * cont[p.0])
                            .sum::<f64>();
                    cont[v.0] = match e.continuous.get(&v) {
                        Some(&x) => {
                            let d = x - mean;
                            log_w += -0.5 * (d * d / entry.variance + (2.0 * std::f64::consts::PI * entry.variance).ln());
                            x
                        }
                        None => {
                            let z: f64 = rng.sample(StandardNormal);
                            mean + entry.variance.sqrt() * z
                        }
                    };
                }
            }
            if log_w == f64::NEG_INFINITY {
                break;
            }
        }
        out.log_w.push(log_w);
        let states: Vec<usize> = disc_q.iter().map(|v| disc[v.0]).collect();
        out.index.push(crate::assignment::encode(&states, cards_q));
        out.values.extend(cont_q.iter().map(|v| cont[v.0]));
    }
    Ok(out)
}

/// Weighted ratio estimate of `f` over the samples selected by `sel`, with the
/// delta-method standard error `sqrt(sum w^2 (f - m)^2) / sum w`.
fn ratio(w: &[f64], f: impl Fn(usize) -> f64, sel: impl Fn(usize) -> bool) -> Estimate {
    let mut sw = 0.0;
    let mut swf = 0.0;
    for i in 0..w.len() {
        if sel(i) {
            sw += w[i];
            swf += w[i] * f(i);
        }
    }
    if sw == 0.0 {
        return Estimate {
            value: f64::NAN,
            se: f64::NAN,
        };
    }
    let m = swf / sw;
    let mut s2 = 0.0;
    for i in 0..w.len() {
        if sel(i) {
            let d = f(i) - m;
            s2 += w[i] * w[i] * d * d;
        }
    }
    Estimate {
        value: m,
        se: s2.sqrt() / sw,
    }
}

fn moments(w: &[f64], values: &[f64], stride: usize, j: usize, var: VarId, sel: impl Fn(usize) -> bool + Copy) -> ContinuousEstimate {
    let x = |i: usize| values[i * stride + j];
    let mean = ratio(w, x, sel);
    let m = mean.value;
    let variance = ratio(w, |i| (x(i) - m).powi(2), sel);
    ContinuousEstimate { var, mean, variance }
}

/// Estimates `P(Q | e)` and the moments of continuous query variables.
pub fn likelihood_weighting(net: &Network, e: &Evidence, query: &[VarId], cfg: &LwConfig) -> Result<EstimateReport> {
    if cfg.samples == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    if cfg.batch == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    e.check(net)?;
    for &v in query {
        if v.0 >= net.len() {
            return Err(Error::Scope(format!("unknown query variable {v}")));
        }
    }
    let disc_q: Vec<VarId> = query.iter().copied().filter(|&v| net.is_discrete(v)).collect();
    let cont_q: Vec<VarId> = query.iter().copied().filter(|&v| !net.is_discrete(v)).collect();
    let cards_q: Vec<usize> = disc_q.iter().map(|&v| net.cardinality(v)).collect();
    let order = net.topological_order();

    let n_batches = cfg.samples.div_ceil(cfg.batch);
    let batches = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let n = cfg.batch.min(cfg.samples - b * cfg.batch);
            sample_batch(net, &order, e, &disc_q, &cards_q, &cont_q, n, cfg.seed, b as u64)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut log_w = Vec::with_capacity(cfg.samples);
    let mut index = Vec::with_capacity(cfg.samples);
    let mut values = Vec::with_capacity(cfg.samples * cont_q.len());
    for b in batches {
        log_w.extend(b.log_w);
        index.extend(b.index);
        values.extend(b.values);
    }
    let zero_weight = log_w.iter().filter(|&&l| l == f64::NEG_INFINITY).count();
    if zero_weight == cfg.samples {
        return Err(Error::DegenerateWeights(cfg.samples));
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let n = cfg.samples as f64;
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let mean_w = sw / n;
    let var_w = w.iter().map(|x| (x - mean_w).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let scale = top.exp();
    let evidence_probability = Estimate {
        value: mean_w * scale,
        se: (var_w / n).sqrt() * scale,
    };

    let stride = cont_q.len();
    let assignments = (0..table_size(&cards_q))
        .map(|a| {
            let sel = |i: usize| index[i] == a;
            AssignmentEstimate {
                states: decode(a, &cards_q),
                probability: ratio(&w, |i| (index[i] == a) as u8 as f64, |_| true),
                continuous: cont_q
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| moments(&w, &values, stride, j, v, sel))
                    .collect(),
            }
        })
        .collect();
    let marginals = disc_q
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let est = (0..cards_q[k])
                .map(|s| ratio(&w, |i| (decode(index[i], &cards_q)[k] == s) as u8 as f64, |_| true))
                .collect();
            (v, est)
        })
        .collect();
    let moments_all = cont_q
        .iter()
        .enumerate()
        .map(|(j, &v)| moments(&w, &values, stride, j, v, |_| true))
        .collect();

    Ok(EstimateReport {
        samples: cfg.samples,
        seed: cfg.seed,
        effective_samples: sw * sw / sw2,
        zero_weight,
        log_evidence: (mean_w).ln() + top,
        evidence_probability,
        discrete: disc_q,
        cards: cards_q,
        continuous: cont_q,
        assignments,
        marginals,
        moments: moments_all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkBuilder;
    use crate::networks;

    fn three_node() -> Network {
        let mut b = NetworkBuilder::new();
        b.discrete("A", &["a0", "a1"])
            .discrete("B", &["b0", "b1", "b2"])
            .discrete("C", &["c0", "c1"])
            .table("A", &[], &[&[0.3, 0.7]])
            .table("B", &["A"], &[&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.3]])
            .table("C", &["B"], &[&[0.9, 0.1], &[0.4, 0.6], &[0.05, 0.95]]);
        b.build().unwrap()
    }

    /// P(A | C = c1) by enumeration.
    fn enumerate_a_given_c1() -> [f64; 2] {
        let pa = [0.3, 0.7];
        let pb = [[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]];
        let pc1 = [0.1, 0.6, 0.95];
        let mut j = [0.0; 2];
        for a in 0..2 {
            for b in 0..3 {
                j[a] += pa[a] * pb[a][b] * pc1[b];
            }
        }
        let z = j[0] + j[1];
        [j[0] / z, j[1] / z]
    }

    #[test]
    fn discrete_net_matches_enumeration() {
        let net = three_node();
        let mut e = Evidence::new();
        e.observe_discrete(net.id("C").unwrap(), 1);
        let a = net.id("A").unwrap();
        let r = likelihood_weighting(&net, &e, &[a], &LwConfig::new(1_000_000, 7)).unwrap();
        let truth = enumerate_a_given_c1();
        for (est, t) in r.marginal(a).unwrap().iter().zip(truth) {
            assert!(est.z_score(t) < 3.0, "{est:?} vs {t}");
        }
        assert!(r.effective_samples <= r.samples as f64);
    }

    #[test]
    fn coverage_over_seeded_runs() {
        let net = three_node();
        let mut e = Evidence::new();
        e.observe_discrete(net.id("C").unwrap(), 1);
        let a = net.id("A").unwrap();
        let truth = enumerate_a_given_c1()[0];
        let covered = (0..100u64)
            .filter(|&s| {
                let r = likelihood_weighting(&net, &e, &[a], &LwConfig::new(20_000, s)).unwrap();
                r.marginal(a).unwrap()[0].z_score(truth) < 3.0
            })
            .count();
        assert!(covered >= 97, "covered {covered}");
    }

    #[test]
    fn standard_error_halves_at_four_times_the_samples() {
        let net = networks::xa_toy();
        let x = net.id("X").unwrap();
        let mut e = Evidence::new();
        e.observe_discrete(net.id("A").unwrap(), 0);
        let small = likelihood_weighting(&net, &e, &[x], &LwConfig::new(100_000, 3)).unwrap();
        let big = likelihood_weighting(&net, &e, &[x], &LwConfig::new(400_000, 3)).unwrap();
        let ratio = small.moments[0].mean.se / big.moments[0].mean.se;
        assert!((ratio / 2.0 - 1.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn toy_conditional_mean() {
        let net = networks::xa_toy();
        let x = net.id("X").unwrap();
        let a = net.id("A").unwrap();
        let r = likelihood_weighting(&net, &Evidence::new(), &[a, x], &LwConfig::new(1_000_000, 11)).unwrap();
        let est = &r.assignments[0].continuous[0];
        assert!(est.mean.z_score(0.41324192828381406) < 3.0, "{est:?}");
        assert!(est.variance.z_score(0.8292311087082751) < 3.0, "{est:?}");
        assert!(r.assignments[0].probability.z_score(0.5) < 3.0);
    }

    #[test]
    fn deterministic_per_seed_and_batch_independent_of_threads() {
        let net = networks::extended_crop();
        let q = [net.id("Rain").unwrap(), net.id("Price").unwrap()];
        let cfg = LwConfig { samples: 10_000, seed: 5, batch: 1000 };
        let a = likelihood_weighting(&net, &Evidence::new(), &q, &cfg).unwrap();
        let b = likelihood_weighting(&net, &Evidence::new(), &q, &cfg).unwrap();
        assert_eq!(a, b);
        let c = likelihood_weighting(&net, &Evidence::new(), &q, &LwConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn impossible_evidence_is_degenerate() {
        let mut b = NetworkBuilder::new();
        b.discrete("A", &["a0", "a1"]).table("A", &[], &[&[1.0, 0.0]]);
        let net = b.build().unwrap();
        let mut e = Evidence::new();
        e.observe_discrete(VarId(0), 1);
        let r = likelihood_weighting(&net, &e, &[], &LwConfig::new(100, 1));
        assert!(matches!(r, Err(Error::DegenerateWeights(100))));
    }

    #[test]
    fn continuous_evidence_weights_by_density() {
        let net = networks::xa_toy();
        let mut e = Evidence::new();
        e.observe_continuous(net.id("X").unwrap(), 1.0);
        let a = net.id("A").unwrap();
        let r = likelihood_weighting(&net, &e, &[a], &LwConfig::new(1000, 1)).unwrap();
        let density = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.evidence_probability.value - density).abs() < 1e-12);
        assert_eq!(r.effective_samples, 1000.0);
    }
}
