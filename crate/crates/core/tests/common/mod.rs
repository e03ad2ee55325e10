//! Independent oracles for the integration tests.
//!
//! The CLG oracle enumerates every discrete assignment and builds the joint
//! Gaussian of all continuous variables directly from the linear-Gaussian
//! recursion, then conditions in moment form. It shares no code with the engine
//! beyond the network data types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clgnet::model::{ClgCpd, ClgEntry, Cpd, SoftmaxCpd, TableCpd, Variable};
use clgnet::{Evidence, Network, VarId};

pub fn decode(mut i: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for k in (0..cards.len()).rev() {
        out[k] = i % cards[k];
        i /= cards[k];
    }
    out
}

fn row_of(parents: &[VarId], disc: &[usize], cards: &[usize]) -> usize {
    parents.iter().fold(0, |acc, p| acc * cards[p.0] + disc[p.0])
}

/// One discrete assignment of the whole network with its conditional Gaussian
/// over the unobserved continuous variables.
pub struct Component {
    pub disc: Vec<usize>,
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

pub struct ClgOracle {
    /// Unobserved continuous variables, in the order used by `mean` and `cov`.
    pub free: Vec<VarId>,
    pub components: Vec<Component>,
}

impl ClgOracle {
    /// Enumerates `net`, which must contain only table and CLG CPDs.
    pub fn new(net: &Network, e: &Evidence) -> Self {
        let n = net.len();
        let cards: Vec<usize> = (0..n)
            .map(|i| if net.is_discrete(VarId(i)) { net.cardinality(VarId(i)) } else { 1 })
            .collect();
        let cont: Vec<VarId> = (0..n).map(VarId).filter(|&v| !net.is_discrete(v)).collect();
        let index_of = |v: VarId| cont.iter().position(|&c| c == v).unwrap();
        let order = net.topological_order();
        let total: usize = cards.iter().product();
        let mut components = Vec::new();
        for i in 0..total {
            let disc = decode(i, &cards);
            if e.discrete.iter().any(|(v, &s)| disc[v.0] != s) {
                continue;
            }
            let mut weight = 1.0;
            let m = cont.len();
            let mut mean = DVector::zeros(m);
            let mut cov = DMatrix::zeros(m, m);
            for &v in &order {
                match net.cpd(v) {
                    Cpd::Table(t) => weight *= t.rows[row_of(&t.parents, &disc, &cards)][disc[v.0]],
                    Cpd::Clg(c) => {
                        let entry = &c.entries[row_of(&c.discrete_parents, &disc, &cards)];
                        let x = index_of(v);
                        let pa: Vec<usize> = c.continuous_parents.iter().map(|&p| index_of(p)).collect();
                        mean[x] = entry.intercept + pa.iter().zip(&entry.weights).map(|(&p, w)| w * mean[p]).sum::<f64>();
                        // cov(x, k) = sum_j w_j cov(p_j, k) for earlier k
                        for k in 0..m {
                            if k == x {
                                continue;
                            }
                            let c_xk: f64 = pa.iter().zip(&entry.weights).map(|(&p, w)| w * cov[(p, k)]).sum();
                            cov[(x, k)] = c_xk;
                            cov[(k, x)] = c_xk;
                        }
                        let mut var = entry.variance;
                        for (a, wa) in pa.iter().zip(&entry.weights) {
                            for (b, wb) in pa.iter().zip(&entry.weights) {
                                var += wa * wb * cov[(*a, *b)];
                            }
                        }
                        cov[(x, x)] = var;
                    }
                    Cpd::Softmax(_) => panic!("the CLG oracle does not handle CD CPDs"),
                }
            }
            // condition on continuous evidence in moment form
            let obs: Vec<usize> = e.continuous.keys().map(|&v| index_of(v)).collect();
            let free: Vec<usize> = (0..m).filter(|k| !obs.contains(k)).collect();
            if !obs.is_empty() {
                let xo = DVector::from_iterator(obs.len(), e.continuous.values().copied());
                let mo = DVector::from_iterator(obs.len(), obs.iter().map(|&k| mean[k]));
                let soo = DMatrix::from_fn(obs.len(), obs.len(), |a, b| cov[(obs[a], obs[b])]);
                let suo = DMatrix::from_fn(free.len(), obs.len(), |a, b| cov[(free[a], obs[b])]);
                let suu = DMatrix::from_fn(free.len(), free.len(), |a, b| cov[(free[a], free[b])]);
                let inv = soo.clone().try_inverse().unwrap();
                let d = &xo - &mo;
                let q = d.dot(&(&inv * &d));
                let det = soo.determinant();
                weight *= (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(obs.len() as i32) * det).sqrt();
                let mu = DVector::from_iterator(free.len(), free.iter().map(|&k| mean[k])) + &suo * &inv * &d;
                let s = &suu - &suo * &inv * suo.transpose();
                mean = mu;
                cov = s;
            }
            components.push(Component { disc, weight, mean, cov });
        }
        let free = cont.into_iter().filter(|v| !e.continuous.contains_key(v)).collect();
        ClgOracle { free, components }
    }

    pub fn evidence_probability(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn marginal(&self, v: VarId, card: usize) -> Vec<f64> {
        let z = self.evidence_probability();
        let mut p = vec![0.0; card];
        for c in &self.components {
            p[c.disc[v.0]] += c.weight / z;
        }
        p
    }

    fn slot(&self, v: VarId) -> usize {
        self.free.iter().position(|&f| f == v).expect("unobserved continuous variable")
    }

    /// Mean and variance of `x`, optionally restricted to `d = state`.
    pub fn moments(&self, x: VarId, given: Option<(VarId, usize)>) -> (f64, f64) {
        let k = self.slot(x);
        let sel: Vec<&Component> = self
            .components
            .iter()
            .filter(|c| given.is_none_or(|(d, s)| c.disc[d.0] == s))
            .collect();
        let z: f64 = sel.iter().map(|c| c.weight).sum();
        let mean: f64 = sel.iter().map(|c| c.weight * c.mean[k]).sum::<f64>() / z;
        let second: f64 = sel.iter().map(|c| c.weight * (c.cov[(k, k)] + c.mean[k] * c.mean[k])).sum::<f64>() / z;
        (mean, second - mean * mean)
    }
}

/// A random CLG network: `nd` discrete variables, then `nc` continuous ones.
pub fn random_clg(seed: u64, nd: usize, nc: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vars = Vec::new();
    let mut cpds = Vec::new();
    let mut cards = Vec::new();
    for i in 0..nd {
        let card = rng.random_range(2..=3);
        let states: Vec<String> = (0..card).map(|s| format!("s{s}")).collect();
        let refs: Vec<&str> = states.iter().map(String::as_str).collect();
        vars.push(Variable::discrete(format!("D{i}"), &refs));
        cards.push(card);
        let parents: Vec<VarId> = (0..i).filter(|_| rng.random_bool(0.4)).take(2).map(VarId).collect();
        let n_rows: usize = parents.iter().map(|p| cards[p.0]).product();
        let rows = (0..n_rows)
            .map(|_| {
                let raw: Vec<f64> = (0..card).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        cpds.push(Cpd::Table(TableCpd {
            child: VarId(i),
            parents,
            rows,
        }));
    }
    for j in 0..nc {
        let id = VarId(nd + j);
        vars.push(Variable::continuous(format!("C{j}")));
        let dp: Vec<VarId> = (0..nd).filter(|_| rng.random_bool(0.35)).take(2).map(VarId).collect();
        let cp: Vec<VarId> = (0..j).filter(|_| rng.random_bool(0.45)).take(2).map(|k| VarId(nd + k)).collect();
        let n_rows: usize = dp.iter().map(|p| cards[p.0]).product();
        let entries = (0..n_rows)
            .map(|_| ClgEntry {
                intercept: rng.random_range(-2.0..2.0),
                weights: cp.iter().map(|_| rng.random_range(-1.2..1.2)).collect(),
                variance: rng.random_range(0.2..2.0),
            })
            .collect();
        cpds.push(Cpd::Clg(ClgCpd {
            child: id,
            discrete_parents: dp,
            continuous_parents: cp,
            entries,
        }));
    }
    Network::validated(vars, cpds).expect("random CLG network is valid")
}

/// Adds `k` binary sigmoid children of random continuous variables.
pub fn with_random_sigmoids(net: &Network, seed: u64, k: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cont: Vec<VarId> = net.ids().filter(|&v| !net.is_discrete(v)).collect();
    let mut vars = net.variables().to_vec();
    let mut cpds = net.cpds().to_vec();
    for i in 0..k {
        let child = VarId(vars.len());
        vars.push(Variable::discrete(format!("S{i}"), &["lo", "hi"]));
        let parents: Vec<VarId> = cont.iter().copied().filter(|_| rng.random_bool(0.5)).take(2).collect();
        let parents = if parents.is_empty() { vec![cont[rng.random_range(0..cont.len())]] } else { parents };
        let weights = parents.iter().map(|_| rng.random_range(-1.5..1.5)).collect();
        cpds.push(Cpd::Softmax(SoftmaxCpd::sigmoid(child, parents, rng.random_range(-1.0..1.0), weights)));
    }
    Network::validated(vars, cpds).expect("sigmoid children attach")
}

/// Random CLG network with one to three sigmoid children.
pub fn random_sigmoids_net(seed: u64) -> Network {
    let base = random_clg(1000 + seed, 1 + seed as usize % 3, 2 + seed as usize % 4);
    with_random_sigmoids(&base, seed, 1 + seed as usize % 3)
}

/// Random evidence: maybe one discrete and maybe one continuous observation.
pub fn random_evidence(net: &Network, seed: u64) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut e = Evidence::new();
    let disc: Vec<VarId> = net.ids().filter(|&v| net.is_discrete(v)).collect();
    let cont: Vec<VarId> = net.ids().filter(|&v| !net.is_discrete(v)).collect();
    if !disc.is_empty() && rng.random_bool(0.5) {
        let v = disc[rng.random_range(0..disc.len())];
        e.observe_discrete(v, rng.random_range(0..net.cardinality(v)));
    }
    if cont.len() > 1 && rng.random_bool(0.5) {
        let v = cont[rng.random_range(0..cont.len())];
        e.observe_continuous(v, rng.random_range(-1.0..1.0));
    }
    e
}

/// Composite Simpson rule on [a, b] with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `(P(a1), E[X | a1], Var[X | a1])` for X ~ N(0, 1), P(a1 | x) = 1 / (1 + e^-x).
pub fn toy_oracle() -> (f64, f64, f64) {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let n = 200_000;
    let m0 = simpson(|x| phi(x) * sig(x), -40.0, 40.0, n);
    let m1 = simpson(|x| x * phi(x) * sig(x), -40.0, 40.0, n) / m0;
    let m2 = simpson(|x| x * x * phi(x) * sig(x), -40.0, 40.0, n) / m0;
    (m0, m1, m2 - m1 * m1)
}
