//! Two-pass calibration of a clique tree over hybrid factors.
//!
//! Collect toward the strong root marginalizes exactly; distribute may collapse
//! mixtures. Every call to [`CalibratedTree::calibrate`] restarts from the
//! initial potentials, so evidence and CD insertions only ever touch those.

use nalgebra::{DMatrix, DVector};

use crate::canonical::{collapse, GaussianMoments, HybridFactor};
use crate::cliquetree::CliqueTree;
use crate::error::{Error, Result};
use crate::model::{Evidence, Network, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Uninitialized,
    PriorCalibrated,
    EvidenceCalibrated,
    CdCalibrated,
}

#[derive(Debug, Clone)]
pub struct CalibratedTree {
    pub(crate) net: Network,
    pub(crate) tree: CliqueTree,
    pub(crate) evidence: Evidence,
    initial: Vec<HybridFactor>,
    /// Factors added by CD insertion, per clique.
    pub(crate) cd_factors: Vec<Vec<HybridFactor>>,
    potentials: Vec<HybridFactor>,
    separators: Vec<Option<HybridFactor>>,
    pub(crate) pending: Vec<usize>,
    cd_inserted: bool,
    phase: Phase,
}

impl CalibratedTree {
    /// Places every non-CD CPD in its clique; CD CPDs wait in `pending`.
    pub fn initialize(net: &Network, tree: CliqueTree) -> Result<Self> {
        let mut ct = CalibratedTree {
            net: net.clone(),
            cd_factors: vec![Vec::new(); tree.len()],
            separators: vec![None; tree.len()],
            tree,
            evidence: Evidence::new(),
            initial: vec![],
            potentials: vec![],
            pending: net.cd_cpds(),
            cd_inserted: false,
            phase: Phase::Uninitialized,
        };
        ct.initial = ct.build_initial()?;
        ct.potentials = ct.initial.clone();
        Ok(ct)
    }

    pub fn net(&self) -> &Network {
        &self.net
    }

    pub fn tree(&self) -> &CliqueTree {
        &self.tree
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    /// CD CPDs not inserted yet.
    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    pub fn potential(&self, clique: usize) -> &HybridFactor {
        &self.potentials[clique]
    }

    pub fn initial_potential(&self, clique: usize) -> &HybridFactor {
        &self.initial[clique]
    }

    pub fn separator(&self, clique: usize) -> Option<&HybridFactor> {
        self.separators[clique].as_ref()
    }

    fn observed(&self, v: VarId) -> bool {
        self.evidence.continuous.contains_key(&v)
    }

    /// Continuous clique variables that are not observed.
    pub fn free_continuous(&self, clique: usize) -> Vec<VarId> {
        self.tree.cliques[clique]
            .continuous
            .iter()
            .copied()
            .filter(|&v| !self.observed(v))
            .collect()
    }

    fn separator_scope(&self, clique: usize) -> Vec<VarId> {
        self.tree.separator[clique]
            .iter()
            .copied()
            .filter(|&v| !self.observed(v))
            .collect()
    }

    fn build_initial(&self) -> Result<Vec<HybridFactor>> {
        let mut out = Vec::with_capacity(self.tree.len());
        for (k, clique) in self.tree.cliques.iter().enumerate() {
            let cards = clique.discrete.iter().map(|&v| self.net.cardinality(v)).collect();
            let mut f = HybridFactor::vacuous(clique.discrete.clone(), cards, self.free_continuous(k));
            for &ci in &clique.cpds {
                let mut cf = HybridFactor::from_cpd(&self.net, &self.net.cpds()[ci])?;
                for (&v, &x) in &self.evidence.continuous {
                    if cf.continuous().contains(&v) {
                        cf = cf.reduce_continuous(v, x)?;
                    }
                }
                f = f.multiply(&cf);
            }
            for (&v, &s) in &self.evidence.discrete {
                if self.tree.first_containing(v) == Some(k) {
                    f = f.reduce_discrete(v, s)?;
                }
            }
            for phi in &self.cd_factors[k] {
                f = f.multiply(phi);
            }
            out.push(f);
        }
        Ok(out)
    }

    pub(crate) fn rebuild(&mut self) -> Result<()> {
        self.initial = self.build_initial()?;
        self.calibrate()
    }

    /// Collect to the strong root, then distribute. Restarts from the initial potentials.
    pub fn calibrate(&mut self) -> Result<()> {
        self.potentials = self.initial.clone();
        self.separators = vec![None; self.tree.len()];
        for k in self.tree.collect_order() {
            let Some(p) = self.tree.parent[k] else { continue };
            let msg = self.potentials[k]
                .marginalize(&self.separator_scope(k), false)
                .map_err(|e| match e {
                    Error::NonIntegrableFactor(m) | Error::StrongRootViolation(m) => {
                        Error::StrongRootViolation(format!("collect from clique {k}: {m}"))
                    }
                    other => other,
                })?;
            self.potentials[p] = self.potentials[p].multiply(&msg);
            self.separators[k] = Some(msg);
        }
        for p in self.tree.distribute_order() {
            for k in self.tree.children(p) {
                let new = self.potentials[p].marginalize(&self.separator_scope(k), true)?;
                let old = self.separators[k].take().expect("collect filled every separator");
                self.potentials[k] = self.potentials[k].multiply(&new).divide(&old);
                self.separators[k] = Some(new);
            }
        }
        self.phase = if self.cd_inserted {
            Phase::CdCalibrated
        } else if self.evidence.is_empty() {
            Phase::PriorCalibrated
        } else {
            Phase::EvidenceCalibrated
        };
        Ok(())
    }

    /// Adds observations and recalibrates. Must happen before CD CPDs are inserted.
    pub fn enter_evidence(&mut self, e: &Evidence) -> Result<()> {
        match self.phase {
            Phase::Uninitialized => {
                return Err(Error::Phase("calibrate the tree before entering evidence".into()))
            }
            Phase::CdCalibrated => {
                return Err(Error::Phase(
                    "evidence must be entered before the CD CPDs are inserted".into(),
                ))
            }
            _ => {}
        }
        e.check(&self.net)?;
        let mut merged = self.evidence.clone();
        for (&v, &s) in &e.discrete {
            if merged.discrete.insert(v, s).is_some_and(|old| old != s) {
                return Err(Error::Config(format!("'{}' observed twice", self.net.name(v))));
            }
        }
        for (&v, &x) in &e.continuous {
            if merged.continuous.insert(v, x).is_some_and(|old| old != x) {
                return Err(Error::Config(format!("'{}' observed twice", self.net.name(v))));
            }
        }
        self.evidence = merged;
        self.rebuild()
    }

    pub(crate) fn finish_cd_insertion(&mut self, factors: Vec<(usize, HybridFactor)>) -> Result<()> {
        for (k, f) in factors {
            self.cd_factors[k].push(f);
        }
        self.pending.clear();
        self.cd_inserted = true;
        self.rebuild()
    }

    /// ln P(e), read from the root clique.
    pub fn log_evidence(&self) -> Result<f64> {
        self.potentials[self.tree.root].log_mass()
    }

    /// Largest disagreement between the two sides of any separator, measured on
    /// weights (relative) and on collapsed means and covariances.
    pub fn calibration_error(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..self.tree.len() {
            let Some(p) = self.tree.parent[k] else { continue };
            let scope = self.separator_scope(k);
            let a = self.potentials[k].marginalize(&scope, true)?;
            let b = self.potentials[p].marginalize(&scope, true)?;
            let b = b.with_discrete_order(a.discrete())?.with_continuous_order(a.continuous())?;
            for (fa, fb) in a.entries().iter().zip(b.entries()) {
                let (ma, mb) = (fa.to_moments()?, fb.to_moments()?);
                let (wa, wb) = (ma.weight(), mb.weight());
                let scale = wa.max(wb);
                if scale == 0.0 {
                    continue;
                }
                worst = worst.max((wa - wb).abs() / scale);
                if wa > 0.0 && wb > 0.0 {
                    worst = worst.max((&ma.mean - &mb.mean).amax());
                    worst = worst.max((&ma.cov - &mb.cov).amax());
                }
            }
        }
        Ok(worst)
    }

    /// Distribution over `q`, read from the smallest clique containing it.
    pub fn query(&self, q: &[VarId]) -> Result<QueryResult> {
        if self.phase == Phase::Uninitialized {
            return Err(Error::Phase("tree is not calibrated".into()));
        }
        if !self.pending.is_empty() {
            return Err(Error::Phase(format!(
                "{} CD CPD(s) not inserted yet",
                self.pending.len()
            )));
        }
        for &v in q {
            if v.0 >= self.net.len() {
                return Err(Error::Scope(format!("unknown variable {v}")));
            }
        }
        let free: Vec<VarId> = q.iter().copied().filter(|&v| !self.observed(v)).collect();
        let k = self
            .tree
            .smallest_containing(&sorted(&free))
            .ok_or_else(|| Error::OutOfCliqueQuery(self.net.names(q)))?;
        let log_evidence = self.potentials[k].log_mass()?;
        let disc: Vec<VarId> = q.iter().copied().filter(|&v| self.net.is_discrete(v)).collect();
        let cont_free: Vec<VarId> = free.iter().copied().filter(|&v| !self.net.is_discrete(v)).collect();
        let cont: Vec<VarId> = q.iter().copied().filter(|&v| !self.net.is_discrete(v)).collect();
        let f = self.potentials[k]
            .marginalize(&free, true)?
            .with_discrete_order(&disc)?
            .with_continuous_order(&cont_free)?;

        let mut probabilities = Vec::with_capacity(f.len());
        let mut components = Vec::with_capacity(f.len());
        for e in f.entries() {
            let m = e.to_moments()?;
            probabilities.push(if log_evidence.is_finite() && !m.is_zero() {
                (m.log_weight - log_evidence).exp()
            } else {
                0.0
            });
            if m.is_zero() || !log_evidence.is_finite() {
                components.push(None);
                continue;
            }
            components.push(Some(self.embed_observed(&cont, &cont_free, &m)));
        }
        Ok(QueryResult {
            log_evidence,
            cards: disc.iter().map(|&v| self.net.cardinality(v)).collect(),
            discrete: disc,
            continuous: cont,
            probabilities,
            components,
        })
    }

    /// Conditional moments over `cont`, with observed variables pinned at their values.
    fn embed_observed(&self, cont: &[VarId], free: &[VarId], m: &GaussianMoments) -> (DVector<f64>, DMatrix<f64>) {
        let n = cont.len();
        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        let idx: Vec<Option<usize>> = cont.iter().map(|v| free.iter().position(|f| f == v)).collect();
        for (i, v) in cont.iter().enumerate() {
            match idx[i] {
                Some(a) => {
                    mean[i] = m.mean[a];
                    for (j, jdx) in idx.iter().enumerate() {
                        if let Some(b) = jdx {
                            cov[(i, j)] = m.cov[(a, *b)];
                        }
                    }
                }
                None => mean[i] = self.evidence.continuous[v],
            }
        }
        (mean, cov)
    }

    pub fn query_names(&self, names: &[&str]) -> Result<QueryResult> {
        let ids = names.iter().map(|n| self.net.id(n)).collect::<Result<Vec<_>>>()?;
        self.query(&ids)
    }
}

fn sorted(v: &[VarId]) -> Vec<VarId> {
    let mut s = v.to_vec();
    s.sort();
    s
}

/// Normalized distribution over query variables, plus P(e).
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub log_evidence: f64,
    pub discrete: Vec<VarId>,
    pub cards: Vec<usize>,
    pub continuous: Vec<VarId>,
    /// Posterior probability of each discrete assignment, in table order.
    pub probabilities: Vec<f64>,
    /// Conditional mean and covariance of the continuous part, per assignment
    /// (`None` where the assignment has zero probability).
    pub components: Vec<Option<(DVector<f64>, DMatrix<f64>)>>,
}

impl QueryResult {
    pub fn evidence_probability(&self) -> f64 {
        self.log_evidence.exp()
    }

    /// Marginal of one discrete query variable.
    pub fn marginal(&self, v: VarId) -> Option<Vec<f64>> {
        let p = self.discrete.iter().position(|&d| d == v)?;
        let mut out = vec![0.0; self.cards[p]];
        for (i, &prob) in self.probabilities.iter().enumerate() {
            out[crate::assignment::decode(i, &self.cards)[p]] += prob;
        }
        Some(out)
    }

    /// Overall moments of the continuous part, mixing over discrete assignments.
    pub fn moments(&self) -> Option<GaussianMoments> {
        let parts: Vec<GaussianMoments> = self
            .probabilities
            .iter()
            .zip(&self.components)
            .filter_map(|(&p, c)| c.as_ref().map(|(m, s)| GaussianMoments::new(p, m.clone(), s.clone())))
            .collect();
        if self.continuous.is_empty() || parts.is_empty() {
            return None;
        }
        // pinned coordinates have zero variance, so repair_psd inside collapse is not needed
        collapse(&parts).ok().or_else(|| Some(parts[0].clone()))
    }

    pub fn mean(&self) -> Option<DVector<f64>> {
        self.moments().map(|m| m.mean)
    }

    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        self.moments().map(|m| m.cov)
    }
}
