//! Insertion of CD (softmax) CPDs into calibrated designated cliques.
//!
//! For every discrete assignment of the designated clique, the Gaussian prior is
//! multiplied by the CD CPDs' state probabilities and moment matched: the mass
//! ratio and the first two moments come from quadrature (or Monte Carlo) in a
//! low-dimensional space, either the linear logit features or the continuous
//! parents, and are then propagated to the whole clique scope linearly.
//! The ratio of new to old clique potential is multiplied into the clique's
//! initial potential and the tree is recalibrated.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::canonical::{repair_psd, symmetrize, CanonicalForm, GaussianMoments, HybridFactor, LOG_ZERO};
use crate::error::{Error, Result};
use crate::model::{eval_cd, softmax, Cpd, Monomial, SoftmaxCpd, SoftmaxRow, VarId};
use crate::propagation::{CalibratedTree, Phase};
use crate::quadrature::{grid_for, Backend};

pub const DEFAULT_DIM_CAP: usize = 6;

/// Rows whose residual after projection is below this (relative) are dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InsertMode {
    /// All CD CPDs of a component integrate as one product.
    #[default]
    Joint,
    /// One CPD at a time, in declaration order, moment matching in between.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InsertConfig {
    pub mode: InsertMode,
    pub backend: Backend,
    /// Integrate in the space of linear logit features when possible.
    pub feature_reduction: bool,
    /// Largest quadrature dimension allowed.
    pub dim_cap: usize,
}

impl Default for InsertConfig {
    fn default() -> Self {
        InsertConfig {
            mode: InsertMode::Joint,
            backend: Backend::default(),
            feature_reduction: true,
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum LogitModel {
    /// `logit_i = offsets[i] + weights[i] . x`
    Linear {
        offsets: Vec<f64>,
        weights: Vec<DVector<f64>>,
    },
    General {
        rows: Vec<SoftmaxRow>,
        features: Vec<Monomial>,
        slots: Vec<Slot>,
    },
}

/// A CD CPD with its discrete-parent row chosen and observed continuous parents
/// substituted, expressed over a clique's free continuous scope.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCd {
    pub child: VarId,
    pub states: usize,
    model: LogitModel,
}

impl BoundCd {
    pub fn bind(cpd: &SoftmaxCpd, row: usize, scope: &[VarId], observed: &BTreeMap<VarId, f64>) -> Result<Self> {
        let slots = cpd
            .continuous_parents
            .iter()
            .map(|p| match observed.get(p) {
                Some(&x) => Ok(Slot::Fixed(x)),
                None => scope
                    .iter()
                    .position(|s| s == p)
                    .map(Slot::Free)
                    .ok_or_else(|| Error::Scope(format!("CD parent {p} is not in the clique scope"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = cpd.entries[row].clone();
        let linear = cpd.features.iter().all(|f| {
            f.exponents
                .iter()
                .zip(&slots)
                .filter(|(_, s)| matches!(s, Slot::Free(_)))
                .map(|(&e, _)| e)
                .sum::<u32>()
                <= 1
        });
        let model = if linear {
            let n = scope.len();
            let mut offsets = Vec::with_capacity(rows.len());
            let mut weights = Vec::with_capacity(rows.len());
            for r in &rows {
                let mut off = r.bias;
                let mut w = DVector::zeros(n);
                for (f, &coef) in cpd.features.iter().zip(&r.weights) {
                    let mut constant = 1.0;
                    let mut free = None;
                    for (&e, s) in f.exponents.iter().zip(&slots) {
                        match s {
                            Slot::Fixed(x) => constant *= x.powi(e as i32),
                            Slot::Free(i) if e == 1 => free = Some(*i),
                            Slot::Free(_) => {}
                        }
                    }
                    match free {
                        Some(i) => w[i] += coef * constant,
                        None => off += coef * constant,
                    }
                }
                offsets.push(off);
                weights.push(w);
            }
            LogitModel::Linear { offsets, weights }
        } else {
            LogitModel::General {
                rows,
                features: cpd.features.clone(),
                slots,
            }
        };
        Ok(BoundCd {
            child: cpd.child,
            states: cpd.entries[row].len(),
            model,
        })
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.model, LogitModel::Linear { .. })
    }

    /// Scope positions the CPD actually depends on.
    pub fn free_parents(&self) -> Vec<usize> {
        match &self.model {
            LogitModel::Linear { weights, .. } => {
                let n = weights.first().map_or(0, |w| w.len());
                (0..n).filter(|&i| weights.iter().any(|w| w[i] != 0.0)).collect()
            }
            LogitModel::General { slots, .. } => slots
                .iter()
                .filter_map(|s| match s {
                    Slot::Free(i) => Some(*i),
                    Slot::Fixed(_) => None,
                })
                .collect(),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        match &self.model {
            LogitModel::Linear { offsets, weights } => offsets
                .iter()
                .zip(weights)
                .map(|(o, w)| o + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect(),
            LogitModel::General { rows, features, slots } => {
                let y: Vec<f64> = slots
                    .iter()
                    .map(|s| match s {
                        Slot::Free(i) => x[*i],
                        Slot::Fixed(v) => *v,
                    })
                    .collect();
                let phi: Vec<f64> = features.iter().map(|f| f.eval(&y)).collect();
                rows.iter()
                    .map(|r| r.bias + r.weights.iter().zip(&phi).map(|(w, f)| w * f).sum::<f64>())
                    .collect()
            }
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let l = self.logits(x);
        softmax(&l).ok_or_else(|| Error::Numerical(format!("non-finite logits {l:?} at {x:?}")))
    }

    /// Largest standard deviation of a logit difference under covariance `cov`.
    pub fn sharpness(&self, cov: &DMatrix<f64>) -> Option<f64> {
        let LogitModel::Linear { weights, .. } = &self.model else {
            return None;
        };
        weights[1..]
            .iter()
            .map(|w| {
                let d = w - &weights[0];
                (d.transpose() * cov * &d)[0].max(0.0).sqrt()
            })
            .reduce(f64::max)
    }
}

/// Linear map `z = W x` (plus offsets) through which every bound CPD's state
/// probabilities depend on the clique's continuous variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureProjection {
    pub w: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// `rows[j][i] = (offset, coefficients)`: logit of state `i` of CPD `j`
    /// relative to its state 0, as a function of `z`.
    pub rows: Vec<Vec<(f64, DVector<f64>)>>,
}

impl FeatureProjection {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    fn probability(&self, j: usize, state: usize, z: &[f64]) -> Result<f64> {
        let mut logits = vec![0.0];
        for (off, c) in &self.rows[j] {
            logits.push(off + c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>());
        }
        let p = softmax(&logits).ok_or_else(|| Error::Numerical(format!("non-finite logits {logits:?} at z = {z:?}")))?;
        Ok(p[state])
    }
}

/// Stacks the reduced logit rows of linear CPDs and keeps an independent subset.
/// Returns `None` if any CPD is nonlinear in the free variables.
pub fn build_feature_projection(cds: &[BoundCd], dim: usize) -> Option<FeatureProjection> {
    let mut diffs: Vec<Vec<(f64, DVector<f64>)>> = Vec::with_capacity(cds.len());
    for cd in cds {
        let LogitModel::Linear { offsets, weights } = &cd.model else {
            return None;
        };
        diffs.push(
            (1..offsets.len())
                .map(|i| (offsets[i] - offsets[0], &weights[i] - &weights[0]))
                .collect(),
        );
    }
    // greedy Gram-Schmidt over the rows
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut ortho: Vec<DVector<f64>> = Vec::new();
    for (_, row) in diffs.iter().flatten() {
        let mut res = row.clone();
        for q in &ortho {
            res -= q * q.dot(&res);
        }
        let norm = res.norm();
        if norm > RANK_TOLERANCE * row.norm().max(1.0) {
            basis.push(row.clone());
            ortho.push(res / norm);
        }
    }
    let k = basis.len();
    let mut w = DMatrix::zeros(k, dim);
    for (i, b) in basis.iter().enumerate() {
        w.set_row(i, &b.transpose());
    }
    let gram = &w * w.transpose();
    let chol = if k > 0 { gram.cholesky() } else { None };
    let rows = diffs
        .into_iter()
        .map(|list| {
            list.into_iter()
                .map(|(off, row)| {
                    let coeffs = match basis.iter().position(|b| *b == row) {
                        Some(i) => {
                            let mut e = DVector::zeros(k);
                            e[i] = 1.0;
                            e
                        }
                        None => match &chol {
                            Some(c) => c.solve(&(&w * &row)),
                            None => DVector::zeros(k),
                        },
                    };
                    (off, coeffs)
                })
                .collect()
        })
        .collect();
    Some(FeatureProjection {
        w,
        offset: DVector::zeros(k),
        rows,
    })
}

/// Where the integral is computed.
#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationSpace {
    Reduced(FeatureProjection),
    /// Coordinates of the clique scope the CPDs depend on.
    Parents(Vec<usize>),
}

impl IntegrationSpace {
    pub fn choose(cds: &[BoundCd], dim: usize, feature_reduction: bool) -> Self {
        if feature_reduction {
            if let Some(p) = build_feature_projection(cds, dim) {
                return IntegrationSpace::Reduced(p);
            }
        }
        let mut sel: Vec<usize> = cds.iter().flat_map(|c| c.free_parents()).collect();
        sel.sort();
        sel.dedup();
        IntegrationSpace::Parents(sel)
    }

    pub fn matrix(&self, dim: usize) -> DMatrix<f64> {
        match self {
            IntegrationSpace::Reduced(p) => p.w.clone(),
            IntegrationSpace::Parents(sel) => {
                let mut m = DMatrix::zeros(sel.len(), dim);
                for (r, &c) in sel.iter().enumerate() {
                    m[(r, c)] = 1.0;
                }
                m
            }
        }
    }

    fn integrand(&self, cds: &[BoundCd], states: &[usize], u: &[f64], dim: usize) -> Result<f64> {
        match self {
            IntegrationSpace::Reduced(p) => {
                let mut acc = 1.0;
                for (j, &s) in states.iter().enumerate() {
                    acc *= p.probability(j, s, u)?;
                }
                Ok(acc)
            }
            IntegrationSpace::Parents(sel) => {
                let mut x = vec![0.0; dim];
                for (k, &c) in sel.iter().enumerate() {
                    x[c] = u[k];
                }
                let mut acc = 1.0;
                for (cd, &s) in cds.iter().zip(states) {
                    acc *= cd.probabilities(&x)?[s];
                }
                Ok(acc)
            }
        }
    }
}

/// Mass ratio and posterior moments in the integration space.
#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub r: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub evaluations: usize,
    pub dim: usize,
}

/// `r = E[prod]`, `mean = E[u prod] / r`, `cov = E[(u - mean)(u - mean)' prod] / r`
/// under the prior pushed into `space`, with one shared node set.
pub fn integrate_cd(
    prior: &GaussianMoments,
    cds: &[BoundCd],
    states: &[usize],
    space: &IntegrationSpace,
    backend: Backend,
    cap: usize,
) -> Result<Integration> {
    let dim = prior.dim();
    let w = space.matrix(dim);
    let mu = &w * &prior.mean;
    let sigma = symmetrize(&(&w * &prior.cov * w.transpose()));
    let grid = grid_for(&mu, &sigma, backend, cap)?;
    let values = grid
        .points
        .iter()
        .map(|u| space.integrand(cds, states, u, dim))
        .collect::<Result<Vec<f64>>>()?;
    let k = mu.len();
    let r: f64 = grid.weights.iter().zip(&values).map(|(w, v)| w * v).sum();
    let mut mean = DVector::zeros(k);
    let mut cov = DMatrix::zeros(k, k);
    if r > 0.0 {
        for ((u, w), v) in grid.points.iter().zip(&grid.weights).zip(&values) {
            mean += DVector::from_column_slice(u) * (w * v / r);
        }
        for ((u, w), v) in grid.points.iter().zip(&grid.weights).zip(&values) {
            let d = DVector::from_column_slice(u) - &mean;
            cov += &d * d.transpose() * (w * v / r);
        }
    }
    Ok(Integration {
        r,
        mean,
        cov: symmetrize(&cov),
        evaluations: grid.len(),
        dim: grid.effective_dim,
    })
}

/// Propagates posterior moments of `u = W x` back to the full scope through the
/// prior's linear-Gaussian relation between `x` and `u`.
pub fn recover_full_moments(
    prior: &GaussianMoments,
    w: &DMatrix<f64>,
    mean_u: &DVector<f64>,
    cov_u: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if w.nrows() == 0 {
        return Ok((prior.mean.clone(), prior.cov.clone()));
    }
    let s_xu = &prior.cov * w.transpose();
    let s_uu = symmetrize(&(w * &s_xu));
    let scale = s_uu.amax().max(f64::MIN_POSITIVE);
    let pinv = s_uu
        .pseudo_inverse(1e-12 * scale)
        .map_err(|e| Error::Numerical(format!("pseudo-inverse failed: {e}")))?;
    let g = &s_xu * pinv;
    let mean = &prior.mean + &g * (mean_u - w * &prior.mean);
    let cov = &prior.cov - &g * s_xu.transpose() + &g * cov_u * g.transpose();
    Ok((mean, repair_psd(&cov)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryRecord {
    /// Insertion step within the clique (always 0 in joint mode).
    pub step: usize,
    /// Discrete assignment of the designated clique.
    pub states: Vec<usize>,
    pub prior_log_weight: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliqueReport {
    pub clique: usize,
    pub discrete: Vec<VarId>,
    /// CD CPD children, in insertion order.
    pub inserted: Vec<String>,
    /// CD CPDs with all continuous parents observed, entered as tables.
    pub exact: Vec<String>,
    pub max_dim: usize,
    pub evaluations: usize,
    pub dropped: usize,
    /// Largest logit standard deviation seen per linear CPD.
    pub sharpness: Vec<(String, f64)>,
    pub entries: Vec<EntryRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InsertionReport {
    pub mode: InsertMode,
    pub backend: Backend,
    pub cliques: Vec<CliqueReport>,
    /// ln P(e) before insertion, with the pending CD children summed out.
    pub log_evidence_before: f64,
    pub log_evidence_after: f64,
}

impl InsertionReport {
    pub fn max_dim(&self) -> usize {
        self.cliques.iter().map(|c| c.max_dim).max().unwrap_or(0)
    }

    pub fn evaluations(&self) -> usize {
        self.cliques.iter().map(|c| c.evaluations).sum()
    }
}

fn fmt_names(ct: &CalibratedTree, cpds: &[usize]) -> Vec<String> {
    cpds.iter().map(|&i| ct.net().name(ct.net().cpds()[i].child()).to_string()).collect()
}

/// Inserts every pending CD CPD and recalibrates the tree.
pub fn insert_cd_cpds(ct: &mut CalibratedTree, cfg: &InsertConfig) -> Result<InsertionReport> {
    match ct.phase() {
        Phase::Uninitialized => return Err(Error::Phase("calibrate the tree before inserting CD CPDs".into())),
        Phase::CdCalibrated => return Err(Error::Phase("CD CPDs were already inserted".into())),
        _ => {}
    }
    // pending CD children carry vacuous factors, so the root mass counts each of
    // their unobserved states once; divide that back out
    let vacuous: f64 = ct
        .pending()
        .iter()
        .map(|&i| ct.net().cpds()[i].child())
        .filter(|v| !ct.evidence().discrete.contains_key(v))
        .map(|v| (ct.net().cardinality(v) as f64).ln())
        .sum();
    let log_evidence_before = ct.log_evidence()? - vacuous;
    let mut factors = Vec::new();
    let mut reports = Vec::new();
    let components = ct.tree().components.clone();
    for comp in components.iter().filter(|c| !c.cd_cpds.is_empty()) {
        let pending: Vec<usize> = comp.cd_cpds.iter().copied().filter(|i| ct.pending().contains(i)).collect();
        if pending.is_empty() {
            continue;
        }
        let k = comp.designated.ok_or_else(|| Error::Scope("component has no designated clique".into()))?;
        let (phi, report) = insert_into_clique(ct, k, &pending, cfg)?;
        factors.push((k, phi));
        reports.push(report);
    }
    ct.finish_cd_insertion(factors)?;
    Ok(InsertionReport {
        mode: cfg.mode,
        backend: cfg.backend,
        cliques: reports,
        log_evidence_before,
        log_evidence_after: ct.log_evidence()?,
    })
}

fn insert_into_clique(
    ct: &CalibratedTree,
    k: usize,
    cpds: &[usize],
    cfg: &InsertConfig,
) -> Result<(HybridFactor, CliqueReport)> {
    let net = ct.net();
    let observed = &ct.evidence().continuous;
    let m = ct.potential(k).clone();
    let scope = m.continuous().to_vec();
    let mut cur = m.clone();

    let (exact, free): (Vec<usize>, Vec<usize>) = cpds.iter().partition(|&&i| {
        net.cpds()[i].continuous_parents().iter().all(|p| observed.contains_key(p))
    });
    for &i in &exact {
        cur = cur.multiply(&observed_table(ct, i)?);
    }

    // joint mode sorts by child so the result does not depend on listing order
    let groups: Vec<Vec<usize>> = match cfg.mode {
        InsertMode::Joint => {
            let mut g = free.clone();
            g.sort_by_key(|&i| net.cpds()[i].child());
            if g.is_empty() {
                vec![]
            } else {
                vec![g]
            }
        }
        InsertMode::Sequential => free.iter().map(|&i| vec![i]).collect(),
    };

    let mut report = CliqueReport {
        clique: k,
        discrete: m.discrete().to_vec(),
        inserted: groups.iter().flat_map(|g| fmt_names(ct, g)).collect(),
        exact: fmt_names(ct, &exact),
        max_dim: 0,
        evaluations: 0,
        dropped: 0,
        sharpness: vec![],
        entries: vec![],
    };
    let mut sharp: BTreeMap<VarId, f64> = BTreeMap::new();

    for (step, group) in groups.iter().enumerate() {
        let softmaxes: Vec<&SoftmaxCpd> = group
            .iter()
            .map(|&i| match &net.cpds()[i] {
                Cpd::Softmax(s) => s,
                _ => unreachable!("only softmax CPDs are CD"),
            })
            .collect();
        let disc = cur.discrete().to_vec();
        let cards = cur.cards().to_vec();
        let outcomes: Vec<Result<EntryOutcome>> = (0..cur.len())
            .into_par_iter()
            .map(|idx| {
                let states = cur.states(idx);
                let form = &cur.entries()[idx];
                if form.is_zero() {
                    return Ok(EntryOutcome::zero(&scope, states));
                }
                let prior = form.to_moments()?;
                let state_of = |v: VarId| states[disc.iter().position(|&d| d == v).expect("family in clique")];
                let bound = softmaxes
                    .iter()
                    .map(|s| BoundCd::bind(s, net.parent_index(&s.discrete_parents, state_of), &scope, observed))
                    .collect::<Result<Vec<_>>>()?;
                let child_states: Vec<usize> = softmaxes.iter().map(|s| state_of(s.child)).collect();
                let space = IntegrationSpace::choose(&bound, scope.len(), cfg.feature_reduction);
                let integ = integrate_cd(&prior, &bound, &child_states, &space, cfg.backend, cfg.dim_cap)?;
                let sharpness: Vec<(VarId, f64)> = bound
                    .iter()
                    .filter_map(|b| b.sharpness(&prior.cov).map(|s| (b.child, s)))
                    .collect();
                let log_weight = prior.log_weight + integ.r.ln();
                let record = EntryRecord {
                    step,
                    states: states.clone(),
                    prior_log_weight: prior.log_weight,
                    r: integ.r,
                };
                if !(integ.r > 0.0) || log_weight <= LOG_ZERO {
                    let mut z = EntryOutcome::zero(&scope, states);
                    z.record = Some(record);
                    z.dropped = true;
                    z.evaluations = integ.evaluations;
                    return Ok(z);
                }
                let w = space.matrix(scope.len());
                let (mean, cov) = recover_full_moments(&prior, &w, &integ.mean, &integ.cov)?;
                let form = CanonicalForm::from_moments(scope.clone(), &GaussianMoments::with_log_weight(log_weight, mean, cov))?;
                Ok(EntryOutcome {
                    form,
                    record: Some(record),
                    dropped: false,
                    evaluations: integ.evaluations,
                    dim: integ.dim,
                    sharpness,
                })
            })
            .collect();
        let mut entries = Vec::with_capacity(outcomes.len());
        for o in outcomes {
            let o = o?;
            report.evaluations += o.evaluations;
            report.max_dim = report.max_dim.max(o.dim);
            report.dropped += o.dropped as usize;
            report.entries.extend(o.record);
            for (v, s) in o.sharpness {
                let e = sharp.entry(v).or_insert(0.0);
                *e = e.max(s);
            }
            entries.push(o.form);
        }
        cur = HybridFactor::new(disc, cards, scope.clone(), entries);
    }
    report.sharpness = sharp.into_iter().map(|(v, s)| (net.name(v).to_string(), s)).collect();
    Ok((cur.divide(&m), report))
}

struct EntryOutcome {
    form: CanonicalForm,
    record: Option<EntryRecord>,
    dropped: bool,
    evaluations: usize,
    dim: usize,
    sharpness: Vec<(VarId, f64)>,
}

impl EntryOutcome {
    fn zero(scope: &[VarId], _states: Vec<usize>) -> Self {
        EntryOutcome {
            form: CanonicalForm::zero(scope.to_vec()),
            record: None,
            dropped: false,
            evaluations: 0,
            dim: 0,
            sharpness: vec![],
        }
    }
}

/// Discrete factor of a CD CPD whose continuous parents are all observed.
fn observed_table(ct: &CalibratedTree, i: usize) -> Result<HybridFactor> {
    let net = ct.net();
    let Cpd::Softmax(s) = &net.cpds()[i] else {
        unreachable!("only softmax CPDs are CD")
    };
    let y: Vec<f64> = s.continuous_parents.iter().map(|p| ct.evidence().continuous[p]).collect();
    let mut disc = s.discrete_parents.clone();
    disc.push(s.child);
    let cards: Vec<usize> = disc.iter().map(|&v| net.cardinality(v)).collect();
    let mut values = Vec::new();
    for d in 0..s.entries.len() {
        values.extend(eval_cd(s, d, &y)?);
    }
    Ok(HybridFactor::from_table(disc, cards, &values))
}
