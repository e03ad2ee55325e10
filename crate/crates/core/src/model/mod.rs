//! Augmented CLG networks: variables, CPDs, evidence and validation.

mod builder;
pub mod io;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::assignment;
use crate::canonical::CanonicalForm;
use crate::error::{Error, Result};

pub use builder::NetworkBuilder;

/// Index of a variable in its network's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Discrete { states: Vec<String> },
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

impl Variable {
    pub fn discrete(name: impl Into<String>, states: &[&str]) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Discrete {
                states: states.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            kind: VarKind::Continuous,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, VarKind::Discrete { .. })
    }

    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            VarKind::Discrete { states } => Some(states.len()),
            VarKind::Continuous => None,
        }
    }

    pub fn states(&self) -> &[String] {
        match &self.kind {
            VarKind::Discrete { states } => states,
            VarKind::Continuous => &[],
        }
    }
}

/// Discrete child with discrete parents; one probability row per parent assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct TableCpd {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClgEntry {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub variance: f64,
}

/// `X | a, y ~ N(w_a0 + w_a . y, var_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClgCpd {
    pub child: VarId,
    pub discrete_parents: Vec<VarId>,
    pub continuous_parents: Vec<VarId>,
    pub entries: Vec<ClgEntry>,
}

/// Product of continuous-parent powers; `exponents[i]` applies to the i-th continuous parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
}

impl Monomial {
    pub fn identity(k: usize, var: usize) -> Self {
        let mut exponents = vec![0; k];
        exponents[var] = 1;
        Monomial { exponents }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(y)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRow {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl SoftmaxRow {
    pub fn zero(r: usize) -> Self {
        SoftmaxRow {
            bias: 0.0,
            weights: vec![0.0; r],
        }
    }
}

/// Discrete child of continuous parents:
/// `P(A = i | d, y) ∝ exp(b_d^i + w_d^i . φ(y))` with monomial features `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxCpd {
    pub child: VarId,
    pub discrete_parents: Vec<VarId>,
    pub continuous_parents: Vec<VarId>,
    pub features: Vec<Monomial>,
    /// `entries[d][i]` is the row for child state `i` under discrete-parent assignment `d`.
    pub entries: Vec<Vec<SoftmaxRow>>,
}

impl SoftmaxCpd {
    /// Binary child with `P(state 0 | y) = 1 / (1 + exp(b + w . y))`, no discrete parents.
    pub fn sigmoid(child: VarId, parents: Vec<VarId>, bias: f64, weights: Vec<f64>) -> Self {
        let k = parents.len();
        SoftmaxCpd {
            child,
            features: identity_features(k),
            continuous_parents: parents,
            discrete_parents: vec![],
            entries: vec![vec![SoftmaxRow::zero(k), SoftmaxRow { bias, weights }]],
        }
    }

    /// True when every feature is a single parent to the first power.
    pub fn has_linear_features(&self) -> bool {
        self.features
            .iter()
            .all(|m| m.degree() == 1 && m.exponents.iter().all(|&e| e <= 1))
    }

    pub fn features_at(&self, y: &[f64]) -> Vec<f64> {
        self.features.iter().map(|m| m.eval(y)).collect()
    }

    pub fn logits(&self, d: usize, y: &[f64]) -> Vec<f64> {
        let phi = self.features_at(y);
        self.entries[d]
            .iter()
            .map(|row| row.bias + row.weights.iter().zip(&phi).map(|(w, f)| w * f).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, d: usize, y: &[f64]) -> Result<Vec<f64>> {
        let logits = self.logits(d, y);
        softmax(&logits).ok_or_else(|| {
            Error::Numerical(format!(
                "softmax CPD of {} produced non-finite logits {:?} at {:?}",
                self.child, logits, y
            ))
        })
    }
}

pub fn identity_features(k: usize) -> Vec<Monomial> {
    (0..k).map(|i| Monomial::identity(k, i)).collect()
}

/// Max-subtracted softmax; `None` if any logit is non-finite.
pub fn softmax(logits: &[f64]) -> Option<Vec<f64>> {
    if logits.iter().any(|l| !l.is_finite()) {
        return None;
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Some(exps.into_iter().map(|e| e / z).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cpd {
    Table(TableCpd),
    Clg(ClgCpd),
    Softmax(SoftmaxCpd),
}

impl Cpd {
    pub fn child(&self) -> VarId {
        match self {
            Cpd::Table(c) => c.child,
            Cpd::Clg(c) => c.child,
            Cpd::Softmax(c) => c.child,
        }
    }

    pub fn discrete_parents(&self) -> &[VarId] {
        match self {
            Cpd::Table(c) => &c.parents,
            Cpd::Clg(c) => &c.discrete_parents,
            Cpd::Softmax(c) => &c.discrete_parents,
        }
    }

    pub fn continuous_parents(&self) -> &[VarId] {
        match self {
            Cpd::Table(_) => &[],
            Cpd::Clg(c) => &c.continuous_parents,
            Cpd::Softmax(c) => &c.continuous_parents,
        }
    }

    pub fn parents(&self) -> Vec<VarId> {
        let mut p = self.discrete_parents().to_vec();
        p.extend_from_slice(self.continuous_parents());
        p
    }

    /// Child followed by all parents.
    pub fn family(&self) -> Vec<VarId> {
        let mut f = vec![self.child()];
        f.extend(self.parents());
        f
    }

    pub fn is_cd(&self) -> bool {
        matches!(self, Cpd::Softmax(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Cpd::Table(_) => "table",
            Cpd::Clg(_) => "clg",
            Cpd::Softmax(_) => "softmax",
        }
    }
}

/// A problem found by [`validate_network`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateVariable(String),
    TooFewStates(String),
    UnknownVariable { cpd: usize, id: usize },
    MissingCpd(String),
    DuplicateCpd(String),
    ContinuousChildNeedsClg(String),
    DiscreteChildWithClg(String),
    ContinuousParentsNeedSoftmax(String),
    SoftmaxWithoutContinuousParents(String),
    ParentKind { child: String, parent: String },
    RepeatedParent { child: String, parent: String },
    EntryCount { child: String, expected: usize, found: usize },
    RowLength { child: String, entry: usize, expected: usize, found: usize },
    BadProbabilities { child: String, entry: usize },
    NonPositiveVariance { child: String, entry: usize },
    NonFiniteParameter { child: String, entry: usize },
    FeatureArity { child: String, feature: usize },
    Cycle(Vec<String>),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateVariable(n) => write!(f, "variable '{n}' declared twice"),
            TooFewStates(n) => write!(f, "discrete variable '{n}' needs at least 2 distinct states"),
            UnknownVariable { cpd, id } => write!(f, "cpd {cpd} references unknown variable id {id}"),
            MissingCpd(n) => write!(f, "variable '{n}' has no CPD"),
            DuplicateCpd(n) => write!(f, "variable '{n}' has more than one CPD"),
            ContinuousChildNeedsClg(n) => write!(f, "continuous child needs CLG: '{n}'"),
            DiscreteChildWithClg(n) => write!(f, "discrete child '{n}' cannot have a CLG CPD"),
            ContinuousParentsNeedSoftmax(n) => {
                write!(f, "discrete child '{n}' has continuous parents and needs a softmax CPD")
            }
            SoftmaxWithoutContinuousParents(n) => {
                write!(f, "softmax CPD of '{n}' has no continuous parents; use a table")
            }
            ParentKind { child, parent } => {
                write!(f, "CPD of '{child}' lists '{parent}' under the wrong parent kind")
            }
            RepeatedParent { child, parent } => {
                write!(f, "CPD of '{child}' lists '{parent}' more than once or as its own parent")
            }
            EntryCount { child, expected, found } => write!(
                f,
                "CPD of '{child}' must cover {expected} parent assignments, found {found}"
            ),
            RowLength { child, entry, expected, found } => write!(
                f,
                "CPD of '{child}' entry {entry}: expected length {expected}, found {found}"
            ),
            BadProbabilities { child, entry } => write!(
                f,
                "CPD of '{child}' entry {entry}: probabilities must be nonnegative and sum to 1"
            ),
            NonPositiveVariance { child, entry } => {
                write!(f, "CPD of '{child}' entry {entry}: variance must be positive")
            }
            NonFiniteParameter { child, entry } => {
                write!(f, "CPD of '{child}' entry {entry}: parameters must be finite")
            }
            FeatureArity { child, feature } => write!(
                f,
                "softmax CPD of '{child}' feature {feature}: exponent list must match continuous parents"
            ),
            Cycle(names) => write!(f, "cycle: {}", names.join(" -> ")),
        }
    }
}

/// Variables plus exactly one CPD per variable. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    cpds: Vec<Cpd>,
    cpd_of: Vec<Option<usize>>,
}

impl Network {
    /// Assembles a network without checking it; see [`Network::validated`].
    pub fn new(variables: Vec<Variable>, cpds: Vec<Cpd>) -> Self {
        let mut cpd_of = vec![None; variables.len()];
        for (i, c) in cpds.iter().enumerate() {
            if let Some(slot) = cpd_of.get_mut(c.child().0) {
                slot.get_or_insert(i);
            }
        }
        Network {
            variables,
            cpds,
            cpd_of,
        }
    }

    pub fn validated(variables: Vec<Variable>, cpds: Vec<Cpd>) -> Result<Self> {
        let net = Network::new(variables, cpds);
        match validate_network(&net) {
            Ok(()) => Ok(net),
            Err(v) => {
                if let Some(Violation::Cycle(names)) =
                    v.iter().find(|x| matches!(x, Violation::Cycle(_)))
                {
                    return Err(Error::Cycle(names.join(" -> ")));
                }
                Err(Error::Validation(v))
            }
        }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.variables.len()).map(VarId)
    }

    pub fn cpds(&self) -> &[Cpd] {
        &self.cpds
    }

    pub fn cpd_index(&self, child: VarId) -> Option<usize> {
        self.cpd_of[child.0]
    }

    pub fn cpd(&self, child: VarId) -> &Cpd {
        &self.cpds[self.cpd_of[child.0].expect("validated network has a CPD per variable")]
    }

    pub fn is_discrete(&self, id: VarId) -> bool {
        self.variables[id.0].is_discrete()
    }

    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality().unwrap_or(0)
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn id(&self, name: &str) -> Result<VarId> {
        self.find(name)
            .ok_or_else(|| Error::Scope(format!("unknown variable '{name}'")))
    }

    pub fn state_index(&self, id: VarId, state: &str) -> Result<usize> {
        self.variables[id.0]
            .states()
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| {
                Error::Scope(format!("variable '{}' has no state '{state}'", self.name(id)))
            })
    }

    pub fn names(&self, ids: &[VarId]) -> String {
        ids.iter().map(|&v| self.name(v)).collect::<Vec<_>>().join(", ")
    }

    /// Variables in an order where parents precede children.
    pub fn topological_order(&self) -> Vec<VarId> {
        topo_sort(self).unwrap_or_else(|_| self.ids().collect())
    }

    /// Indices of CD (softmax) CPDs in declaration order.
    pub fn cd_cpds(&self) -> Vec<usize> {
        (0..self.cpds.len()).filter(|&i| self.cpds[i].is_cd()).collect()
    }

    /// Row index of a CPD's discrete-parent assignment under a full or partial assignment map.
    pub fn parent_index(&self, parents: &[VarId], state_of: impl Fn(VarId) -> usize) -> usize {
        let cards: Vec<usize> = parents.iter().map(|&p| self.cardinality(p)).collect();
        let states: Vec<usize> = parents.iter().map(|&p| state_of(p)).collect();
        assignment::encode(&states, &cards)
    }
}

fn topo_sort(net: &Network) -> std::result::Result<Vec<VarId>, Vec<String>> {
    let n = net.variables.len();
    let mut indeg = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![vec![]; n];
    for c in &net.cpds {
        let child = c.child().0;
        if child >= n {
            continue;
        }
        for p in c.parents() {
            if p.0 < n && p.0 != child {
                indeg[child] += 1;
                children[p.0].push(child);
            }
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(VarId(v));
        for &c in &children[v] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // walk parent links among the remaining nodes until one repeats
    let remaining: HashSet<usize> = (0..n).filter(|&i| indeg[i] > 0).collect();
    let parent_in_cycle = |v: usize| -> Option<usize> {
        net.cpd_of
            .get(v)
            .copied()
            .flatten()
            .and_then(|ci| net.cpds[ci].parents().into_iter().map(|p| p.0).find(|p| remaining.contains(p)))
    };
    let start = *remaining.iter().min().unwrap();
    let mut path = vec![start];
    let mut cur = start;
    while let Some(p) = parent_in_cycle(cur) {
        if let Some(pos) = path.iter().position(|&x| x == p) {
            let mut cyc: Vec<String> = path[pos..]
                .iter()
                .rev()
                .map(|&i| net.variables[i].name.clone())
                .collect();
            cyc.push(cyc[0].clone());
            return Err(cyc);
        }
        path.push(p);
        cur = p;
    }
    Err(remaining.iter().map(|&i| net.variables[i].name.clone()).collect())
}

/// Checks every augmented-CLG invariant and returns all violations found.
pub fn validate_network(net: &Network) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let n = net.variables.len();
    let mut seen = HashSet::new();
    for v in &net.variables {
        if !seen.insert(v.name.as_str()) {
            out.push(Violation::DuplicateVariable(v.name.clone()));
        }
        if let VarKind::Discrete { states } = &v.kind {
            let distinct: HashSet<&String> = states.iter().collect();
            if states.len() < 2 || distinct.len() != states.len() {
                out.push(Violation::TooFewStates(v.name.clone()));
            }
        }
    }

    let mut count = vec![0usize; n];
    for (ci, cpd) in net.cpds.iter().enumerate() {
        let bad: Vec<usize> = cpd.family().iter().map(|v| v.0).filter(|&i| i >= n).collect();
        if !bad.is_empty() {
            out.extend(bad.into_iter().map(|id| Violation::UnknownVariable { cpd: ci, id }));
            continue;
        }
        count[cpd.child().0] += 1;
        check_cpd(net, cpd, &mut out);
    }
    for (i, v) in net.variables.iter().enumerate() {
        match count[i] {
            0 => out.push(Violation::MissingCpd(v.name.clone())),
            1 => {}
            _ => out.push(Violation::DuplicateCpd(v.name.clone())),
        }
    }
    if let Err(cycle) = topo_sort(net) {
        out.push(Violation::Cycle(cycle));
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn check_cpd(net: &Network, cpd: &Cpd, out: &mut Vec<Violation>) {
    let child = cpd.child();
    let cname = net.name(child).to_string();
    let child_discrete = net.is_discrete(child);

    let mut seen = HashSet::from([child]);
    for p in cpd.parents() {
        if !seen.insert(p) {
            out.push(Violation::RepeatedParent {
                child: cname.clone(),
                parent: net.name(p).to_string(),
            });
        }
    }
    for &p in cpd.discrete_parents() {
        if !net.is_discrete(p) {
            out.push(Violation::ParentKind {
                child: cname.clone(),
                parent: net.name(p).to_string(),
            });
        }
    }
    for &p in cpd.continuous_parents() {
        if net.is_discrete(p) {
            out.push(Violation::ParentKind {
                child: cname.clone(),
                parent: net.name(p).to_string(),
            });
        }
    }
    let rows_expected: usize = cpd
        .discrete_parents()
        .iter()
        .map(|&p| net.cardinality(p).max(1))
        .product();
    let entry_count = |found: usize, out: &mut Vec<Violation>| {
        if found != rows_expected {
            out.push(Violation::EntryCount {
                child: cname.clone(),
                expected: rows_expected,
                found,
            });
        }
    };

    match cpd {
        Cpd::Table(t) => {
            if !child_discrete {
                out.push(Violation::ContinuousChildNeedsClg(cname.clone()));
                return;
            }
            entry_count(t.rows.len(), out);
            let m = net.cardinality(child);
            for (i, row) in t.rows.iter().enumerate() {
                if row.len() != m {
                    out.push(Violation::RowLength {
                        child: cname.clone(),
                        entry: i,
                        expected: m,
                        found: row.len(),
                    });
                } else if row.iter().any(|&p| !(p >= 0.0 && p.is_finite()))
                    || (row.iter().sum::<f64>() - 1.0).abs() > 1e-12
                {
                    out.push(Violation::BadProbabilities {
                        child: cname.clone(),
                        entry: i,
                    });
                }
            }
        }
        Cpd::Clg(c) => {
            if child_discrete {
                out.push(Violation::DiscreteChildWithClg(cname.clone()));
                return;
            }
            entry_count(c.entries.len(), out);
            let k = c.continuous_parents.len();
            for (i, e) in c.entries.iter().enumerate() {
                if e.weights.len() != k {
                    out.push(Violation::RowLength {
                        child: cname.clone(),
                        entry: i,
                        expected: k,
                        found: e.weights.len(),
                    });
                }
                if !e.intercept.is_finite() || e.weights.iter().any(|w| !w.is_finite()) {
                    out.push(Violation::NonFiniteParameter {
                        child: cname.clone(),
                        entry: i,
                    });
                }
                if !(e.variance > 0.0 && e.variance.is_finite()) {
                    out.push(Violation::NonPositiveVariance {
                        child: cname.clone(),
                        entry: i,
                    });
                }
            }
        }
        Cpd::Softmax(s) => {
            if !child_discrete {
                out.push(Violation::ContinuousChildNeedsClg(cname.clone()));
                return;
            }
            if s.continuous_parents.is_empty() {
                out.push(Violation::SoftmaxWithoutContinuousParents(cname.clone()));
            }
            let k = s.continuous_parents.len();
            for (fi, f) in s.features.iter().enumerate() {
                if f.exponents.len() != k {
                    out.push(Violation::FeatureArity {
                        child: cname.clone(),
                        feature: fi,
                    });
                }
            }
            entry_count(s.entries.len(), out);
            let m = net.cardinality(child);
            let r = s.features.len();
            for (i, rows) in s.entries.iter().enumerate() {
                if rows.len() != m {
                    out.push(Violation::RowLength {
                        child: cname.clone(),
                        entry: i,
                        expected: m,
                        found: rows.len(),
                    });
                }
                for row in rows {
                    if row.weights.len() != r {
                        out.push(Violation::RowLength {
                            child: cname.clone(),
                            entry: i,
                            expected: r,
                            found: row.weights.len(),
                        });
                    }
                    if !row.bias.is_finite() || row.weights.iter().any(|w| !w.is_finite()) {
                        out.push(Violation::NonFiniteParameter {
                            child: cname.clone(),
                            entry: i,
                        });
                    }
                }
            }
        }
    }
    if child_discrete && !cpd.is_cd() && !cpd.continuous_parents().is_empty() {
        out.push(Violation::ContinuousParentsNeedSoftmax(cname));
    }
}

/// Evaluates a softmax CPD at discrete-parent row `d` and continuous parents `y`.
pub fn eval_cd(cpd: &SoftmaxCpd, d: usize, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != cpd.continuous_parents.len() {
        return Err(Error::Scope(format!(
            "expected {} continuous parent values, got {}",
            cpd.continuous_parents.len(),
            y.len()
        )));
    }
    if d >= cpd.entries.len() {
        return Err(Error::Scope(format!("discrete-parent row {d} out of range")));
    }
    cpd.probabilities(d, y)
}

/// Canonical form of `p(x | a, y)` over `(child, continuous parents)`.
pub fn clg_to_canonical(cpd: &ClgCpd, a: usize) -> CanonicalForm {
    let e = &cpd.entries[a];
    let n = 1 + cpd.continuous_parents.len();
    let mut c = DVector::zeros(n);
    c[0] = 1.0;
    for (i, w) in e.weights.iter().enumerate() {
        c[i + 1] = -w;
    }
    let prec = 1.0 / e.variance;
    let k: DMatrix<f64> = &c * c.transpose() * prec;
    let h = &c * (e.intercept * prec);
    let g = -0.5 * e.intercept * e.intercept * prec
        - 0.5 * (2.0 * std::f64::consts::PI * e.variance).ln();
    let mut scope = vec![cpd.child];
    scope.extend_from_slice(&cpd.continuous_parents);
    CanonicalForm::new(scope, g, h, k)
}

/// Observed values, keyed by variable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    pub discrete: BTreeMap<VarId, usize>,
    pub continuous: BTreeMap<VarId, f64>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.discrete.is_empty() && self.continuous.is_empty()
    }

    pub fn observe_discrete(&mut self, var: VarId, state: usize) -> &mut Self {
        self.discrete.insert(var, state);
        self
    }

    pub fn observe_continuous(&mut self, var: VarId, value: f64) -> &mut Self {
        self.continuous.insert(var, value);
        self
    }

    /// Parses `Name=State` (discrete) or `Name=1.25` (continuous) items.
    pub fn parse(net: &Network, items: &[String]) -> Result<Self> {
        let mut e = Evidence::new();
        for item in items {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("evidence '{item}' must look like Var=value")))?;
            let id = net.id(name.trim())?;
            let value = value.trim();
            if e.discrete.contains_key(&id) || e.continuous.contains_key(&id) {
                return Err(Error::Config(format!("'{name}' observed twice")));
            }
            if net.is_discrete(id) {
                e.discrete.insert(id, net.state_index(id, value)?);
            } else {
                let x: f64 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("'{value}' is not a number")))?;
                e.continuous.insert(id, x);
            }
        }
        Ok(e)
    }

    /// Checks kinds and ranges against a network.
    pub fn check(&self, net: &Network) -> Result<()> {
        for (&v, &s) in &self.discrete {
            if v.0 >= net.len() || !net.is_discrete(v) {
                return Err(Error::Scope(format!("{v} is not a discrete variable")));
            }
            if s >= net.cardinality(v) {
                return Err(Error::Scope(format!("state {s} out of range for '{}'", net.name(v))));
            }
        }
        for (&v, x) in &self.continuous {
            if v.0 >= net.len() || net.is_discrete(v) {
                return Err(Error::Scope(format!("{v} is not a continuous variable")));
            }
            if !x.is_finite() {
                return Err(Error::Scope(format!("non-finite observation for '{}'", net.name(v))));
            }
        }
        Ok(())
    }
}
