use super::{collapse, CanonicalForm, GaussianMoments, LOG_ZERO};
use crate::assignment::{self, decode, encode, table_size};
use crate::error::{Error, Result};
use crate::model::{clg_to_canonical, Cpd, Network, VarId};

/// Dense table of canonical forms indexed by discrete assignment; every entry is over
/// the same continuous scope and carries its own log weight in `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridFactor {
    discrete: Vec<VarId>,
    cards: Vec<usize>,
    continuous: Vec<VarId>,
    entries: Vec<CanonicalForm>,
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.filter(|x| *x > f64::NEG_INFINITY).collect();
    if v.is_empty() {
        return f64::NEG_INFINITY;
    }
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn same_shape(a: &CanonicalForm, b: &CanonicalForm) -> bool {
    let tol = 1e-12;
    let scale = 1.0 + a.k().amax().max(a.h().amax());
    (a.h() - b.h()).amax() <= tol * scale && (a.k() - b.k()).amax() <= tol * scale
}

impl HybridFactor {
    pub fn new(
        discrete: Vec<VarId>,
        cards: Vec<usize>,
        continuous: Vec<VarId>,
        entries: Vec<CanonicalForm>,
    ) -> Self {
        assert_eq!(discrete.len(), cards.len());
        assert_eq!(entries.len(), table_size(&cards), "one entry per discrete assignment");
        debug_assert!(entries.iter().all(|e| e.scope() == continuous.as_slice()));
        HybridFactor {
            discrete,
            cards,
            continuous,
            entries,
        }
    }

    pub fn vacuous(discrete: Vec<VarId>, cards: Vec<usize>, continuous: Vec<VarId>) -> Self {
        let n = table_size(&cards);
        let entries = vec![CanonicalForm::vacuous(continuous.clone()); n];
        Self::new(discrete, cards, continuous, entries)
    }

    /// Purely discrete factor from linear-scale values in table order.
    pub fn from_table(discrete: Vec<VarId>, cards: Vec<usize>, values: &[f64]) -> Self {
        let entries = values
            .iter()
            .map(|&p| {
                if p > 0.0 {
                    CanonicalForm::constant(vec![], p.ln())
                } else {
                    CanonicalForm::zero(vec![])
                }
            })
            .collect();
        Self::new(discrete, cards, vec![], entries)
    }

    /// Factor for a table or CLG CPD. Softmax CPDs have no canonical-form representation.
    pub fn from_cpd(net: &Network, cpd: &Cpd) -> Result<Self> {
        match cpd {
            Cpd::Table(t) => {
                let mut disc = t.parents.clone();
                disc.push(t.child);
                let cards: Vec<usize> = disc.iter().map(|&v| net.cardinality(v)).collect();
                let values: Vec<f64> = t.rows.iter().flatten().copied().collect();
                Ok(Self::from_table(disc, cards, &values))
            }
            Cpd::Clg(c) => {
                let cards: Vec<usize> = c.discrete_parents.iter().map(|&v| net.cardinality(v)).collect();
                let entries: Vec<CanonicalForm> =
                    (0..table_size(&cards)).map(|a| clg_to_canonical(c, a)).collect();
                let cont = entries[0].scope().to_vec();
                Ok(Self::new(c.discrete_parents.clone(), cards, cont, entries))
            }
            Cpd::Softmax(s) => Err(Error::Scope(format!(
                "softmax CPD of {} cannot be converted to a canonical factor",
                s.child
            ))),
        }
    }

    pub fn discrete(&self) -> &[VarId] {
        &self.discrete
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn continuous(&self) -> &[VarId] {
        &self.continuous
    }

    pub fn entries(&self) -> &[CanonicalForm] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [CanonicalForm] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, states: &[usize]) -> &CanonicalForm {
        &self.entries[encode(states, &self.cards)]
    }

    pub fn states(&self, index: usize) -> Vec<usize> {
        decode(index, &self.cards)
    }

    pub fn position(&self, var: VarId) -> Option<usize> {
        self.discrete.iter().position(|&v| v == var)
    }

    fn project_index(&self, states: &[usize], positions: &[usize], cards: &[usize]) -> usize {
        let sub: Vec<usize> = positions.iter().map(|&p| states[p]).collect();
        encode(&sub, cards)
    }

    fn aligned(&self, other: &Self) -> (Vec<VarId>, Vec<usize>, Vec<usize>) {
        let mut disc = self.discrete.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.discrete.iter().zip(&other.cards) {
            if !disc.contains(v) {
                disc.push(*v);
                cards.push(*c);
            }
        }
        let other_pos = other
            .discrete
            .iter()
            .map(|v| disc.iter().position(|d| d == v).unwrap())
            .collect();
        (disc, cards, other_pos)
    }

    fn combine(&self, other: &Self, divide: bool) -> Self {
        let (disc, cards, other_pos) = self.aligned(other);
        let n_self = self.discrete.len();
        let self_pos: Vec<usize> = (0..n_self).collect();
        let entries: Vec<CanonicalForm> = (0..table_size(&cards))
            .map(|i| {
                let states = decode(i, &cards);
                let a = &self.entries[self.project_index(&states, &self_pos, &self.cards)];
                let b = &other.entries[other.project_index(&states, &other_pos, &other.cards)];
                if divide {
                    a.divide(b)
                } else {
                    a.multiply(b)
                }
            })
            .collect();
        let cont = entries[0].scope().to_vec();
        Self::new(disc, cards, cont, entries)
    }

    /// Product over the union of scopes.
    pub fn multiply(&self, other: &Self) -> Self {
        self.combine(other, false)
    }

    /// Quotient over the union of scopes; `0 / x` and `x / 0` are both zero.
    pub fn divide(&self, other: &Self) -> Self {
        self.combine(other, true)
    }

    pub fn reduce_continuous(&self, var: VarId, value: f64) -> Result<Self> {
        if !self.continuous.contains(&var) {
            return Err(Error::Scope(format!("{var} is not in the continuous scope")));
        }
        let entries = self
            .entries
            .iter()
            .map(|e| e.reduce(var, value))
            .collect::<Result<Vec<_>>>()?;
        let cont = self.continuous.iter().copied().filter(|&v| v != var).collect();
        Ok(Self::new(self.discrete.clone(), self.cards.clone(), cont, entries))
    }

    /// Multiplies in the zero-one indicator of `var = state`.
    pub fn reduce_discrete(&self, var: VarId, state: usize) -> Result<Self> {
        let p = self
            .position(var)
            .ok_or_else(|| Error::Scope(format!("{var} is not in the discrete scope")))?;
        let mut out = self.clone();
        for (i, e) in out.entries.iter_mut().enumerate() {
            if decode(i, &self.cards)[p] != state {
                *e = CanonicalForm::zero(self.continuous.clone());
            }
        }
        Ok(out)
    }

    /// Marginal onto `keep`. Continuous variables are always integrated exactly. Discrete
    /// variables are summed exactly when the remaining continuous scope is empty or the
    /// grouped forms share `(h, K)`; otherwise `weak` permits moment-matching collapse and
    /// without it the call fails.
    pub fn marginalize(&self, keep: &[VarId], weak: bool) -> Result<Self> {
        let cont_out: Vec<VarId> = self.continuous.iter().copied().filter(|v| !keep.contains(v)).collect();
        let integrated: Vec<CanonicalForm> = if cont_out.is_empty() {
            self.entries.clone()
        } else {
            self.entries
                .iter()
                .map(|e| e.marginalize(&cont_out))
                .collect::<Result<_>>()?
        };
        let cont: Vec<VarId> = self.continuous.iter().copied().filter(|v| keep.contains(v)).collect();
        let kept_pos: Vec<usize> = (0..self.discrete.len())
            .filter(|&i| keep.contains(&self.discrete[i]))
            .collect();
        if kept_pos.len() == self.discrete.len() {
            return Ok(Self::new(self.discrete.clone(), self.cards.clone(), cont, integrated));
        }
        let disc: Vec<VarId> = kept_pos.iter().map(|&i| self.discrete[i]).collect();
        let cards: Vec<usize> = kept_pos.iter().map(|&i| self.cards[i]).collect();
        let mut groups: Vec<Vec<&CanonicalForm>> = vec![Vec::new(); table_size(&cards)];
        for (i, e) in integrated.iter().enumerate() {
            let states = decode(i, &self.cards);
            groups[self.project_index(&states, &kept_pos, &cards)].push(e);
        }
        let entries = groups
            .into_iter()
            .map(|g| sum_group(&g, &cont, weak))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(disc, cards, cont, entries))
    }

    /// Sums `var` out, collapsing mixtures by moment matching where needed.
    pub fn sum_out_discrete(&self, var: VarId) -> Result<Self> {
        let keep: Vec<VarId> = self
            .discrete
            .iter()
            .chain(&self.continuous)
            .copied()
            .filter(|&v| v != var)
            .collect();
        self.marginalize(&keep, true)
    }

    /// Log of the total mass.
    pub fn log_mass(&self) -> Result<f64> {
        let masses = self.entries.iter().map(|e| e.log_mass()).collect::<Result<Vec<_>>>()?;
        Ok(log_sum_exp(masses.into_iter()))
    }

    /// Per-entry moments over the continuous scope.
    pub fn moments(&self) -> Result<Vec<GaussianMoments>> {
        self.entries.iter().map(|e| e.to_moments()).collect()
    }

    /// Reorders the continuous scope of every entry.
    pub fn with_continuous_order(&self, order: &[VarId]) -> Result<Self> {
        let entries = self.entries.iter().map(|e| e.permute(order)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(self.discrete.clone(), self.cards.clone(), order.to_vec(), entries))
    }

    /// Reorders the discrete scope.
    pub fn with_discrete_order(&self, order: &[VarId]) -> Result<Self> {
        if order.len() != self.discrete.len() || order.iter().any(|v| !self.discrete.contains(v)) {
            return Err(Error::Scope("discrete reorder must be a permutation".into()));
        }
        let pos: Vec<usize> = order.iter().map(|v| self.position(*v).unwrap()).collect();
        let cards: Vec<usize> = pos.iter().map(|&p| self.cards[p]).collect();
        let entries = (0..self.entries.len())
            .map(|i| {
                let states = decode(i, &cards);
                let mut orig = vec![0; self.cards.len()];
                for (k, &p) in pos.iter().enumerate() {
                    orig[p] = states[k];
                }
                self.entries[encode(&orig, &self.cards)].clone()
            })
            .collect();
        Ok(Self::new(order.to_vec(), cards, self.continuous.clone(), entries))
    }

    /// Iterates `(states, entry)` pairs in table order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, &CanonicalForm)> {
        assignment::assignments(&self.cards).zip(self.entries.iter())
    }
}

fn sum_group(group: &[&CanonicalForm], cont: &[VarId], weak: bool) -> Result<CanonicalForm> {
    let live: Vec<&CanonicalForm> = group.iter().copied().filter(|e| !e.is_zero()).collect();
    let Some(first) = live.first() else {
        return Ok(CanonicalForm::zero(cont.to_vec()));
    };
    if cont.is_empty() || live.iter().all(|e| same_shape(first, e)) {
        let g = log_sum_exp(live.iter().map(|e| e.g()));
        if g < LOG_ZERO {
            return Ok(CanonicalForm::zero(cont.to_vec()));
        }
        return Ok(CanonicalForm::new(cont.to_vec(), g, first.h().clone(), first.k().clone()));
    }
    if !weak {
        return Err(Error::StrongRootViolation(format!(
            "summing a discrete variable out of a mixture over {cont:?} requires weak marginalization"
        )));
    }
    let moments = live.iter().map(|e| e.to_moments()).collect::<Result<Vec<_>>>()?;
    match collapse(&moments) {
        Ok(m) => CanonicalForm::from_moments(cont.to_vec(), &m),
        Err(Error::EmptyMixture) => Ok(CanonicalForm::zero(cont.to_vec())),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    const A: VarId = VarId(0);
    const B: VarId = VarId(1);
    const X: VarId = VarId(2);

    fn gauss(w: f64, m: f64, v: f64) -> CanonicalForm {
        CanonicalForm::from_moments(vec![X], &GaussianMoments::new(w, dvector![m], dmatrix![v])).unwrap()
    }

    #[test]
    fn identical_entries_sum_exactly() {
        let f = HybridFactor::new(vec![A], vec![2], vec![X], vec![gauss(0.25, 1.0, 2.0), gauss(0.5, 1.0, 2.0)]);
        let s = f.sum_out_discrete(A).unwrap();
        let m = s.entries()[0].to_moments().unwrap();
        assert!((m.weight() - 0.75).abs() < 1e-14);
        assert!((m.mean[0] - 1.0).abs() < 1e-13 && (m.cov[(0, 0)] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn sum_out_collapses_mixture() {
        let f = HybridFactor::new(vec![A], vec![2], vec![X], vec![gauss(0.6, 0.0, 1.0), gauss(0.4, 5.0, 2.0)]);
        let s = f.sum_out_discrete(A).unwrap();
        assert!(s.discrete().is_empty());
        let m = s.entries()[0].to_moments().unwrap();
        assert!((m.weight() - 1.0).abs() < 1e-13);
        assert!((m.mean[0] - 2.0).abs() < 1e-12 && (m.cov[(0, 0)] - 7.4).abs() < 1e-12);
        assert!(matches!(
            f.marginalize(&[X], false),
            Err(Error::StrongRootViolation(_))
        ));
    }

    #[test]
    fn zero_entries_are_skipped() {
        let f = HybridFactor::new(
            vec![A],
            vec![2],
            vec![X],
            vec![gauss(0.6, 0.0, 1.0), CanonicalForm::zero(vec![X])],
        );
        let m = f.sum_out_discrete(A).unwrap().entries()[0].to_moments().unwrap();
        assert!((m.weight() - 0.6).abs() < 1e-14 && m.mean[0].abs() < 1e-14);
    }

    #[test]
    fn table_product_and_marginal() {
        let pa = HybridFactor::from_table(vec![A], vec![2], &[0.3, 0.7]);
        let pba = HybridFactor::from_table(vec![A, B], vec![2, 2], &[0.9, 0.1, 0.2, 0.8]);
        let joint = pa.multiply(&pba);
        let pb = joint.marginalize(&[B], false).unwrap();
        let p: Vec<f64> = pb.entries().iter().map(|e| e.g().exp()).collect();
        assert!((p[0] - (0.27 + 0.14)).abs() < 1e-15 && (p[1] - (0.03 + 0.56)).abs() < 1e-15);
        let back = joint.divide(&pa);
        for (x, y) in back.entries().iter().zip(pba.entries()) {
            assert!((x.g() - y.g()).abs() < 1e-15);
        }
    }

    #[test]
    fn discrete_reorder_round_trip() {
        let f = HybridFactor::from_table(vec![A, B], vec![2, 3], &[1., 2., 3., 4., 5., 6.]);
        let r = f.with_discrete_order(&[B, A]).unwrap();
        assert_eq!(r.entry(&[2, 0]).g(), 3f64.ln());
        assert_eq!(r.with_discrete_order(&[A, B]).unwrap(), f);
    }

    #[test]
    fn discrete_evidence_zeroes_other_states() {
        let f = HybridFactor::from_table(vec![A], vec![2], &[0.3, 0.7]);
        let r = f.reduce_discrete(A, 1).unwrap();
        assert!(r.entries()[0].is_zero());
        assert!((r.log_mass().unwrap() - 0.7f64.ln()).abs() < 1e-15);
    }
}
