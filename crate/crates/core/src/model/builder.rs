use super::*;

/// Name-based construction of networks, mostly for tests and examples.
///
/// Parameter lists follow table order over discrete parents (last parent varies fastest).
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    cpds: Vec<Cpd>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn id(&self, name: &str) -> VarId {
        VarId(
            self.variables
                .iter()
                .position(|v| v.name == name)
                .unwrap_or_else(|| panic!("builder: unknown variable '{name}'")),
        )
    }

    fn ids(&self, names: &[&str]) -> Vec<VarId> {
        names.iter().map(|n| self.id(n)).collect()
    }

    pub fn discrete(&mut self, name: &str, states: &[&str]) -> &mut Self {
        self.variables.push(Variable::discrete(name, states));
        self
    }

    pub fn continuous(&mut self, name: &str) -> &mut Self {
        self.variables.push(Variable::continuous(name));
        self
    }

    pub fn table(&mut self, child: &str, parents: &[&str], rows: &[&[f64]]) -> &mut Self {
        let cpd = TableCpd {
            child: self.id(child),
            parents: self.ids(parents),
            rows: rows.iter().map(|r| r.to_vec()).collect(),
        };
        self.cpds.push(Cpd::Table(cpd));
        self
    }

    /// Entries are `(intercept, weights, variance)`.
    pub fn clg(
        &mut self,
        child: &str,
        discrete_parents: &[&str],
        continuous_parents: &[&str],
        entries: &[(f64, &[f64], f64)],
    ) -> &mut Self {
        let cpd = ClgCpd {
            child: self.id(child),
            discrete_parents: self.ids(discrete_parents),
            continuous_parents: self.ids(continuous_parents),
            entries: entries
                .iter()
                .map(|&(intercept, w, variance)| ClgEntry {
                    intercept,
                    weights: w.to_vec(),
                    variance,
                })
                .collect(),
        };
        self.cpds.push(Cpd::Clg(cpd));
        self
    }

    /// Binary child with `P(first state | y) = 1 / (1 + exp(b + w . y))`.
    pub fn sigmoid(&mut self, child: &str, parents: &[&str], bias: f64, weights: &[f64]) -> &mut Self {
        let cpd = SoftmaxCpd::sigmoid(self.id(child), self.ids(parents), bias, weights.to_vec());
        self.cpds.push(Cpd::Softmax(cpd));
        self
    }

    /// General softmax. `features` are exponent lists over the continuous parents
    /// (`None` means identity features); `entries[d][i] = (bias, weights)`.
    pub fn softmax(
        &mut self,
        child: &str,
        discrete_parents: &[&str],
        continuous_parents: &[&str],
        features: Option<&[&[u32]]>,
        entries: &[&[(f64, &[f64])]],
    ) -> &mut Self {
        let k = continuous_parents.len();
        let features = match features {
            Some(f) => f
                .iter()
                .map(|e| Monomial {
                    exponents: e.to_vec(),
                })
                .collect(),
            None => identity_features(k),
        };
        let cpd = SoftmaxCpd {
            child: self.id(child),
            discrete_parents: self.ids(discrete_parents),
            continuous_parents: self.ids(continuous_parents),
            features,
            entries: entries
                .iter()
                .map(|rows| {
                    rows.iter()
                        .map(|&(bias, w)| SoftmaxRow {
                            bias,
                            weights: w.to_vec(),
                        })
                        .collect()
                })
                .collect(),
        };
        self.cpds.push(Cpd::Softmax(cpd));
        self
    }

    pub fn push_cpd(&mut self, cpd: Cpd) -> &mut Self {
        self.cpds.push(cpd);
        self
    }

    pub fn var_id(&self, name: &str) -> VarId {
        self.id(name)
    }

    pub fn build(&self) -> Result<Network> {
        Network::validated(self.variables.clone(), self.cpds.clone())
    }
}
