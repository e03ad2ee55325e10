//! JSON network files.
//!
//! ```json
//! {
//!   "variables": [
//!     { "name": "Rain", "kind": "discrete", "states": ["Drought", "Average", "Floods"] },
//!     { "name": "Crop", "kind": "continuous" }
//!   ],
//!   "cpds": [
//!     { "kind": "table", "child": "Rain", "rows": [[0.35, 0.6, 0.05]] },
//!     { "kind": "clg", "child": "Crop", "discrete_parents": ["Rain"],
//!       "entries": [{ "intercept": 3, "weights": [], "variance": 0.5 }, ...] },
//!     { "kind": "softmax", "child": "Buy", "continuous_parents": ["Price"],
//!       "entries": [[{ "bias": 0, "weights": [0] }, { "bias": 1, "weights": [7] }]] }
//!   ]
//! }
//! ```
//!
//! Rows and entries are listed in table order over the discrete parents, last parent
//! varying fastest. Softmax `features` are optional monomial exponent lists over the
//! continuous parents (`[[1, 0], [1, 1]]` is `{P, P*C}` for parents `[P, C]`); without
//! them each weight applies to the matching parent directly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::*;

/// Probability rows within this distance of 1 are renormalized on load.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub variables: Vec<VariableDecl>,
    pub cpds: Vec<CpdDecl>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableDecl {
    Discrete { name: String, states: Vec<String> },
    Continuous { name: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClgEntryDecl {
    pub intercept: f64,
    #[serde(default)]
    pub weights: Vec<f64>,
    pub variance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftmaxRowDecl {
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CpdDecl {
    Table {
        child: String,
        #[serde(default)]
        parents: Vec<String>,
        rows: Vec<Vec<f64>>,
    },
    Clg {
        child: String,
        #[serde(default)]
        discrete_parents: Vec<String>,
        #[serde(default)]
        continuous_parents: Vec<String>,
        entries: Vec<ClgEntryDecl>,
    },
    Softmax {
        child: String,
        #[serde(default)]
        discrete_parents: Vec<String>,
        continuous_parents: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features: Option<Vec<Vec<u32>>>,
        entries: Vec<Vec<SoftmaxRowDecl>>,
    },
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_network(&text).map_err(|e| match e {
        Error::Parse { path: p, message } => Error::Parse {
            path: format!("{}: {p}", path.display()),
            message,
        },
        other => other,
    })
}

pub fn parse_network(text: &str) -> Result<Network> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: NetworkFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    file.into_network()
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        let variables: Vec<Variable> = self
            .variables
            .into_iter()
            .map(|v| match v {
                VariableDecl::Discrete { name, states } => Variable {
                    name,
                    kind: VarKind::Discrete { states },
                },
                VariableDecl::Continuous { name } => Variable::continuous(name),
            })
            .collect();
        let lookup = |names: &[String], at: String| -> Result<Vec<VarId>> {
            names
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    variables
                        .iter()
                        .position(|v| &v.name == n)
                        .map(VarId)
                        .ok_or_else(|| Error::Parse {
                            path: format!("{at}[{i}]"),
                            message: format!("unknown variable '{n}'"),
                        })
                })
                .collect()
        };

        let mut cpds = Vec::with_capacity(self.cpds.len());
        for (ci, decl) in self.cpds.into_iter().enumerate() {
            let at = format!("cpds[{ci}]");
            let cpd = match decl {
                CpdDecl::Table {
                    child,
                    parents,
                    mut rows,
                } => {
                    for (ri, row) in rows.iter_mut().enumerate() {
                        renormalize(row).map_err(|message| Error::Parse {
                            path: format!("{at}.rows[{ri}]"),
                            message,
                        })?;
                    }
                    Cpd::Table(TableCpd {
                        child: lookup(&[child], format!("{at}.child"))?[0],
                        parents: lookup(&parents, format!("{at}.parents"))?,
                        rows,
                    })
                }
                CpdDecl::Clg {
                    child,
                    discrete_parents,
                    continuous_parents,
                    entries,
                } => Cpd::Clg(ClgCpd {
                    child: lookup(&[child], format!("{at}.child"))?[0],
                    discrete_parents: lookup(&discrete_parents, format!("{at}.discrete_parents"))?,
                    continuous_parents: lookup(
                        &continuous_parents,
                        format!("{at}.continuous_parents"),
                    )?,
                    entries: entries
                        .into_iter()
                        .map(|e| ClgEntry {
                            intercept: e.intercept,
                            weights: e.weights,
                            variance: e.variance,
                        })
                        .collect(),
                }),
                CpdDecl::Softmax {
                    child,
                    discrete_parents,
                    continuous_parents,
                    features,
                    entries,
                } => {
                    let k = continuous_parents.len();
                    Cpd::Softmax(SoftmaxCpd {
                        child: lookup(&[child], format!("{at}.child"))?[0],
                        discrete_parents: lookup(
                            &discrete_parents,
                            format!("{at}.discrete_parents"),
                        )?,
                        continuous_parents: lookup(
                            &continuous_parents,
                            format!("{at}.continuous_parents"),
                        )?,
                        features: match features {
                            Some(f) => f.into_iter().map(|exponents| Monomial { exponents }).collect(),
                            None => identity_features(k),
                        },
                        entries: entries
                            .into_iter()
                            .map(|rows| {
                                rows.into_iter()
                                    .map(|r| SoftmaxRow {
                                        bias: r.bias,
                                        weights: r.weights,
                                    })
                                    .collect()
                            })
                            .collect(),
                    })
                }
            };
            cpds.push(cpd);
        }
        Network::validated(variables, cpds)
    }

    pub fn from_network(net: &Network) -> Self {
        let names = |ids: &[VarId]| ids.iter().map(|&v| net.name(v).to_string()).collect();
        let variables = net
            .variables()
            .iter()
            .map(|v| match &v.kind {
                VarKind::Discrete { states } => VariableDecl::Discrete {
                    name: v.name.clone(),
                    states: states.clone(),
                },
                VarKind::Continuous => VariableDecl::Continuous {
                    name: v.name.clone(),
                },
            })
            .collect();
        let cpds = net
            .cpds()
            .iter()
            .map(|c| match c {
                Cpd::Table(t) => CpdDecl::Table {
                    child: net.name(t.child).to_string(),
                    parents: names(&t.parents),
                    rows: t.rows.clone(),
                },
                Cpd::Clg(c) => CpdDecl::Clg {
                    child: net.name(c.child).to_string(),
                    discrete_parents: names(&c.discrete_parents),
                    continuous_parents: names(&c.continuous_parents),
                    entries: c
                        .entries
                        .iter()
                        .map(|e| ClgEntryDecl {
                            intercept: e.intercept,
                            weights: e.weights.clone(),
                            variance: e.variance,
                        })
                        .collect(),
                },
                Cpd::Softmax(s) => CpdDecl::Softmax {
                    child: net.name(s.child).to_string(),
                    discrete_parents: names(&s.discrete_parents),
                    continuous_parents: names(&s.continuous_parents),
                    features: if s.features == identity_features(s.continuous_parents.len()) {
                        None
                    } else {
                        Some(s.features.iter().map(|m| m.exponents.clone()).collect())
                    },
                    entries: s
                        .entries
                        .iter()
                        .map(|rows| {
                            rows.iter()
                                .map(|r| SoftmaxRowDecl {
                                    bias: r.bias,
                                    weights: r.weights.clone(),
                                })
                                .collect()
                        })
                        .collect(),
                },
            })
            .collect();
        NetworkFile { variables, cpds }
    }
}

fn renormalize(row: &mut [f64]) -> std::result::Result<(), String> {
    if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err("probabilities must be finite and nonnegative".into());
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(format!("row sums to {s}, not 1"));
    }
    row.iter_mut().for_each(|p| *p /= s);
    Ok(())
}

pub fn to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkFile::from_network(net)).expect("network serializes")
}
