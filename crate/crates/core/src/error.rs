use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scope error: {0}")]
    Scope(String),

    #[error("non-integrable factor: {0}")]
    NonIntegrableFactor(String),

    #[error("singular covariance: {0}")]
    SingularCovariance(String),

    #[error("covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("mixture has no component with positive weight")]
    EmptyMixture,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration dimension {dim} exceeds the quadrature cap {cap}; use the Monte Carlo backend or sequential insertion")]
    DimensionCap { dim: usize, cap: usize },

    #[error("clique too large ({entries} table entries, {continuous} continuous dims) around {variables}")]
    TreeTooLarge {
        entries: usize,
        continuous: usize,
        variables: String,
    },

    #[error("strong root violation: {0}")]
    StrongRootViolation(String),

    #[error("query {0} is not contained in any single clique")]
    OutOfCliqueQuery(String),

    #[error("network is invalid:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("cycle through {0}")]
    Cycle(String),

    #[error("all {0} samples carry zero weight")]
    DegenerateWeights(usize),

    #[error("invalid phase: {0}")]
    Phase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// An error raised while running one step of the inference pipeline.
    #[error("{phase}: {source}")]
    InPhase {
        phase: &'static str,
        source: Box<Error>,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    /// Stable machine-readable tag, printed by the CLI on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Scope(_) => "scope",
            Error::NonIntegrableFactor(_) => "non_integrable_factor",
            Error::SingularCovariance(_) => "singular_covariance",
            Error::NotPsd { .. } => "not_psd",
            Error::EmptyMixture => "empty_mixture",
            Error::Numerical(_) => "numerical",
            Error::Config(_) => "config",
            Error::DimensionCap { .. } => "dimension_cap",
            Error::TreeTooLarge { .. } => "tree_too_large",
            Error::StrongRootViolation(_) => "strong_root_violation",
            Error::OutOfCliqueQuery(_) => "out_of_clique_query",
            Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::Cycle(_) => "cycle",
            Error::DegenerateWeights(_) => "degenerate_weights",
            Error::Phase(_) => "phase",
            Error::Io(_) => "io",
            Error::InPhase { source, .. } => source.kind(),
        }
    }

    /// The underlying error, without phase labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::InPhase { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn in_phase(phase: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::InPhase {
            phase,
            source: Box::new(e),
        }
    }
}
