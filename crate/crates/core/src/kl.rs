//! KL divergences between query results.
//!
//! Continuous parts are compared as Gaussians: per discrete assignment, the
//! closed-form Gaussian KL weighted by the first argument's discrete mass.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::propagation::QueryResult;

/// `sum p ln(p / q)`, with `0 ln 0 = 0`. Infinite if `q` misses mass of `p`.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| if b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum::<f64>()
        .max(0.0)
}

/// `KL(N(m0, s0) || N(m1, s1))`. Both covariances must be positive definite.
pub fn gaussian_kl(m0: &DVector<f64>, s0: &DMatrix<f64>, m1: &DVector<f64>, s1: &DMatrix<f64>) -> Result<f64> {
    let k = m0.len();
    if k == 0 {
        return Ok(0.0);
    }
    let not_pd = || Error::NotPsd {
        min_eigenvalue: s1.clone().symmetric_eigenvalues().min(),
    };
    let c1 = s1.clone().cholesky().ok_or_else(not_pd)?;
    let c0 = s0.clone().cholesky().ok_or_else(|| Error::NotPsd {
        min_eigenvalue: s0.clone().symmetric_eigenvalues().min(),
    })?;
    let d = m1 - m0;
    let trace = c1.solve(s0).trace();
    let maha = d.dot(&c1.solve(&d));
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let kl = 0.5 * (trace + maha - k as f64 + logdet(&c1) - logdet(&c0));
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlSplit {
    pub discrete: f64,
    pub continuous: f64,
}

/// KL of `p` from `q` over the same query, split into discrete and continuous parts.
pub fn cg_kl(p: &QueryResult, q: &QueryResult) -> Result<KlSplit> {
    if p.discrete != q.discrete || p.continuous != q.continuous {
        return Err(Error::Scope("KL needs results over the same query".into()));
    }
    let discrete = discrete_kl(&p.probabilities, &q.probabilities);
    let mut continuous = 0.0;
    if !p.continuous.is_empty() {
        for ((&w, a), b) in p.probabilities.iter().zip(&p.components).zip(&q.components) {
            if w == 0.0 {
                continue;
            }
            match (a, b) {
                (Some((m0, s0)), Some((m1, s1))) => continuous += w * gaussian_kl(m0, s0, m1, s1)?,
                _ => continuous = f64::INFINITY,
            }
        }
    }
    Ok(KlSplit { discrete, continuous })
}

/// KL between the moment-matched Gaussians of the continuous parts.
pub fn collapsed_kl(p: &QueryResult, q: &QueryResult) -> Result<f64> {
    match (p.moments(), q.moments()) {
        (Some(a), Some(b)) => gaussian_kl(&a.mean, &a.cov, &b.mean, &b.cov),
        _ => Err(Error::Scope("KL needs continuous query variables".into())),
    }
}
