//! Canonical forms and hybrid (mixture) factors.
//!
//! A canonical form over continuous variables `x` is the function
//! `exp(g + h.x - x'Kx / 2)` with `K` the precision matrix. Rank-deficient `K` is
//! legal (CLG conditionals have one); positive definiteness is only required when a
//! variable is integrated out or the form is converted to moments.

mod hybrid;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::VarId;

pub use hybrid::HybridFactor;

/// Log weights below this are structural zeros.
pub const LOG_ZERO: f64 = -700.0;

/// Negative eigenvalues down to `-PSD_TOLERANCE` (relative to the spectrum) are clipped to zero.
pub const PSD_TOLERANCE: f64 = 1e-9;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    scope: Vec<VarId>,
    g: f64,
    h: DVector<f64>,
    k: DMatrix<f64>,
}

impl CanonicalForm {
    pub fn new(scope: Vec<VarId>, g: f64, h: DVector<f64>, k: DMatrix<f64>) -> Self {
        assert_eq!(h.len(), scope.len(), "h length must match scope");
        assert_eq!(k.shape(), (scope.len(), scope.len()), "K must be square over scope");
        CanonicalForm { scope, g, h, k }
    }

    /// The constant function 1.
    pub fn vacuous(scope: Vec<VarId>) -> Self {
        Self::constant(scope, 0.0)
    }

    pub fn constant(scope: Vec<VarId>, log_value: f64) -> Self {
        let n = scope.len();
        CanonicalForm {
            scope,
            g: log_value,
            h: DVector::zeros(n),
            k: DMatrix::zeros(n, n),
        }
    }

    /// The constant function 0.
    pub fn zero(scope: Vec<VarId>) -> Self {
        Self::constant(scope, f64::NEG_INFINITY)
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn dim(&self) -> usize {
        self.scope.len()
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn is_zero(&self) -> bool {
        self.g == f64::NEG_INFINITY
    }

    pub fn add_log(&mut self, delta: f64) {
        self.g += delta;
    }

    pub fn log_value(&self, x: &[f64]) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let x = DVector::from_column_slice(x);
        self.g + self.h.dot(&x) - 0.5 * (x.transpose() * &self.k * &x)[0]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.log_value(x).exp()
    }

    fn position(&self, v: VarId) -> Option<usize> {
        self.scope.iter().position(|&s| s == v)
    }

    /// Re-expresses the form over a superset scope; new rows and columns are zero.
    pub fn extend(&self, scope2: &[VarId]) -> Result<Self> {
        let map = self
            .scope
            .iter()
            .map(|v| {
                scope2.iter().position(|s| s == v).ok_or_else(|| {
                    Error::Scope(format!("extension scope is missing {v}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::constant(scope2.to_vec(), self.g);
        out.accumulate(self, &map, 1.0);
        Ok(out)
    }

    fn accumulate(&mut self, other: &Self, map: &[usize], sign: f64) {
        for (i, &ri) in map.iter().enumerate() {
            self.h[ri] += sign * other.h[i];
            for (j, &rj) in map.iter().enumerate() {
                self.k[(ri, rj)] += sign * other.k[(i, j)];
            }
        }
    }

    fn union_with(&self, other: &Self) -> (Vec<VarId>, Vec<usize>) {
        let mut scope = self.scope.clone();
        let map = other
            .scope
            .iter()
            .map(|v| match self.position(*v) {
                Some(i) => i,
                None => {
                    scope.push(*v);
                    scope.len() - 1
                }
            })
            .collect();
        (scope, map)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let (scope, map) = self.union_with(other);
        if self.is_zero() || other.is_zero() {
            return Self::zero(scope);
        }
        let mut out = self.extend(&scope).expect("union contains own scope");
        out.g += sign * other.g;
        out.accumulate(other, &map, sign);
        out
    }

    /// Pointwise product over the union scope (own variables first).
    pub fn multiply(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    /// Pointwise quotient over the union scope. A zero numerator or denominator gives zero.
    pub fn divide(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    /// Integrates `out` away exactly. Requires the `out` block of `K` to be positive definite.
    pub fn marginalize(&self, out: &[VarId]) -> Result<Self> {
        let drop: Vec<usize> = self
            .scope
            .iter()
            .enumerate()
            .filter(|(_, v)| out.contains(v))
            .map(|(i, _)| i)
            .collect();
        if drop.is_empty() {
            return Ok(self.clone());
        }
        let keep: Vec<usize> = (0..self.dim()).filter(|i| !drop.contains(i)).collect();
        let kept_scope: Vec<VarId> = keep.iter().map(|&i| self.scope[i]).collect();
        if self.is_zero() {
            return Ok(Self::zero(kept_scope));
        }
        let k22 = self.k.select_rows(&drop).select_columns(&drop);
        let k12 = self.k.select_rows(&keep).select_columns(&drop);
        let h1 = self.h.select_rows(&keep);
        let h2 = self.h.select_rows(&drop);
        let chol = Cholesky::new(k22).ok_or_else(|| {
            Error::NonIntegrableFactor(format!(
                "precision block over {:?} is not positive definite",
                drop.iter().map(|&i| self.scope[i]).collect::<Vec<_>>()
            ))
        })?;
        let solved_h2 = chol.solve(&h2);
        let solved_k21 = chol.solve(&k12.transpose());
        let k11 = self.k.select_rows(&keep).select_columns(&keep);
        let k_hat = symmetrize(&(k11 - &k12 * &solved_k21));
        let h_hat = h1 - &k12 * &solved_h2;
        let g_hat = self.g
            + 0.5 * (drop.len() as f64 * LN_2PI - log_det(&chol) + h2.dot(&solved_h2));
        Ok(CanonicalForm::new(kept_scope, g_hat, h_hat, k_hat))
    }

    /// Fixes `var = value`, removing it from the scope.
    pub fn reduce(&self, var: VarId, value: f64) -> Result<Self> {
        let i = self
            .position(var)
            .ok_or_else(|| Error::Scope(format!("{var} is not in the form's scope")))?;
        let keep: Vec<usize> = (0..self.dim()).filter(|&j| j != i).collect();
        let scope: Vec<VarId> = keep.iter().map(|&j| self.scope[j]).collect();
        if self.is_zero() {
            return Ok(Self::zero(scope));
        }
        let k11 = self.k.select_rows(&keep).select_columns(&keep);
        let k12 = self.k.select_rows(&keep).column(i).into_owned();
        let h = self.h.select_rows(&keep) - k12 * value;
        let g = self.g + self.h[i] * value - 0.5 * value * value * self.k[(i, i)];
        Ok(CanonicalForm::new(scope, g, h, k11))
    }

    /// Log of the integral over the whole scope.
    pub fn log_mass(&self) -> Result<f64> {
        if self.is_zero() {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.marginalize(&self.scope.clone())?.g)
    }

    pub fn to_moments(&self) -> Result<GaussianMoments> {
        let n = self.dim();
        if self.is_zero() {
            return Ok(GaussianMoments {
                log_weight: f64::NEG_INFINITY,
                mean: DVector::zeros(n),
                cov: DMatrix::identity(n, n),
            });
        }
        if n == 0 {
            return Ok(GaussianMoments::with_log_weight(self.g, DVector::zeros(0), DMatrix::zeros(0, 0)));
        }
        let chol = Cholesky::new(self.k.clone()).ok_or_else(|| {
            Error::NonIntegrableFactor(format!("precision over {:?} is not positive definite", self.scope))
        })?;
        let cov = symmetrize(&chol.inverse());
        let mean = chol.solve(&self.h);
        let log_weight = self.g + 0.5 * self.h.dot(&mean) + 0.5 * n as f64 * LN_2PI - 0.5 * log_det(&chol);
        Ok(GaussianMoments { log_weight, mean, cov })
    }

    pub fn from_moments(scope: Vec<VarId>, m: &GaussianMoments) -> Result<Self> {
        let n = scope.len();
        assert_eq!(m.dim(), n, "moments dimension must match scope");
        if m.is_zero() {
            return Ok(Self::zero(scope));
        }
        if n == 0 {
            return Ok(Self::constant(scope, m.log_weight));
        }
        let chol = Cholesky::new(m.cov.clone())
            .ok_or_else(|| Error::SingularCovariance(format!("covariance over {scope:?} is singular")))?;
        let k = symmetrize(&chol.inverse());
        let h = &k * &m.mean;
        let g = m.log_weight - 0.5 * m.mean.dot(&h) - 0.5 * n as f64 * LN_2PI - 0.5 * log_det(&chol);
        Ok(CanonicalForm::new(scope, g, h, k))
    }

    /// Same variables in a different order.
    pub fn permute(&self, scope: &[VarId]) -> Result<Self> {
        if scope.len() != self.dim() {
            return Err(Error::Scope("permutation must keep the scope size".into()));
        }
        self.extend(scope)
    }
}

/// Weight, mean and covariance of a (possibly unnormalized) Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub log_weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self::with_log_weight(weight.ln(), mean, cov)
    }

    pub fn with_log_weight(log_weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        assert_eq!(cov.shape(), (mean.len(), mean.len()));
        GaussianMoments { log_weight, mean, cov }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_zero(&self) -> bool {
        !(self.log_weight > LOG_ZERO)
    }
}

/// Moment-matches a mixture: same total weight, mean and covariance.
pub fn collapse(components: &[GaussianMoments]) -> Result<GaussianMoments> {
    let live: Vec<&GaussianMoments> = components.iter().filter(|c| !c.is_zero()).collect();
    let Some(first) = live.first() else {
        return Err(Error::EmptyMixture);
    };
    let n = first.dim();
    if live.iter().any(|c| c.dim() != n) {
        return Err(Error::Scope("mixture components differ in dimension".into()));
    }
    if live.len() == 1 {
        return Ok((*first).clone());
    }
    let max = live.iter().map(|c| c.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = live.iter().map(|c| (c.log_weight - max).exp()).collect();
    let total: f64 = rel.iter().sum();
    let mut mean = DVector::zeros(n);
    for (c, r) in live.iter().zip(&rel) {
        mean += &c.mean * (r / total);
    }
    let mut cov = DMatrix::zeros(n, n);
    for (c, r) in live.iter().zip(&rel) {
        let d = &c.mean - &mean;
        cov += (&c.cov + &d * d.transpose()) * (r / total);
    }
    Ok(GaussianMoments {
        log_weight: max + total.ln(),
        mean,
        cov: repair_psd(&cov)?,
    })
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrizes and clips tiny negative eigenvalues; larger negativity is an error.
pub fn repair_psd(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(cov);
    if sym.nrows() == 0 || Cholesky::new(sym.clone()).is_some() {
        return Ok(sym);
    }
    let eig = SymmetricEigen::new(sym.clone());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, &l| a.max(l.abs()));
    let min = eig.eigenvalues.min();
    if min >= 0.0 {
        return Ok(sym);
    }
    if min < -PSD_TOLERANCE * scale {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    Ok(symmetrize(
        &(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()),
    ))
}

fn log_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use std::f64::consts::PI;

    const X: VarId = VarId(0);
    const Y: VarId = VarId(1);

    fn std_normal(v: VarId) -> CanonicalForm {
        CanonicalForm::from_moments(vec![v], &GaussianMoments::new(1.0, dvector![0.0], dmatrix![1.0])).unwrap()
    }

    fn ln_2pi() -> f64 {
        (2.0 * PI).ln()
    }

    #[test]
    fn ln_2pi_constant() {
        assert!((LN_2PI - ln_2pi()).abs() < 1e-15);
    }

    #[test]
    fn extend_pads_with_zeros() {
        let f = CanonicalForm::new(vec![X], 0.3, dvector![1.0], dmatrix![2.0]);
        let e = f.extend(&[X, Y]).unwrap();
        assert_eq!(e.k(), &dmatrix![2.0, 0.0; 0.0, 0.0]);
        assert_eq!(e.h(), &dvector![1.0, 0.0]);
        assert_eq!(e.value(&[0.7, 123.0]), f.value(&[0.7]));
        let v = CanonicalForm::vacuous(vec![]).extend(&[X]).unwrap();
        assert_eq!((v.g(), v.h()[0], v.k()[(0, 0)]), (0.0, 0.0, 0.0));
        assert!(matches!(f.extend(&[Y]), Err(Error::Scope(_))));
    }

    #[test]
    fn multiply_and_divide() {
        let f = CanonicalForm::new(vec![X, Y], 0.1, dvector![1.0, -2.0], dmatrix![2.0, 0.5; 0.5, 1.0]);
        assert_eq!(f.multiply(&CanonicalForm::vacuous(vec![X, Y])), f);
        let q = f.divide(&f);
        assert_eq!(q.g(), 0.0);
        assert!(q.h().iter().chain(q.k().iter()).all(|&v| v == 0.0));

        let sq = std_normal(X).multiply(&std_normal(X));
        assert!((sq.k()[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((sq.g() + ln_2pi()).abs() < 1e-14);
        let m = sq.to_moments().unwrap();
        assert!((m.cov[(0, 0)] - 0.5).abs() < 1e-14);
        // numeric 1-D integral of the product
        let step = 1e-3;
        let num: f64 = (-10_000..=10_000).map(|i| sq.value(&[i as f64 * step]) * step).sum();
        assert!((num - 0.5 / PI.sqrt()).abs() < 1e-9);
        assert!((m.weight() - 0.5 / PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_is_absorbing() {
        let z = CanonicalForm::zero(vec![X]);
        assert!(std_normal(X).multiply(&z).is_zero());
        assert!(z.divide(&std_normal(X)).is_zero());
        assert!(std_normal(X).divide(&z).is_zero());
        assert!(z.marginalize(&[X]).unwrap().is_zero());
    }

    #[test]
    fn marginalize_independent_bivariate() {
        let f = CanonicalForm::from_moments(
            vec![X, Y],
            &GaussianMoments::new(1.0, dvector![0.0, 0.0], DMatrix::identity(2, 2)),
        )
        .unwrap();
        let m = f.marginalize(&[Y]).unwrap();
        let s = std_normal(X);
        assert!((m.g() - s.g()).abs() < 1e-14);
        assert!((m.k()[(0, 0)] - 1.0).abs() < 1e-14 && m.h()[0].abs() < 1e-14);
    }

    #[test]
    fn marginalize_correlated_bivariate() {
        let f = CanonicalForm::from_moments(
            vec![X, Y],
            &GaussianMoments::new(1.0, dvector![0.0, 0.0], dmatrix![2.0, 1.0; 1.0, 2.0]),
        )
        .unwrap();
        let m = f.marginalize(&[Y]).unwrap();
        // precision of the marginal is 1/2; the joint precision's Schur complement
        assert!((m.k()[(0, 0)] - 0.5).abs() < 1e-14);
        let mm = m.to_moments().unwrap();
        assert!((mm.cov[(0, 0)] - 2.0).abs() < 1e-13 && (mm.weight() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn marginalize_everything_gives_mass() {
        let f = CanonicalForm::from_moments(vec![X], &GaussianMoments::new(0.3, dvector![4.0], dmatrix![2.5])).unwrap();
        let s = f.marginalize(&[X]).unwrap();
        assert!(s.scope().is_empty());
        assert!((s.g().exp() - 0.3).abs() < 1e-14);
    }

    #[test]
    fn marginalize_requires_positive_definite_block() {
        let f = CanonicalForm::new(vec![X, Y], 0.0, dvector![0.0, 0.0], dmatrix![1.0, -2.0; -2.0, 4.0]);
        assert!(f.marginalize(&[Y]).is_ok());
        let g = CanonicalForm::new(vec![X], 0.0, dvector![0.0], dmatrix![0.0]);
        assert!(matches!(g.marginalize(&[X]), Err(Error::NonIntegrableFactor(_))));
    }

    #[test]
    fn reduce_evidence() {
        let r = std_normal(X).reduce(X, 0.0).unwrap();
        assert!((r.g().exp() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let f = CanonicalForm::from_moments(vec![X], &GaussianMoments::new(1.0, dvector![1.5], dmatrix![0.25])).unwrap();
        let r = f.reduce(X, 1.5).unwrap();
        assert!((r.g().exp() - 1.0 / (2.0 * PI * 0.25).sqrt()).abs() < 1e-14);

        let b = CanonicalForm::new(vec![X, Y], 0.2, dvector![1.0, -0.5], dmatrix![2.0, 0.3; 0.3, 1.0]);
        let r = b.reduce(Y, 0.7).unwrap();
        assert!((r.value(&[-0.4]) - b.value(&[-0.4, 0.7])).abs() < 1e-15);
        assert!(matches!(b.reduce(VarId(9), 0.0), Err(Error::Scope(_))));
    }

    #[test]
    fn moments_of_clg_prior() {
        let g = -0.5 - 0.5 * (8.0 * PI).ln();
        let f = CanonicalForm::new(vec![X], g, dvector![0.5], dmatrix![0.25]);
        let m = f.to_moments().unwrap();
        assert!((m.weight() - 1.0).abs() < 1e-14);
        assert!((m.mean[0] - 2.0).abs() < 1e-14 && (m.cov[(0, 0)] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn from_standard_bivariate_moments() {
        let f = CanonicalForm::from_moments(
            vec![X, Y],
            &GaussianMoments::new(1.0, dvector![0.0, 0.0], DMatrix::identity(2, 2)),
        )
        .unwrap();
        assert_eq!(f.k(), &DMatrix::identity(2, 2));
        assert!(f.h().iter().all(|&v| v == 0.0));
        assert!((f.g() + ln_2pi()).abs() < 1e-14);
    }

    #[test]
    fn non_pd_and_singular_errors() {
        let f = CanonicalForm::new(vec![X], 0.0, dvector![0.0], dmatrix![-1.0]);
        assert!(matches!(f.to_moments(), Err(Error::NonIntegrableFactor(_))));
        let m = GaussianMoments::new(1.0, dvector![0.0, 0.0], dmatrix![1.0, 1.0; 1.0, 1.0]);
        assert!(matches!(CanonicalForm::from_moments(vec![X, Y], &m), Err(Error::SingularCovariance(_))));
    }

    #[test]
    fn collapse_examples() {
        let c = GaussianMoments::new(0.5, dvector![1.0, 2.0], dmatrix![1.0, 0.2; 0.2, 3.0]);
        let out = collapse(&[c.clone(), c.clone()]).unwrap();
        assert!((out.weight() - 1.0).abs() < 1e-15);
        assert!((&out.mean - &c.mean).norm() < 1e-15 && (&out.cov - &c.cov).norm() < 1e-15);

        let out = collapse(&[
            GaussianMoments::new(0.6, dvector![0.0], dmatrix![1.0]),
            GaussianMoments::new(0.4, dvector![5.0], dmatrix![2.0]),
        ])
        .unwrap();
        assert!((out.weight() - 1.0).abs() < 1e-15);
        assert!((out.mean[0] - 2.0).abs() < 1e-14);
        assert!((out.cov[(0, 0)] - 7.4).abs() < 1e-13);

        assert_eq!(collapse(std::slice::from_ref(&c)).unwrap(), c);
        let z = GaussianMoments::with_log_weight(f64::NEG_INFINITY, dvector![0.0], dmatrix![1.0]);
        assert!(matches!(collapse(&[z]), Err(Error::EmptyMixture)));
    }

    #[test]
    fn psd_repair_policy() {
        let tiny = dmatrix![1.0, 1.0; 1.0, 1.0 - 1e-12];
        let fixed = repair_psd(&tiny).unwrap();
        assert!(SymmetricEigen::new(fixed).eigenvalues.min() >= -1e-15);
        let bad = dmatrix![1.0, 0.0; 0.0, -0.1];
        assert!(matches!(repair_psd(&bad), Err(Error::NotPsd { .. })));
    }
}
