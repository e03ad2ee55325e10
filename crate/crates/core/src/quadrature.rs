//! Expectations under Gaussian measures: Gauss-Hermite tensor grids and Monte Carlo.
//!
//! Rules use the probabilists' normalization: weights sum to 1 under N(0, 1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 200;

/// Eigenvalues of a covariance down to this (relative) negativity are clipped to zero.
const EIG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(x)]` for `x ~ N(0, 1)`.
    /// Mirrored nodes are summed in pairs so odd integrands cancel exactly.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            acc += self.weights[i] * (f(self.nodes[i]) + f(self.nodes[j]));
        }
        if n % 2 == 1 {
            acc += self.weights[n / 2] * f(self.nodes[n / 2]);
        }
        acc
    }
}

/// Orthonormal probabilists' Hermite polynomials `(p_n(x), p_{n-1}(x))`.
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// n-point Gauss-Hermite rule from the Jacobi matrix eigenvalues, Newton-polished.
pub fn gauss_hermite_rule(n: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_POINTS).contains(&n) {
        return Err(Error::Config(format!(
            "quadrature point count must be in 1..={MAX_POINTS}, got {n}"
        )));
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let nf = n as f64;
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, q) = hermite_pair(n, *x);
            let dp = nf.sqrt() * q;
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() < 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, q) = hermite_pair(n, *x);
        weights.push(1.0 / (nf * q * q));
    }
    // exact symmetry about zero
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Gauss-Hermite tensor grid with this many points per dimension.
    Quadrature { points: usize },
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Quadrature { points: 3 }
    }
}

impl Backend {
    pub fn describe(&self) -> String {
        match self {
            Backend::Quadrature { points } => format!("gauss-hermite, {points} points/dim"),
            Backend::MonteCarlo { samples, seed } => format!("monte carlo, {samples} samples, seed {seed}"),
        }
    }
}

/// Weighted point set approximating a Gaussian measure.
#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    /// Number of non-degenerate directions actually integrated over.
    pub effective_dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (x, w) in self.points.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(non_finite(x, v));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

fn non_finite(x: &[f64], v: f64) -> Error {
    Error::Numerical(format!("integrand is {v} at node {x:?}"))
}

/// Square-root factor of a covariance with degenerate directions dropped.
pub fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let min = eig.eigenvalues.min();
    if min < -EIG_FLOOR * scale.max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let cutoff = EIG_FLOOR * scale;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let kept: Vec<usize> = order.into_iter().filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let mut l = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        // fix the sign so the factor is deterministic
        let col = eig.eigenvectors.column(i);
        let pivot = col.iamax();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        l.set_column(c, &(col * (s * sign)));
    }
    Ok(l)
}

/// Tensor-product grid `x = mean + L xi`, nodes in lexicographic order.
pub fn tensor_grid(mean: &DVector<f64>, cov: &DMatrix<f64>, rule: &QuadratureRule) -> Result<Grid> {
    let l = covariance_factor(cov)?;
    let r = l.ncols();
    let n = rule.len();
    let total = n.checked_pow(r as u32).ok_or_else(|| {
        Error::Config(format!("{n}^{r} grid points overflow"))
    })?;
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; r];
    let mut xi = DVector::zeros(r);
    for _ in 0..total {
        let mut w = 1.0;
        for (k, &i) in idx.iter().enumerate() {
            xi[k] = rule.nodes[i];
            w *= rule.weights[i];
        }
        let x = mean + &l * &xi;
        points.push(x.iter().copied().collect());
        weights.push(w);
        for k in (0..r).rev() {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(Grid {
        dim: mean.len(),
        effective_dim: r,
        points,
        weights,
    })
}

/// Equal-weight sample grid from a seeded ChaCha8 stream.
pub fn mc_grid(mean: &DVector<f64>, cov: &DMatrix<f64>, samples: usize, seed: u64) -> Result<Grid> {
    if samples < 2 {
        return Err(Error::Config("Monte Carlo needs at least 2 samples".into()));
    }
    let l = covariance_factor(cov)?;
    let r = l.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xi = DVector::zeros(r);
    let points = (0..samples)
        .map(|_| {
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            (mean + &l * &xi).iter().copied().collect()
        })
        .collect();
    Ok(Grid {
        dim: mean.len(),
        effective_dim: r,
        points,
        weights: vec![1.0 / samples as f64; samples],
    })
}

/// Grid for a backend; quadrature refuses more than `cap` effective dimensions.
pub fn grid_for(mean: &DVector<f64>, cov: &DMatrix<f64>, backend: Backend, cap: usize) -> Result<Grid> {
    match backend {
        Backend::Quadrature { points } => {
            let rule = gauss_hermite_rule(points)?;
            let rank = covariance_factor(cov)?.ncols();
            if rank > cap {
                return Err(Error::DimensionCap { dim: rank, cap });
            }
            tensor_grid(mean, cov, &rule)
        }
        Backend::MonteCarlo { samples, seed } => mc_grid(mean, cov, samples, seed),
    }
}

/// `E[f(x)]` for `x ~ N(mean, cov)`.
pub fn gaussian_expectation(
    f: impl Fn(&[f64]) -> f64,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    backend: Backend,
    cap: usize,
) -> Result<f64> {
    grid_for(mean, cov, backend, cap)?.expect(f)
}

/// Monte Carlo estimate of `E[f(x)]` and its standard error.
pub fn mc_expectation(
    f: impl Fn(&[f64]) -> f64,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let grid = mc_grid(mean, cov, samples, seed)?;
    let values = grid
        .points
        .iter()
        .map(|x| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(non_finite(x, v))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    Ok((m, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn double_factorial_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        (1..k).step_by(2).map(|x| x as f64).product()
    }

    #[test]
    fn small_rules() {
        let r1 = gauss_hermite_rule(1).unwrap();
        assert_eq!(r1.nodes, vec![0.0]);
        assert!((r1.weights[0] - 1.0).abs() < 1e-15);
        let r2 = gauss_hermite_rule(2).unwrap();
        assert!((r2.nodes[1] - 1.0).abs() < 1e-15 && (r2.nodes[0] + 1.0).abs() < 1e-15);
        assert!((r2.weights[0] - 0.5).abs() < 1e-15);
        assert!((r2.expect(|x| x * x) - 1.0).abs() < 1e-15);
        let r3 = gauss_hermite_rule(3).unwrap();
        assert!((r3.nodes[2] - 3f64.sqrt()).abs() < 1e-15);
        assert!((r3.weights[1] - 2.0 / 3.0).abs() < 1e-15 && (r3.weights[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((r3.expect(|x| x.powi(4)) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn out_of_range_counts() {
        assert!(matches!(gauss_hermite_rule(0), Err(Error::Config(_))));
        assert!(matches!(gauss_hermite_rule(MAX_POINTS + 1), Err(Error::Config(_))));
        assert!(gauss_hermite_rule(MAX_POINTS).is_ok());
    }

    #[test]
    fn polynomial_exactness_up_to_ten_points() {
        for n in 1..=10 {
            let rule = gauss_hermite_rule(n).unwrap();
            for k in 0..=(2 * n as u32 - 1) {
                let got = rule.expect(|x| x.powi(k as i32));
                let want = double_factorial_moment(k);
                assert!((got - want).abs() <= 1e-10 * want.max(1.0), "n={n} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn large_rule_is_normalized_and_symmetric() {
        for n in [64, 150] {
            let r = gauss_hermite_rule(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for i in 0..n / 2 {
                assert_eq!(r.nodes[i], -r.nodes[n - 1 - i]);
            }
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!((r.expect(|x| x * x) - 1.0).abs() < 1e-12);
            assert!((r.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
            assert!((r.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_and_affine() {
        let mean = dvector![1.0, -2.0];
        let cov = dmatrix![2.0, 0.6; 0.6, 1.0];
        let b = Backend::Quadrature { points: 4 };
        assert!((gaussian_expectation(|_| 1.0, &mean, &cov, b, 6).unwrap() - 1.0).abs() < 1e-14);
        let ex = gaussian_expectation(|x| x[0] * x[1], &mean, &cov, b, 6).unwrap();
        assert!((ex - (0.6 + 1.0 * -2.0)).abs() < 1e-12);
    }

    #[test]
    fn separable_product() {
        let mean = dvector![0.5, 0.0];
        let cov = dmatrix![1.0, 0.0; 0.0, 4.0];
        let rule = gauss_hermite_rule(5).unwrap();
        let grid = tensor_grid(&mean, &cov, &rule).unwrap();
        let f = |x: f64| (0.3 * x).cos();
        let g = |x: f64| 1.0 / (1.0 + (-x).exp());
        let joint = grid.expect(|x| f(x[0]) * g(x[1])).unwrap();
        let a = rule.expect(|z| f(0.5 + z));
        let b = rule.expect(|z| g(2.0 * z));
        assert!((joint - a * b).abs() < 1e-12);
    }

    #[test]
    fn degenerate_directions_collapse() {
        let mean = dvector![1.0, 2.0];
        let cov = dmatrix![1.0, 1.0; 1.0, 1.0];
        let grid = tensor_grid(&mean, &cov, &gauss_hermite_rule(3).unwrap()).unwrap();
        assert_eq!((grid.effective_dim, grid.len()), (1, 3));
        for p in &grid.points {
            assert!((p[1] - p[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_cap_and_non_finite() {
        let mean = DVector::zeros(7);
        let cov = DMatrix::identity(7, 7);
        assert!(matches!(
            grid_for(&mean, &cov, Backend::Quadrature { points: 2 }, 6),
            Err(Error::DimensionCap { dim: 7, cap: 6 })
        ));
        let e = gaussian_expectation(|x| 1.0 / x[0], &dvector![0.0], &dmatrix![1.0], Backend::Quadrature { points: 3 }, 6);
        assert!(matches!(e, Err(Error::Numerical(m)) if m.contains("[0.0]")));
    }

    #[test]
    fn monte_carlo() {
        let (m, se) = mc_expectation(|_| 2.5, &dvector![0.0], &dmatrix![1.0], 100, 1).unwrap();
        assert_eq!((m, se), (2.5, 0.0));
        let (m, se) = mc_expectation(|x| x[0], &dvector![3.0], &dmatrix![1.0], 1_000_000, 7).unwrap();
        assert!((m - 3.0).abs() < 3.0 * se, "{m} +- {se}");
        let again = mc_expectation(|x| x[0], &dvector![3.0], &dmatrix![1.0], 1000, 7).unwrap();
        assert_eq!(again, mc_expectation(|x| x[0], &dvector![3.0], &dmatrix![1.0], 1000, 7).unwrap());
    }

    #[test]
    fn logistic_variance_against_simpson() {
        // E[s(1-s)] under N(0,1) by composite Simpson on [-10, 10]
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let f = |x: f64| s(x) * (1.0 - s(x)) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let m = 100_000;
        let h = 20.0 / m as f64;
        let mut acc = f(-10.0) + f(10.0);
        for i in 1..m {
            acc += f(-10.0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = acc * h / 3.0;
        let g = |x: f64| s(x) * (1.0 - s(x));
        let five = gauss_hermite_rule(5).unwrap().expect(g);
        assert!((five - 0.2068).abs() < 1e-4);
        assert!((five - oracle).abs() < 5e-4);
        assert!((gauss_hermite_rule(40).unwrap().expect(g) - oracle).abs() < 1e-8);
    }
}
