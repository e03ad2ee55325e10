//! Gauss-Hermite rules: exact on low-degree polynomials, fast on smooth integrands.

use nalgebra::{dmatrix, dvector};

use clgnet::quadrature::{gauss_hermite_rule, tensor_grid};

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn main() -> clgnet::Result<()> {
    let rule = gauss_hermite_rule(5)?;
    println!("5-point rule, standard normal:");
    for (name, f, exact) in [
        ("x^2", (|x: f64| x * x) as fn(f64) -> f64, 1.0),
        ("x^8", |x: f64| x.powi(8), 105.0),
        ("x^10", |x: f64| x.powi(10), 945.0), // degree 10 > 2n - 1, so not exact
    ] {
        println!("  E[{name}] = {:.6} (exact {exact})", rule.expect(f));
    }

    // E[logistic(3x)] = 1/2 by symmetry; the shifted version converges with n
    println!("E[logistic(3x + 1)] by points:");
    for n in [2, 3, 5, 10, 20, 40] {
        let r = gauss_hermite_rule(n)?;
        println!("  {n:>2}: {:.10}", r.expect(|x| logistic(3.0 * x + 1.0)));
    }

    // a correlated 2-D tensor grid
    let mean = dvector![1.0, -0.5];
    let cov = dmatrix![1.0, 0.6; 0.6, 2.0];
    let grid = tensor_grid(&mean, &cov, &gauss_hermite_rule(4)?)?;
    let cross = grid.expect(|z| (z[0] - 1.0) * (z[1] + 0.5))?;
    println!("2-D grid, {} nodes: Cov(x, y) = {cross:.12} (exact 0.6)", grid.len());
    Ok(())
}
