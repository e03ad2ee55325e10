//! Gaussian algebra in canonical form: multiply, marginalize, condition, collapse.

use nalgebra::{dmatrix, dvector};

use clgnet::canonical::{collapse, CanonicalForm, GaussianMoments};
use clgnet::VarId;

fn main() -> clgnet::Result<()> {
    let (x, y) = (VarId(0), VarId(1));

    // X ~ N(1, 2)
    let px = CanonicalForm::from_moments(vec![x], &GaussianMoments::new(1.0, dvector![1.0], dmatrix![2.0]))?;

    // Y | X ~ N(0.5 x + 1, 0.75) as exp(g + h'z - z'Kz/2) over z = (x, y)
    let (a, b, v) = (0.5, 1.0, 0.75);
    let g = -b * b / (2.0 * v) - 0.5 * (2.0 * std::f64::consts::PI * v).ln();
    let h = dvector![-a * b / v, b / v];
    let k = dmatrix![a * a / v, -a / v; -a / v, 1.0 / v];
    let py_x = CanonicalForm::new(vec![x, y], g, h, k);

    let joint = px.extend(&[x, y])?.multiply(&py_x);
    let m = joint.to_moments()?;
    println!("joint mean {:?}", m.mean.as_slice());
    println!("joint cov  {:?}", m.cov.as_slice());
    println!("joint mass {:.12}", m.weight());

    let py = joint.marginalize(&[x])?.to_moments()?;
    println!("Y: mean {:.4} var {:.4}", py.mean[0], py.cov[(0, 0)]);

    // observe Y = 2.5; the leftover mass is the density p(y = 2.5)
    let post = joint.reduce(y, 2.5)?.to_moments()?;
    println!(
        "X | Y=2.5: mean {:.4} var {:.4}, p(y) {:.6}",
        post.mean[0],
        post.cov[(0, 0)],
        post.weight()
    );

    // weak marginalization of a two-component mixture keeps mass, mean and variance
    let mix = [
        GaussianMoments::new(0.3, dvector![-1.0], dmatrix![0.5]),
        GaussianMoments::new(0.7, dvector![2.0], dmatrix![1.0]),
    ];
    let c = collapse(&mix)?;
    println!("collapsed: weight {:.3} mean {:.3} var {:.3}", c.weight(), c.mean[0], c.cov[(0, 0)]);
    Ok(())
}
