//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use hessborn::bundle::{born_at, BundlePoint};
use hessborn::integrability::Structure;
use hessborn::sampling::{fiber_samples, sample_points};
use hessborn::{Frame, ManifoldSpec};
use nalgebra::{DMatrix, DVector};

/// `|a − b| / max(1, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// `count` bundle points: box samples paired with fiber samples.
pub fn bundle_points(spec: &ManifoldSpec, count: usize, radius: f64, seed: u64) -> Vec<BundlePoint> {
    let xs = sample_points(spec.sample_box(), count, seed);
    let ys = fiber_samples(spec.dimension(), count, radius, seed);
    xs.into_iter().zip(ys).map(|(x, y)| BundlePoint::new(x, y)).collect()
}

fn operator(spec: &ManifoldSpec, which: Structure, q: &[f64]) -> DMatrix<f64> {
    let n = spec.dimension();
    let p = BundlePoint::new(q[..n].to_vec(), q[n..].to_vec());
    let bf = born_at(spec, &p, Frame::BundleCoordinate).expect("oracle point inside the box");
    match which {
        Structure::I => bf.i_op,
        Structure::J => bf.j_op,
        Structure::K => bf.k_op,
    }
}

/// Central-difference Jacobian `∂ₛFˡ` of a vector field at `q`.
fn jacobian(field: &dyn Fn(&[f64]) -> DVector<f64>, q: &[f64], h: f64) -> DMatrix<f64> {
    let m = q.len();
    let mut out = DMatrix::zeros(m, m);
    for s in 0..m {
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[s] += h;
        minus[s] -= h;
        let d = (field(&plus) - field(&minus)) / (2.0 * h);
        out.set_column(s, &d);
    }
    out
}

/// `[X, Y] = DY·X − DX·Y` with finite-difference Jacobians.
fn bracket(
    x: &dyn Fn(&[f64]) -> DVector<f64>,
    y: &dyn Fn(&[f64]) -> DVector<f64>,
    q: &[f64],
    h: f64,
) -> DVector<f64> {
    jacobian(y, q, h) * x(q) - jacobian(x, q, h) * y(q)
}

/// `N_A(∂ₐ, ∂ᵦ)` straight from `A²[X,Y] − A([AX,Y] + [X,AY]) + [AX,AY]`,
/// with every bracket taken by finite differences of the vector fields.
pub fn nijenhuis_from_definition(
    spec: &ManifoldSpec,
    which: Structure,
    p: &BundlePoint,
    a: usize,
    b: usize,
    h: f64,
) -> DVector<f64> {
    let q = p.coordinates();
    let m = q.len();
    let unit = |c: usize| DVector::from_fn(m, |r, _| if r == c { 1.0 } else { 0.0 });
    let ea = move |_: &[f64]| unit(a);
    let eb = move |_: &[f64]| unit(b);
    let a_ea = |z: &[f64]| operator(spec, which, z) * unit(a);
    let a_eb = |z: &[f64]| operator(spec, which, z) * unit(b);
    let op = operator(spec, which, &q);
    let xy = bracket(&ea, &eb, &q, h);
    let mixed = bracket(&a_ea, &eb, &q, h) + bracket(&ea, &a_eb, &q, h);
    &op * &op * xy - &op * mixed + bracket(&a_ea, &a_eb, &q, h)
}
