//! Affine coordinates for a flat torsion-free connection, built from its
//! exponential map, and the checks that the connection vanishes in them.
//!
//! The chart map is `a ↦ exp_{x₀}(a)`, computed by RK4 on
//! `ẍᵏ + Γᵏᵢⱼ ẋⁱẋʲ = 0` over `t ∈ [0, 1]`. Its first and second derivatives
//! come from running second-order jets in `a` through the same steps.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{block_form_distance, AdaptedFrame, BornFrame, BundlePoint};
use crate::jet::{self, Jet, JetError};
use crate::manifold::{ManifoldError, ManifoldSpec};
use crate::sampling::{euclidean_norm, fiber_samples, sample_points};
use crate::tensor::{Frame, TensorValue, Variance};

pub const DEFAULT_STEPS: usize = 64;
/// Curvature and torsion must stay below this for the chart to be built.
pub const FLATNESS_GATE: f64 = 1e-7;
pub const PUSHFORWARD_TOL: f64 = 1e-6;
const GATE_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("geodesic left the sample box during step {step} of {steps}")]
    ExitedBox { step: usize, steps: usize },
    #[error("connection is not flat and torsion-free (curvature {curvature:e}, torsion {torsion:e})")]
    NotFlat { curvature: f64, torsion: f64 },
    #[error("chart Jacobian is singular at a = {probe:?}")]
    SingularJacobian { probe: Vec<f64> },
    #[error("probe {probe:?} lies outside the validity radius {radius}")]
    OutsideRadius { probe: Vec<f64>, radius: f64 },
    #[error("step count must be at least 1")]
    NoSteps,
}

pub type Result<T> = std::result::Result<T, ChartError>;

/// Geodesic acceleration `−Γᵏᵢⱼ vⁱ vʲ` for plain values.
fn acceleration(spec: &ManifoldSpec, x: &[f64], v: &[f64]) -> std::result::Result<Vec<f64>, ManifoldError> {
    let gamma = spec.connection_at(x)?;
    let n = x.len();
    Ok((0..n)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc -= gamma.get(&[k, i, j]) * v[i] * v[j];
                }
            }
            acc
        })
        .collect())
}

/// Geodesic acceleration at a jet-valued state: the connection is expanded
/// around the state's value and composed with the state.
fn acceleration_jets(spec: &ManifoldSpec, x: &[Jet], v: &[Jet]) -> std::result::Result<Vec<Jet>, ManifoldError> {
    let n = x.len();
    let order = x[0].order();
    let at: Vec<f64> = x.iter().map(Jet::value).collect();
    let gamma = spec.connection_jets(&at, order)?;
    let mut out = Vec::with_capacity(n);
    for plane in gamma.iter() {
        let mut acc = x[0].zero_like();
        for i in 0..n {
            for j in 0..n {
                if plane[i][j].max_abs_coefficient() == 0.0 {
                    continue;
                }
                acc = acc - &(&plane[i][j].compose(x) * &(&v[i] * &v[j]));
            }
        }
        out.push(acc);
    }
    Ok(out)
}

/// Arithmetic needed by the RK4 step, shared by `f64` and jets.
trait State: Clone {
    fn axpy(&self, h: f64, d: &Self) -> Self;
}

impl State for f64 {
    fn axpy(&self, h: f64, d: &f64) -> f64 {
        self + h * d
    }
}

impl State for Jet {
    fn axpy(&self, h: f64, d: &Jet) -> Jet {
        self + &(d * h)
    }
}

fn axpy<T: State>(x: &[T], h: f64, d: &[T]) -> Vec<T> {
    x.iter().zip(d).map(|(a, b)| a.axpy(h, b)).collect()
}

fn rk4<T: State>(
    x0: Vec<T>,
    v0: Vec<T>,
    steps: usize,
    accel: impl Fn(&[T], &[T]) -> std::result::Result<Vec<T>, ManifoldError>,
    inside: impl Fn(&[T]) -> bool,
) -> Result<Vec<T>> {
    if steps == 0 {
        return Err(ChartError::NoSteps);
    }
    let h = 1.0 / steps as f64;
    let (mut x, mut v) = (x0, v0);
    for step in 1..=steps {
        let exited = |e: ManifoldError| match e {
            ManifoldError::OutsideBox { .. } => ChartError::ExitedBox { step, steps },
            other => ChartError::Manifold(other),
        };
        let a1 = accel(&x, &v).map_err(exited)?;
        let (x2, v2) = (axpy(&x, h / 2.0, &v), axpy(&v, h / 2.0, &a1));
        let a2 = accel(&x2, &v2).map_err(exited)?;
        let (x3, v3) = (axpy(&x, h / 2.0, &v2), axpy(&v, h / 2.0, &a2));
        let a3 = accel(&x3, &v3).map_err(exited)?;
        let (x4, v4) = (axpy(&x, h, &v3), axpy(&v, h, &a3));
        let a4 = accel(&x4, &v4).map_err(exited)?;
        let combine = |y: &[T], d1: &[T], d2: &[T], d3: &[T], d4: &[T]| -> Vec<T> {
            let y = axpy(y, h / 6.0, d1);
            let y = axpy(&y, h / 3.0, d2);
            let y = axpy(&y, h / 3.0, d3);
            axpy(&y, h / 6.0, d4)
        };
        let nx = combine(&x, &v, &v2, &v3, &v4);
        let nv = combine(&v, &a1, &a2, &a3, &a4);
        if !inside(&nx) {
            return Err(ChartError::ExitedBox { step, steps });
        }
        x = nx;
        v = nv;
    }
    Ok(x)
}

/// Endpoint at `t = 1` of the geodesic from `x0` with initial velocity `v`.
pub fn geodesic_integrate(spec: &ManifoldSpec, x0: &[f64], v: &[f64], steps: usize) -> Result<Vec<f64>> {
    if !spec.contains(x0) {
        return Err(ChartError::ExitedBox { step: 0, steps });
    }
    rk4(x0.to_vec(), v.to_vec(), steps, |x, v| acceleration(spec, x, v), |x| spec.contains(x))
}

/// Endpoint jets of order `order` in the initial velocity, expanded at `v`.
pub fn geodesic_integrate_jets(
    spec: &ManifoldSpec,
    x0: &[f64],
    v: &[f64],
    steps: usize,
    order: usize,
) -> Result<Vec<Jet>> {
    if !spec.contains(x0) {
        return Err(ChartError::ExitedBox { step: 0, steps });
    }
    let vj = jet::seed(v, order)?;
    let xj: Vec<Jet> = x0.iter().map(|c| vj[0].lift(*c)).collect();
    rk4(
        xj,
        vj,
        steps,
        |x, v| acceleration_jets(spec, x, v),
        |x| spec.contains(&x.iter().map(Jet::value).collect::<Vec<_>>()),
    )
}

/// Largest curvature and torsion component over the box samples and `extra`.
pub fn flatness_residuals(spec: &ManifoldSpec, extra: &[f64], seed: u64) -> Result<(f64, f64)> {
    let mut points = sample_points(spec.sample_box(), GATE_POINTS, seed);
    points.push(extra.to_vec());
    let (mut r, mut t) = (0.0_f64, 0.0_f64);
    for p in &points {
        r = r.max(spec.curvature_at(p)?.max_abs());
        t = t.max(spec.torsion_at(p)?.max_abs());
    }
    Ok((r, t))
}

/// `a ↦ exp_{x₀}(a)`, trusted for `|a| ≤ radius`.
#[derive(Debug, Clone)]
pub struct ChartMap {
    spec: ManifoldSpec,
    pub base: Vec<f64>,
    pub steps: usize,
    pub radius: f64,
}

/// Value, Jacobian `∂xᵏ/∂aᵃ` and Hessians `∂²xᵏ/∂aᵃ∂aᵇ` of the chart map.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDerivatives {
    pub point: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    /// `second[k][(a, b)]`
    pub second: Vec<DMatrix<f64>>,
}

impl ChartMap {
    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn map(&self, a: &[f64]) -> Result<Vec<f64>> {
        geodesic_integrate(&self.spec, &self.base, a, self.steps)
    }

    pub fn derivatives(&self, a: &[f64]) -> Result<ChartDerivatives> {
        let jets = geodesic_integrate_jets(&self.spec, &self.base, a, self.steps, 2)?;
        let n = a.len();
        Ok(ChartDerivatives {
            point: jets.iter().map(Jet::value).collect(),
            jacobian: DMatrix::from_fn(n, n, |k, i| jets[k].partial(&[i])),
            second: jets
                .iter()
                .map(|x| DMatrix::from_fn(n, n, |i, j| x.partial(&[i, j])))
                .collect(),
        })
    }

    fn check_probe(&self, a: &[f64]) -> Result<()> {
        if euclidean_norm(a) > self.radius {
            return Err(ChartError::OutsideRadius {
                probe: a.to_vec(),
                radius: self.radius,
            });
        }
        Ok(())
    }

    /// Connection coefficients in the chart:
    /// `Γ'ᶜₐᵦ = (J⁻¹)ᶜₖ (Jⁱₐ Jʲᵦ Γᵏᵢⱼ + ∂²xᵏ/∂aᵃ∂aᵇ)`.
    pub fn connection_in_chart(&self, a: &[f64]) -> Result<TensorValue> {
        self.check_probe(a)?;
        let d = self.derivatives(a)?;
        let n = a.len();
        let jinv = d
            .jacobian
            .clone()
            .try_inverse()
            .ok_or_else(|| ChartError::SingularJacobian { probe: a.to_vec() })?;
        let gamma = self.spec.connection_at(&d.point)?;
        let mut out = TensorValue::zeros(
            n,
            vec![Variance::Upper, Variance::Lower, Variance::Lower],
            Frame::BaseCoordinate,
            a,
        );
        for c in 0..n {
            for x in 0..n {
                for y in 0..n {
                    let mut v = 0.0;
                    for k in 0..n {
                        let mut inner = d.second[k][(x, y)];
                        for i in 0..n {
                            for j in 0..n {
                                inner += d.jacobian[(i, x)] * d.jacobian[(j, y)] * gamma.get(&[k, i, j]);
                            }
                        }
                        v += jinv[(c, k)] * inner;
                    }
                    out.set(&[c, x, y], v);
                }
            }
        }
        Ok(out)
    }

    /// Metric in the chart, `g' = Jᵀ g J`.
    pub fn metric_in_chart(&self, a: &[f64]) -> Result<DMatrix<f64>> {
        self.check_probe(a)?;
        let d = self.derivatives(a)?;
        let g = self.spec.metric_at(&d.point)?;
        let n = a.len();
        let gm = DMatrix::from_fn(n, n, |i, j| g.get(&[i, j]));
        Ok(d.jacobian.transpose() * gm * &d.jacobian)
    }

    /// Born tensors of the chart's bundle coordinates at `(a, y)`, compared
    /// with the constant/`G`-block form.
    pub fn born_block_residuals(&self, a: &[f64], y: &[f64]) -> Result<crate::bundle::AffineFormResiduals> {
        let gamma = self.connection_in_chart(a)?;
        let g = self.metric_in_chart(a)?;
        let point = BundlePoint::new(a.to_vec(), y.to_vec());
        let frame = AdaptedFrame::from_coefficients(&gamma, y);
        let bf = BornFrame::adapted(&g, point).convert(&frame);
        Ok(block_form_distance(&bf, &g))
    }
}

/// Half the smallest box half-width.
pub fn default_radius(spec: &ManifoldSpec) -> f64 {
    0.5 * spec
        .sample_box()
        .iter()
        .map(|[lo, hi]| 0.5 * (hi - lo))
        .fold(f64::INFINITY, f64::min)
}

/// Builds the exponential chart at `x0` after checking flatness and torsion.
pub fn exponential_chart(spec: &ManifoldSpec, x0: &[f64], steps: usize) -> Result<ChartMap> {
    if !spec.contains(x0) {
        return Err(ManifoldError::OutsideBox { point: x0.to_vec() }.into());
    }
    let (curvature, torsion) = flatness_residuals(spec, x0, crate::sampling::DEFAULT_SEED)?;
    if curvature > FLATNESS_GATE || torsion > FLATNESS_GATE {
        return Err(ChartError::NotFlat { curvature, torsion });
    }
    Ok(ChartMap {
        spec: spec.clone(),
        base: x0.to_vec(),
        steps,
        radius: default_radius(spec),
    })
}

/// `max |Γ'|` over the probes.
pub fn pushforward_connection_residual(chart: &ChartMap, probes: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in probes {
        worst = worst.max(chart.connection_in_chart(a)?.max_abs());
    }
    Ok(worst)
}

/// RK4 self-convergence from `steps` to `2·steps` to `4·steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub steps: usize,
    /// `|x(N) − x(2N)|`
    pub coarse_error: f64,
    /// `|x(2N) − x(4N)|`
    pub fine_error: f64,
    pub contraction: f64,
}

pub fn rk4_convergence(spec: &ManifoldSpec, x0: &[f64], v: &[f64], steps: usize) -> Result<Convergence> {
    let x1 = geodesic_integrate(spec, x0, v, steps)?;
    let x2 = geodesic_integrate(spec, x0, v, 2 * steps)?;
    let x4 = geodesic_integrate(spec, x0, v, 4 * steps)?;
    let dist = |a: &[f64], b: &[f64]| euclidean_norm(&a.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    let coarse_error = dist(&x1, &x2);
    let fine_error = dist(&x2, &x4);
    Ok(Convergence {
        steps,
        coarse_error,
        fine_error,
        contraction: coarse_error / fine_error,
    })
}

/// Witness summary for the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartWitness {
    pub base: Vec<f64>,
    pub steps: usize,
    pub radius: f64,
    pub max_curvature: f64,
    pub max_torsion: f64,
    pub probes: usize,
    pub pushforward_residual: f64,
    /// Distance of `I, J, K` from the constant blocks in the chart.
    pub born_operator_residual: f64,
    /// `|x(steps) − x(2·steps)|` for the largest probe.
    pub step_halving_error: f64,
    pub passed: bool,
}

pub fn chart_witness(
    spec: &ManifoldSpec,
    x0: &[f64],
    steps: usize,
    probe_count: usize,
    seed: u64,
) -> Result<ChartWitness> {
    let chart = exponential_chart(spec, x0, steps)?;
    let (max_curvature, max_torsion) = flatness_residuals(spec, x0, crate::sampling::DEFAULT_SEED)?;
    let n = spec.dimension();
    let mut probes = vec![vec![0.0; n]];
    probes.extend(fiber_samples(n, probe_count.saturating_sub(1), chart.radius, seed));
    let fibers = fiber_samples(n, probes.len(), 1.0, seed.wrapping_add(1));
    let pushforward_residual = pushforward_connection_residual(&chart, &probes)?;
    let mut born_operator_residual: f64 = 0.0;
    for (a, y) in probes.iter().zip(&fibers) {
        born_operator_residual = born_operator_residual.max(chart.born_block_residuals(a, y)?.operators_max());
    }
    let widest = probes
        .iter()
        .max_by(|a, b| euclidean_norm(a).total_cmp(&euclidean_norm(b)))
        .expect("at least the origin probe");
    let coarse = geodesic_integrate(spec, x0, widest, steps)?;
    let fine = geodesic_integrate(spec, x0, widest, 2 * steps)?;
    let step_halving_error = euclidean_norm(&coarse.iter().zip(&fine).map(|(p, q)| p - q).collect::<Vec<_>>());
    Ok(ChartWitness {
        base: x0.to_vec(),
        steps,
        radius: chart.radius,
        max_curvature,
        max_torsion,
        probes: probes.len(),
        pushforward_residual,
        born_operator_residual,
        step_halving_error,
        passed: pushforward_residual <= PUSHFORWARD_TOL && born_operator_residual <= PUSHFORWARD_TOL,
    })
}
