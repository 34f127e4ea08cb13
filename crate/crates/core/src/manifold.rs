//! Base-manifold geometry in a single chart: metric, connection, torsion,
//! curvature, dual connection, `∇g`, Levi-Civita connection and the Hessian
//! verdicts built on them.
//!
//! Index conventions:
//! - `Γ[k][i][j] = Γᵏᵢⱼ` with `∇_{∂ᵢ}∂ⱼ = Γᵏᵢⱼ ∂ₖ`.
//! - `Tᵏᵢⱼ = Γᵏᵢⱼ − Γᵏⱼᵢ`.
//! - `Rˡᵢⱼₖ = ∂ᵢΓˡⱼₖ − ∂ⱼΓˡᵢₖ + ΓˡᵢₘΓᵐⱼₖ − ΓˡⱼₘΓᵐᵢₖ`, i.e. `R(∂ᵢ,∂ⱼ)∂ₖ = Rˡᵢⱼₖ∂ₗ`.
//! - `(∇g)ᵢ;ⱼₖ = (∇_{∂ᵢ}g)(∂ⱼ,∂ₖ)`.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::jet::{self, Jet, JetError};
use crate::tensor::{jet_inverse, JetMatrix, TensorValue, Variance};
use crate::tensor::Frame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid sample box: {0}")]
    InvalidBox(String),
    #[error("point {point:?} lies outside the sample box")]
    OutsideBox { point: Vec<f64> },
    #[error("metric is not positive definite at {point:?} (smallest pivot {pivot:e})")]
    NotPositiveDefinite { point: Vec<f64>, pivot: f64 },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Vec<f64> },
    #[error("evaluating {field} at {point:?}: {source}")]
    Eval {
        field: String,
        point: Vec<f64>,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("at least one sample point is required")]
    NoSamples,
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// How the metric is given.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricField {
    /// Explicit `gᵢⱼ` grid.
    Components(Vec<Vec<Expr>>),
    /// `gᵢⱼ = ∂ᵢ∂ⱼφ` in this chart.
    Potential(Expr),
}

/// How the affine connection is given.
#[derive(Debug, Clone, PartialEq)]
pub enum Connection {
    /// All coefficients vanish in this chart.
    Flat,
    LeviCivita,
    /// Dual of the chart-flat connection with respect to the metric.
    HessianDual,
    /// Explicit grid, `gamma[k][i][j] = Γᵏᵢⱼ`.
    Explicit(Vec<Vec<Vec<Expr>>>),
}

impl Connection {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Connection::Flat => "flat",
            Connection::LeviCivita => "levi-civita",
            Connection::HessianDual => "hessian-dual",
            Connection::Explicit(_) => "explicit",
        }
    }

    /// True when every coefficient is literally zero in this chart.
    pub fn vanishes_identically(&self) -> bool {
        match self {
            Connection::Flat => true,
            Connection::Explicit(gamma) => gamma
                .iter()
                .flatten()
                .flatten()
                .all(|e| e.as_constant() == Some(0.0)),
            _ => false,
        }
    }
}

/// A manifold chart with metric, connection and a sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub name: String,
    coords: Vec<String>,
    metric: MetricField,
    connection: Connection,
    sample_box: Vec<[f64; 2]>,
    symmetrize_metric: bool,
}

impl ManifoldSpec {
    pub fn new(
        name: impl Into<String>,
        coords: Vec<String>,
        metric: MetricField,
        connection: Connection,
        sample_box: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let n = coords.len();
        let mismatch = |what: &str, found: usize| ManifoldError::DimensionMismatch {
            what: what.to_string(),
            expected: n,
            found,
        };
        if n == 0 {
            return Err(mismatch("coordinates", 0));
        }
        let symmetrize_metric = match &metric {
            MetricField::Components(rows) => {
                if rows.len() != n {
                    return Err(mismatch("metric rows", rows.len()));
                }
                for row in rows {
                    if row.len() != n {
                        return Err(mismatch("metric columns", row.len()));
                    }
                    for e in row {
                        if e.dimension() != n {
                            return Err(mismatch("metric expression coordinates", e.dimension()));
                        }
                    }
                }
                (0..n).any(|i| (0..i).any(|j| rows[i][j].to_string() != rows[j][i].to_string()))
            }
            MetricField::Potential(phi) => {
                if phi.dimension() != n {
                    return Err(mismatch("potential coordinates", phi.dimension()));
                }
                false
            }
        };
        if let Connection::Explicit(gamma) = &connection {
            if gamma.len() != n {
                return Err(mismatch("connection upper index", gamma.len()));
            }
            for plane in gamma {
                if plane.len() != n {
                    return Err(mismatch("connection first lower index", plane.len()));
                }
                for row in plane {
                    if row.len() != n {
                        return Err(mismatch("connection second lower index", row.len()));
                    }
                    if let Some(e) = row.iter().find(|e| e.dimension() != n) {
                        return Err(mismatch("connection expression coordinates", e.dimension()));
                    }
                }
            }
        }
        if sample_box.len() != n {
            return Err(mismatch("sample box", sample_box.len()));
        }
        for (i, [lo, hi]) in sample_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ManifoldError::InvalidBox(format!(
                    "interval {i} is [{lo}, {hi}]"
                )));
            }
        }
        Ok(ManifoldSpec {
            name: name.into(),
            coords,
            metric,
            connection,
            sample_box,
            symmetrize_metric,
        })
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coordinates(&self) -> &[String] {
        &self.coords
    }

    pub fn metric_field(&self) -> &MetricField {
        &self.metric
    }

    pub fn connection(&self) -> &Connection {
        &self.connection
    }

    pub fn sample_box(&self) -> &[[f64; 2]] {
        &self.sample_box
    }

    /// Whether the written metric grid was asymmetric and is averaged on evaluation.
    pub fn metric_symmetrized(&self) -> bool {
        self.symmetrize_metric
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dimension()
            && p
                .iter()
                .zip(&self.sample_box)
                .all(|(x, [lo, hi])| *lo <= *x && *x <= *hi)
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dimension() {
            return Err(ManifoldError::DimensionMismatch {
                what: "point".into(),
                expected: self.dimension(),
                found: p.len(),
            });
        }
        if !self.contains(p) {
            return Err(ManifoldError::OutsideBox { point: p.to_vec() });
        }
        Ok(())
    }

    fn eval(&self, field: impl FnOnce() -> String, e: &Expr, args: &[Jet]) -> Result<Jet> {
        e.evaluate(args).map_err(|source| ManifoldError::Eval {
            field: field(),
            point: args.iter().map(Jet::value).collect(),
            source,
        })
    }

    // -----------------------------------------------------------------------
    // Jet-valued fields. Every function returns jets of exactly `order`.

    /// Metric components with derivatives through `order`, checked SPD at `p`.
    pub fn metric_jets(&self, p: &[f64], order: usize) -> Result<JetMatrix> {
        self.check_point(p)?;
        let args = seeds(p, order)?;
        self.metric_jets_at(&args, p)
    }

    /// Metric evaluated on arbitrary (seeded) arguments.
    fn metric_jets_at(&self, args: &[Jet], p: &[f64]) -> Result<JetMatrix> {
        let n = self.dimension();
        let order = args[0].order();
        let zero = args[0].zero_like();
        let mut g: JetMatrix = vec![vec![zero; n]; n];
        match &self.metric {
            MetricField::Components(rows) => {
                for i in 0..n {
                    for j in i..n {
                        let gij = self.eval(|| format!("metric[{i}][{j}]"), &rows[i][j], args)?;
                        let value = if self.symmetrize_metric && i != j {
                            let gji = self.eval(|| format!("metric[{j}][{i}]"), &rows[j][i], args)?;
                            (gij + gji) * 0.5
                        } else {
                            gij
                        };
                        g[j][i] = value.clone();
                        g[i][j] = value;
                    }
                }
            }
            MetricField::Potential(phi) => {
                let raised = seeds(p, order + 2)?;
                let phi = self.eval(|| "potential".into(), phi, &raised)?;
                for i in 0..n {
                    let di = phi.derivative(i);
                    for j in i..n {
                        let value = di.derivative(j);
                        g[j][i] = value.clone();
                        g[i][j] = value;
                    }
                }
            }
        }
        check_positive_definite(&g, p)?;
        Ok(g)
    }

    /// Connection coefficients with derivatives through `order`.
    pub fn connection_jets(&self, p: &[f64], order: usize) -> Result<Vec<JetMatrix>> {
        self.check_point(p)?;
        match &self.connection {
            Connection::Flat => {
                let zero = seeds(p, order)?[0].zero_like();
                Ok(zero_gamma(&zero, self.dimension()))
            }
            Connection::Explicit(gamma) => {
                let args = seeds(p, order)?;
                let n = self.dimension();
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let mut plane = Vec::with_capacity(n);
                    for i in 0..n {
                        let mut row = Vec::with_capacity(n);
                        for j in 0..n {
                            row.push(self.eval(|| format!("gamma[{k}][{i}][{j}]"), &gamma[k][i][j], &args)?);
                        }
                        plane.push(row);
                    }
                    out.push(plane);
                }
                Ok(out)
            }
            Connection::LeviCivita => self.levi_civita_jets(p, order),
            Connection::HessianDual => {
                let g1 = self.metric_jets(p, order + 1)?;
                let flat = zero_gamma(&g1[0][0].truncate(order).zero_like(), self.dimension());
                dual_of(&flat, &g1, p)
            }
        }
    }

    /// Levi-Civita coefficients of the metric, whatever the spec's connection.
    pub fn levi_civita_jets(&self, p: &[f64], order: usize) -> Result<Vec<JetMatrix>> {
        let n = self.dimension();
        let g1 = self.metric_jets(p, order + 1)?;
        let g = truncate_matrix(&g1, order);
        let ginv = jet_inverse(&g).ok_or_else(|| ManifoldError::SingularMetric { point: p.to_vec() })?;
        // dg[l][i][j] = ∂ₗ gᵢⱼ
        let dg: Vec<JetMatrix> = (0..n)
            .map(|l| {
                g1.iter()
                    .map(|row| row.iter().map(|gij| gij.derivative(l)).collect())
                    .collect()
            })
            .collect();
        let zero = g[0][0].zero_like();
        let mut gamma = zero_gamma(&zero, n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut acc = zero.clone();
                    for l in 0..n {
                        let bracket = &(&dg[i][l][j] + &dg[j][l][i]) - &dg[l][i][j];
                        acc = acc + &ginv[k][l] * &bracket;
                    }
                    let value = acc * 0.5;
                    gamma[k][j][i] = value.clone();
                    gamma[k][i][j] = value;
                }
            }
        }
        Ok(gamma)
    }

    /// Dual connection of the spec's connection, through `order`.
    pub fn dual_connection_jets(&self, p: &[f64], order: usize) -> Result<Vec<JetMatrix>> {
        let gamma = self.connection_jets(p, order)?;
        let g1 = self.metric_jets(p, order + 1)?;
        dual_of(&gamma, &g1, p)
    }

    // -----------------------------------------------------------------------
    // Values at a point.

    pub fn metric_at(&self, p: &[f64]) -> Result<TensorValue> {
        let g = self.metric_jets(p, 0)?;
        Ok(matrix_tensor(&g, p))
    }

    pub fn connection_at(&self, p: &[f64]) -> Result<TensorValue> {
        Ok(gamma_tensor(&self.connection_jets(p, 0)?, p))
    }

    pub fn levi_civita_at(&self, p: &[f64]) -> Result<TensorValue> {
        self.check_point(p)?;
        Ok(gamma_tensor(&self.levi_civita_jets(p, 0)?, p))
    }

    pub fn dual_connection_at(&self, p: &[f64]) -> Result<TensorValue> {
        Ok(gamma_tensor(&self.dual_connection_jets(p, 0)?, p))
    }

    /// Dual of arbitrary coefficients `gamma` with respect to this metric.
    pub fn dual_connection_of(&self, p: &[f64], gamma: &TensorValue) -> Result<TensorValue> {
        let n = self.dimension();
        let g1 = self.metric_jets(p, 1)?;
        let zero = g1[0][0].truncate(0).zero_like();
        let coeffs: Vec<JetMatrix> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| (0..n).map(|j| zero.lift(gamma.get(&[k, i, j]))).collect())
                    .collect()
            })
            .collect();
        Ok(gamma_tensor(&dual_of(&coeffs, &g1, p)?, p))
    }

    pub fn torsion_at(&self, p: &[f64]) -> Result<TensorValue> {
        Ok(torsion_of(&self.connection_at(p)?))
    }

    pub fn curvature_at(&self, p: &[f64]) -> Result<TensorValue> {
        let gamma = self.connection_jets(p, 1)?;
        Ok(curvature_of(&gamma, p))
    }

    /// `(∇g)ᵢ;ⱼₖ` and its largest deviation from total symmetry.
    pub fn nabla_g_at(&self, p: &[f64]) -> Result<(TensorValue, f64)> {
        let n = self.dimension();
        let gamma = self.connection_at(p)?;
        let g1 = self.metric_jets(p, 1)?;
        let mut t = TensorValue::zeros(n, vec![Variance::Lower; 3], Frame::BaseCoordinate, p);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = g1[j][k].partial(&[i]);
                    for l in 0..n {
                        v -= gamma.get(&[l, i, j]) * g1[l][k].value();
                        v -= gamma.get(&[l, i, k]) * g1[j][l].value();
                    }
                    t.set(&[i, j, k], v);
                }
            }
        }
        let asymmetry = total_asymmetry(&t);
        Ok((t, asymmetry))
    }
}

/// Seeds at `order`, allowing order 0 (value-only) as a truncation of order 1.
fn seeds(p: &[f64], order: usize) -> Result<Vec<Jet>> {
    if order == 0 {
        Ok(jet::seed(p, 1)?.iter().map(|j| j.truncate(0)).collect())
    } else {
        Ok(jet::seed(p, order)?)
    }
}

fn zero_gamma(zero: &Jet, n: usize) -> Vec<JetMatrix> {
    vec![vec![vec![zero.clone(); n]; n]; n]
}

fn truncate_matrix(m: &JetMatrix, order: usize) -> JetMatrix {
    m.iter()
        .map(|row| row.iter().map(|j| j.truncate(order)).collect())
        .collect()
}

/// `Γ*ˡᵢₖ = gˡʲ(∂ᵢgⱼₖ − Γᵐᵢⱼ gₘₖ)`; `gamma` has order `q`, `g1` order `q + 1`.
fn dual_of(gamma: &[JetMatrix], g1: &JetMatrix, p: &[f64]) -> Result<Vec<JetMatrix>> {
    let n = g1.len();
    let order = gamma[0][0][0].order();
    let g = truncate_matrix(g1, order);
    let ginv = jet_inverse(&g).ok_or_else(|| ManifoldError::SingularMetric { point: p.to_vec() })?;
    let zero = g[0][0].zero_like();
    // inner[i][j][k] = ∂ᵢgⱼₖ − Γᵐᵢⱼ gₘₖ
    let inner: Vec<JetMatrix> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            let mut v = g1[j][k].derivative(i);
                            for m in 0..n {
                                v = v - &gamma[m][i][j] * &g[m][k];
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out = zero_gamma(&zero, n);
    for l in 0..n {
        for i in 0..n {
            for k in 0..n {
                let mut acc = zero.clone();
                for j in 0..n {
                    acc = acc + &ginv[l][j] * &inner[i][j][k];
                }
                out[l][i][k] = acc;
            }
        }
    }
    Ok(out)
}

fn check_positive_definite(g: &JetMatrix, p: &[f64]) -> Result<()> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
    let mut smallest = f64::INFINITY;
    for k in 0..n {
        let pivot = a[k][k];
        smallest = smallest.min(pivot);
        if !(pivot > 0.0) {
            return Err(ManifoldError::NotPositiveDefinite {
                point: p.to_vec(),
                pivot,
            });
        }
        for i in k + 1..n {
            let factor = a[i][k] / pivot;
            for j in k..n {
                a[i][j] -= factor * a[k][j];
            }
        }
    }
    debug_assert!(smallest > 0.0);
    Ok(())
}

fn matrix_tensor(g: &JetMatrix, p: &[f64]) -> TensorValue {
    let n = g.len();
    let mut t = TensorValue::zeros(n, vec![Variance::Lower; 2], Frame::BaseCoordinate, p);
    for i in 0..n {
        for j in 0..n {
            t.set(&[i, j], g[i][j].value());
        }
    }
    t
}

fn gamma_tensor(gamma: &[JetMatrix], p: &[f64]) -> TensorValue {
    let n = gamma.len();
    let mut t = TensorValue::zeros(
        n,
        vec![Variance::Upper, Variance::Lower, Variance::Lower],
        Frame::BaseCoordinate,
        p,
    );
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                t.set(&[k, i, j], gamma[k][i][j].value());
            }
        }
    }
    t
}

/// `Tᵏᵢⱼ = Γᵏᵢⱼ − Γᵏⱼᵢ` for coefficients stored as `[k, i, j]`.
pub fn torsion_of(gamma: &TensorValue) -> TensorValue {
    let n = gamma.dim;
    let mut t = TensorValue::zeros(n, gamma.variance.clone(), gamma.frame, &gamma.point);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                t.set(&[k, i, j], gamma.get(&[k, i, j]) - gamma.get(&[k, j, i]));
            }
        }
    }
    t
}

/// `Rˡᵢⱼₖ` from order-1 connection jets.
fn curvature_of(gamma: &[JetMatrix], p: &[f64]) -> TensorValue {
    let n = gamma.len();
    let mut r = TensorValue::zeros(
        n,
        vec![Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower],
        Frame::BaseCoordinate,
        p,
    );
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = gamma[l][j][k].partial(&[i]) - gamma[l][i][k].partial(&[j]);
                    for m in 0..n {
                        v += gamma[l][i][m].value() * gamma[m][j][k].value()
                            - gamma[l][j][m].value() * gamma[m][i][k].value();
                    }
                    r.set(&[l, i, j, k], v);
                }
            }
        }
    }
    r
}

/// Fully lowered curvature `out[a,b,c,d] = g(R(∂c,∂d)∂b, ∂a) = gₐₘ Rᵐ_cdb`.
pub fn lower_curvature(r: &TensorValue, g: &TensorValue) -> TensorValue {
    let n = r.dim;
    let mut out = TensorValue::zeros(n, vec![Variance::Lower; 4], r.frame, &r.point);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let v = (0..n).map(|m| g.get(&[a, m]) * r.get(&[m, c, d, b])).sum();
                    out.set(&[a, b, c, d], v);
                }
            }
        }
    }
    out
}

/// Largest `|t − σ·t|` over all permutations σ of a rank-3 tensor's indices.
pub fn total_asymmetry(t: &TensorValue) -> f64 {
    let n = t.dim;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let base = t.get(&[i, j, k]);
                for perm in [[i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]] {
                    worst = worst.max((base - t.get(&perm)).abs());
                }
            }
        }
    }
    worst
}

/// Outcome of the Hessian check over sampled points of one chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianVerdict {
    pub is_hessian: bool,
    pub max_curvature: f64,
    pub max_torsion: f64,
    pub max_nabla_g_asymmetry: f64,
    pub tol: f64,
    pub points: usize,
}

pub fn hessian_verdict(spec: &ManifoldSpec, points: &[Vec<f64>], tol: f64) -> Result<HessianVerdict> {
    if points.is_empty() {
        return Err(ManifoldError::NoSamples);
    }
    let (mut max_curvature, mut max_torsion, mut max_asym) = (0.0_f64, 0.0_f64, 0.0_f64);
    for p in points {
        max_curvature = max_curvature.max(spec.curvature_at(p)?.max_abs());
        max_torsion = max_torsion.max(spec.torsion_at(p)?.max_abs());
        max_asym = max_asym.max(spec.nabla_g_at(p)?.1);
    }
    Ok(HessianVerdict {
        is_hessian: max_curvature <= tol && max_torsion <= tol && max_asym <= tol,
        max_curvature,
        max_torsion,
        max_nabla_g_asymmetry: max_asym,
        tol,
        points: points.len(),
    })
}

/// The four conditions of the "any two imply the rest" statement for `(∇, g)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoOfFour {
    /// (a) max |T(∇)|
    pub torsion: f64,
    /// (b) max |T(∇*)|
    pub dual_torsion: f64,
    /// (c) max ∇g asymmetry
    pub nabla_g_asymmetry: f64,
    /// (d) max |½(Γ + Γ*) − Γ^LC|
    pub levi_civita_defect: f64,
    /// Which of (a)–(d) hold at `tol`.
    pub holds: [bool; 4],
    /// Two or more conditions hold at `tol` while some residual exceeds `cross_tol`.
    pub violation: bool,
    pub tol: f64,
    pub cross_tol: f64,
}

impl TwoOfFour {
    pub fn residuals(&self) -> [f64; 4] {
        [
            self.torsion,
            self.dual_torsion,
            self.nabla_g_asymmetry,
            self.levi_civita_defect,
        ]
    }
}

pub fn two_of_four_residuals(
    spec: &ManifoldSpec,
    points: &[Vec<f64>],
    tol: f64,
    cross_tol: f64,
) -> Result<TwoOfFour> {
    if points.is_empty() {
        return Err(ManifoldError::NoSamples);
    }
    let mut r = [0.0_f64; 4];
    for p in points {
        let gamma = spec.connection_at(p)?;
        let dual = spec.dual_connection_at(p)?;
        let lc = spec.levi_civita_at(p)?;
        r[0] = r[0].max(torsion_of(&gamma).max_abs());
        r[1] = r[1].max(torsion_of(&dual).max_abs());
        r[2] = r[2].max(spec.nabla_g_at(p)?.1);
        let defect = gamma
            .components
            .iter()
            .zip(&dual.components)
            .zip(&lc.components)
            .fold(0.0_f64, |m, ((a, b), c)| m.max((0.5 * (a + b) - c).abs()));
        r[3] = r[3].max(defect);
    }
    let holds = r.map(|v| v <= tol);
    let count = holds.iter().filter(|h| **h).count();
    let violation = count >= 2 && r.iter().any(|v| *v > cross_tol);
    Ok(TwoOfFour {
        torsion: r[0],
        dual_torsion: r[1],
        nabla_g_asymmetry: r[2],
        levi_civita_defect: r[3],
        holds,
        violation,
        tol,
        cross_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4};

    fn parse(text: &str, coords: &[&str]) -> Expr {
        Expr::parse(text, coords).unwrap()
    }

    fn strings(c: &[&str]) -> Vec<String> {
        c.iter().map(|s| s.to_string()).collect()
    }

    fn diag_metric(entries: &[&str], coords: &[&str]) -> MetricField {
        let n = entries.len();
        MetricField::Components(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| parse(if i == j { entries[i] } else { "0" }, coords))
                        .collect()
                })
                .collect(),
        )
    }

    fn spec(metric: MetricField, connection: Connection, coords: &[&str], bx: Vec<[f64; 2]>) -> ManifoldSpec {
        ManifoldSpec::new("test", strings(coords), metric, connection, bx).unwrap()
    }

    const UV: [&str; 2] = ["u", "v"];

    fn euclid() -> ManifoldSpec {
        spec(diag_metric(&["1", "1"], &UV), Connection::Flat, &UV, vec![[-1.0, 1.0]; 2])
    }

    fn sphere() -> ManifoldSpec {
        let c = ["theta", "phi"];
        spec(
            diag_metric(&["1", "sin(theta)^2"], &c),
            Connection::LeviCivita,
            &c,
            vec![[0.5, 2.6], [-1.5, 1.5]],
        )
    }

    fn skew() -> ManifoldSpec {
        spec(diag_metric(&["1", "exp(u)"], &UV), Connection::Flat, &UV, vec![[-1.0, 1.0]; 2])
    }

    fn exp_potential() -> ManifoldSpec {
        spec(
            MetricField::Potential(parse("exp(u) + exp(v)", &UV)),
            Connection::Flat,
            &UV,
            vec![[-1.0, 1.0]; 2],
        )
    }

    fn torsionful() -> ManifoldSpec {
        let gamma = (0..2)
            .map(|k| {
                (0..2)
                    .map(|i| {
                        (0..2)
                            .map(|j| parse(if (k, i, j) == (0, 0, 1) { "1" } else { "0" }, &UV))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        spec(diag_metric(&["1", "1"], &UV), Connection::Explicit(gamma), &UV, vec![[-1.0, 1.0]; 2])
    }

    #[test]
    fn euclidean_metric_is_identity() {
        let g = euclid().metric_at(&[0.3, -0.2]).unwrap();
        assert_eq!(g.components, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn quadratic_potential_gives_identity() {
        let s = spec(
            MetricField::Potential(parse("u^2/2 + v^2/2", &UV)),
            Connection::Flat,
            &UV,
            vec![[-1.0, 1.0]; 2],
        );
        let g = s.metric_at(&[0.7, -0.4]).unwrap();
        assert_eq!(g.components, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn exponential_potential_metric() {
        let s = exp_potential();
        let g = s.metric_at(&[0.0, 0.0]).unwrap();
        assert_eq!(g.components, vec![1.0, 0.0, 0.0, 1.0]);
        let g = s.metric_at(&[1.0, 0.0]).unwrap();
        assert!((g.get(&[0, 0]) - E).abs() < 1e-15);
        assert_eq!(g.get(&[0, 1]), 0.0);
        assert_eq!(g.get(&[1, 1]), 1.0);
    }

    #[test]
    fn non_positive_metric_reports_pivot() {
        let s = spec(diag_metric(&["1", "u"], &UV), Connection::Flat, &UV, vec![[-1.0, 1.0]; 2]);
        match s.metric_at(&[-0.5, 0.0]) {
            Err(ManifoldError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, -0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn points_outside_box_rejected() {
        assert!(matches!(
            euclid().metric_at(&[2.0, 0.0]),
            Err(ManifoldError::OutsideBox { .. })
        ));
    }

    #[test]
    fn asymmetric_metric_text_is_symmetrized() {
        let m = MetricField::Components(vec![
            vec![parse("1", &UV), parse("u/10", &UV)],
            vec![parse("0", &UV), parse("1", &UV)],
        ]);
        let s = spec(m, Connection::Flat, &UV, vec![[-1.0, 1.0]; 2]);
        assert!(s.metric_symmetrized());
        let g = s.metric_at(&[1.0, 0.0]).unwrap();
        assert_eq!(g.get(&[0, 1]), 0.05);
        assert_eq!(g.get(&[1, 0]), 0.05);
    }

    #[test]
    fn dimension_mismatch_detected() {
        let err = ManifoldSpec::new(
            "bad",
            strings(&["u", "v", "w"]),
            diag_metric(&["1", "1"], &["u", "v", "w"]),
            Connection::Flat,
            vec![[-1.0, 1.0]; 3],
        )
        .unwrap_err();
        assert!(matches!(err, ManifoldError::DimensionMismatch { .. }));
    }

    #[test]
    fn flat_and_euclidean_connections_vanish() {
        assert_eq!(euclid().connection_at(&[0.1, 0.2]).unwrap().max_abs(), 0.0);
        assert_eq!(euclid().levi_civita_at(&[0.1, 0.2]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sphere_christoffels() {
        let s = sphere();
        let g = s.connection_at(&[FRAC_PI_4, 0.0]).unwrap();
        assert!((g.get(&[0, 1, 1]) + 0.5).abs() < 1e-15);
        assert!((g.get(&[1, 0, 1]) - 1.0).abs() < 1e-15);
        assert!((g.get(&[1, 1, 0]) - 1.0).abs() < 1e-15);
        assert_eq!(g.get(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn torsion_examples() {
        assert_eq!(sphere().torsion_at(&[1.0, 0.0]).unwrap().max_abs(), 0.0);
        let t = torsionful().torsion_at(&[0.0, 0.0]).unwrap();
        assert_eq!(t.get(&[0, 0, 1]), 1.0);
        assert_eq!(t.get(&[0, 1, 0]), -1.0);
        assert_eq!(euclid().torsion_at(&[0.0, 0.0]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn sphere_sectional_curvature() {
        let s = sphere();
        for theta in [FRAC_PI_2, 1.0, 2.0] {
            let p = [theta, 0.3];
            let r = s.curvature_at(&p).unwrap();
            let lowered = lower_curvature(&r, &s.metric_at(&p).unwrap());
            let expect = theta.sin().powi(2);
            assert!((lowered.get(&[0, 1, 0, 1]) - expect).abs() < 1e-13);
            assert!((r.get(&[0, 0, 1, 1]) - expect).abs() < 1e-13);
        }
        let r = s.curvature_at(&[FRAC_PI_2, 0.0]).unwrap();
        let lowered = lower_curvature(&r, &s.metric_at(&[FRAC_PI_2, 0.0]).unwrap());
        assert!((lowered.get(&[0, 1, 0, 1]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flat_and_torsionful_have_zero_curvature() {
        assert_eq!(euclid().curvature_at(&[0.2, 0.2]).unwrap().max_abs(), 0.0);
        assert_eq!(torsionful().curvature_at(&[0.2, 0.2]).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dual_examples() {
        assert_eq!(euclid().dual_connection_at(&[0.0, 0.0]).unwrap().max_abs(), 0.0);
        let s = sphere();
        let p = [1.1, 0.2];
        let diff = s
            .dual_connection_at(&p)
            .unwrap()
            .max_abs_diff(&s.connection_at(&p).unwrap());
        assert!(diff < 1e-14);
        let d = skew().dual_connection_at(&[0.0, 0.0]).unwrap();
        assert_eq!(d.get(&[1, 0, 1]), 1.0);
        let nonzero: Vec<_> = d.indices().filter(|i| d.get(i) != 0.0).collect();
        assert_eq!(nonzero, vec![vec![1, 0, 1]]);
    }

    #[test]
    fn dual_of_dual_is_original() {
        for s in [sphere(), skew(), torsionful(), exp_potential()] {
            let p = [0.6, 0.3];
            let gamma = s.connection_at(&p).unwrap();
            let dual = s.dual_connection_at(&p).unwrap();
            let back = s.dual_connection_of(&p, &dual).unwrap();
            assert!(back.max_abs_diff(&gamma) < 1e-12);
        }
    }

    #[test]
    fn nabla_g_examples() {
        let (t, asym) = euclid().nabla_g_at(&[0.0, 0.0]).unwrap();
        assert_eq!((t.max_abs(), asym), (0.0, 0.0));
        let (t, asym) = skew().nabla_g_at(&[0.0, 0.0]).unwrap();
        assert_eq!(t.get(&[0, 1, 1]), 1.0);
        assert_eq!(t.get(&[1, 0, 1]), 0.0);
        assert_eq!(asym, 1.0);
        let s = exp_potential();
        for p in crate::sampling::sample_points(s.sample_box(), 16, 1) {
            assert!(s.nabla_g_at(&p).unwrap().1 <= 1e-12);
        }
    }

    #[test]
    fn hessian_verdict_examples() {
        let pts = crate::sampling::sample_points(&[[-1.0, 1.0]; 2], 16, 9);
        let v = hessian_verdict(&euclid(), &pts, 1e-9).unwrap();
        assert!(v.is_hessian);
        assert_eq!(v.max_curvature + v.max_torsion + v.max_nabla_g_asymmetry, 0.0);
        let v = hessian_verdict(&skew(), &pts, 1e-9).unwrap();
        assert!(!v.is_hessian);
        let u_max = pts.iter().map(|p| p[0]).fold(f64::MIN, f64::max);
        assert!((v.max_nabla_g_asymmetry - u_max.exp()).abs() < 1e-12);
        let s = sphere();
        let sp = crate::sampling::sample_points(s.sample_box(), 16, 9);
        let v = hessian_verdict(&s, &sp, 1e-9).unwrap();
        assert!(!v.is_hessian);
        let min_s2 = sp.iter().map(|p| p[0].sin().powi(2)).fold(f64::MAX, f64::min);
        assert!(v.max_curvature >= min_s2);
        assert_eq!(hessian_verdict(&s, &[], 1e-9), Err(ManifoldError::NoSamples));
    }

    #[test]
    fn two_of_four_examples() {
        let pts = crate::sampling::sample_points(&[[-1.0, 1.0]; 2], 8, 5);
        let r = two_of_four_residuals(&exp_potential(), &pts, 1e-9, 1e-7).unwrap();
        assert!(r.residuals().iter().all(|v| *v <= 1e-10), "{r:?}");
        assert!(!r.violation);
        let sp = crate::sampling::sample_points(sphere().sample_box(), 8, 5);
        let r = two_of_four_residuals(&sphere(), &sp, 1e-9, 1e-7).unwrap();
        assert!(r.residuals().iter().all(|v| *v <= 1e-12), "{r:?}");
        let r = two_of_four_residuals(&torsionful(), &pts, 1e-9, 1e-7).unwrap();
        assert!(r.torsion > 0.0);
        assert_eq!(r.holds, [false, true, false, false]);
        assert!(!r.violation);
    }

    #[test]
    fn hessian_dual_of_potential_is_flat() {
        let s = spec(
            MetricField::Potential(parse("exp(u) + exp(v)", &UV)),
            Connection::HessianDual,
            &UV,
            vec![[-1.0, 1.0]; 2],
        );
        let p = [0.4, -0.3];
        let g = s.connection_at(&p).unwrap();
        assert!((g.get(&[0, 0, 0]) - 1.0).abs() < 1e-14);
        assert!((g.get(&[1, 1, 1]) - 1.0).abs() < 1e-14);
        assert!(s.curvature_at(&p).unwrap().max_abs() < 1e-13);
        let pts = crate::sampling::sample_points(s.sample_box(), 8, 2);
        assert!(hessian_verdict(&s, &pts, 1e-9).unwrap().is_hessian);
    }
}
