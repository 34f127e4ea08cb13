//! The almost Born structure induced on `TM` by a connection and a metric.
//!
//! Bundle coordinates are `(x¹..xⁿ, y¹..yⁿ)`. The adapted frame has columns
//! `Hᵢ = ∂/∂xⁱ − Γᵏᵢⱼ yʲ ∂/∂yᵏ` and `Vᵢ = ∂/∂yⁱ`, so in block form
//! `E = [[1, 0], [−M, 1]]` with `Mᵏᵢ = Γᵏᵢⱼ yʲ`, and `E⁻¹ = [[1, 0], [M, 1]]`.
//!
//! Endomorphisms are stored as matrices acting on column vectors. Bilinear
//! forms are stored with the first argument as the row index, so the map
//! `X ↦ b(X, ·)` is the transpose of the stored matrix; `I = h⁻¹∘ω` reads
//! `I = h⁻¹ ωᵀ` in matrix form.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::jet::Jet;
use crate::manifold::{ManifoldError, ManifoldSpec};
use crate::tensor::{jet_matmul, jet_transpose, Frame, JetMatrix, TensorValue};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BundleError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("fiber vector has {found} components, expected {expected}")]
    FiberDimension { expected: usize, found: usize },
    #[error("connection of kind {0} is not identically zero in this chart")]
    NotAffineChart(String),
}

pub type Result<T> = std::result::Result<T, BundleError>;

/// A point `(x, y)` of the tangent bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundlePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BundlePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        BundlePoint { x, y }
    }

    /// All `2n` coordinates, base first.
    pub fn coordinates(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn fiber_norm(&self) -> f64 {
        crate::sampling::euclidean_norm(&self.y)
    }

    /// Residual normalization `1 + |y|`.
    pub fn scale(&self) -> f64 {
        1.0 + self.fiber_norm()
    }

    fn check(&self, spec: &ManifoldSpec) -> Result<()> {
        if self.y.len() != spec.dimension() {
            return Err(BundleError::FiberDimension {
                expected: spec.dimension(),
                found: self.y.len(),
            });
        }
        Ok(())
    }
}

/// Change of basis between bundle coordinates and the adapted frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedFrame {
    /// Columns are `H₁..Hₙ, V₁..Vₙ` in bundle coordinates.
    pub e: DMatrix<f64>,
    /// Rows are the dual frame `H*¹..H*ⁿ, V*¹..V*ⁿ`.
    pub e_inv: DMatrix<f64>,
}

impl AdaptedFrame {
    /// Frame built from connection coefficients `gamma[k, i, j]` and fiber `y`.
    pub fn from_coefficients(gamma: &TensorValue, y: &[f64]) -> Self {
        let n = gamma.dim;
        let mut e = DMatrix::identity(2 * n, 2 * n);
        let mut e_inv = DMatrix::identity(2 * n, 2 * n);
        for k in 0..n {
            for i in 0..n {
                let m: f64 = (0..n).map(|j| gamma.get(&[k, i, j]) * y[j]).sum();
                e[(n + k, i)] = -m;
                e_inv[(n + k, i)] = m;
            }
        }
        AdaptedFrame { e, e_inv }
    }

    /// `max |E E⁻¹ − 1|`.
    pub fn identity_defect(&self) -> f64 {
        let n = self.e.nrows();
        max_abs(&(&self.e * &self.e_inv - DMatrix::identity(n, n)))
    }
}

pub fn adapted_frame_at(spec: &ManifoldSpec, p: &BundlePoint) -> Result<AdaptedFrame> {
    p.check(spec)?;
    let gamma = spec.connection_at(&p.x)?;
    Ok(AdaptedFrame::from_coefficients(&gamma, &p.y))
}

/// The six tensors of the Born structure at one bundle point.
#[derive(Debug, Clone, PartialEq)]
pub struct BornFrame {
    pub i_op: DMatrix<f64>,
    pub j_op: DMatrix<f64>,
    pub k_op: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub frame: Frame,
    pub point: BundlePoint,
}

/// `I = [[0,−1],[1,0]]`, `J = [[0,1],[1,0]]`, `K = [[1,0],[0,−1]]` in `n`-blocks.
pub fn standard_operators(n: usize) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut i = DMatrix::zeros(2 * n, 2 * n);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        i[(a, n + a)] = -1.0;
        i[(n + a, a)] = 1.0;
        j[(a, n + a)] = 1.0;
        j[(n + a, a)] = 1.0;
        k[(a, a)] = 1.0;
        k[(n + a, n + a)] = -1.0;
    }
    (i, j, k)
}

/// `h = [[G,0],[0,G]]`, `k = [[0,G],[G,0]]`, `ω = [[0,G],[−G,0]]`.
pub fn metric_blocks(g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = g.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    let mut k = DMatrix::zeros(2 * n, 2 * n);
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let v = g[(r, c)];
            h[(r, c)] = v;
            h[(n + r, n + c)] = v;
            k[(r, n + c)] = v;
            k[(n + r, c)] = v;
            omega[(r, n + c)] = v;
            omega[(n + r, c)] = -v;
        }
    }
    (h, k, omega)
}

impl BornFrame {
    /// The adapted-frame form: constant `I, J, K` and `G`-blocks for `h, k, ω`.
    pub fn adapted(metric: &DMatrix<f64>, point: BundlePoint) -> Self {
        let (i_op, j_op, k_op) = standard_operators(metric.nrows());
        let (h, k, omega) = metric_blocks(metric);
        BornFrame {
            i_op,
            j_op,
            k_op,
            h,
            k,
            omega,
            frame: Frame::Adapted,
            point,
        }
    }

    /// Re-expresses the tensors in the other frame: endomorphisms conjugate,
    /// bilinear forms pull back.
    pub fn convert(&self, frame: &AdaptedFrame) -> BornFrame {
        let (to, from, target) = match self.frame {
            Frame::Adapted => (&frame.e, &frame.e_inv, Frame::BundleCoordinate),
            Frame::BundleCoordinate => (&frame.e_inv, &frame.e, Frame::Adapted),
            Frame::BaseCoordinate => panic!("a Born frame never lives on the base"),
        };
        let mixed = |a: &DMatrix<f64>| to * a * from;
        let form = |b: &DMatrix<f64>| from.transpose() * b * from;
        BornFrame {
            i_op: mixed(&self.i_op),
            j_op: mixed(&self.j_op),
            k_op: mixed(&self.k_op),
            h: form(&self.h),
            k: form(&self.k),
            omega: form(&self.omega),
            frame: target,
            point: self.point.clone(),
        }
    }

    /// Largest entrywise difference over all six tensors.
    pub fn max_abs_diff(&self, other: &BornFrame) -> f64 {
        self.pairs(other)
            .iter()
            .fold(0.0, |m, (a, b)| m.max(max_abs(&(*a - *b))))
    }

    fn pairs<'a>(&'a self, other: &'a BornFrame) -> [(&'a DMatrix<f64>, &'a DMatrix<f64>); 6] {
        [
            (&self.i_op, &other.i_op),
            (&self.j_op, &other.j_op),
            (&self.k_op, &other.k_op),
            (&self.h, &other.h),
            (&self.k, &other.k),
            (&self.omega, &other.omega),
        ]
    }
}

/// Jet-valued Born tensors in bundle coordinates, first order in all `2n`
/// bundle variables. Feeds the Nijenhuis and `dω` computations.
#[derive(Debug, Clone)]
pub struct BundleFields {
    pub point: BundlePoint,
    /// Adapted frame `E` (columns `Hᵢ`, `Vᵢ`).
    pub frame: JetMatrix,
    pub frame_inv: JetMatrix,
    pub i_op: JetMatrix,
    pub j_op: JetMatrix,
    pub k_op: JetMatrix,
    pub h: JetMatrix,
    pub k: JetMatrix,
    pub omega: JetMatrix,
}

pub fn bundle_fields(spec: &ManifoldSpec, p: &BundlePoint) -> Result<BundleFields> {
    p.check(spec)?;
    let n = spec.dimension();
    let m = 2 * n;
    let base_vars: Vec<usize> = (0..n).collect();
    let lift = |j: &Jet| j.embed(m, &base_vars);
    let gamma: Vec<Vec<Vec<Jet>>> = spec
        .connection_jets(&p.x, 1)?
        .iter()
        .map(|plane| plane.iter().map(|row| row.iter().map(lift).collect()).collect())
        .collect();
    let g: JetMatrix = spec
        .metric_jets(&p.x, 1)?
        .iter()
        .map(|row| row.iter().map(lift).collect())
        .collect();
    let y: Vec<Jet> = (0..n).map(|i| Jet::variable(p.y[i], n + i, m, 1)).collect();
    let zero = Jet::constant(0.0, m, 1);
    let one = Jet::constant(1.0, m, 1);

    let mut frame: JetMatrix = vec![vec![zero.clone(); m]; m];
    let mut frame_inv = frame.clone();
    for a in 0..m {
        frame[a][a] = one.clone();
        frame_inv[a][a] = one.clone();
    }
    for k in 0..n {
        for i in 0..n {
            let mut mki = zero.clone();
            for j in 0..n {
                mki = mki + &gamma[k][i][j] * &y[j];
            }
            frame[n + k][i] = -&mki;
            frame_inv[n + k][i] = mki;
        }
    }

    let constant = |d: &DMatrix<f64>| -> JetMatrix {
        (0..m)
            .map(|r| (0..m).map(|c| zero.lift(d[(r, c)])).collect())
            .collect()
    };
    let (i_a, j_a, k_a) = standard_operators(n);
    let mut h_a = vec![vec![zero.clone(); m]; m];
    let mut k_a_form = h_a.clone();
    let mut omega_a = h_a.clone();
    for r in 0..n {
        for c in 0..n {
            h_a[r][c] = g[r][c].clone();
            h_a[n + r][n + c] = g[r][c].clone();
            k_a_form[r][n + c] = g[r][c].clone();
            k_a_form[n + r][c] = g[r][c].clone();
            omega_a[r][n + c] = g[r][c].clone();
            omega_a[n + r][c] = -&g[r][c];
        }
    }

    let mixed = |a: &JetMatrix| jet_matmul(&jet_matmul(&frame, a), &frame_inv);
    let frame_inv_t = jet_transpose(&frame_inv);
    let form = |b: &JetMatrix| jet_matmul(&jet_matmul(&frame_inv_t, b), &frame_inv);

    let mut h = form(&h_a);
    let mut k = form(&k_a_form);
    let mut omega = form(&omega_a);
    for r in 0..m {
        omega[r][r] = zero.clone();
        for c in r + 1..m {
            h[c][r] = h[r][c].clone();
            k[c][r] = k[r][c].clone();
            omega[c][r] = -&omega[r][c];
        }
    }

    Ok(BundleFields {
        point: p.clone(),
        i_op: mixed(&constant(&i_a)),
        j_op: mixed(&constant(&j_a)),
        k_op: mixed(&constant(&k_a)),
        h,
        k,
        omega,
        frame,
        frame_inv,
    })
}

fn values(a: &JetMatrix) -> DMatrix<f64> {
    let m = a.len();
    DMatrix::from_fn(m, m, |r, c| a[r][c].value())
}

impl BundleFields {
    pub fn born_frame(&self) -> BornFrame {
        BornFrame {
            i_op: values(&self.i_op),
            j_op: values(&self.j_op),
            k_op: values(&self.k_op),
            h: values(&self.h),
            k: values(&self.k),
            omega: values(&self.omega),
            frame: Frame::BundleCoordinate,
            point: self.point.clone(),
        }
    }

    pub fn adapted_frame(&self) -> AdaptedFrame {
        AdaptedFrame {
            e: values(&self.frame),
            e_inv: values(&self.frame_inv),
        }
    }
}

/// The Born tensors at `p` in the requested frame. Bundle-coordinate values
/// come from the jet pipeline; the adapted values are the block forms.
pub fn born_at(spec: &ManifoldSpec, p: &BundlePoint, frame: Frame) -> Result<BornFrame> {
    p.check(spec)?;
    match frame {
        Frame::Adapted => {
            let g = spec.metric_at(&p.x)?;
            let n = spec.dimension();
            let metric = DMatrix::from_fn(n, n, |r, c| g.get(&[r, c]));
            Ok(BornFrame::adapted(&metric, p.clone()))
        }
        Frame::BundleCoordinate => Ok(bundle_fields(spec, p)?.born_frame()),
        Frame::BaseCoordinate => panic!("Born tensors live on the tangent bundle"),
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Defects of the almost Born identities at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornResiduals {
    /// `|I² + 1|`
    pub i_squared: f64,
    /// `|J² − 1|`
    pub j_squared: f64,
    /// `|K² − 1|`
    pub k_squared: f64,
    /// `|IJK + 1|`
    pub ijk: f64,
    /// `|h⁻¹∘ω − I|`
    pub i_from_h_omega: f64,
    /// `|k⁻¹∘h − J|`
    pub j_from_k_h: f64,
    /// `|ω⁻¹∘k − K|`
    pub k_from_omega_k: f64,
    /// Largest defect among `I = JK = −KJ`, `J = −KI = IK`, `K = −IJ = JI`.
    pub anticommutation: f64,
    pub h_symmetry: f64,
    pub k_symmetry: f64,
    pub omega_antisymmetry: f64,
    pub h_min_eigenvalue: f64,
    pub k_positive: usize,
    pub k_negative: usize,
    pub omega_min_singular_value: f64,
}

impl BornResiduals {
    /// Largest of the identity defects (not the eigenvalue data).
    pub fn max_residual(&self) -> f64 {
        [
            self.i_squared,
            self.j_squared,
            self.k_squared,
            self.ijk,
            self.i_from_h_omega,
            self.j_from_k_h,
            self.k_from_omega_k,
            self.anticommutation,
            self.h_symmetry,
            self.k_symmetry,
            self.omega_antisymmetry,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Split signature `(n, n)` for `k`.
    pub fn k_signature_split(&self) -> bool {
        self.k_positive == self.k_negative && self.k_positive + self.k_negative > 0
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual() <= tol
            && self.h_min_eigenvalue > 0.0
            && self.k_signature_split()
            && self.omega_min_singular_value > 0.0
    }
}

pub fn born_compatibility_residuals(bf: &BornFrame) -> BornResiduals {
    let m = bf.i_op.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let (i, j, k) = (&bf.i_op, &bf.j_op, &bf.k_op);
    let inv = |a: &DMatrix<f64>| a.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(m, m, f64::NAN));
    let anticommutation = [
        i - j * k,
        i + k * j,
        j + k * i,
        j - i * k,
        k + i * j,
        k - j * i,
    ]
    .iter()
    .map(max_abs)
    .fold(0.0, f64::max);
    let k_eigen = bf.k.clone().symmetric_eigen().eigenvalues;
    BornResiduals {
        i_squared: max_abs(&(i * i + &id)),
        j_squared: max_abs(&(j * j - &id)),
        k_squared: max_abs(&(k * k - &id)),
        ijk: max_abs(&(i * j * k + &id)),
        i_from_h_omega: max_abs(&(inv(&bf.h) * bf.omega.transpose() - i)),
        j_from_k_h: max_abs(&(inv(&bf.k) * bf.h.transpose() - j)),
        k_from_omega_k: max_abs(&(inv(&bf.omega.transpose()) * bf.k.transpose() - k)),
        anticommutation,
        h_symmetry: max_abs(&(&bf.h - bf.h.transpose())),
        k_symmetry: max_abs(&(&bf.k - bf.k.transpose())),
        omega_antisymmetry: max_abs(&(&bf.omega + bf.omega.transpose())),
        h_min_eigenvalue: bf.h.clone().symmetric_eigen().eigenvalues.min(),
        k_positive: k_eigen.iter().filter(|v| **v > 0.0).count(),
        k_negative: k_eigen.iter().filter(|v| **v < 0.0).count(),
        omega_min_singular_value: bf.omega.clone().svd(false, false).singular_values.min(),
    }
}

/// Distance of the bundle-coordinate Born tensors from the constant/`G`-block
/// form they take when the chart is affine for the connection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineFormResiduals {
    pub i_op: f64,
    pub j_op: f64,
    pub k_op: f64,
    pub h: f64,
    pub k: f64,
    pub omega: f64,
}

impl AffineFormResiduals {
    pub fn operators_max(&self) -> f64 {
        self.i_op.max(self.j_op).max(self.k_op)
    }

    pub fn max(&self) -> f64 {
        self.operators_max().max(self.h).max(self.k).max(self.omega)
    }
}

/// Compares a bundle-coordinate Born frame with the block form for `metric`.
pub fn block_form_distance(bf: &BornFrame, metric: &DMatrix<f64>) -> AffineFormResiduals {
    let (i, j, k) = standard_operators(metric.nrows());
    let (h, kf, omega) = metric_blocks(metric);
    AffineFormResiduals {
        i_op: max_abs(&(&bf.i_op - i)),
        j_op: max_abs(&(&bf.j_op - j)),
        k_op: max_abs(&(&bf.k_op - k)),
        h: max_abs(&(&bf.h - h)),
        k: max_abs(&(&bf.k - kf)),
        omega: max_abs(&(&bf.omega - omega)),
    }
}

pub fn affine_chart_form_check(spec: &ManifoldSpec, p: &BundlePoint) -> Result<AffineFormResiduals> {
    if !spec.connection().vanishes_identically() {
        return Err(BundleError::NotAffineChart(spec.connection().kind_name().into()));
    }
    let bf = born_at(spec, p, Frame::BundleCoordinate)?;
    let g = spec.metric_at(&p.x)?;
    let n = spec.dimension();
    let metric = DMatrix::from_fn(n, n, |r, c| g.get(&[r, c]));
    Ok(block_form_distance(&bf, &metric))
}
