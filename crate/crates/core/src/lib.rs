//! Numerical verification that a connection–metric pair `(∇, g)` is a
//! Hessian structure exactly when the almost Born structure it induces on
//! the tangent bundle is integrable.
//!
//! Derivatives come from truncated Taylor jets ([`jet`]); fields are written
//! in a small expression language ([`expr`]); base geometry lives in
//! [`manifold`], the induced structure in [`bundle`], Nijenhuis tensors and
//! `dω` in [`integrability`], and the affine-chart witness in
//! [`affine_chart`].

// Index loops mirror the tensor formulas; `!(x > 0)` deliberately catches NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod jet;
pub mod expr;
pub mod tensor;
pub mod sampling;
pub mod manifold;
pub mod bundle;
pub mod integrability;
pub mod affine_chart;
pub mod spec_file;
pub mod report;

pub use bundle::{BornFrame, BundlePoint};
pub use expr::Expr;
pub use jet::Jet;
pub use manifold::{Connection, ManifoldSpec, MetricField};
pub use report::{run, Report, RunConfig};
pub use sampling::CheckSettings;
pub use spec_file::load_spec;
pub use tensor::{Frame, TensorValue, Variance};
