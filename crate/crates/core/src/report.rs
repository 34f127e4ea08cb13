//! One full run over a spec, and the corpus-wide theorem table, as
//! serializable reports.

use serde::Serialize;
use thiserror::Error;

use crate::affine_chart::{self, ChartError, ChartWitness, FLATNESS_GATE};
use crate::bundle::{born_at, born_compatibility_residuals, adapted_frame_at, BundleError, BundlePoint};
use crate::integrability::{
    frame_bracket_residuals, integrability_verdict, nijenhuis_j_identity_residuals, theorem_crosscheck,
    IdentityResiduals, IntegrabilityError, IntegrabilityReport, TheoremTable,
};
use crate::manifold::{hessian_verdict, two_of_four_residuals, HessianVerdict, ManifoldError, ManifoldSpec, MetricField, TwoOfFour};
use crate::sampling::{fiber_samples, sample_points, CheckSettings};
use crate::tensor::Frame;

/// Born identity residuals must stay below this everywhere.
pub const BORN_TOL: f64 = 1e-10;
/// Bundle points used for the frame-identity sign fits.
pub const IDENTITY_POINTS: usize = 10;
pub const CHART_PROBES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Integrability(#[from] IntegrabilityError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub settings: CheckSettings,
    pub chart_steps: usize,
    pub chart_probes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            settings: CheckSettings::default(),
            chart_steps: affine_chart::DEFAULT_STEPS,
            chart_probes: CHART_PROBES,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        let s = &self.settings;
        if s.points == 0 || s.fiber_points == 0 {
            return Err(RunError::Config("sample counts must be at least 1".into()));
        }
        if !(s.fiber_radius > 0.0 && s.fiber_radius.is_finite()) {
            return Err(RunError::Config("fiber radius must be positive".into()));
        }
        if !(s.tol > 0.0 && s.cross_tol > 0.0) {
            return Err(RunError::Config("tolerances must be positive".into()));
        }
        if self.chart_steps == 0 {
            return Err(RunError::Config("chart steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSummary {
    Components(Vec<Vec<String>>),
    Potential(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecSummary {
    pub name: String,
    pub dimension: usize,
    pub coordinates: Vec<String>,
    pub metric: MetricSummary,
    pub metric_symmetrized: bool,
    pub connection: String,
    pub sample_box: Vec<[f64; 2]>,
    /// Verdicts hold on sampled points of this one chart only.
    pub scope: &'static str,
}

impl SpecSummary {
    pub fn of(spec: &ManifoldSpec) -> Self {
        SpecSummary {
            name: spec.name.clone(),
            dimension: spec.dimension(),
            coordinates: spec.coordinates().to_vec(),
            metric: match spec.metric_field() {
                MetricField::Components(rows) => {
                    MetricSummary::Components(rows.iter().map(|r| r.iter().map(|e| e.to_string()).collect()).collect())
                }
                MetricField::Potential(phi) => MetricSummary::Potential(phi.to_string()),
            },
            metric_symmetrized: spec.metric_symmetrized(),
            connection: spec.connection().kind_name().to_string(),
            sample_box: spec.sample_box().to_vec(),
            scope: "sampled points of a single chart",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BornSummary {
    pub points: usize,
    pub max_residual: f64,
    pub min_h_eigenvalue: f64,
    pub min_omega_singular_value: f64,
    pub k_split_signature_everywhere: bool,
    /// Largest gap between converted adapted values and bundle-coordinate values.
    pub frame_conversion_defect: f64,
    pub tol: f64,
    pub passed: bool,
}

pub fn born_summary(spec: &ManifoldSpec, points: &[BundlePoint], tol: f64) -> Result<BornSummary, RunError> {
    let mut s = BornSummary {
        points: points.len(),
        max_residual: 0.0,
        min_h_eigenvalue: f64::INFINITY,
        min_omega_singular_value: f64::INFINITY,
        k_split_signature_everywhere: true,
        frame_conversion_defect: 0.0,
        tol,
        passed: false,
    };
    for p in points {
        let coord = born_at(spec, p, Frame::BundleCoordinate)?;
        let r = born_compatibility_residuals(&coord);
        s.max_residual = s.max_residual.max(r.max_residual());
        s.min_h_eigenvalue = s.min_h_eigenvalue.min(r.h_min_eigenvalue);
        s.min_omega_singular_value = s.min_omega_singular_value.min(r.omega_min_singular_value);
        s.k_split_signature_everywhere &= r.k_signature_split() && r.k_positive == spec.dimension();
        let frame = adapted_frame_at(spec, p)?;
        let converted = born_at(spec, p, Frame::Adapted)?.convert(&frame);
        s.frame_conversion_defect = s.frame_conversion_defect.max(converted.max_abs_diff(&coord));
    }
    s.passed = s.max_residual <= tol
        && s.frame_conversion_defect <= tol
        && s.k_split_signature_everywhere
        && s.min_h_eigenvalue > 0.0
        && s.min_omega_singular_value > 0.0;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignConventions {
    pub frame_brackets: IdentityResiduals,
    pub nijenhuis_j: IdentityResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Status {
    pub ok: bool,
    pub failures: Vec<String>,
}

impl Status {
    fn from_failures(failures: Vec<String>) -> Self {
        Status {
            ok: failures.is_empty(),
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub spec: SpecSummary,
    pub config: RunConfig,
    pub hessian: HessianVerdict,
    pub two_of_four: TwoOfFour,
    pub born_compat: BornSummary,
    pub integrability: IntegrabilityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub affine_chart: Option<ChartWitness>,
    pub agreement: bool,
    pub sign_conventions: SignConventions,
    pub status: Status,
}

/// Box center, where the chart witness is based.
pub fn box_center(spec: &ManifoldSpec) -> Vec<f64> {
    spec.sample_box().iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
}

pub fn run(spec: &ManifoldSpec, config: &RunConfig) -> Result<Report, RunError> {
    config.validate()?;
    let s = &config.settings;
    let base = sample_points(spec.sample_box(), s.points, s.seed);
    let fibers = fiber_samples(spec.dimension(), s.fiber_points, s.fiber_radius, s.seed);
    let bundle: Vec<BundlePoint> = base
        .iter()
        .flat_map(|x| fibers.iter().map(move |y| BundlePoint::new(x.clone(), y.clone())))
        .collect();

    let hessian = hessian_verdict(spec, &base, s.tol)?;
    let two_of_four = two_of_four_residuals(spec, &base, s.tol, s.cross_tol)?;
    let born_compat = born_summary(spec, &bundle, BORN_TOL)?;
    let integrability = integrability_verdict(spec, &base, &fibers, s.tol)?;

    let identity_points = &bundle[..bundle.len().min(IDENTITY_POINTS)];
    let sign_conventions = SignConventions {
        frame_brackets: frame_bracket_residuals(spec, identity_points)?,
        nijenhuis_j: nijenhuis_j_identity_residuals(spec, identity_points)?,
    };

    let center = box_center(spec);
    let (curvature, torsion) = affine_chart::flatness_residuals(spec, &center, s.seed)?;
    let affine_chart = if curvature <= FLATNESS_GATE && torsion <= FLATNESS_GATE {
        Some(affine_chart::chart_witness(
            spec,
            &center,
            config.chart_steps,
            config.chart_probes,
            s.seed,
        )?)
    } else {
        None
    };

    let agreement = integrability.hessian_agreement;
    let mut failures = Vec::new();
    if !agreement {
        failures.push(format!(
            "theorem disagreement: hessian {} but integrable {}",
            hessian.is_hessian, integrability.verdict_integrable
        ));
    }
    if two_of_four.violation {
        failures.push("two-of-four violation: two conditions hold but another fails".into());
    }
    if !born_compat.passed {
        failures.push(format!("Born identities fail (max residual {:e})", born_compat.max_residual));
    }
    if let Some(w) = &affine_chart {
        if !w.passed {
            failures.push(format!(
                "affine chart witness fails (pushforward {:e}, operators {:e})",
                w.pushforward_residual, w.born_operator_residual
            ));
        }
    }

    Ok(Report {
        spec: SpecSummary::of(spec),
        config: config.clone(),
        hessian,
        two_of_four,
        born_compat,
        integrability,
        affine_chart,
        agreement,
        sign_conventions,
        status: Status::from_failures(failures),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoOfFourRow {
    pub spec: String,
    pub residuals: [f64; 4],
    pub holds: [bool; 4],
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub corpus: Vec<String>,
    pub config: CheckSettings,
    pub table: TheoremTable,
    pub two_of_four: Vec<TwoOfFourRow>,
    pub status: Status,
}

pub fn theorem_report(corpus: &[ManifoldSpec], settings: &CheckSettings) -> Result<TheoremReport, RunError> {
    let table = theorem_crosscheck(corpus, settings)?;
    let mut two_of_four = Vec::with_capacity(corpus.len());
    for spec in corpus {
        let base = sample_points(spec.sample_box(), settings.points, settings.seed);
        let t = two_of_four_residuals(spec, &base, settings.tol, settings.cross_tol)?;
        two_of_four.push(TwoOfFourRow {
            spec: spec.name.clone(),
            residuals: t.residuals(),
            holds: t.holds,
            violation: t.violation,
        });
    }
    let mut failures: Vec<String> = table
        .rows
        .iter()
        .filter(|r| !r.agreement)
        .map(|r| format!("theorem disagreement on {}", r.spec))
        .collect();
    failures.extend(
        two_of_four
            .iter()
            .filter(|r| r.violation)
            .map(|r| format!("two-of-four violation on {}", r.spec)),
    );
    Ok(TheoremReport {
        corpus: corpus.iter().map(|s| s.name.clone()).collect(),
        config: settings.clone(),
        table,
        two_of_four,
        status: Status::from_failures(failures),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_file::load_spec;

    fn small() -> RunConfig {
        RunConfig {
            settings: CheckSettings {
                points: 4,
                fiber_points: 2,
                ..CheckSettings::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn euclidean_run_is_clean() {
        let r = run(&load_spec("euclidean2").unwrap(), &small()).unwrap();
        assert!(r.status.ok && r.agreement && r.hessian.is_hessian);
        assert!(r.born_compat.max_residual <= 1e-12);
        assert!(r.affine_chart.as_ref().unwrap().passed);
    }

    #[test]
    fn sphere_has_no_chart_and_agrees() {
        let r = run(&load_spec("sphere2").unwrap(), &small()).unwrap();
        assert!(r.status.ok, "{:?}", r.status);
        assert!(!r.hessian.is_hessian && !r.integrability.verdict_integrable);
        assert!(r.affine_chart.is_none());
    }

    #[test]
    fn torsionful_flat_gets_no_chart() {
        let r = run(&load_spec("flat-torsionful").unwrap(), &small()).unwrap();
        assert!(r.affine_chart.is_none() && r.status.ok);
    }

    #[test]
    fn config_validation() {
        let mut c = small();
        c.settings.fiber_radius = 0.0;
        assert!(matches!(run(&load_spec("euclidean2").unwrap(), &c), Err(RunError::Config(_))));
    }

    #[test]
    fn report_json_has_contract_fields() {
        let r = run(&load_spec("pullback-flat").unwrap(), &small()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "spec",
            "config",
            "hessian",
            "two_of_four",
            "born_compat",
            "integrability",
            "affine_chart",
            "agreement",
            "sign_conventions",
            "status",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
