mod common;

use hessborn::bundle::{adapted_frame_at, born_at, born_compatibility_residuals, BundlePoint};
use hessborn::expr::Expr;
use hessborn::integrability::{antisymmetry_defect, d_omega_at, nijenhuis_at, Structure};
use hessborn::jet::{self, central_difference_gradient, DEFAULT_FD_STEP};
use hessborn::spec_file::builtin_corpus;
use hessborn::{Frame, ManifoldSpec};
use proptest::prelude::*;

use common::relative_error;

const COORDS: [&str; 2] = ["u", "v"];

/// Random expression text over `u, v`, kept inside the domains of log/sqrt
/// by wrapping their arguments.
fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("u".to_string()),
        Just("v".to_string()),
        (1u32..9).prop_map(|k| format!("{}", k as f64 / 4.0)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) / (2 + ({b})^2)")),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(tanh({a}))")),
            inner.clone().prop_map(|a| format!("log(1 + ({a})^2)")),
            inner.prop_map(|a| format!("sqrt(1 + ({a})^2)")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2)
}

fn corpus_point() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (0usize..6, prop::collection::vec(0.0f64..1.0, 2), prop::collection::vec(-0.7f64..0.7, 2))
}

fn bundle_point(spec: &ManifoldSpec, unit: &[f64], y: &[f64]) -> BundlePoint {
    let x = spec
        .sample_box()
        .iter()
        .zip(unit)
        .map(|([lo, hi], t)| lo + t * (hi - lo))
        .collect();
    BundlePoint::new(x, y.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_form_reparses_to_same_tree(text in expression()) {
        let e = Expr::parse(&text, &COORDS).unwrap();
        let printed = e.to_string();
        let again = Expr::parse(&printed, &COORDS).unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), printed);
    }

    #[test]
    fn jet_gradient_matches_finite_differences(text in expression(), p in point()) {
        let e = Expr::parse(&text, &COORDS).unwrap();
        let grad = e.evaluate(&jet::seed(&p, 1).unwrap()).unwrap().gradient();
        let fd = central_difference_gradient(|q| e.evaluate_f64(q).unwrap(), &p, DEFAULT_FD_STEP);
        for (a, b) in grad.iter().zip(&fd) {
            prop_assert!(relative_error(*a, *b) <= 1e-6, "{} at {:?}: {} vs {}", text, p, a, b);
        }
    }

    #[test]
    fn jet_and_plain_evaluation_agree(text in expression(), p in point()) {
        let e = Expr::parse(&text, &COORDS).unwrap();
        let jet_value = e.evaluate(&jet::seed(&p, 2).unwrap()).unwrap().value();
        prop_assert!(relative_error(jet_value, e.evaluate_f64(&p).unwrap()) <= 1e-13);
    }

    #[test]
    fn mixed_partials_commute_bitwise(text in expression(), p in point()) {
        let e = Expr::parse(&text, &COORDS).unwrap();
        let f = e.evaluate(&jet::seed(&p, 3).unwrap()).unwrap();
        let uv = f.derivative(0).derivative(1);
        let vu = f.derivative(1).derivative(0);
        prop_assert_eq!(uv.taylor_coefficients(), vu.taylor_coefficients());
    }

    #[test]
    fn born_identities_hold_everywhere((which, unit, y) in corpus_point()) {
        let spec = &builtin_corpus()[which];
        let p = bundle_point(spec, &unit, &y);
        let coord = born_at(spec, &p, Frame::BundleCoordinate).unwrap();
        let r = born_compatibility_residuals(&coord);
        prop_assert!(r.holds(1e-10), "{}: {:?}", spec.name, r);
        prop_assert_eq!(r.h_symmetry, 0.0);
        prop_assert_eq!(r.k_symmetry, 0.0);
        prop_assert_eq!(r.omega_antisymmetry, 0.0);
        let converted = born_at(spec, &p, Frame::Adapted).unwrap().convert(&adapted_frame_at(spec, &p).unwrap());
        prop_assert!(converted.max_abs_diff(&coord) <= 1e-12);
    }

    #[test]
    fn nijenhuis_and_d_omega_antisymmetry((which, unit, y) in corpus_point()) {
        let spec = &builtin_corpus()[which];
        let p = bundle_point(spec, &unit, &y);
        for s in Structure::ALL {
            let n = nijenhuis_at(spec, s, &p).unwrap();
            for idx in n.indices() {
                prop_assert_eq!(n.get(&idx), -n.get(&[idx[0], idx[2], idx[1]]));
            }
        }
        prop_assert!(antisymmetry_defect(&d_omega_at(spec, &p).unwrap()) <= 1e-12);
    }

    #[test]
    fn flat_connections_have_integrable_operators((which, unit, y) in corpus_point()) {
        let spec = &builtin_corpus()[which];
        prop_assume!(spec.connection().vanishes_identically());
        let p = bundle_point(spec, &unit, &y);
        for s in Structure::ALL {
            prop_assert!(nijenhuis_at(spec, s, &p).unwrap().max_abs() <= 1e-9);
        }
    }
}
