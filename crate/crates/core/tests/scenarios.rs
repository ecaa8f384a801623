use nalgebra::DMatrix;

use gexpect::scenarios::{
    invertible_catalog, run_invertible_scan, run_named, run_reverse_independence_witness, vertex_images_diagonal,
    ScenarioError, ScenarioParams, Tag, SCENARIO_NAMES,
};
use gexpect::{SolverConfig, UncertaintyInterval};

fn iv(lo: f64, hi: f64) -> UncertaintyInterval {
    UncertaintyInterval::new(lo, hi).unwrap()
}

fn classical() -> ScenarioParams {
    ScenarioParams {
        sigma_low_sq: 1.0,
        sigma_high_sq: 1.0,
        ..ScenarioParams::default()
    }
}

#[test]
fn cheap_scenarios_pass_at_defaults() {
    for name in ["asymmetric-independence", "reverse-independence", "invertible-scan", "mean-certainty"] {
        for o in run_named(name, &ScenarioParams::default()).unwrap() {
            let failed: Vec<_> = o.failures().map(|a| a.description.clone()).collect();
            assert!(o.passed(), "{name}: {failed:?}");
            assert!(!o.assertions.is_empty());
        }
    }
}

#[test]
fn classical_limit_tags_zero_claims() {
    for name in ["asymmetric-independence", "reverse-independence", "invertible-scan"] {
        let out = run_named(name, &classical()).unwrap();
        assert!(out.iter().all(|o| o.passed()), "{name}");
        let tagged = out
            .iter()
            .flat_map(|o| &o.assertions)
            .filter(|a| a.tag == Some(Tag::ClassicalZero))
            .count();
        assert!(tagged > 0, "{name} has no classical-zero rows");
    }
}

#[test]
fn quadratic_forms_on_unequal_box() {
    let o = gexpect::scenarios::run_quadratic_form(
        &[iv(1.0, 4.0), iv(2.0, 8.0)],
        &[0, 1],
        &gexpect::SymMatrix::identity(2),
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(o.passed());
    let v = o.quantity("E[<AX,X>]").unwrap().value;
    assert!((v - 12.0).abs() <= 1e-2, "{v}");
}

#[test]
fn reverse_witness_rejects_bad_positions() {
    let ivs = [iv(1.0, 4.0), iv(1.0, 4.0)];
    let e = run_reverse_independence_witness(&ivs, &[0, 1], 1, 0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(e, ScenarioError::Precondition(_)), "{e}");
}

#[test]
fn invertible_scan_finds_no_diagonal_image_for_mixing_maps() {
    let base = iv(1.0, 4.0);
    let o = run_invertible_scan(&base, &invertible_catalog()).unwrap();
    assert!(o.passed());
    let rot = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
    assert!(!vertex_images_diagonal(&rot, &[base, base]).unwrap());
    let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!(vertex_images_diagonal(&swap, &[base, base]).unwrap());
}

#[test]
fn unknown_scenario_lists_catalog() {
    let e = run_named("nope", &ScenarioParams::default()).unwrap_err().to_string();
    for name in SCENARIO_NAMES {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn outcomes_are_deterministic() {
    let a = run_named("asymmetric-independence", &ScenarioParams::default()).unwrap();
    let b = run_named("asymmetric-independence", &ScenarioParams::default()).unwrap();
    assert_eq!(a[0].quantities, b[0].quantities);
    assert_eq!(a[0].assertions, b[0].assertions);
}
