use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use gexpect::catalog;
use gexpect::expectation::{
    expect, expect_gnormal, expect_maximal, expect_sequential, gaussian_oracle, lower_expectation, Method, Support,
};
use gexpect::{ExpectationError, GammaSet, RandomVectorSpec, SolverConfig, SymMatrix, TestFunction, UncertaintyInterval};

fn iv(lo: f64, hi: f64) -> UncertaintyInterval {
    UncertaintyInterval::new(lo, hi).unwrap()
}

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn one_dim_moments() {
    let g = GammaSet::Interval1D(iv(1.0, 4.0));
    let x4 = expect_gnormal(&g, &catalog::monomial(4), &cfg()).unwrap();
    assert!((x4.value - 48.0).abs() <= 48e-3, "{}", x4.value);
    let abs = expect_gnormal(&g, &catalog::abs(), &cfg()).unwrap();
    assert_abs_diff_eq!(abs.value, 2.0 * (2.0 / PI).sqrt(), epsilon = 2e-3);
    assert_eq!(abs.method, Method::Pde);
}

#[test]
fn lower_expectation_of_square_is_lower_variance() {
    let spec = RandomVectorSpec::GNormal(GammaSet::Interval1D(iv(1.0, 4.0)));
    let r = lower_expectation(&spec, &catalog::monomial(2), &cfg()).unwrap();
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-3);
}

#[test]
fn classical_box_matches_gaussian_oracle() {
    // Equal bounds: the G-normal law is the ordinary Gaussian.
    let g = GammaSet::DiagonalBox(vec![iv(1.0, 1.0), iv(2.0, 2.0)]);
    let cov = SymMatrix::diagonal(&[1.0, 2.0]);
    let phi = catalog::abs_sum();
    let pde = expect_gnormal(&g, &phi, &cfg()).unwrap();
    let oracle = gaussian_oracle(&cov, &phi).unwrap();
    assert_abs_diff_eq!(pde.value, oracle, epsilon = 1e-2);
}

#[test]
fn sequential_witness_on_unequal_intervals() {
    let ivs = [iv(1.0, 4.0), iv(2.0, 8.0)];
    let r = expect_sequential(&ivs, &[0, 1], &catalog::x_y2(), &cfg()).unwrap();
    assert_abs_diff_eq!(r.value, 12.0 / (2.0 * PI).sqrt(), epsilon = 1e-2);
    assert_eq!(r.method, Method::Nested);
    let rev = expect_sequential(&ivs, &[0, 1], &catalog::y_x2(), &cfg()).unwrap();
    assert_abs_diff_eq!(rev.value, 0.0, epsilon = 1e-2);
}

#[test]
fn sequential_quadratic_form_identity() {
    let ivs = vec![iv(1.0, 4.0), iv(2.0, 8.0)];
    let spec = RandomVectorSpec::sequential(ivs);
    let r = expect(&spec, &catalog::sum_squares(2), &cfg()).unwrap();
    assert_abs_diff_eq!(r.value, 12.0, epsilon = 1e-2);
}

#[test]
fn three_variable_chain_separates() {
    let ivs = [iv(1.0, 4.0); 3];
    let phi = catalog::sum_squares(3);
    let r = expect_sequential(&ivs, &[2, 0, 1], &phi, &cfg()).unwrap();
    assert_abs_diff_eq!(r.value, 12.0, epsilon = 1e-2);
}

#[test]
fn four_variables_are_rejected() {
    let ivs = [iv(1.0, 4.0); 4];
    let err = expect_sequential(&ivs, &[0, 1, 2, 3], &catalog::sum_squares(4), &cfg()).unwrap_err();
    assert!(matches!(err, ExpectationError::TooManyVariables { found: 4, .. }), "{err}");
}

#[test]
fn bad_order_and_arity() {
    let ivs = [iv(1.0, 4.0); 2];
    assert!(matches!(
        expect_sequential(&ivs, &[0, 0], &catalog::x_y2(), &cfg()),
        Err(ExpectationError::InvalidOrder(_))
    ));
    assert!(matches!(
        expect_sequential(&ivs, &[0, 1], &catalog::abs(), &cfg()),
        Err(ExpectationError::ArityMismatch { .. })
    ));
}

#[test]
fn linear_image_of_sequential_pair() {
    let inner = RandomVectorSpec::sequential(vec![iv(1.0, 4.0); 2]);
    let spec = RandomVectorSpec::linear_image(DMatrix::from_row_slice(1, 2, &[3.0, 4.0]), inner).unwrap();
    let r = expect(&spec, &catalog::monomial(2), &cfg()).unwrap();
    assert_abs_diff_eq!(r.value, 100.0, epsilon = 1e-2);
}

#[test]
fn maximal_box_and_points() {
    let boxed = Support::Box(vec![(-1.0, 2.0), (0.5, 1.0)]);
    let r = expect_maximal(&boxed, &catalog::diff_squares()).unwrap();
    assert_abs_diff_eq!(r.value, 4.0 - 0.25, epsilon = 1e-5);
    let spec = RandomVectorSpec::Maximal(Support::Points(vec![vec![-2.0], vec![1.0]]));
    assert_eq!(expect(&spec, &catalog::monomial(3), &cfg()).unwrap().value, 1.0);
    assert_eq!(lower_expectation(&spec, &catalog::monomial(3), &cfg()).unwrap().value, -8.0);
}

#[test]
fn constants_pass_through_every_route() {
    let c = catalog::constant(2.5);
    let g = GammaSet::Interval1D(iv(1.0, 4.0));
    assert_abs_diff_eq!(expect_gnormal(&g, &c, &cfg()).unwrap().value, 2.5, epsilon = 1e-12);
    let seq = expect_sequential(&[iv(1.0, 4.0); 2], &[1, 0], &catalog::constant_n(2, 2.5), &cfg()).unwrap();
    assert_abs_diff_eq!(seq.value, 2.5, epsilon = 1e-12);
}

#[test]
fn error_estimate_bounds_distance_to_refined_value() {
    let g = GammaSet::Interval1D(iv(1.0, 4.0));
    let kinked = TestFunction::new("kink", 1, 0, 2.0, |x| (x[0] - 0.3).abs()).unwrap();
    let coarse = expect_gnormal(&g, &kinked, &cfg()).unwrap();
    let fine = expect_gnormal(&g, &kinked, &cfg().with_spacing_scaled(0.5)).unwrap();
    assert!((coarse.value - fine.value).abs() <= coarse.error_estimate, "{coarse:?} vs {}", fine.value);
}
