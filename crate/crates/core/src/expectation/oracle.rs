//! Quadrature oracles that do not touch the PDE solvers.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;

use super::ExpectationError;
use crate::gamma::{SymMatrix, UncertaintyInterval};
use crate::testfn::{Shape, TestFunction};

const NODES_PER_PANEL: usize = 64;
/// Integration range in standard deviations.
const RANGE: f64 = 12.0;
const PANELS: usize = 12;

fn rule(nodes: usize) -> GaussLegendre {
    GaussLegendre::new(NonZeroUsize::new(nodes).expect("positive node count"))
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `E[f(ξ)]` for a standard normal `ξ`, folded onto `[0, 12]` so that a kink
/// at the origin sits on a panel edge.
pub fn standard_normal_mean(f: impl Fn(f64) -> f64) -> f64 {
    let gl = rule(NODES_PER_PANEL);
    let width = RANGE / PANELS as f64;
    (0..PANELS)
        .map(|p| {
            let a = p as f64 * width;
            gl.integrate(a, a + width, |x| (f(x) + f(-x)) * density(x))
        })
        .sum()
}

/// Classical value `E[φ(σξ)]` at the variance picked by the curvature tag:
/// `σ̄` for convex `φ`, `σ̲` for concave `φ`.
pub fn convex_oracle_1d(iv: &UncertaintyInterval, phi: &TestFunction) -> Result<f64, ExpectationError> {
    if phi.arity() != 1 {
        return Err(ExpectationError::ArityMismatch {
            expected: 1,
            found: phi.arity(),
        });
    }
    let sigma = match phi.shape() {
        Some(Shape::Convex) => iv.sigma_high(),
        Some(Shape::Concave) => iv.sigma_low(),
        None => return Err(ExpectationError::UntaggedShape(phi.name().to_string())),
    };
    Ok(standard_normal_mean(|x| phi.eval(&[sigma * x])))
}

/// Classical `E[φ(X)]` for `X ∼ N(0, Σ)`, `n ≤ 2`, by tensor composite
/// Gauss–Legendre in whitened coordinates `X = Σ^{1/2}ξ`.
pub fn gaussian_oracle(cov: &SymMatrix, phi: &TestFunction) -> Result<f64, ExpectationError> {
    let n = cov.dim();
    if phi.arity() != n {
        return Err(ExpectationError::ArityMismatch {
            expected: n,
            found: phi.arity(),
        });
    }
    if n > 2 {
        return Err(ExpectationError::TooManyVariables { found: n, max: 2 });
    }
    // Square root through the eigendecomposition, which tolerates singular Σ.
    let eig = cov.to_dmatrix().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-10) {
        return Err(ExpectationError::BadArgument("covariance is not positive semidefinite".into()));
    }
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let l = &eig.eigenvectors * root;
    let gl = rule(32);
    let width = 2.0 * RANGE / (2 * PANELS) as f64;
    let panels: Vec<f64> = (0..2 * PANELS).map(|p| -RANGE + p as f64 * width).collect();
    let integrate = |f: &dyn Fn(f64) -> f64| -> f64 {
        panels.iter().map(|&a| gl.integrate(a, a + width, |x| f(x) * density(x))).sum()
    };
    let value = if n == 1 {
        integrate(&|x| phi.eval(&[l[(0, 0)] * x]))
    } else {
        integrate(&|x| {
            integrate(&|y| {
                let p = [l[(0, 0)] * x + l[(0, 1)] * y, l[(1, 0)] * x + l[(1, 1)] * y];
                phi.eval(&p)
            })
        })
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn iv(a: f64, b: f64) -> UncertaintyInterval {
        UncertaintyInterval::new(a, b).unwrap()
    }

    #[test]
    fn moments() {
        let i = iv(1.0, 4.0);
        assert!((convex_oracle_1d(&i, &catalog::monomial(2)).unwrap() - 4.0).abs() < 1e-12);
        assert!((convex_oracle_1d(&i, &catalog::monomial(2).negate()).unwrap() + 1.0).abs() < 1e-12);
        assert!((convex_oracle_1d(&i, &catalog::monomial(4)).unwrap() - 48.0).abs() < 1e-10);
    }

    #[test]
    fn kinked_functions() {
        let i = iv(1.0, 4.0);
        let want = 2.0 * (2.0 / PI).sqrt();
        assert!((convex_oracle_1d(&i, &catalog::abs()).unwrap() - want).abs() < 1e-12);
        assert!((convex_oracle_1d(&i, &catalog::pos_part()).unwrap() - want / 2.0).abs() < 1e-12);
    }

    #[test]
    fn untagged_is_rejected() {
        let e = convex_oracle_1d(&iv(1.0, 4.0), &catalog::monomial(3)).unwrap_err();
        assert!(matches!(e, ExpectationError::UntaggedShape(_)));
    }

    #[test]
    fn correlated_pair() {
        let cov = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let v = gaussian_oracle(&cov, &catalog::xy()).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = gaussian_oracle(&SymMatrix::diagonal(&[1.0, 4.0]), &catalog::sum_squares(2)).unwrap();
        assert!((v - 5.0).abs() < 1e-10);
    }
}
