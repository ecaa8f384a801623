//! Sublinear expectations `Ê[φ(X)]` for G-normal, sequentially independent,
//! maximally distributed and linearly transformed random vectors.

mod maximal;
mod nested;
mod oracle;

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::gamma::{GammaError, GammaSet, UncertaintyInterval};
use crate::pde::{self, PdeError, SolveReport, SolverConfig};
use crate::testfn::TestFunction;

pub use maximal::{sup_over, SupResult, Support, SUP_REL_TOL};
pub use nested::MAX_NESTED;
pub use oracle::{convex_oracle_1d, gaussian_oracle, standard_normal_mean};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpectationError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("{found} variables requested, at most {max} supported")]
    TooManyVariables { found: usize, max: usize },
    #[error("{0:?} is not a permutation of the variable indices")]
    InvalidOrder(Vec<usize>),
    #[error("empty support")]
    EmptySupport,
    #[error("test function {0} carries no convex/concave tag")]
    UntaggedShape(String),
    #[error("{0}")]
    BadArgument(String),
}

/// Law of a random vector.
#[derive(Debug, Clone, PartialEq)]
pub enum RandomVectorSpec {
    GNormal(GammaSet),
    /// 1D G-normal coordinates; `order[k]` is the index of the `k`-th variable
    /// in the chain, each independent from all earlier ones.
    Sequential {
        intervals: Vec<UncertaintyInterval>,
        order: Vec<usize>,
    },
    Maximal(Support),
    /// `A·X` for `X` distributed as `inner`.
    LinearImage {
        matrix: DMatrix<f64>,
        inner: Box<RandomVectorSpec>,
    },
}

impl RandomVectorSpec {
    /// Sequential vector in index order.
    pub fn sequential(intervals: Vec<UncertaintyInterval>) -> Self {
        let order = (0..intervals.len()).collect();
        Self::Sequential { intervals, order }
    }

    pub fn linear_image(matrix: DMatrix<f64>, inner: RandomVectorSpec) -> Result<Self, ExpectationError> {
        let n = inner.dim()?;
        if matrix.ncols() != n {
            return Err(ExpectationError::ArityMismatch {
                expected: n,
                found: matrix.ncols(),
            });
        }
        Ok(Self::LinearImage {
            matrix,
            inner: Box::new(inner),
        })
    }

    pub fn dim(&self) -> Result<usize, ExpectationError> {
        match self {
            Self::GNormal(g) => Ok(g.dim()),
            Self::Sequential { intervals, .. } => Ok(intervals.len()),
            Self::Maximal(s) => s.dim().ok_or(ExpectationError::EmptySupport),
            Self::LinearImage { matrix, .. } => Ok(matrix.nrows()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Pde,
    Nested,
    Maximal,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pde => "pde",
            Method::Nested => "nested",
            Method::Maximal => "maximal",
            Method::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationResult {
    pub value: f64,
    pub error_estimate: f64,
    pub method: Method,
    pub diagnostics: Vec<SolveReport>,
    /// Value on the doubled spacing, when the refinement estimate was run.
    pub coarse_value: Option<f64>,
}

impl ExpectationResult {
    fn exact(value: f64, method: Method) -> Self {
        Self {
            value,
            error_estimate: 0.0,
            method,
            diagnostics: Vec::new(),
            coarse_value: None,
        }
    }

    fn negated(mut self) -> Self {
        self.value = -self.value;
        self.coarse_value = self.coarse_value.map(|c| -c);
        self
    }

    /// Richardson value `v_h + (v_h − v_{2h})/3` for the second-order scheme,
    /// with `|v_h − v_{2h}|/3` plus the boundary term as its error estimate.
    /// Falls back to the plain value when no coarse solve was run.
    pub fn extrapolated(&self) -> (f64, f64) {
        match self.coarse_value {
            Some(c) => {
                let d = self.value - c;
                (self.value + d / 3.0, self.error_estimate - d.abs() * 2.0 / 3.0)
            }
            None => (self.value, self.error_estimate),
        }
    }
}

fn check_arity(expected: usize, phi: &TestFunction) -> Result<(), ExpectationError> {
    if phi.arity() != expected {
        return Err(ExpectationError::ArityMismatch {
            expected,
            found: phi.arity(),
        });
    }
    Ok(())
}

/// `Ê[φ(X)]` for `X` distributed as `spec`.
pub fn expect(spec: &RandomVectorSpec, phi: &TestFunction, cfg: &SolverConfig) -> Result<ExpectationResult, ExpectationError> {
    check_arity(spec.dim()?, phi)?;
    match spec {
        RandomVectorSpec::GNormal(g) => expect_gnormal(g, phi, cfg),
        RandomVectorSpec::Sequential { intervals, order } => expect_sequential(intervals, order, phi, cfg),
        RandomVectorSpec::Maximal(s) => expect_maximal(s, phi),
        RandomVectorSpec::LinearImage { matrix, inner } => {
            let rows = matrix.nrows();
            let cols = matrix.ncols();
            let row_major: Vec<f64> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| matrix[(i, j)]).collect();
            expect(inner, &phi.compose_linear(rows, cols, &row_major), cfg)
        }
    }
}

/// `−Ê[−φ(X)]`.
pub fn lower_expectation(spec: &RandomVectorSpec, phi: &TestFunction, cfg: &SolverConfig) -> Result<ExpectationResult, ExpectationError> {
    Ok(expect(spec, &phi.negate(), cfg)?.negated())
}

/// `Ê[φ(X)]` for `X ∼ N(0, Γ)`, read off as `u(t, 0)` of the G-heat equation.
/// Rank-one families reduce to the scalar solve of `s ↦ φ(u s)`.
pub fn expect_gnormal(gamma: &GammaSet, phi: &TestFunction, cfg: &SolverConfig) -> Result<ExpectationResult, ExpectationError> {
    let n = gamma.dim();
    check_arity(n, phi)?;
    if gamma.max_diagonal().iter().all(|&d| d == 0.0) {
        return Ok(ExpectationResult::exact(phi.eval(&vec![0.0; n]), Method::Pde));
    }
    let report = match gamma {
        GammaSet::RankOneFamily { direction, range } => {
            let psi = phi.compose_linear(n, 1, direction);
            pde::solve_gamma(&GammaSet::Interval1D(*range), &psi, &[0.0], cfg)?
        }
        _ => pde::solve_gamma(gamma, phi, &vec![0.0; n], cfg)?,
    };
    Ok(ExpectationResult {
        value: report.value_at_origin,
        error_estimate: report.error_estimate(),
        method: Method::Pde,
        coarse_value: report.coarse_value,
        diagnostics: vec![report],
    })
}

fn validate_order(n: usize, order: &[usize]) -> Result<(), ExpectationError> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(ExpectationError::InvalidOrder(order.to_vec()));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(ExpectationError::InvalidOrder(order.to_vec()));
        }
    }
    Ok(())
}

/// Nested evaluation with `φ` already in chain order.
fn nested_in_chain_order(ivs: &[UncertaintyInterval], phi: &TestFunction, cfg: &SolverConfig) -> Result<ExpectationResult, ExpectationError> {
    if ivs.len() > MAX_NESTED {
        return Err(ExpectationError::TooManyVariables {
            found: ivs.len(),
            max: MAX_NESTED,
        });
    }
    check_arity(ivs.len(), phi)?;
    if ivs.iter().all(|iv| iv.is_zero()) || cfg.time_horizon == 0.0 {
        return Ok(ExpectationResult::exact(phi.eval(&vec![0.0; ivs.len()]), Method::Nested));
    }
    let grid = nested::nested_grid(ivs, phi, cfg)?;
    let fine = nested::run(ivs, phi, &grid, cfg)?;
    let mut levels = fine.levels;
    let coarse = if cfg.estimate_refinement {
        Some(nested::run(ivs, phi, &grid.coarsened(), cfg)?.value)
    } else {
        None
    };
    let delta = coarse.map(|c| (fine.value - c).abs());
    if let Some(last) = levels.last_mut() {
        last.refinement_delta = delta;
        last.coarse_value = coarse;
    }
    Ok(ExpectationResult {
        value: fine.value,
        error_estimate: fine.boundary + delta.unwrap_or(0.0),
        method: Method::Nested,
        diagnostics: levels,
        coarse_value: coarse,
    })
}

/// `Ê[φ(Y)]` for sequentially independent `Y`, by backward recursion
/// `ψ_n = φ`, `ψ_k(y_1..y_k) = Ê[ψ_{k+1}(y_1..y_k, Y_{k+1})]` along `order`.
pub fn expect_sequential(
    intervals: &[UncertaintyInterval],
    order: &[usize],
    phi: &TestFunction,
    cfg: &SolverConfig,
) -> Result<ExpectationResult, ExpectationError> {
    let n = intervals.len();
    if n == 0 {
        return Err(ExpectationError::ArityMismatch { expected: 1, found: 0 });
    }
    validate_order(n, order)?;
    check_arity(n, phi)?;
    let ivs: Vec<UncertaintyInterval> = order.iter().map(|&i| intervals[i]).collect();
    nested_in_chain_order(&ivs, &phi.permute_args(order), cfg)
}

/// `sup_{x ∈ Γ} φ(x)`.
pub fn expect_maximal(support: &Support, phi: &TestFunction) -> Result<ExpectationResult, ExpectationError> {
    let r = sup_over(support, phi)?;
    Ok(ExpectationResult {
        value: r.value,
        error_estimate: r.gap,
        method: Method::Maximal,
        diagnostics: Vec::new(),
        coarse_value: None,
    })
}

/// Outcome of comparing `Ê[ψ + αY_{k+1}]` with `Ê[ψ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCertainty {
    pub with_linear: ExpectationResult,
    pub without: ExpectationResult,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `Ê[ψ(Y_1..Y_k) + αY_{k+1}] = Ê[ψ(Y_1..Y_k)]`, where `ψ` takes the
/// first `k` variables of the chain and `Y_{k+1}` is the next one.
pub fn mean_certainty_check(
    intervals: &[UncertaintyInterval],
    order: &[usize],
    psi: &TestFunction,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<MeanCertainty, ExpectationError> {
    let n = intervals.len();
    validate_order(n, order)?;
    let k = psi.arity();
    if n < 2 || k >= n {
        return Err(ExpectationError::ArityMismatch {
            expected: n.saturating_sub(1).max(1),
            found: k,
        });
    }
    if !alpha.is_finite() {
        return Err(ExpectationError::BadArgument(format!("alpha must be finite, got {alpha}")));
    }
    let chain: Vec<UncertaintyInterval> = order[..=k].iter().map(|&i| intervals[i]).collect();
    let linear = TestFunction::new_unchecked("alpha*y", k + 1, 0, alpha.abs().max(f64::MIN_POSITIVE), move |y| alpha * y[k])
        .expect("valid metadata");
    let lhs_phi = psi.extend_arity(k + 1).add(&linear);
    let with_linear = nested_in_chain_order(&chain, &lhs_phi, cfg)?;
    let without = nested_in_chain_order(&chain[..k], psi, cfg)?;
    let tolerance = (cfg.tolerance * without.value.abs().max(1.0)).max(2.0 * (with_linear.error_estimate + without.error_estimate));
    let pass = (with_linear.value - without.value).abs() <= tolerance;
    Ok(MeanCertainty {
        with_linear,
        without,
        tolerance,
        pass,
    })
}
