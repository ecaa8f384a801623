//! Numerical witnesses for the structural results on G-normal and
//! sequentially independent vectors. Every runner returns the quantities it
//! computed and a list of pass/fail assertions over them.

mod runners;

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::expectation::{ExpectationError, ExpectationResult};
use crate::gamma::{GammaError, SymMatrix, UncertaintyInterval};
use crate::pde::SolverConfig;

pub use runners::{
    invertible_catalog, linear_image_catalog, quadratic_catalog, run_asymmetric_independence, run_diag_not_indep, run_invertible_scan,
    run_linear_combination, run_linear_image, run_mean_certainty, run_quadratic_form,
    run_reverse_independence_witness, run_symmetry_identity, vertex_images_diagonal,
};

/// Absolute tolerance for nested values that should vanish or match an oracle.
pub const ABS_TOL: f64 = 1e-2;
/// Absolute tolerance for swap identities between two nested or 2D values.
pub const SWAP_TOL: f64 = 2e-2;
/// Relative tolerance for moment identities.
pub const MOMENT_REL_TOL: f64 = 1e-3;
/// A value counts as strictly positive when it exceeds this multiple of its error.
pub const POSITIVITY_FACTOR: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Expectation(#[from] ExpectationError),
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

impl From<crate::pde::PdeError> for ScenarioError {
    fn from(e: crate::pde::PdeError) -> Self {
        Self::Expectation(e.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub label: String,
    pub value: f64,
    pub error_estimate: f64,
    /// A difference or margin built from other quantities, not an expectation.
    pub derived: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    /// A strict-positivity claim replaced by its classical counterpart.
    ClassicalZero,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::ClassicalZero => f.write_str("classical-zero"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    /// Index into the outcome's quantities.
    pub quantity: usize,
    pub description: String,
    /// How the margin is computed, e.g. `0.01 - |diff|`.
    pub rule: String,
    pub pass: bool,
    pub margin: f64,
    pub tag: Option<Tag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub quantities: Vec<Quantity>,
    pub assertions: Vec<Assertion>,
    pub runtime_ms: u128,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    pub fn quantity(&self, label: &str) -> Option<&Quantity> {
        self.quantities.iter().find(|q| q.label == label)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }
}

/// Accumulates quantities and assertions for one run.
pub(crate) struct Recorder {
    name: String,
    started: Instant,
    quantities: Vec<Quantity>,
    assertions: Vec<Assertion>,
}

impl Recorder {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            started: Instant::now(),
            quantities: Vec::new(),
            assertions: Vec::new(),
        }
    }

    pub fn quantity(&mut self, label: impl Into<String>, value: f64, error_estimate: f64) -> usize {
        self.quantities.push(Quantity {
            label: label.into(),
            value,
            error_estimate,
            derived: false,
        });
        self.quantities.len() - 1
    }

    pub fn derived(&mut self, label: impl Into<String>, value: f64, error_estimate: f64) -> usize {
        let q = self.quantity(label, value, error_estimate);
        self.quantities[q].derived = true;
        q
    }

    pub fn result(&mut self, label: impl Into<String>, r: &ExpectationResult) -> usize {
        self.quantity(label, r.value, r.error_estimate)
    }

    pub fn value(&self, idx: usize) -> (f64, f64) {
        let q = &self.quantities[idx];
        (q.value, q.error_estimate)
    }

    pub fn custom(&mut self, quantity: usize, description: impl Into<String>, rule: String, margin: f64, tag: Option<Tag>) -> bool {
        let pass = margin >= 0.0 && margin.is_finite();
        self.assertions.push(Assertion {
            quantity,
            description: description.into(),
            rule,
            pass,
            margin,
            tag,
        });
        pass
    }

    /// Records `lhs − rhs` as a quantity and asserts `|lhs − rhs| ≤ tol`.
    pub fn close(&mut self, label: impl Into<String>, description: impl Into<String>, lhs: (f64, f64), rhs: (f64, f64), tol: f64) -> bool {
        let diff = lhs.0 - rhs.0;
        let q = self.derived(label, diff, lhs.1 + rhs.1);
        self.custom(q, description, format!("{tol} - |diff|"), tol - diff.abs(), None)
    }

    /// Asserts `|value| ≤ tol` on an existing quantity.
    pub fn near_zero(&mut self, quantity: usize, description: impl Into<String>, tol: f64, tag: Option<Tag>) -> bool {
        let v = self.quantities[quantity].value;
        self.custom(quantity, description, format!("{tol} - |value|"), tol - v.abs(), tag)
    }

    /// Asserts `value > 10·error` on an existing quantity.
    pub fn positive(&mut self, quantity: usize, description: impl Into<String>) -> bool {
        let e = self.quantities[quantity].error_estimate;
        self.positive_against(quantity, description, e)
    }

    /// Asserts `value > 10·error` with an explicitly combined error.
    pub fn positive_against(&mut self, quantity: usize, description: impl Into<String>, error: f64) -> bool {
        let v = self.quantities[quantity].value;
        let floor = POSITIVITY_FACTOR * error;
        // Strict inequality: a zero value with zero error must fail.
        let margin = if v > floor { v - floor } else { -(floor - v).max(f64::MIN_POSITIVE) };
        self.custom(quantity, description, format!("value - {POSITIVITY_FACTOR}*error"), margin, None)
    }

    /// Relative closeness `|value − target| ≤ rel·max(|target|, 1)` on an existing quantity.
    pub fn relative(&mut self, quantity: usize, description: impl Into<String>, target: f64, rel: f64) -> bool {
        let v = self.quantities[quantity].value;
        let tol = rel * target.abs().max(1.0);
        self.custom(quantity, description, format!("{tol} - |value - {target}|"), tol - (v - target).abs(), None)
    }

    /// An exact (algebraic) check.
    pub fn holds(&mut self, quantity: usize, description: impl Into<String>, ok: bool, tag: Option<Tag>) -> bool {
        self.custom(quantity, description, "exact".into(), if ok { 0.0 } else { -1.0 }, tag)
    }

    pub fn finish(self) -> ScenarioOutcome {
        ScenarioOutcome {
            name: self.name,
            quantities: self.quantities,
            assertions: self.assertions,
            runtime_ms: self.started.elapsed().as_millis(),
        }
    }
}

/// Parameters shared by the catalog run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub sigma_low_sq: f64,
    pub sigma_high_sq: f64,
    pub alpha: f64,
    pub solver: SolverConfig,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            sigma_low_sq: 1.0,
            sigma_high_sq: 4.0,
            alpha: 4.0,
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioParams {
    /// The base interval. A time horizon `t ≠ 1` is folded into the
    /// variances, since `Ê[φ(√t X)]` is the expectation under `t·[σ̲², σ̄²]`.
    pub fn interval(&self) -> Result<UncertaintyInterval, ScenarioError> {
        let t = self.solver.time_horizon;
        Ok(UncertaintyInterval::new(self.sigma_low_sq * t, self.sigma_high_sq * t)?)
    }

    /// Solver settings with the horizon folded into the variances.
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            time_horizon: 1.0,
            ..self.solver.clone()
        }
    }
}

/// Names accepted by [`run_named`], in catalog order.
pub const SCENARIO_NAMES: &[&str] = &[
    "asymmetric-independence",
    "linear-combination",
    "linear-image",
    "symmetry-identity",
    "diag-not-indep",
    "quadratic-form",
    "reverse-independence",
    "invertible-scan",
    "mean-certainty",
];

/// Runs one catalog scenario at `params`. In the classical limit `σ̲² = σ̄²`
/// the scenarios whose hypotheses need variance uncertainty run their
/// classical-zero variants instead of failing.
pub fn run_named(name: &str, params: &ScenarioParams) -> Result<Vec<ScenarioOutcome>, ScenarioError> {
    let iv = params.interval()?;
    let cfg = params.solver();
    let out = match name {
        "asymmetric-independence" => {
            if iv.is_classical() {
                vec![runners::asymmetric_classical(&iv, &cfg)?]
            } else {
                vec![run_asymmetric_independence(&iv, &iv, &cfg)?]
            }
        }
        "linear-combination" => vec![run_linear_combination(&iv, &cfg)?],
        "linear-image" => {
            let mut out = Vec::new();
            for (a, v) in linear_image_catalog() {
                out.push(run_linear_image(&iv, &a, &v, &cfg)?);
            }
            out
        }
        "symmetry-identity" => {
            let mut alphas = vec![1.0];
            if params.alpha != 1.0 {
                alphas.push(params.alpha);
            }
            alphas
                .into_iter()
                .map(|a| run_symmetry_identity(&iv, a, &cfg))
                .collect::<Result<_, _>>()?
        }
        "diag-not-indep" => vec![run_diag_not_indep(&iv, &cfg)?],
        "quadratic-form" => {
            let ivs = [iv, iv];
            let mut out = Vec::new();
            for (a, order) in quadratic_catalog() {
                out.push(run_quadratic_form(&ivs, &order, &a, &cfg)?);
            }
            out
        }
        "reverse-independence" => {
            let ivs = [iv, iv];
            if iv.is_classical() {
                vec![runners::reverse_classical(&ivs, &cfg)?]
            } else {
                vec![run_reverse_independence_witness(&ivs, &[0, 1], 0, 1, &cfg)?]
            }
        }
        "invertible-scan" => {
            if iv.is_classical() {
                vec![runners::invertible_scan_classical(&iv, &invertible_catalog())?]
            } else {
                vec![run_invertible_scan(&iv, &invertible_catalog())?]
            }
        }
        "mean-certainty" => vec![run_mean_certainty(&iv, &cfg)?],
        other => {
            return Err(ScenarioError::Precondition(format!(
                "unknown scenario {other:?}; valid names: {}",
                SCENARIO_NAMES.join(", ")
            )))
        }
    };
    Ok(out)
}

/// Runs every catalog scenario in order.
pub fn run_all(params: &ScenarioParams) -> Result<Vec<ScenarioOutcome>, ScenarioError> {
    let mut out = Vec::new();
    for name in SCENARIO_NAMES {
        out.extend(run_named(name, params)?);
    }
    Ok(out)
}

/// `A` as a `2×2` array.
pub(crate) fn as_2x2(a: &DMatrix<f64>) -> [[f64; 2]; 2] {
    [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]]
}

/// `xᵀAx` as a test function.
pub(crate) fn quadratic_form_fn(a: &SymMatrix) -> crate::testfn::TestFunction {
    let a = a.clone();
    let n = a.dim();
    let c = 2.0 * a.frobenius_norm().max(f64::MIN_POSITIVE);
    crate::testfn::TestFunction::new_unchecked("<Ax,x>", n, 1, c, move |x| a.quadratic_form(x))
        .expect("valid metadata")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorder_margins() {
        let mut r = Recorder::new("t");
        assert!(r.close("d", "eq", (1.0, 0.0), (1.005, 0.0), 1e-2));
        assert!(!r.close("d2", "neq", (1.0, 0.0), (1.5, 0.0), 1e-2));
        let q = r.quantity("v", 1.0, 0.01);
        assert!(r.positive(q, "pos"));
        let z = r.quantity("z", 0.0, 0.0);
        assert!(!r.positive(z, "zero is not positive"));
        let out = r.finish();
        assert_eq!(out.assertions.len(), 4);
        assert!(!out.passed());
        assert!(out.assertions[0].margin >= 0.0);
        assert!(out.assertions[1].margin < 0.0);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let err = run_named("bogus", &ScenarioParams::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("linear-combination") && msg.contains("bogus"));
    }

    #[test]
    fn horizon_folds_into_variances() {
        let mut p = ScenarioParams::default();
        p.solver.time_horizon = 0.5;
        let iv = p.interval().unwrap();
        assert_eq!((iv.low(), iv.high()), (0.5, 2.0));
        assert_eq!(p.solver().time_horizon, 1.0);
    }
}
