//! Test functions of locally Lipschitz polynomial growth.
//!
//! Every function carries the constants of its growth bound
//! `|φ(x) − φ(y)| ≤ C(1 + |x|^m + |y|^m)|x − y|`; the solvers size their
//! truncated domains from them.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const SPOT_CHECK_PAIRS: usize = 64;
const SPOT_CHECK_RADIUS: f64 = 8.0;
const SPOT_CHECK_SEED: u64 = 0x7068_6921;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestFunctionError {
    #[error("arity must be at least 1")]
    ZeroArity,
    #[error("growth constant must be positive and finite, got {0}")]
    BadGrowthConstant(f64),
    #[error("declared growth bound (C={constant}, m={order}) violated at {x:?} vs {y:?}")]
    GrowthViolated {
        constant: f64,
        order: u32,
        x: Vec<f64>,
        y: Vec<f64>,
    },
    #[error("function is not finite at {0:?}")]
    NonFinite(Vec<f64>),
}

/// Curvature tag. Convex functions attain the sublinear expectation at the
/// largest variance, concave ones at the smallest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Convex,
    Concave,
}

/// Growth data `(C, m)` of the local Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Growth {
    pub order: u32,
    pub constant: f64,
}

impl Growth {
    /// Upper bound on `|φ(x)| − |φ(0)|` for `|x| ≤ r`.
    pub fn value_bound(&self, radius: f64) -> f64 {
        self.constant * (1.0 + radius.powi(self.order as i32)) * radius
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct TestFunction {
    name: String,
    arity: usize,
    eval: Evaluator,
    growth: Growth,
    shape: Option<Shape>,
    bounded: bool,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .field("growth", &self.growth)
            .field("shape", &self.shape)
            .field("bounded", &self.bounded)
            .finish()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl TestFunction {
    /// Builds a test function and spot-checks the declared growth bound on
    /// seeded random pairs in the ball of radius 8.
    pub fn new<F>(
        name: impl Into<String>,
        arity: usize,
        growth_order: u32,
        growth_constant: f64,
        f: F,
    ) -> Result<Self, TestFunctionError>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let tf = Self::new_unchecked(name, arity, growth_order, growth_constant, f)?;
        tf.spot_check()?;
        Ok(tf)
    }

    /// Same as [`TestFunction::new`] without the growth spot-check; used for
    /// functions derived from already-checked ones.
    pub fn new_unchecked<F>(
        name: impl Into<String>,
        arity: usize,
        growth_order: u32,
        growth_constant: f64,
        f: F,
    ) -> Result<Self, TestFunctionError>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if arity == 0 {
            return Err(TestFunctionError::ZeroArity);
        }
        if !(growth_constant.is_finite() && growth_constant > 0.0) {
            return Err(TestFunctionError::BadGrowthConstant(growth_constant));
        }
        Ok(Self {
            name: name.into(),
            arity,
            eval: Arc::new(f),
            growth: Growth {
                order: growth_order,
                constant: growth_constant,
            },
            shape: None,
            bounded: false,
        })
    }

    fn spot_check(&self) -> Result<(), TestFunctionError> {
        let mut rng = ChaCha8Rng::seed_from_u64(SPOT_CHECK_SEED);
        let m = self.growth.order as i32;
        for _ in 0..SPOT_CHECK_PAIRS {
            let x: Vec<f64> = (0..self.arity)
                .map(|_| rng.random_range(-SPOT_CHECK_RADIUS..SPOT_CHECK_RADIUS))
                .collect();
            let y: Vec<f64> = (0..self.arity)
                .map(|_| rng.random_range(-SPOT_CHECK_RADIUS..SPOT_CHECK_RADIUS))
                .collect();
            let fx = self.eval(&x);
            let fy = self.eval(&y);
            if !fx.is_finite() {
                return Err(TestFunctionError::NonFinite(x));
            }
            if !fy.is_finite() {
                return Err(TestFunctionError::NonFinite(y));
            }
            let dist: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let bound = self.growth.constant * (1.0 + norm(&x).powi(m) + norm(&y).powi(m)) * dist;
            if (fx - fy).abs() > bound * (1.0 + 1e-12) + 1e-12 {
                return Err(TestFunctionError::GrowthViolated {
                    constant: self.growth.constant,
                    order: self.growth.order,
                    x,
                    y,
                });
            }
        }
        Ok(())
    }

    pub fn convex(mut self) -> Self {
        self.shape = Some(Shape::Convex);
        self
    }

    pub fn concave(mut self) -> Self {
        self.shape = Some(Shape::Concave);
        self
    }

    pub fn bounded(mut self) -> Self {
        self.bounded = true;
        self
    }

    pub fn with_shape(mut self, shape: Option<Shape>) -> Self {
        self.shape = shape;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn growth(&self) -> Growth {
        self.growth
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// `−φ`, with the curvature tag flipped.
    pub fn negate(&self) -> Self {
        let inner = self.eval.clone();
        Self {
            name: format!("-({})", self.name),
            arity: self.arity,
            eval: Arc::new(move |x| -inner(x)),
            growth: self.growth,
            shape: self.shape.map(|s| match s {
                Shape::Convex => Shape::Concave,
                Shape::Concave => Shape::Convex,
            }),
            bounded: self.bounded,
        }
    }

    /// `λφ`; negative factors flip the curvature tag.
    pub fn scale(&self, factor: f64) -> Self {
        let inner = self.eval.clone();
        let shape = match (self.shape, factor) {
            (_, 0.0) => None,
            (s, f) if f > 0.0 => s,
            (Some(Shape::Convex), _) => Some(Shape::Concave),
            (Some(Shape::Concave), _) => Some(Shape::Convex),
            (None, _) => None,
        };
        Self {
            name: format!("{factor}*({})", self.name),
            arity: self.arity,
            eval: Arc::new(move |x| factor * inner(x)),
            growth: Growth {
                order: self.growth.order,
                constant: self.growth.constant * factor.abs().max(f64::MIN_POSITIVE),
            },
            shape,
            bounded: self.bounded,
        }
    }

    /// `x ↦ φ(−x)`.
    pub fn reflect(&self) -> Self {
        let inner = self.eval.clone();
        Self {
            name: format!("{}(-x)", self.name),
            arity: self.arity,
            eval: Arc::new(move |x| {
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                inner(&neg)
            }),
            growth: self.growth,
            shape: self.shape,
            bounded: self.bounded,
        }
    }

    /// `x ↦ φ(Mx)` for a row-major `rows × cols` matrix `M`, `rows` = arity.
    ///
    /// Convexity and concavity survive composition with a linear map.
    pub fn compose_linear(&self, rows: usize, cols: usize, m: &[f64]) -> Self {
        assert_eq!(rows, self.arity, "matrix rows must equal the function arity");
        assert_eq!(m.len(), rows * cols);
        let inner = self.eval.clone();
        let mat = m.to_vec();
        // Operator norm bounded by the Frobenius norm.
        let op = mat.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let order = self.growth.order;
        let constant = self.growth.constant * op * op.max(1.0).powi(order as i32);
        Self {
            name: format!("{}∘M", self.name),
            arity: cols,
            eval: Arc::new(move |x| {
                let y: Vec<f64> = (0..rows)
                    .map(|i| (0..cols).map(|j| mat[i * cols + j] * x[j]).sum())
                    .collect();
                inner(&y)
            }),
            growth: Growth { order, constant },
            shape: self.shape,
            bounded: self.bounded,
        }
    }

    /// Reorders arguments: the result takes `y` with `y[k] = x[perm[k]]`.
    pub fn permute_args(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.arity);
        let inner = self.eval.clone();
        let perm = perm.to_vec();
        Self {
            name: self.name.clone(),
            arity: self.arity,
            eval: Arc::new(move |y| {
                let mut x = vec![0.0; perm.len()];
                for (k, &p) in perm.iter().enumerate() {
                    x[p] = y[k];
                }
                inner(&x)
            }),
            growth: self.growth,
            shape: self.shape,
            bounded: self.bounded,
        }
    }

    /// `φ + ψ` (same arity). The sum of two convex functions stays convex.
    pub fn add(&self, other: &TestFunction) -> Self {
        assert_eq!(self.arity, other.arity);
        let a = self.eval.clone();
        let b = other.eval.clone();
        let shape = if self.shape == other.shape { self.shape } else { None };
        Self {
            name: format!("{} + {}", self.name, other.name),
            arity: self.arity,
            eval: Arc::new(move |x| a(x) + b(x)),
            growth: Growth {
                order: self.growth.order.max(other.growth.order),
                constant: self.growth.constant + other.growth.constant,
            },
            shape,
            bounded: self.bounded && other.bounded,
        }
    }

    /// `φ + c`.
    pub fn shift(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Self {
            name: format!("{} + {c}", self.name),
            eval: Arc::new(move |x| inner(x) + c),
            ..self.clone()
        }
    }

    /// Extends `φ(y_1..y_k)` to arity `n ≥ k`, ignoring the trailing arguments.
    pub fn extend_arity(&self, n: usize) -> Self {
        assert!(n >= self.arity);
        let inner = self.eval.clone();
        let k = self.arity;
        Self {
            name: self.name.clone(),
            arity: n,
            eval: Arc::new(move |x| inner(&x[..k])),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_violation_is_caught() {
        // x^3 does not satisfy the order-1 bound with C = 1.
        let err = TestFunction::new("x^3", 1, 1, 1.0, |x| x[0].powi(3)).unwrap_err();
        assert!(matches!(err, TestFunctionError::GrowthViolated { .. }));
        assert!(TestFunction::new("x^3", 1, 2, 3.0, |x| x[0].powi(3)).is_ok());
    }

    #[test]
    fn rejects_bad_metadata() {
        assert_eq!(
            TestFunction::new("z", 0, 0, 1.0, |_| 0.0).unwrap_err(),
            TestFunctionError::ZeroArity
        );
        assert!(TestFunction::new("z", 1, 0, 0.0, |_| 0.0).is_err());
        assert!(matches!(
            TestFunction::new("ln", 1, 0, 1.0, |x| x[0].ln()).unwrap_err(),
            TestFunctionError::NonFinite(_)
        ));
    }

    #[test]
    fn transforms() {
        let f = TestFunction::new("x*y^2", 2, 2, 3.0, |x| x[0] * x[1] * x[1]).unwrap();
        assert_eq!(f.permute_args(&[1, 0]).eval(&[2.0, 3.0]), 3.0 * 4.0);
        assert_eq!(f.reflect().eval(&[1.0, 2.0]), -4.0);
        assert_eq!(f.negate().eval(&[1.0, 2.0]), -4.0);
        let g = f.compose_linear(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        assert_eq!(g.eval(&[2.0, 1.0]), 3.0 * 1.0);
        let sq = TestFunction::new("x^2", 1, 1, 2.0, |x| x[0] * x[0]).unwrap().convex();
        assert_eq!(sq.negate().shape(), Some(Shape::Concave));
        assert_eq!(sq.scale(-2.0).shape(), Some(Shape::Concave));
        assert_eq!(sq.extend_arity(3).eval(&[3.0, 9.0, 9.0]), 9.0);
    }
}
