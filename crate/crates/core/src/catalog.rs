//! Shipped test functions: monomials, kinks, the cubic witnesses `x·y²`,
//! and bounded clamps.

use crate::testfn::TestFunction;

fn build(
    name: &str,
    arity: usize,
    order: u32,
    constant: f64,
    f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> TestFunction {
    TestFunction::new(name, arity, order, constant, f)
        .unwrap_or_else(|e| panic!("catalog function {name}: {e}"))
}

/// `x^d`; tagged convex for even `d` and for `d = 1`.
pub fn monomial(degree: u32) -> TestFunction {
    let name = format!("x^{degree}");
    let f = build(
        &name,
        1,
        degree.saturating_sub(1),
        f64::from(degree.max(1)),
        move |x| x[0].powi(degree as i32),
    );
    if degree.is_multiple_of(2) || degree == 1 {
        f.convex()
    } else {
        f
    }
}

pub fn constant(c: f64) -> TestFunction {
    build(&format!("{c}"), 1, 0, 1.0, move |_| c)
        .convex()
        .bounded()
}

/// Constant `c` on `ℝⁿ`.
pub fn constant_n(arity: usize, c: f64) -> TestFunction {
    build(&format!("{c}"), arity, 0, 1.0, move |_| c)
        .convex()
        .bounded()
}

pub fn abs() -> TestFunction {
    build("|x|", 1, 0, 1.0, |x| x[0].abs()).convex()
}

pub fn pos_part() -> TestFunction {
    build("x+", 1, 0, 1.0, |x| x[0].max(0.0)).convex()
}

/// Two-piece linear map with a kink at `kink`; convex when `right ≥ left`.
pub fn piecewise_linear(left_slope: f64, right_slope: f64, kink: f64) -> TestFunction {
    let c = left_slope.abs().max(right_slope.abs()).max(1e-12);
    let f = build(
        &format!("pl({left_slope},{right_slope};{kink})"),
        1,
        0,
        c,
        move |x| {
            let d = x[0] - kink;
            if d >= 0.0 {
                right_slope * d
            } else {
                left_slope * d
            }
        },
    );
    if right_slope >= left_slope {
        f.convex()
    } else {
        f.concave()
    }
}

/// `max(lo, min(hi, φ))`: a bounded Lipschitz version of `φ`.
pub fn clamp(inner: &TestFunction, lo: f64, hi: f64) -> TestFunction {
    let g = inner.growth();
    let name = format!("clamp({}, {lo}, {hi})", inner.name());
    let inner = inner.clone();
    TestFunction::new_unchecked(name, inner.arity(), g.order, g.constant, move |x| {
        inner.eval(x).clamp(lo, hi)
    })
    .expect("clamp inherits valid metadata")
    .bounded()
}

/// `x·y²`: odd in `x`, even in `y`.
pub fn x_y2() -> TestFunction {
    build("x*y^2", 2, 2, 2.0, |x| x[0] * x[1] * x[1])
}

/// `y·x²`.
pub fn y_x2() -> TestFunction {
    build("y*x^2", 2, 2, 2.0, |x| x[1] * x[0] * x[0])
}

pub fn xy() -> TestFunction {
    build("x*y", 2, 1, 1.0, |x| x[0] * x[1])
}

pub fn sum_squares(arity: usize) -> TestFunction {
    build("|x|^2", arity, 1, 2.0, |x| x.iter().map(|v| v * v).sum()).convex()
}

/// `x² − y²`.
pub fn diff_squares() -> TestFunction {
    build("x^2-y^2", 2, 1, 2.0, |x| x[0] * x[0] - x[1] * x[1])
}

/// `(x + y)·(x − y)²`: `U·V²` for `U = Y1 + Y2`, `V = Y1 − Y2`.
pub fn sum_times_diff_sq() -> TestFunction {
    build("(x+y)(x-y)^2", 2, 2, 9.0, |x| {
        let u = x[0] + x[1];
        let v = x[0] - x[1];
        u * v * v
    })
}

/// `(x − y)·(x + y)²`: `V·U²`.
pub fn diff_times_sum_sq() -> TestFunction {
    build("(x-y)(x+y)^2", 2, 2, 9.0, |x| {
        let u = x[0] + x[1];
        let v = x[0] - x[1];
        v * u * u
    })
}

/// `|x + y|`.
pub fn abs_sum() -> TestFunction {
    build("|x+y|", 2, 0, 2.0, |x| (x[0] + x[1]).abs()).convex()
}

/// `x⁺ − y²`, neither convex nor concave.
pub fn pos_minus_sq() -> TestFunction {
    build("x+ - y^2", 2, 1, 3.0, |x| x[0].max(0.0) - x[1] * x[1])
}

/// 1D functions used by the scenario checks.
pub fn one_dim() -> Vec<TestFunction> {
    vec![
        monomial(2),
        monomial(2).negate(),
        abs(),
        pos_part(),
        monomial(3),
        monomial(4),
        clamp(&abs(), 0.0, 1.0),
    ]
}

/// 2D functions for swap and joint-law checks.
pub fn two_dim() -> Vec<TestFunction> {
    vec![
        x_y2(),
        y_x2(),
        diff_squares(),
        abs_sum(),
        pos_minus_sq(),
        clamp(&xy(), -1.0, 1.0),
    ]
}
