use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{as_2x2, quadratic_form_fn, Recorder, ScenarioError, ScenarioOutcome, Tag, ABS_TOL, MOMENT_REL_TOL, POSITIVITY_FACTOR, SWAP_TOL};
use crate::catalog;
use crate::expectation::{expect_gnormal, expect_sequential, mean_certainty_check, ExpectationResult};
use crate::gamma::{check_scaling_constraint, is_diagonal_image, rank_one_factors, rank_one_gamma, GammaSet, SymMatrix, UncertaintyInterval, ALG_TOL};
use crate::pde::SolverConfig;
use crate::testfn::TestFunction;

const CLASSICAL: Option<Tag> = Some(Tag::ClassicalZero);

fn seq(ivs: &[UncertaintyInterval], order: &[usize], phi: &TestFunction, cfg: &SolverConfig) -> Result<ExpectationResult, ScenarioError> {
    Ok(expect_sequential(ivs, order, phi, cfg)?)
}

fn pair(a: UncertaintyInterval, b: UncertaintyInterval, phi: &TestFunction, cfg: &SolverConfig) -> Result<ExpectationResult, ScenarioError> {
    seq(&[a, b], &[0, 1], phi, cfg)
}

/// `Ê[X Y²]` for `X ∼ N(0, [·, σ̄_x²])` earlier and `Y ∼ N(0, iv_y)` later:
/// `(σ̄_y² − σ̲_y²)·σ̄_x / √(2π)`.
pub(crate) fn witness_closed_form(iv_x: &UncertaintyInterval, iv_y: &UncertaintyInterval) -> f64 {
    (iv_y.high() - iv_y.low()) * iv_x.sigma_high() / (2.0 * PI).sqrt()
}

/// `x_k` on `ℝⁿ`.
fn coordinate_power(n: usize, k: usize, p: i32) -> TestFunction {
    TestFunction::new_unchecked(format!("x{}^{p}", k + 1), n, (p - 1).max(0) as u32, f64::from(p.max(1)), move |x| x[k].powi(p))
        .expect("valid metadata")
}

fn coordinate_product(n: usize, i: usize, j: usize) -> TestFunction {
    TestFunction::new_unchecked(format!("x{}*x{}", i + 1, j + 1), n, 1, 1.0, move |x| x[i] * x[j]).expect("valid metadata")
}

fn require_nonzero(iv: &UncertaintyInterval) -> Result<(), ScenarioError> {
    if iv.is_zero() {
        return Err(ScenarioError::Precondition("interval has no variance (σ̄² = 0)".into()));
    }
    Ok(())
}

/// Records `|lhs − rhs|` and asserts it exceeds `tol + 10·(combined error)`.
fn separated(rec: &mut Recorder, label: &str, description: &str, lhs: (f64, f64), rhs: (f64, f64), tol: f64) -> bool {
    let gap = (lhs.0 - rhs.0).abs();
    let err = lhs.1 + rhs.1;
    let q = rec.derived(label, gap, err);
    let margin = gap - (tol + POSITIVITY_FACTOR * err);
    rec.custom(q, description, format!("|diff| - ({tol} + {POSITIVITY_FACTOR}*error)"), margin, None)
}

/// `Ê[Y₂Y₁²] = 0` and `Ê[Y₁Y₂²] > 0` for the chain `Y₁` then `Y₂`.
pub fn run_asymmetric_independence(iv1: &UncertaintyInterval, iv2: &UncertaintyInterval, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    if iv1.is_zero() {
        return Err(ScenarioError::Precondition("the earlier variable needs σ̄² > 0".into()));
    }
    if iv2.is_classical() {
        return Err(ScenarioError::Precondition("the later variable needs σ̲² < σ̄²".into()));
    }
    let mut rec = Recorder::new("asymmetric-independence");
    let a = pair(*iv1, *iv2, &catalog::y_x2(), cfg)?;
    let b = pair(*iv1, *iv2, &catalog::x_y2(), cfg)?;
    let qa = rec.result("E[Y2*Y1^2]", &a);
    let qb = rec.result("E[Y1*Y2^2]", &b);
    let oracle = witness_closed_form(iv1, iv2);
    rec.quantity("closed form E[Y1*Y2^2]", oracle, 0.0);
    rec.near_zero(qa, "later linear variable averages out", ABS_TOL, None);
    rec.positive(qb, "later squared variable gives a strictly positive value");
    rec.close("E[Y1*Y2^2] - closed form", "nested value matches the closed form", (b.value, b.error_estimate), (oracle, 0.0), ABS_TOL);
    Ok(rec.finish())
}

/// Classical counterpart: both orders give 0.
pub(crate) fn asymmetric_classical(iv: &UncertaintyInterval, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let mut rec = Recorder::new("asymmetric-independence");
    let a = pair(*iv, *iv, &catalog::y_x2(), cfg)?;
    let b = pair(*iv, *iv, &catalog::x_y2(), cfg)?;
    let qa = rec.result("E[Y2*Y1^2]", &a);
    let qb = rec.result("E[Y1*Y2^2]", &b);
    rec.near_zero(qa, "odd moment vanishes", ABS_TOL, CLASSICAL);
    rec.near_zero(qb, "odd moment vanishes", ABS_TOL, CLASSICAL);
    Ok(rec.finish())
}

/// `U = Y₁ + Y₂`, `V = Y₁ − Y₂`: `Ê[UV²] = Ê[VU²] > 0` and `(U, V) ∼ (V, U)`.
pub fn run_linear_combination(iv: &UncertaintyInterval, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    require_nonzero(iv)?;
    let mut rec = Recorder::new("linear-combination");
    let uv2 = pair(*iv, *iv, &catalog::sum_times_diff_sq(), cfg)?;
    let vu2 = pair(*iv, *iv, &catalog::diff_times_sum_sq(), cfg)?;
    let q_uv = rec.result("E[U*V^2]", &uv2);
    let q_vu = rec.result("E[V*U^2]", &vu2);
    rec.close("E[U*V^2] - E[V*U^2]", "swap identity for the witness pair", (uv2.value, uv2.error_estimate), (vu2.value, vu2.error_estimate), SWAP_TOL);
    if iv.is_classical() {
        rec.near_zero(q_uv, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
        rec.near_zero(q_vu, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
    } else {
        let err = uv2.error_estimate + vu2.error_estimate;
        rec.positive_against(q_uv, "V is not independent from U", err);
        rec.positive_against(q_vu, "U is not independent from V", err);
    }
    let to_uv = [1.0, 1.0, 1.0, -1.0];
    let to_vu = [1.0, -1.0, 1.0, 1.0];
    for phi in catalog::two_dim() {
        let fuv = pair(*iv, *iv, &phi.compose_linear(2, 2, &to_uv), cfg)?;
        let fvu = pair(*iv, *iv, &phi.compose_linear(2, 2, &to_vu), cfg)?;
        let tol = SWAP_TOL * fuv.value.abs().max(1.0);
        rec.close(
            format!("E[{0}(V,U)] - E[{0}(U,V)]", phi.name()),
            "(U, V) and (V, U) share one joint law",
            (fvu.value, fvu.error_estimate),
            (fuv.value, fuv.error_estimate),
            tol,
        );
    }
    Ok(rec.finish())
}

/// `(A, v)` pairs used by the catalog run.
pub fn linear_image_catalog() -> Vec<(DMatrix<f64>, Vec<f64>)> {
    vec![
        (DMatrix::from_row_slice(1, 2, &[3.0, 4.0]), vec![1.0]),
        (DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]), vec![1.0, 1.0]),
        (DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]), vec![1.0, 0.5]),
    ]
}

/// `⟨v, AY⟩ ∼ N(0, ‖vᵀA‖²[σ̲², σ̄²])`; for rank `A ≤ 1`, `AY ∼ N(0, Γ')`.
pub fn run_linear_image(iv: &UncertaintyInterval, a: &DMatrix<f64>, v: &[f64], cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let (m, n) = a.shape();
    if n == 0 || n > crate::expectation::MAX_NESTED {
        return Err(ScenarioError::Precondition(format!("A needs 1..=3 columns, has {n}")));
    }
    if v.len() != m {
        return Err(ScenarioError::Precondition(format!("v has length {}, A has {m} rows", v.len())));
    }
    let w: Vec<f64> = (0..n).map(|j| (0..m).map(|i| v[i] * a[(i, j)]).sum()).collect();
    let w_sq: f64 = w.iter().map(|x| x * x).sum();
    let ivs = vec![*iv; n];
    let order: Vec<usize> = (0..n).collect();
    let scaled = GammaSet::Interval1D(iv.scaled(w_sq)?);
    // The 1D reference is cheap, so it runs on a finer grid.
    let fine = cfg.with_spacing_scaled(0.25);
    let mut rec = Recorder::new("linear-image");
    rec.quantity("|v'A|^2", w_sq, 0.0);
    for phi in catalog::one_dim() {
        let lhs = seq(&ivs, &order, &phi.compose_linear(1, n, &w), cfg)?;
        let rhs = expect_gnormal(&scaled, &phi, &fine)?;
        // Cubic growth at scale ‖vᵀA‖² leaves O(h²) gaps above the absolute
        // tolerance, so both sides are compared after extrapolation.
        let (lhs, rhs) = (lhs.extrapolated(), rhs.extrapolated());
        rec.quantity(format!("E[{}(<v,AY>)]", phi.name()), lhs.0, lhs.1);
        rec.close(
            format!("E[{}(<v,AY>)] - scaled 1D", phi.name()),
            "inner product is G-normal with the scaled interval",
            lhs,
            rhs,
            ABS_TOL,
        );
    }
    if m == 2 {
        if let Some((u, wf)) = rank_one_factors(a, 1e-12) {
            let gamma = rank_one_gamma(&u, &wf, iv)?;
            let row_major: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[(i, j)]).collect();
            for phi in catalog::two_dim() {
                let lhs = seq(&ivs, &order, &phi.compose_linear(2, n, &row_major), cfg)?;
                let rhs = expect_gnormal(&gamma, &phi, cfg)?;
                rec.close(
                    format!("E[{}(AY)] - rank-one G-normal", phi.name()),
                    "rank-one image is G-normal",
                    (lhs.value, lhs.error_estimate),
                    (rhs.value, rhs.error_estimate),
                    ABS_TOL,
                );
            }
        }
    }
    Ok(rec.finish())
}

/// `√α Ê[W₂W₁²] = Ê[W₁W₂²]` for `W ∼ N(0, diag box [iv, α·iv])`, against the
/// sequential pair with the same marginals.
pub fn run_symmetry_identity(iv: &UncertaintyInterval, alpha: f64, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    require_nonzero(iv)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ScenarioError::Precondition(format!("alpha must be positive, got {alpha}")));
    }
    let iv2 = iv.scaled(alpha)?;
    let boxed = GammaSet::DiagonalBox(vec![*iv, iv2]);
    let mut rec = Recorder::new(&format!("symmetry-identity(alpha={alpha})"));
    let p = expect_gnormal(&boxed, &catalog::y_x2(), cfg)?;
    let q = expect_gnormal(&boxed, &catalog::x_y2(), cfg)?;
    let qp = rec.result("E[W2*W1^2]", &p);
    let qq = rec.result("E[W1*W2^2]", &q);
    let s = alpha.sqrt();
    rec.close(
        "sqrt(alpha)*E[W2*W1^2] - E[W1*W2^2]",
        "scaling identity of the G-normal box law",
        (s * p.value, s * p.error_estimate),
        (q.value, q.error_estimate),
        SWAP_TOL,
    );
    let ps = pair(*iv, iv2, &catalog::y_x2(), cfg)?;
    let qs = pair(*iv, iv2, &catalog::x_y2(), cfg)?;
    let qps = rec.result("sequential E[W2*W1^2]", &ps);
    let qqs = rec.result("sequential E[W1*W2^2]", &qs);
    if iv.is_classical() {
        rec.near_zero(qp, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
        rec.near_zero(qq, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
        rec.near_zero(qps, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
        rec.near_zero(qqs, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
    } else {
        rec.near_zero(qps, "later linear variable averages out", ABS_TOL, None);
        rec.positive(qqs, "later squared variable gives a strictly positive value");
        separated(
            &mut rec,
            "|sqrt(alpha)*E[W2*W1^2] - E[W1*W2^2]| sequential",
            "sequential pair breaks the identity, so its law is not G-normal",
            (s * ps.value, s * ps.error_estimate),
            (qs.value, qs.error_estimate),
            SWAP_TOL,
        );
    }
    Ok(rec.finish())
}

/// Box `Γ = [iv]²`: the marginals are G-normal, yet neither coordinate is
/// independent from the other.
pub fn run_diag_not_indep(iv: &UncertaintyInterval, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    require_nonzero(iv)?;
    let boxed = GammaSet::DiagonalBox(vec![*iv, *iv]);
    let mut rec = Recorder::new("diag-not-indep");
    for k in 0..2 {
        let sq = coordinate_power(2, k, 2);
        let up = expect_gnormal(&boxed, &sq, cfg)?;
        let low = expect_gnormal(&boxed, &sq.negate(), cfg)?;
        let qu = rec.result(format!("E[X{}^2]", k + 1), &up);
        let ql = rec.quantity(format!("-E[-X{}^2]", k + 1), -low.value, low.error_estimate);
        rec.relative(qu, "upper variance of the marginal", iv.high(), MOMENT_REL_TOL);
        rec.relative(ql, "lower variance of the marginal", iv.low(), MOMENT_REL_TOL);
    }
    let r = expect_gnormal(&boxed, &catalog::x_y2(), cfg)?;
    let s = expect_gnormal(&boxed, &catalog::y_x2(), cfg)?;
    let qr = rec.result("E[X1*X2^2]", &r);
    let qs = rec.result("E[X2*X1^2]", &s);
    let swap_ok = rec.close("E[X1*X2^2] - E[X2*X1^2]", "box law is swap symmetric", (r.value, r.error_estimate), (s.value, s.error_estimate), SWAP_TOL);
    let a = pair(*iv, *iv, &catalog::y_x2(), cfg)?;
    let b = pair(*iv, *iv, &catalog::x_y2(), cfg)?;
    let qa = rec.result("sequential E[X2*X1^2]", &a);
    let qb = rec.result("sequential E[X1*X2^2]", &b);
    if iv.is_classical() {
        for q in [qr, qs, qa, qb] {
            rec.near_zero(q, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
        }
        return Ok(rec.finish());
    }
    rec.near_zero(qa, "later linear variable averages out", ABS_TOL, None);
    rec.positive(qb, "later squared variable gives a strictly positive value");
    // Witness 1: the box value itself is away from the value 0 forced by independence.
    let m1 = r.value - POSITIVITY_FACTOR * r.error_estimate;
    rec.derived("witness: E[X1*X2^2] - 10*error", m1, r.error_estimate);
    // Witness 2: the box law is swap symmetric while every sequential pair is not.
    let asym = (b.value - a.value).abs() - (SWAP_TOL + POSITIVITY_FACTOR * (a.error_estimate + b.error_estimate));
    let m2 = if swap_ok { asym } else { -1.0 };
    let q2 = rec.derived("witness: sequential asymmetry margin", m2, a.error_estimate + b.error_estimate);
    rec.custom(q2, "X1 and X2 are not independent in either order", "max(value - 10*error, asymmetry margin)".into(), m1.max(m2), None);
    Ok(rec.finish())
}

/// `(A, order)` pairs used by the catalog run on a 2D box.
pub fn quadratic_catalog() -> Vec<(SymMatrix, Vec<usize>)> {
    let m = |rows: &[[f64; 2]; 2]| SymMatrix::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).expect("symmetric");
    vec![
        (m(&[[1.0, 0.0], [0.0, -1.0]]), vec![0, 1]),
        (m(&[[1.0, 0.0], [0.0, -1.0]]), vec![1, 0]),
        (m(&[[0.0, 5.0], [5.0, 0.0]]), vec![0, 1]),
        (m(&[[1.0, 0.0], [0.0, 1.0]]), vec![0, 1]),
        (m(&[[2.0, 1.0], [1.0, -3.0]]), vec![1, 0]),
    ]
}

/// `Ê[⟨AX, X⟩] = Σ(σ̄ᵢ²aᵢᵢ⁺ − σ̲ᵢ²aᵢᵢ⁻) = 2G(A)` and vanishing cross moments.
pub fn run_quadratic_form(intervals: &[UncertaintyInterval], order: &[usize], a: &SymMatrix, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let n = intervals.len();
    if a.dim() != n {
        return Err(ScenarioError::Precondition(format!("A is {0}x{0}, expected {n}x{n}", a.dim())));
    }
    let mut rec = Recorder::new("quadratic-form");
    let value = seq(intervals, order, &quadratic_form_fn(a), cfg)?;
    let closed = 2.0 * GammaSet::DiagonalBox(intervals.to_vec()).g_function(a)?;
    rec.result("E[<AX,X>]", &value);
    rec.quantity("2G(A)", closed, 0.0);
    rec.close("E[<AX,X>] - 2G(A)", "quadratic form matches the box generator", (value.value, value.error_estimate), (closed, 0.0), ABS_TOL);
    for i in 0..n {
        for j in i + 1..n {
            let f = coordinate_product(n, i, j);
            let up = seq(intervals, order, &f, cfg)?;
            let low = seq(intervals, order, &f.negate(), cfg)?;
            let qu = rec.result(format!("E[X{}*X{}]", i + 1, j + 1), &up);
            let ql = rec.quantity(format!("-E[-X{}*X{}]", i + 1, j + 1), -low.value, low.error_estimate);
            rec.near_zero(qu, "cross moment has no mean uncertainty", ABS_TOL, None);
            rec.near_zero(ql, "cross moment has no mean uncertainty", ABS_TOL, None);
        }
    }
    Ok(rec.finish())
}

/// For `i < j` in the chain, exhibits a functional whose value under the true
/// chain differs from the value forced by `X_{π(i)}` being independent from
/// `X_{π(j)}`. Positions `i`, `j` are zero-based.
pub fn run_reverse_independence_witness(
    intervals: &[UncertaintyInterval],
    order: &[usize],
    i: usize,
    j: usize,
    cfg: &SolverConfig,
) -> Result<ScenarioOutcome, ScenarioError> {
    let n = intervals.len();
    if !(i < j && j < n) || order.len() != n || order.iter().any(|&k| k >= n) {
        return Err(ScenarioError::Precondition(format!("need i < j < {n} and a permutation of 0..{n}")));
    }
    let (ivi, ivj) = (intervals[order[i]], intervals[order[j]]);
    let cond_a = ivi.low() < ivi.high() && ivj.high() > 0.0;
    let cond_b = ivj.low() < ivj.high() && ivi.high() > 0.0;
    if !(cond_a || cond_b) {
        return Err(ScenarioError::Precondition(
            "neither variance uncertainty on the earlier variable with a nonzero later one, nor the converse".into(),
        ));
    }
    let mut rec = Recorder::new("reverse-independence");
    // Chain coordinates: z1 = X_{π(i)} (earlier), z2 = X_{π(j)} (later).
    let (phi, label, true_zero, closed) = if cond_b {
        (catalog::x_y2(), "X_pi(i)*X_pi(j)^2", false, witness_closed_form(&ivi, &ivj))
    } else {
        (catalog::y_x2(), "X_pi(j)*X_pi(i)^2", true, witness_closed_form(&ivj, &ivi))
    };
    let sub = [ivi, ivj];
    let truth = seq(&sub, &[0, 1], &phi, cfg)?;
    let hyp = seq(&sub, &[1, 0], &phi, cfg)?;
    let qt = rec.result(format!("true E[{label}]"), &truth);
    let qh = rec.result(format!("hypothesized E[{label}]"), &hyp);
    rec.quantity("closed form of the nonzero side", closed, 0.0);
    let (zero, pos) = if true_zero { (qt, qh) } else { (qh, qt) };
    rec.near_zero(zero, "later linear variable averages out", ABS_TOL, None);
    rec.positive(pos, "later squared variable gives a strictly positive value");
    let (pv, pe) = rec.value(pos);
    rec.close(format!("nonzero side - closed form ({label})"), "nonzero side matches the closed form", (pv, pe), (closed, 0.0), ABS_TOL);
    separated(
        &mut rec,
        "|true - hypothesized|",
        "reverse independence would change the value",
        (truth.value, truth.error_estimate),
        (hyp.value, hyp.error_estimate),
        ABS_TOL,
    );
    Ok(rec.finish())
}

/// Classical counterpart: both orders agree on the cubic functional.
pub(crate) fn reverse_classical(intervals: &[UncertaintyInterval; 2], cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let mut rec = Recorder::new("reverse-independence");
    let truth = seq(intervals, &[0, 1], &catalog::x_y2(), cfg)?;
    let hyp = seq(intervals, &[1, 0], &catalog::x_y2(), cfg)?;
    let qt = rec.result("true E[X_pi(i)*X_pi(j)^2]", &truth);
    let qh = rec.result("hypothesized E[X_pi(i)*X_pi(j)^2]", &hyp);
    rec.near_zero(qt, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
    rec.near_zero(qh, "classical odd moment vanishes", ABS_TOL, CLASSICAL);
    Ok(rec.finish())
}

/// Identity, antidiagonal, `diag(2, 3)`, rotations every 15° and shears.
pub fn invertible_catalog() -> Vec<(String, DMatrix<f64>)> {
    let mut out = vec![
        ("identity".to_string(), DMatrix::identity(2, 2)),
        ("antidiagonal".to_string(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        ("diag(2,3)".to_string(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])),
    ];
    for k in 1..12 {
        let deg = 15 * k;
        let (s, c) = (f64::from(deg).to_radians()).sin_cos();
        out.push((format!("rotation {deg}deg"), DMatrix::from_row_slice(2, 2, &[c, -s, s, c])));
    }
    out.push(("shear [[1,1],[0,1]]".into(), DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])));
    out.push(("shear [[1,0],[1,1]]".into(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])));
    out.push(("shear [[1,-0.5],[0,1]]".into(), DMatrix::from_row_slice(2, 2, &[1.0, -0.5, 0.0, 1.0])));
    out
}

/// Whether every vertex image `A·diag(r)·Aᵀ` of the box is diagonal.
pub fn vertex_images_diagonal(a: &DMatrix<f64>, boxed: &[UncertaintyInterval; 2]) -> Result<bool, ScenarioError> {
    for r1 in [boxed[0].low(), boxed[0].high()] {
        for r2 in [boxed[1].low(), boxed[1].high()] {
            let img = SymMatrix::diagonal(&[r1, r2]).congruence(a)?;
            if img.get(0, 1).abs() > ALG_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn max_vertex_off_diagonal(a: &DMatrix<f64>, boxed: &[UncertaintyInterval; 2]) -> Result<f64, ScenarioError> {
    let mut worst = 0.0_f64;
    for r1 in [boxed[0].low(), boxed[0].high()] {
        for r2 in [boxed[1].low(), boxed[1].high()] {
            worst = worst.max(SymMatrix::diagonal(&[r1, r2]).congruence(a)?.get(0, 1).abs());
        }
    }
    Ok(worst)
}

fn marginals(a: &DMatrix<f64>, iv: &UncertaintyInterval) -> Result<[UncertaintyInterval; 2], ScenarioError> {
    let row = |i: usize| a[(i, 0)] * a[(i, 0)] + a[(i, 1)] * a[(i, 1)];
    Ok([iv.scaled(row(0))?, iv.scaled(row(1))?])
}

fn is_singular(a: &DMatrix<f64>) -> bool {
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    det.abs() <= 1e-12 * scale * scale
}

/// No invertible `A` makes the coordinates of `AX` independent: either
/// `AΓAᵀ` leaves the diagonal, or the two marginals are rescalings of one
/// uncertain interval.
pub fn run_invertible_scan(iv: &UncertaintyInterval, sample: &[(String, DMatrix<f64>)]) -> Result<ScenarioOutcome, ScenarioError> {
    if !iv.is_strict() {
        return Err(ScenarioError::Precondition("the scan needs 0 < σ̲² < σ̄²".into()));
    }
    let boxed = [*iv, *iv];
    let mut rec = Recorder::new("invertible-scan");
    for (name, a) in sample {
        if a.shape() != (2, 2) {
            return Err(ScenarioError::Precondition(format!("{name} is not 2x2")));
        }
        if is_singular(a) {
            rec.quantity(format!("{name}: singular, skipped"), 0.0, 0.0);
            continue;
        }
        let predicate = is_diagonal_image(&as_2x2(a), &boxed);
        let brute = vertex_images_diagonal(a, &boxed)?;
        let q = rec.quantity(format!("{name}: max vertex off-diagonal"), max_vertex_off_diagonal(a, &boxed)?, 0.0);
        rec.holds(q, "algebraic predicate agrees with vertex enumeration", predicate == brute, None);
        if predicate {
            let violations = check_scaling_constraint(&marginals(a, iv)?);
            let alpha = violations.first().map_or(f64::NAN, |v| v.alpha);
            let qa = rec.quantity(format!("{name}: marginal scaling alpha"), alpha, 0.0);
            rec.holds(qa, "marginals are rescalings of one uncertain interval", !violations.is_empty(), None);
        } else {
            let (off, _) = rec.value(q);
            rec.holds(q, "image leaves the diagonal at a box vertex", off > ALG_TOL, None);
        }
    }
    Ok(rec.finish())
}

/// Classical counterpart: images may be diagonal and nothing obstructs independence.
pub(crate) fn invertible_scan_classical(iv: &UncertaintyInterval, sample: &[(String, DMatrix<f64>)]) -> Result<ScenarioOutcome, ScenarioError> {
    let boxed = [*iv, *iv];
    let mut rec = Recorder::new("invertible-scan");
    for (name, a) in sample {
        if is_singular(a) {
            rec.quantity(format!("{name}: singular, skipped"), 0.0, 0.0);
            continue;
        }
        let predicate = is_diagonal_image(&as_2x2(a), &boxed);
        let brute = vertex_images_diagonal(a, &boxed)?;
        let q = rec.quantity(format!("{name}: max vertex off-diagonal"), max_vertex_off_diagonal(a, &boxed)?, 0.0);
        rec.holds(q, "algebraic predicate agrees with vertex enumeration", predicate == brute, None);
        let violations = check_scaling_constraint(&marginals(a, iv)?);
        rec.holds(q, "no scaling obstruction without variance uncertainty", violations.is_empty(), CLASSICAL);
    }
    Ok(rec.finish())
}

/// `Ê[ψ(Y₁) + αY₂] = Ê[ψ(Y₁)]`.
pub fn run_mean_certainty(iv: &UncertaintyInterval, cfg: &SolverConfig) -> Result<ScenarioOutcome, ScenarioError> {
    let ivs = [*iv, *iv];
    let mut rec = Recorder::new("mean-certainty");
    for (psi, alpha) in [(catalog::monomial(2), 5.0), (catalog::abs(), -3.0)] {
        let m = mean_certainty_check(&ivs, &[0, 1], &psi, alpha, cfg)?;
        rec.result(format!("E[{}(Y1) + {alpha}*Y2]", psi.name()), &m.with_linear);
        rec.result(format!("E[{}(Y1)]", psi.name()), &m.without);
        rec.close(
            format!("E[{0}(Y1) + {alpha}*Y2] - E[{0}(Y1)]", psi.name()),
            "adding a later variable without mean uncertainty changes nothing",
            (m.with_linear.value, m.with_linear.error_estimate),
            (m.without.value, m.without.error_estimate),
            m.tolerance,
        );
    }
    Ok(rec.finish())
}
