//! Monotone explicit finite differences for the G-heat equation
//! `∂ₜu − G(D²u) = 0`, `u(0, ·) = φ`, whose solution gives
//! `u(t, x) = Ê[φ(x + √t X)]` for `X ∼ N(0, Γ)`.

mod grid;
mod scheme;

use thiserror::Error;

use crate::gamma::{GammaError, GammaSet, UncertaintyInterval};
use crate::testfn::TestFunction;

pub use grid::{Axis, Field, GridSpec, SolverConfig};
pub use scheme::{ExplicitScheme, Generator};

/// Largest dimension handled by the tensor-grid solvers.
pub const MAX_PDE_DIM: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdeError {
    #[error("time step {dt:e} exceeds the monotonicity limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("evaluation point {coordinate} lies outside [-{half_width}, {half_width}]")]
    OutsideDomain { coordinate: f64, half_width: f64 },
    #[error("test function is not finite at grid point {at:?}")]
    NonFinite { at: Vec<f64> },
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("dimension {0} not supported (1..={MAX_PDE_DIM})")]
    UnsupportedDimension(usize),
    #[error("hull generator #{index} {matrix} is not diagonally dominant; the 9-point stencil would not be monotone")]
    NotDiagonallyDominant { index: usize, matrix: String },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("negative time horizon {0}")]
    NegativeTime(f64),
    #[error("expected a {expected} uncertainty set")]
    WrongVariant { expected: &'static str },
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

/// Outcome of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// `u(t, x0)`.
    pub value_at_origin: f64,
    /// Accumulated boundary-band updates, attenuated by the Gaussian factor
    /// between the evaluation point and the nearest boundary.
    pub boundary_influence_estimate: f64,
    /// `|u_h − u_{2h}|` when a coarse companion solve was run.
    pub refinement_delta: Option<f64>,
    /// `u_{2h}(t, x0)` from the same companion solve.
    pub coarse_value: Option<f64>,
    pub steps_taken: usize,
    /// Set when some axis has `σ̲² = 0`: convergence holds only in the viscosity sense.
    pub degenerate: bool,
}

impl SolveReport {
    pub fn error_estimate(&self) -> f64 {
        self.boundary_influence_estimate + self.refinement_delta.unwrap_or(0.0)
    }
}

/// Result of evolving a field to time `t`.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: Field,
    pub steps: usize,
    /// Sum over steps of the largest boundary-band update (not yet attenuated).
    pub boundary_updates: f64,
}

/// Advances `field` to time `t` under `generator`.
pub fn evolve(
    field: Field,
    generator: Generator,
    t: f64,
    dt: Option<f64>,
    courant: f64,
) -> Result<Evolution, PdeError> {
    if t < 0.0 || !t.is_finite() {
        return Err(PdeError::NegativeTime(t));
    }
    let scheme = ExplicitScheme::new(field.axes.clone(), generator)?;
    let limit = scheme.stability_limit();
    let dt_max = match dt {
        Some(dt) if dt > limit * (1.0 + 1e-12) => {
            return Err(PdeError::CflViolation { dt, limit });
        }
        Some(dt) => dt,
        None => scheme.default_dt(courant),
    };
    if t == 0.0 || !dt_max.is_finite() {
        return Ok(Evolution {
            field,
            steps: 0,
            boundary_updates: 0.0,
        });
    }
    let steps = (t / dt_max - 1e-9).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let Field { axes, values } = field;
    let mut cur = values;
    let mut next = vec![0.0; cur.len()];
    let mut boundary_updates = 0.0;
    for _ in 0..steps {
        boundary_updates += scheme.step(&cur, &mut next, dt);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Evolution {
        field: Field { axes, values: cur },
        steps,
        boundary_updates,
    })
}

/// Gaussian attenuation `max_i exp(−dᵢ²/(2 σ̄ᵢ² t))` from `x0` to the nearest boundary.
pub(crate) fn boundary_attenuation(axes: &[Axis], sigma_sq: &[f64], x0: &[f64], t: f64) -> f64 {
    axes.iter()
        .zip(sigma_sq)
        .zip(x0)
        .filter(|((a, &s), _)| !a.is_degenerate() && s > 0.0 && t > 0.0)
        .map(|((a, &s), &x)| {
            let d = (a.half_width() - x.abs()).max(0.0);
            (-(d * d) / (2.0 * s * t)).exp()
        })
        .fold(0.0, f64::max)
}

fn solve_with(
    generator: Generator,
    phi: &TestFunction,
    t: f64,
    x0: &[f64],
    grid: &GridSpec,
    degenerate: bool,
) -> Result<SolveReport, PdeError> {
    let n = generator.dims();
    if n == 0 || n > MAX_PDE_DIM {
        return Err(PdeError::UnsupportedDimension(n));
    }
    if phi.arity() != n {
        return Err(PdeError::ArityMismatch {
            expected: n,
            found: phi.arity(),
        });
    }
    if x0.len() != n || grid.dims() != n {
        return Err(PdeError::ArityMismatch {
            expected: n,
            found: if x0.len() != n { x0.len() } else { grid.dims() },
        });
    }
    if t < 0.0 || !t.is_finite() {
        return Err(PdeError::NegativeTime(t));
    }
    if t == 0.0 {
        let v = phi.eval(x0);
        if !v.is_finite() {
            return Err(PdeError::NonFinite { at: x0.to_vec() });
        }
        return Ok(SolveReport {
            value_at_origin: v,
            boundary_influence_estimate: 0.0,
            refinement_delta: None,
            coarse_value: None,
            steps_taken: 0,
            degenerate,
        });
    }
    let axes = grid.axes(x0)?;
    let sigma_sq = generator.max_diagonal();
    let field = Field::from_function(axes, phi)?;
    let evo = evolve(field, generator, t, grid.dt, SolverConfig::default().courant)?;
    let attenuation = boundary_attenuation(&evo.field.axes, &sigma_sq, x0, t);
    Ok(SolveReport {
        value_at_origin: evo.field.sample(x0),
        boundary_influence_estimate: evo.boundary_updates * attenuation,
        refinement_delta: None,
        coarse_value: None,
        steps_taken: evo.steps,
        degenerate,
    })
}

/// `u(t, x0)` for `∂ₜu = Ḡ(∂ₓₓu)`, `u(0, ·) = φ`.
pub fn solve_gheat_1d(
    iv: &UncertaintyInterval,
    phi: &TestFunction,
    t: f64,
    x0: f64,
    grid: &GridSpec,
) -> Result<SolveReport, PdeError> {
    solve_with(
        Generator::Diagonal(vec![*iv]),
        phi,
        t,
        &[x0],
        grid,
        iv.low() == 0.0,
    )
}

/// `u(t, x0)` for `∂ₜu = Σᵢ Ḡᵢ(∂ᵢᵢu)` with a diagonal box `Γ`, `n ≤ 3`.
pub fn solve_gheat_diag(
    boxed: &GammaSet,
    phi: &TestFunction,
    t: f64,
    x0: &[f64],
    grid: &GridSpec,
) -> Result<SolveReport, PdeError> {
    let ivs = match boxed {
        GammaSet::DiagonalBox(ivs) => ivs.clone(),
        GammaSet::Interval1D(iv) => vec![*iv],
        _ => {
            return Err(PdeError::WrongVariant {
                expected: "diagonal box",
            })
        }
    };
    let degenerate = ivs.iter().any(|iv| iv.low() == 0.0 && iv.high() > 0.0);
    solve_with(Generator::Diagonal(ivs), phi, t, x0, grid, degenerate)
}

/// `u(t, x0)` for `∂ₜu = ½ max_B tr[B D²u]` over a finite hull.
///
/// Every generator must satisfy `b_ii ≥ Σ_{j≠i} |b_ij|` on a uniform grid.
pub fn solve_gheat_hull(
    hull: &GammaSet,
    phi: &TestFunction,
    t: f64,
    x0: &[f64],
    grid: &GridSpec,
) -> Result<SolveReport, PdeError> {
    let gs = match hull {
        GammaSet::ConvexHull(gs) => gs.clone(),
        _ => {
            return Err(PdeError::WrongVariant {
                expected: "convex hull",
            })
        }
    };
    if gs.is_empty() {
        return Err(GammaError::EmptyHull.into());
    }
    for (index, b) in gs.iter().enumerate() {
        for i in 0..b.dim() {
            let off: f64 = (0..b.dim()).filter(|&j| j != i).map(|j| b.get(i, j).abs()).sum();
            if b.get(i, i) < off - 1e-12 {
                return Err(PdeError::NotDiagonallyDominant {
                    index,
                    matrix: format!("{:?}", (0..b.dim()).map(|r| (0..b.dim()).map(|c| b.get(r, c)).collect::<Vec<_>>()).collect::<Vec<_>>()),
                });
            }
        }
    }
    let degenerate = gs.iter().any(|b| b.min_eigenvalue() <= 0.0);
    solve_with(Generator::Hull(gs), phi, t, x0, grid, degenerate)
}

/// Builds the default grid for `gamma`, solves, and (optionally) re-solves on
/// the doubled spacing to fill in `refinement_delta`.
pub fn solve_gamma(
    gamma: &GammaSet,
    phi: &TestFunction,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveReport, PdeError> {
    let t = cfg.time_horizon;
    let sigma: Vec<f64> = gamma.max_diagonal().iter().map(|s| s.sqrt()).collect();
    let grid = match gamma {
        GammaSet::ConvexHull(_) => {
            // The monotonicity condition is stated for a uniform grid.
            let smax = sigma.iter().copied().fold(0.0, f64::max);
            let uniform: Vec<f64> = sigma.iter().map(|&s| if s > 0.0 { smax } else { 0.0 }).collect();
            GridSpec::auto(&uniform, t, x0, phi.growth(), cfg)?
        }
        _ => GridSpec::auto(&sigma, t, x0, phi.growth(), cfg)?,
    };
    let run = |g: &GridSpec| match gamma {
        GammaSet::Interval1D(iv) => solve_gheat_1d(iv, phi, t, x0[0], g),
        GammaSet::DiagonalBox(_) => solve_gheat_diag(gamma, phi, t, x0, g),
        GammaSet::ConvexHull(_) => solve_gheat_hull(gamma, phi, t, x0, g),
        GammaSet::RankOneFamily { .. } => Err(PdeError::WrongVariant {
            expected: "interval, box or hull (rank-one families reduce to 1D first)",
        }),
    };
    let mut report = run(&grid)?;
    if cfg.estimate_refinement && t > 0.0 {
        let coarse = run(&grid.coarsened())?;
        report.refinement_delta = Some((report.value_at_origin - coarse.value_at_origin).abs());
        report.coarse_value = Some(coarse.value_at_origin);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::gamma::SymMatrix;

    fn iv(a: f64, b: f64) -> UncertaintyInterval {
        UncertaintyInterval::new(a, b).unwrap()
    }

    fn solve1(ivl: UncertaintyInterval, phi: &TestFunction) -> SolveReport {
        solve_gamma(&GammaSet::Interval1D(ivl), phi, &[0.0], &SolverConfig::default()).unwrap()
    }

    #[test]
    fn classical_second_moment() {
        let r = solve1(iv(1.0, 1.0), &catalog::monomial(2));
        assert!((r.value_at_origin - 1.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn upper_and_lower_variance() {
        let r = solve1(iv(1.0, 4.0), &catalog::monomial(2));
        assert!((r.value_at_origin - 4.0).abs() < 4e-3, "{r:?}");
        let r = solve1(iv(1.0, 4.0), &catalog::monomial(2).negate());
        assert!((r.value_at_origin + 1.0).abs() < 1e-3, "{r:?}");
    }

    #[test]
    fn fourth_moment_at_upper_sigma() {
        // 3·σ̄⁴ with σ̄ = 2
        let r = solve1(iv(1.0, 4.0), &catalog::monomial(4));
        assert!((r.value_at_origin - 48.0).abs() < 48e-3, "{r:?}");
    }

    #[test]
    fn zero_time_returns_phi() {
        let g = GridSpec::uniform(1, 2.0, 0.25);
        let r = solve_gheat_1d(&iv(1.0, 4.0), &catalog::monomial(3), 0.0, 1.5, &g).unwrap();
        assert_eq!(r.value_at_origin, 3.375);
        assert_eq!(r.steps_taken, 0);
    }

    #[test]
    fn errors_surface() {
        let g = GridSpec::uniform(1, 2.0, 0.25).with_dt(1.0);
        assert!(matches!(
            solve_gheat_1d(&iv(1.0, 4.0), &catalog::monomial(2), 1.0, 0.0, &g),
            Err(PdeError::CflViolation { .. })
        ));
        let g = GridSpec::uniform(1, 2.0, 0.25);
        assert!(matches!(
            solve_gheat_1d(&iv(1.0, 4.0), &catalog::monomial(2), 1.0, 3.0, &g),
            Err(PdeError::OutsideDomain { .. })
        ));
        let nan = TestFunction::new_unchecked("nan", 1, 0, 1.0, |x| if x[0] > 1.0 { f64::NAN } else { 0.0 }).unwrap();
        assert!(matches!(
            solve_gheat_1d(&iv(1.0, 4.0), &nan, 1.0, 0.0, &g),
            Err(PdeError::NonFinite { .. })
        ));
        let b4 = GammaSet::DiagonalBox(vec![iv(1.0, 2.0); 4]);
        let g4 = GridSpec::uniform(4, 1.0, 0.125);
        assert!(matches!(
            solve_gheat_diag(&b4, &catalog::sum_squares(4), 1.0, &[0.0; 4], &g4),
            Err(PdeError::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn diag_box_separable_sum() {
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(1.0, 4.0)]);
        let r = solve_gamma(&b, &catalog::sum_squares(2), &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert!((r.value_at_origin - 8.0).abs() < 8e-3, "{r:?}");
    }

    #[test]
    fn diag_constant_is_exact() {
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(0.5, 2.0)]);
        let r = solve_gamma(&b, &catalog::constant_n(2, 2.5), &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert!((r.value_at_origin - 2.5).abs() < 1e-12);
    }

    #[test]
    fn hull_rejects_non_dominant() {
        let bad = SymMatrix::from_rows(&[vec![1.0, 1.5], vec![1.5, 3.0]]).unwrap();
        let ok = SymMatrix::identity(2);
        let hull = GammaSet::convex_hull(vec![ok, bad]).unwrap();
        let g = GridSpec::uniform(2, 2.0, 0.25);
        let err = solve_gheat_hull(&hull, &catalog::xy(), 1.0, &[0.0, 0.0], &g).unwrap_err();
        assert!(matches!(err, PdeError::NotDiagonallyDominant { index: 1, .. }));
    }

    #[test]
    fn hull_singleton_covariance() {
        let b = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let hull = GammaSet::convex_hull(vec![b]).unwrap();
        let r = solve_gamma(&hull, &catalog::xy(), &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert!((r.value_at_origin - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn degenerate_flag() {
        let g = GridSpec::uniform(1, 2.0, 0.25);
        let r = solve_gheat_1d(&iv(0.0, 1.0), &catalog::monomial(2), 0.1, 0.0, &g).unwrap();
        assert!(r.degenerate);
    }
}
