//! `sup_{x ∈ Γ} φ(x)` over finite sets and boxes.

use std::collections::BinaryHeap;

use super::ExpectationError;
use crate::testfn::TestFunction;

/// Relative accuracy of the box search.
pub const SUP_REL_TOL: f64 = 1e-6;
const MAX_EVALUATIONS: usize = 2_000_000;

/// Support of a maximal distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Points(Vec<Vec<f64>>),
    /// `[lo_i, hi_i]` per coordinate.
    Box(Vec<(f64, f64)>),
}

impl Support {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Support::Points(p) => p.first().map(Vec::len),
            Support::Box(b) => (!b.is_empty()).then_some(b.len()),
        }
    }
}

/// Supremum and a bound on how far it may sit below the true supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupResult {
    pub value: f64,
    pub gap: f64,
    pub evaluations: usize,
}

struct Cell {
    bound: f64,
    centre: Vec<f64>,
    half: Vec<f64>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound.total_cmp(&other.bound)
    }
}

fn eval_checked(phi: &TestFunction, x: &[f64]) -> Result<f64, ExpectationError> {
    let v = phi.eval(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExpectationError::BadArgument(format!("φ is not finite at {x:?}")))
    }
}

pub fn sup_over(support: &Support, phi: &TestFunction) -> Result<SupResult, ExpectationError> {
    let dim = support.dim().ok_or(ExpectationError::EmptySupport)?;
    if dim != phi.arity() {
        return Err(ExpectationError::ArityMismatch {
            expected: dim,
            found: phi.arity(),
        });
    }
    match support {
        Support::Points(points) => {
            let mut best = f64::NEG_INFINITY;
            for p in points {
                if p.len() != dim {
                    return Err(ExpectationError::ArityMismatch {
                        expected: dim,
                        found: p.len(),
                    });
                }
                best = best.max(eval_checked(phi, p)?);
            }
            Ok(SupResult {
                value: best,
                gap: 0.0,
                evaluations: points.len(),
            })
        }
        Support::Box(bounds) => sup_box(bounds, phi),
    }
}

/// Branch and bound with the Lipschitz constant `C(1 + 2Rᵐ)` implied by the
/// growth data on the ball of radius `R` containing the box.
fn sup_box(bounds: &[(f64, f64)], phi: &TestFunction) -> Result<SupResult, ExpectationError> {
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(ExpectationError::BadArgument(format!("invalid box side [{lo}, {hi}]")));
        }
    }
    let n = bounds.len();
    let radius = bounds
        .iter()
        .map(|&(lo, hi)| lo.abs().max(hi.abs()).powi(2))
        .sum::<f64>()
        .sqrt();
    let g = phi.growth();
    let lip = g.constant * (1.0 + 2.0 * radius.powi(g.order as i32));

    let mut evaluations = 0usize;
    let mut best = f64::NEG_INFINITY;
    // Vertices first: linear and convex φ peak there.
    if n <= 12 {
        for mask in 0..(1usize << n) {
            let v: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { bounds[i].1 } else { bounds[i].0 })
                .collect();
            best = best.max(eval_checked(phi, &v)?);
            evaluations += 1;
        }
    }
    let centre: Vec<f64> = bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let half: Vec<f64> = bounds.iter().map(|&(lo, hi)| 0.5 * (hi - lo)).collect();
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Cell>, best: &mut f64, evals: &mut usize, centre: Vec<f64>, half: Vec<f64>| -> Result<(), ExpectationError> {
        let v = eval_checked(phi, &centre)?;
        *evals += 1;
        *best = best.max(v);
        let r = half.iter().map(|h| h * h).sum::<f64>().sqrt();
        heap.push(Cell {
            bound: v + lip * r,
            centre,
            half,
        });
        Ok(())
    };
    push(&mut heap, &mut best, &mut evaluations, centre, half)?;
    let tol = |best: f64| SUP_REL_TOL * best.abs().max(1.0);
    while let Some(cell) = heap.peek() {
        if cell.bound <= best + tol(best) || evaluations >= MAX_EVALUATIONS {
            break;
        }
        let cell = heap.pop().expect("peeked");
        let axis = (0..n)
            .max_by(|&a, &b| cell.half[a].total_cmp(&cell.half[b]))
            .expect("nonempty box");
        if cell.half[axis] == 0.0 {
            continue;
        }
        for sign in [-1.0, 1.0] {
            let mut c = cell.centre.clone();
            let mut h = cell.half.clone();
            h[axis] *= 0.5;
            c[axis] += sign * h[axis];
            push(&mut heap, &mut best, &mut evaluations, c, h)?;
        }
    }
    let top = heap.peek().map_or(best, |c| c.bound);
    Ok(SupResult {
        value: best,
        gap: (top - best).max(0.0),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn singleton_and_points() {
        let s = Support::Points(vec![vec![1.0, 2.0]]);
        let r = sup_over(&s, &catalog::x_y2()).unwrap();
        assert_eq!(r.value, 4.0);
        assert_eq!(r.gap, 0.0);
        let s = Support::Points(vec![vec![-3.0], vec![1.0], vec![2.0]]);
        assert_eq!(sup_over(&s, &catalog::monomial(2)).unwrap().value, 9.0);
    }

    #[test]
    fn box_linear_and_interior_peak() {
        let sum = TestFunction::new("x+y", 2, 0, 2.0, |x| x[0] + x[1]).unwrap();
        let r = sup_over(&Support::Box(vec![(0.0, 1.0); 2]), &sum).unwrap();
        assert_eq!(r.value, 2.0);
        let r = sup_over(&Support::Box(vec![(-1.0, 1.0)]), &catalog::monomial(2).negate()).unwrap();
        assert!(r.value.abs() <= 1e-6 && r.gap <= 1e-6, "{r:?}");
    }

    #[test]
    fn off_centre_interior_peak() {
        let bump = TestFunction::new("bump", 1, 1, 4.0, |x| -(x[0] - 0.3).powi(2)).unwrap();
        let r = sup_over(&Support::Box(vec![(-2.0, 1.0)]), &bump).unwrap();
        assert!(r.value > -1e-6 && r.gap <= 1e-6, "{r:?}");
    }

    #[test]
    fn empty_support_rejected() {
        assert!(matches!(
            sup_over(&Support::Points(vec![]), &catalog::abs()),
            Err(ExpectationError::EmptySupport)
        ));
    }
}
