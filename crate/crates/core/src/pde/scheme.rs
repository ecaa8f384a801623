//! Explicit monotone stepping for `∂ₜu = G(D²u)`.
//!
//! Axial second differences use the 3-point stencil. Cross derivatives use
//! the 7-point stencil whose diagonal pair is chosen by the sign of `b_ij`, so
//! every neighbor coefficient is nonnegative whenever
//! `b_ii/h_i ≥ Σ_{j≠i} |b_ij|/h_j`. The update is `u + dt·max_B L_B u`, a
//! maximum of monotone linear maps, hence monotone under the step limit.
//!
//! On a boundary node of axis `i` all second differences touching `i` are set
//! to zero (linear extrapolation), so the node only feels tangential terms.

use rayon::prelude::*;

use crate::gamma::{gbar, SymMatrix, UncertaintyInterval};

use super::grid::{Axis, Field};
use super::PdeError;

const MAX_DIMS: usize = 3;
const PARALLEL_MIN_NODES: usize = 1 << 15;
/// Nodes within this many cells of a boundary count toward boundary influence.
const BOUNDARY_BAND: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `Σᵢ Ḡᵢ(∂ᵢᵢu)`.
    Diagonal(Vec<UncertaintyInterval>),
    /// `max_B ½ tr[B D²u]` over the listed matrices.
    Hull(Vec<SymMatrix>),
}

impl Generator {
    pub fn dims(&self) -> usize {
        match self {
            Self::Diagonal(ivs) => ivs.len(),
            Self::Hull(gs) => gs.first().map_or(0, SymMatrix::dim),
        }
    }

    /// Largest `b_ii` per axis.
    pub fn max_diagonal(&self) -> Vec<f64> {
        match self {
            Self::Diagonal(ivs) => ivs.iter().map(UncertaintyInterval::high).collect(),
            Self::Hull(gs) => (0..self.dims())
                .map(|i| gs.iter().map(|g| g.get(i, i)).fold(0.0, f64::max))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExplicitScheme {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    generator: Generator,
    inv_h2: [f64; MAX_DIMS],
    inv_hh: [[f64; MAX_DIMS]; MAX_DIMS],
    live: [bool; MAX_DIMS],
}

impl ExplicitScheme {
    pub fn new(axes: Vec<Axis>, generator: Generator) -> Result<Self, PdeError> {
        let n = axes.len();
        if n == 0 || n > MAX_DIMS {
            return Err(PdeError::UnsupportedDimension(n));
        }
        if generator.dims() != n {
            return Err(PdeError::ArityMismatch {
                expected: generator.dims(),
                found: n,
            });
        }
        let mut inv_h2 = [0.0; MAX_DIMS];
        let mut inv_hh = [[0.0; MAX_DIMS]; MAX_DIMS];
        let mut live = [false; MAX_DIMS];
        for (i, a) in axes.iter().enumerate() {
            if !a.is_degenerate() {
                live[i] = true;
                inv_h2[i] = 1.0 / (a.spacing * a.spacing);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if live[i] && live[j] {
                    inv_hh[i][j] = 1.0 / (axes[i].spacing * axes[j].spacing);
                }
            }
        }
        if let Generator::Hull(gs) = &generator {
            for (k, b) in gs.iter().enumerate() {
                for i in (0..n).filter(|&i| live[i]) {
                    let off: f64 = (0..n)
                        .filter(|&j| j != i && live[j])
                        .map(|j| b.get(i, j).abs() / axes[j].spacing)
                        .sum();
                    if b.get(i, i) / axes[i].spacing < off - 1e-12 {
                        return Err(PdeError::NotDiagonallyDominant {
                            index: k,
                            matrix: format!("{:?}", rows_of(b)),
                        });
                    }
                }
            }
        }
        let strides = Field::strides(&axes);
        Ok(Self {
            axes,
            strides,
            generator,
            inv_h2,
            inv_hh,
            live,
        })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Largest time step keeping every stencil coefficient nonnegative.
    pub fn stability_limit(&self) -> f64 {
        let n = self.axes.len();
        let center = |b_diag: &dyn Fn(usize) -> f64, b_off: &dyn Fn(usize, usize) -> f64| {
            let mut c = 0.0;
            for i in 0..n {
                c += b_diag(i) * self.inv_h2[i];
                for j in (i + 1)..n {
                    c -= b_off(i, j).abs() * self.inv_hh[i][j];
                }
            }
            c
        };
        let rate = match &self.generator {
            Generator::Diagonal(ivs) => center(&|i| ivs[i].high(), &|_, _| 0.0),
            Generator::Hull(gs) => gs
                .iter()
                .map(|b| center(&|i| b.get(i, i), &|i, j| b.get(i, j)))
                .fold(0.0, f64::max),
        };
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    /// Default step `courant / Σ_ij |b_ij| /(h_i h_j)` maximized over generators
    /// (for diagonal generators: `courant / Σ σ̄ᵢ²/hᵢ²`).
    pub fn default_dt(&self, courant: f64) -> f64 {
        let n = self.axes.len();
        let weight = |b: &dyn Fn(usize, usize) -> f64| {
            let mut w = 0.0;
            for i in 0..n {
                for j in 0..n {
                    w += b(i, j).abs() * self.inv_hh[i][j];
                }
            }
            w
        };
        let w = match &self.generator {
            Generator::Diagonal(ivs) => {
                weight(&|i, j| if i == j { ivs[i].high() } else { 0.0 })
            }
            Generator::Hull(gs) => gs
                .iter()
                .map(|b| weight(&|i, j| b.get(i, j)))
                .fold(0.0, f64::max),
        };
        if w > 0.0 {
            courant / w
        } else {
            f64::INFINITY
        }
    }

    /// One forward-Euler step. Returns the largest `|next − cur|` among nodes
    /// within the boundary band.
    pub fn step(&self, cur: &[f64], next: &mut [f64], dt: f64) -> f64 {
        debug_assert_eq!(cur.len(), next.len());
        if self.axes.len() == 1 {
            if let Generator::Diagonal(ivs) = &self.generator {
                return self.step_1d(&ivs[0], cur, next, dt);
            }
        }
        let outer = self.axes[0].nodes;
        let chunk = cur.len() / outer;
        if cur.len() >= PARALLEL_MIN_NODES {
            next.par_chunks_mut(chunk)
                .enumerate()
                .map(|(i0, out)| self.step_slab(cur, out, i0, dt))
                .reduce(|| 0.0, f64::max)
        } else {
            next.chunks_mut(chunk)
                .enumerate()
                .map(|(i0, out)| self.step_slab(cur, out, i0, dt))
                .fold(0.0, f64::max)
        }
    }

    fn step_1d(&self, iv: &UncertaintyInterval, cur: &[f64], next: &mut [f64], dt: f64) -> f64 {
        let n = cur.len();
        if n < 3 {
            next.copy_from_slice(cur);
            return 0.0;
        }
        let inv_h2 = self.inv_h2[0];
        next[0] = cur[0];
        next[n - 1] = cur[n - 1];
        let mut band = 0.0_f64;
        for i in 1..n - 1 {
            let d2 = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) * inv_h2;
            let du = dt * gbar(iv, d2);
            next[i] = cur[i] + du;
            if i <= BOUNDARY_BAND || i + 1 + BOUNDARY_BAND >= n {
                band = band.max(du.abs());
            }
        }
        band
    }

    /// Updates all nodes with first index `i0`.
    fn step_slab(&self, cur: &[f64], out: &mut [f64], i0: usize, dt: f64) -> f64 {
        let n = self.axes.len();
        let base = i0 * self.strides[0];
        let mut idx = [0usize; MAX_DIMS];
        idx[0] = i0;
        let mut band = 0.0_f64;
        for (offset, slot) in out.iter_mut().enumerate() {
            let p = base + offset;
            let rate = self.rate(cur, p, &idx);
            let du = dt * rate;
            *slot = cur[p] + du;
            if self.in_band(&idx) {
                band = band.max(du.abs());
            }
            for d in (1..n).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].nodes {
                    break;
                }
                idx[d] = 0;
            }
        }
        band
    }

    fn in_band(&self, idx: &[usize; MAX_DIMS]) -> bool {
        (0..self.axes.len()).any(|d| {
            self.live[d]
                && (idx[d] <= BOUNDARY_BAND || idx[d] + 1 + BOUNDARY_BAND >= self.axes[d].nodes)
        })
    }

    #[inline]
    fn interior(&self, d: usize, idx: &[usize; MAX_DIMS]) -> bool {
        self.live[d] && idx[d] > 0 && idx[d] + 1 < self.axes[d].nodes
    }

    fn rate(&self, u: &[f64], p: usize, idx: &[usize; MAX_DIMS]) -> f64 {
        let n = self.axes.len();
        let mut d2 = [0.0; MAX_DIMS];
        let mut inner = [false; MAX_DIMS];
        for d in 0..n {
            if self.interior(d, idx) {
                inner[d] = true;
                let s = self.strides[d];
                d2[d] = (u[p + s] - 2.0 * u[p] + u[p - s]) * self.inv_h2[d];
            }
        }
        match &self.generator {
            Generator::Diagonal(ivs) => (0..n).map(|d| gbar(&ivs[d], d2[d])).sum(),
            Generator::Hull(gs) => {
                // Both one-sided cross stencils, computed once per pair.
                let mut cross_pos = [[0.0; MAX_DIMS]; MAX_DIMS];
                let mut cross_neg = [[0.0; MAX_DIMS]; MAX_DIMS];
                for i in 0..n {
                    for j in (i + 1)..n {
                        if !(inner[i] && inner[j]) {
                            continue;
                        }
                        let (si, sj) = (self.strides[i], self.strides[j]);
                        let axial = u[p + si] + u[p - si] + u[p + sj] + u[p - sj];
                        let c = 0.5 * self.inv_hh[i][j];
                        cross_pos[i][j] = c * (2.0 * u[p] + u[p + si + sj] + u[p - si - sj] - axial);
                        cross_neg[i][j] = -c * (2.0 * u[p] + u[p + si - sj] + u[p - si + sj] - axial);
                    }
                }
                gs.iter()
                    .map(|b| {
                        let mut r = 0.0;
                        for i in 0..n {
                            r += 0.5 * b.get(i, i) * d2[i];
                            for j in (i + 1)..n {
                                let bij = b.get(i, j);
                                r += bij * if bij >= 0.0 { cross_pos[i][j] } else { cross_neg[i][j] };
                            }
                        }
                        r
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

fn rows_of(b: &SymMatrix) -> Vec<Vec<f64>> {
    (0..b.dim())
        .map(|i| (0..b.dim()).map(|j| b.get(i, j)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(a: f64, b: f64) -> UncertaintyInterval {
        UncertaintyInterval::new(a, b).unwrap()
    }

    fn scheme_2d_hull() -> ExplicitScheme {
        let axes = vec![Axis::symmetric(1.0, 0.125), Axis::symmetric(1.0, 0.125)];
        let gs = vec![
            SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            SymMatrix::from_rows(&[vec![1.0, -0.5], vec![-0.5, 3.0]]).unwrap(),
            SymMatrix::diagonal(&[4.0, 1.0]),
        ];
        ExplicitScheme::new(axes, Generator::Hull(gs)).unwrap()
    }

    fn scheme_2d_box() -> ExplicitScheme {
        let axes = vec![Axis::symmetric(1.0, 0.125), Axis::symmetric(2.0, 0.25)];
        ExplicitScheme::new(axes, Generator::Diagonal(vec![iv(1.0, 4.0), iv(0.5, 9.0)])).unwrap()
    }

    #[test]
    fn constants_are_preserved() {
        for s in [scheme_2d_hull(), scheme_2d_box()] {
            let n: usize = s.axes().iter().map(|a| a.nodes).product();
            let cur = vec![3.25; n];
            let mut next = vec![0.0; n];
            s.step(&cur, &mut next, s.stability_limit());
            assert!(next.iter().all(|&v| (v - 3.25).abs() < 1e-12));
        }
    }

    #[test]
    fn cross_stencils_are_exact_on_xy() {
        let s = scheme_2d_hull();
        let axes = s.axes().to_vec();
        let mut u = Vec::new();
        for i in 0..axes[0].nodes {
            for j in 0..axes[1].nodes {
                u.push(axes[0].coord(i) * axes[1].coord(j));
            }
        }
        let mut next = vec![0.0; u.len()];
        let dt = 1e-3;
        s.step(&u, &mut next, dt);
        // max over generators of b12 = 1
        let p = 8 * axes[1].nodes + 8;
        assert!(((next[p] - u[p]) / dt - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_dominant_generator_rejected() {
        let axes = vec![Axis::symmetric(1.0, 0.125), Axis::symmetric(1.0, 0.125)];
        let bad = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let err = ExplicitScheme::new(axes, Generator::Hull(vec![bad])).unwrap_err();
        assert!(matches!(err, PdeError::NotDiagonallyDominant { index: 0, .. }));
    }

    #[test]
    fn default_dt_below_limit() {
        for s in [scheme_2d_hull(), scheme_2d_box()] {
            assert!(s.default_dt(0.4) <= 0.4 * s.stability_limit() + 1e-15);
        }
    }

    proptest! {
        #[test]
        fn step_is_monotone(seed in proptest::collection::vec(-5.0f64..5.0, 17 * 17),
                            bump in proptest::collection::vec(0.0f64..2.0, 17 * 17),
                            which in 0usize..2) {
            let s = if which == 0 { scheme_2d_hull() } else { scheme_2d_box() };
            let n: usize = s.axes().iter().map(|a| a.nodes).product();
            let lo: Vec<f64> = seed.iter().cycle().take(n).copied().collect();
            let hi: Vec<f64> = lo.iter().zip(bump.iter().cycle()).map(|(a, b)| a + b).collect();
            let dt = s.stability_limit();
            let mut a = vec![0.0; n];
            let mut b = vec![0.0; n];
            s.step(&lo, &mut a, dt);
            s.step(&hi, &mut b, dt);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x <= &(y + 1e-12));
            }
        }

        #[test]
        fn step_1d_is_monotone(lo in proptest::collection::vec(-5.0f64..5.0, 33),
                               bump in proptest::collection::vec(0.0f64..1.0, 33)) {
            let s = ExplicitScheme::new(vec![Axis::symmetric(2.0, 0.125)],
                                        Generator::Diagonal(vec![iv(1.0, 4.0)])).unwrap();
            let hi: Vec<f64> = lo.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let dt = s.stability_limit();
            let mut a = vec![0.0; 33];
            let mut b = vec![0.0; 33];
            s.step(&lo, &mut a, dt);
            s.step(&hi, &mut b, dt);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x <= &(y + 1e-12));
            }
        }
    }
}
