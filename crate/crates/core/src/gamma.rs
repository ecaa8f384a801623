//! Uncertainty sets Γ and the sublinear generator
//! `G(A) = ½ sup_{B∈Γ} tr[AB]`.
//!
//! Sets are kept symbolic (interval, diagonal box, finite convex hull,
//! rank-one ray segment). `G` is linear in `B`, so every supremum is attained
//! at an extreme point and can be evaluated exactly from the representation.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Eigenvalue floor accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;
/// Zero threshold for the products `a11·a21` and `a12·a22`.
pub const ALG_TOL: f64 = 1e-12;
/// Largest box dimension whose `2^n` vertices are enumerated.
pub const MAX_BOX_VERTEX_DIM: usize = 12;
/// Agreement threshold on `G` when comparing two sets.
pub const SET_EQ_TOL: f64 = 1e-9;
const SET_EQ_SAMPLES: usize = 64;
const SET_EQ_SEED: u64 = 0x6e71_7365_7473;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GammaError {
    #[error("invalid uncertainty interval [{low}, {high}]: need 0 <= low <= high, both finite")]
    InvalidInterval { low: f64, high: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("convex hull has no generators")]
    EmptyHull,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("box of dimension {dim} has too many vertices to enumerate (limit {MAX_BOX_VERTEX_DIM})")]
    TooManyVertices { dim: usize },
}

/// Variance range `[σ̲², σ̄²]` of a scalar G-normal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyInterval {
    sigma_low_sq: f64,
    sigma_high_sq: f64,
}

impl UncertaintyInterval {
    pub fn new(sigma_low_sq: f64, sigma_high_sq: f64) -> Result<Self, GammaError> {
        let ok = sigma_low_sq.is_finite()
            && sigma_high_sq.is_finite()
            && sigma_low_sq >= 0.0
            && sigma_low_sq <= sigma_high_sq;
        if !ok {
            return Err(GammaError::InvalidInterval {
                low: sigma_low_sq,
                high: sigma_high_sq,
            });
        }
        Ok(Self {
            sigma_low_sq,
            sigma_high_sq,
        })
    }

    /// Degenerate interval `[σ², σ²]`: a classical centered normal.
    pub fn classical(sigma_sq: f64) -> Result<Self, GammaError> {
        Self::new(sigma_sq, sigma_sq)
    }

    pub fn low(&self) -> f64 {
        self.sigma_low_sq
    }

    pub fn high(&self) -> f64 {
        self.sigma_high_sq
    }

    pub fn is_classical(&self) -> bool {
        self.sigma_low_sq == self.sigma_high_sq
    }

    /// True when there is no variance at all (the law is the point mass at 0).
    pub fn is_zero(&self) -> bool {
        self.sigma_high_sq == 0.0
    }

    /// Strict uncertainty with a positive floor: `0 < σ̲² < σ̄²`.
    pub fn is_strict(&self) -> bool {
        0.0 < self.sigma_low_sq && self.sigma_low_sq < self.sigma_high_sq
    }

    pub fn sigma_high(&self) -> f64 {
        self.sigma_high_sq.sqrt()
    }

    pub fn sigma_low(&self) -> f64 {
        self.sigma_low_sq.sqrt()
    }

    /// `[λσ̲², λσ̄²]` for `λ >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GammaError> {
        Self::new(factor * self.sigma_low_sq, factor * self.sigma_high_sq)
    }
}

/// One-dimensional generator `Ḡ(x) = ½(σ̄²x⁺ − σ̲²x⁻)`.
#[inline]
pub fn gbar(iv: &UncertaintyInterval, x: f64) -> f64 {
    if x >= 0.0 {
        0.5 * iv.sigma_high_sq * x
    } else {
        0.5 * iv.sigma_low_sq * x
    }
}

/// Dense symmetric matrix, stored row-major with both triangles filled.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds from rows; entries must be finite and exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, GammaError> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(GammaError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(GammaError::NonFinite);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(GammaError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds from the upper triangle of `f(i, j)` with `i <= j`.
    pub fn from_upper(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    /// Symmetric part `(M + Mᵀ)/2` of a square dense matrix.
    pub fn symmetrize(m: &DMatrix<f64>) -> Result<Self, GammaError> {
        if m.nrows() != m.ncols() {
            return Err(GammaError::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self::from_upper(m.nrows(), |i, j| {
            if i == j {
                m[(i, i)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)])
            }
        }))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_upper(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// Basis element `E_ij + E_ji` (or `E_ii` on the diagonal).
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        Self::from_upper(n, |a, b| {
            if (a == i && b == j) || (a == j && b == i) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `tr[AB]` for symmetric `A`, `B`.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `uᵀAu`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += u[i] * self.entries[i * n + j] * u[j];
            }
        }
        acc
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        Self {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.n).all(|i| ((i + 1)..self.n).all(|j| self.get(i, j).abs() <= tol))
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_psd(&self) -> Result<(), GammaError> {
        let min_eigenvalue = self.min_eigenvalue();
        if min_eigenvalue < -PSD_TOL {
            return Err(GammaError::NotPsd { min_eigenvalue });
        }
        Ok(())
    }

    /// `M·self·Mᵀ` for an `m×n` matrix `M`.
    pub fn congruence(&self, m: &DMatrix<f64>) -> Result<SymMatrix, GammaError> {
        if m.ncols() != self.n {
            return Err(GammaError::DimensionMismatch {
                expected: self.n,
                found: m.ncols(),
            });
        }
        let product = m * self.to_dmatrix() * m.transpose();
        SymMatrix::symmetrize(&product)
    }
}

/// Bounded closed convex set of positive semidefinite matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaSet {
    /// `n = 1`: the interval `[σ̲², σ̄²]`.
    Interval1D(UncertaintyInterval),
    /// `{diag(r_1..r_n) : r_i ∈ iv_i}`.
    DiagonalBox(Vec<UncertaintyInterval>),
    /// Convex hull of finitely many PSD generators of equal dimension.
    ConvexHull(Vec<SymMatrix>),
    /// `{r·uuᵀ : r ∈ range}`.
    RankOneFamily {
        direction: Vec<f64>,
        range: UncertaintyInterval,
    },
}

impl GammaSet {
    pub fn interval(low: f64, high: f64) -> Result<Self, GammaError> {
        Ok(Self::Interval1D(UncertaintyInterval::new(low, high)?))
    }

    pub fn diagonal_box(intervals: Vec<UncertaintyInterval>) -> Result<Self, GammaError> {
        if intervals.is_empty() {
            return Err(GammaError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        Ok(Self::DiagonalBox(intervals))
    }

    /// Validating constructor: generators must share a dimension and be PSD.
    pub fn convex_hull(generators: Vec<SymMatrix>) -> Result<Self, GammaError> {
        let first = generators.first().ok_or(GammaError::EmptyHull)?;
        let n = first.dim();
        for g in &generators {
            if g.dim() != n {
                return Err(GammaError::DimensionMismatch {
                    expected: n,
                    found: g.dim(),
                });
            }
            g.check_psd()?;
        }
        Ok(Self::ConvexHull(generators))
    }

    /// The singleton `{0}` in dimension `n`.
    pub fn zero(n: usize) -> Self {
        Self::ConvexHull(vec![SymMatrix::zeros(n)])
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Interval1D(_) => 1,
            Self::DiagonalBox(ivs) => ivs.len(),
            Self::ConvexHull(gs) => gs.first().map_or(0, SymMatrix::dim),
            Self::RankOneFamily { direction, .. } => direction.len(),
        }
    }

    /// Largest diagonal entry `b_ii` over the set, per coordinate.
    pub fn max_diagonal(&self) -> Vec<f64> {
        match self {
            Self::Interval1D(iv) => vec![iv.high()],
            Self::DiagonalBox(ivs) => ivs.iter().map(|iv| iv.high()).collect(),
            Self::ConvexHull(gs) => {
                let n = self.dim();
                (0..n)
                    .map(|i| gs.iter().map(|g| g.get(i, i)).fold(0.0, f64::max))
                    .collect()
            }
            Self::RankOneFamily { direction, range } => {
                direction.iter().map(|u| u * u * range.high()).collect()
            }
        }
    }

    /// Extreme points of the set (vertices of a box, hull generators, segment ends).
    pub fn extreme_points(&self) -> Result<Vec<SymMatrix>, GammaError> {
        Ok(match self {
            Self::Interval1D(iv) => vec![
                SymMatrix::diagonal(&[iv.low()]),
                SymMatrix::diagonal(&[iv.high()]),
            ],
            Self::DiagonalBox(ivs) => box_vertices(ivs)?
                .into_iter()
                .map(|r| SymMatrix::diagonal(&r))
                .collect(),
            Self::ConvexHull(gs) => gs.clone(),
            Self::RankOneFamily { direction, range } => {
                let uu = SymMatrix::from_upper(direction.len(), |i, j| direction[i] * direction[j]);
                vec![uu.scale(range.low()), uu.scale(range.high())]
            }
        })
    }

    /// `G(A) = ½ sup_{B∈Γ} tr[AB]`.
    pub fn g_function(&self, a: &SymMatrix) -> Result<f64, GammaError> {
        let n = self.dim();
        if a.dim() != n {
            return Err(GammaError::DimensionMismatch {
                expected: n,
                found: a.dim(),
            });
        }
        Ok(match self {
            Self::Interval1D(iv) => gbar(iv, a.get(0, 0)),
            Self::DiagonalBox(ivs) => ivs
                .iter()
                .enumerate()
                .map(|(i, iv)| gbar(iv, a.get(i, i)))
                .sum(),
            Self::ConvexHull(gs) => {
                if gs.is_empty() {
                    return Err(GammaError::EmptyHull);
                }
                0.5 * gs
                    .iter()
                    .map(|b| a.trace_product(b))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Self::RankOneFamily { direction, range } => gbar(range, a.quadratic_form(direction)),
        })
    }

    /// Set equality decided by agreement of `G` on the canonical basis of `S(n)`
    /// plus a fixed pseudo-random sample of unit-norm symmetric matrices.
    pub fn approx_eq(&self, other: &GammaSet) -> bool {
        let n = self.dim();
        if other.dim() != n {
            return false;
        }
        probe_matrices(n).iter().all(|a| {
            match (self.g_function(a), other.g_function(a)) {
                (Ok(x), Ok(y)) => (x - y).abs() <= SET_EQ_TOL * x.abs().max(y.abs()).max(1.0),
                _ => false,
            }
        })
    }
}

/// Canonical basis of `S(n)` followed by 64 seeded unit-norm symmetric matrices.
pub fn probe_matrices(n: usize) -> Vec<SymMatrix> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2 + SET_EQ_SAMPLES);
    for i in 0..n {
        for j in i..n {
            out.push(SymMatrix::unit(n, i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SET_EQ_SEED);
    for _ in 0..SET_EQ_SAMPLES {
        let raw: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = SymMatrix::from_upper(n, |i, j| raw[i * n + j]);
        let norm = m.frobenius_norm();
        out.push(if norm > 0.0 { m.scale(1.0 / norm) } else { m });
    }
    out
}

fn box_vertices(ivs: &[UncertaintyInterval]) -> Result<Vec<Vec<f64>>, GammaError> {
    let n = ivs.len();
    if n > MAX_BOX_VERTEX_DIM {
        return Err(GammaError::TooManyVertices { dim: n });
    }
    Ok((0..(1usize << n))
        .map(|mask| {
            ivs.iter()
                .enumerate()
                .map(|(i, iv)| if mask >> i & 1 == 1 { iv.high() } else { iv.low() })
                .collect()
        })
        .collect())
}

/// If every row of `m` has at most one nonzero entry and the nonzero columns are
/// distinct, returns `(column, coefficient)` per row.
fn monomial_rows(m: &DMatrix<f64>) -> Option<Vec<(usize, f64)>> {
    let mut used = vec![false; m.ncols()];
    let mut out = Vec::with_capacity(m.nrows());
    for i in 0..m.nrows() {
        let nz: Vec<usize> = (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).collect();
        match nz.as_slice() {
            [j] if !used[*j] => {
                used[*j] = true;
                out.push((*j, m[(i, *j)]));
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Factorization `m = u wᵀ` when `m` has rank at most one (relative tolerance `tol`).
pub fn rank_one_factors(m: &DMatrix<f64>, tol: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let (rows, cols) = m.shape();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Some((vec![0.0; rows], vec![0.0; cols]));
    }
    let pivot = (0..rows)
        .max_by(|&a, &b| m.row(a).norm().total_cmp(&m.row(b).norm()))
        .unwrap_or(0);
    let w: Vec<f64> = m.row(pivot).iter().copied().collect();
    let w_sq: f64 = w.iter().map(|x| x * x).sum();
    let u: Vec<f64> = (0..rows)
        .map(|i| (0..cols).map(|j| m[(i, j)] * w[j]).sum::<f64>() / w_sq)
        .collect();
    let residual = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| (m[(i, j)] - u[i] * w[j]).abs())
        .fold(0.0, f64::max);
    (residual <= tol * scale).then_some((u, w))
}

/// `{MBMᵀ : B ∈ Γ}` in the tightest representable variant.
pub fn image_gamma(m: &DMatrix<f64>, gamma: &GammaSet) -> Result<GammaSet, GammaError> {
    let n = gamma.dim();
    if m.ncols() != n {
        return Err(GammaError::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let rows = m.nrows();

    // Scalar image: the set is a segment of nonnegative reals.
    if rows == 1 {
        let row: Vec<f64> = m.row(0).iter().copied().collect();
        let (lo, hi) = match gamma {
            GammaSet::RankOneFamily { direction, range } => {
                let c: f64 = row.iter().zip(direction).map(|(a, b)| a * b).sum();
                (c * c * range.low(), c * c * range.high())
            }
            GammaSet::Interval1D(iv) => (row[0] * row[0] * iv.low(), row[0] * row[0] * iv.high()),
            GammaSet::DiagonalBox(ivs) => {
                let lo = ivs.iter().zip(&row).map(|(iv, w)| w * w * iv.low()).sum();
                let hi = ivs.iter().zip(&row).map(|(iv, w)| w * w * iv.high()).sum();
                (lo, hi)
            }
            GammaSet::ConvexHull(gs) => {
                let vals: Vec<f64> = gs.iter().map(|g| g.quadratic_form(&row).max(0.0)).collect();
                (
                    vals.iter().copied().fold(f64::INFINITY, f64::min),
                    vals.iter().copied().fold(0.0, f64::max),
                )
            }
        };
        return Ok(GammaSet::Interval1D(UncertaintyInterval::new(
            lo.max(0.0),
            hi.max(lo.max(0.0)),
        )?));
    }

    match gamma {
        GammaSet::Interval1D(iv) => Ok(GammaSet::RankOneFamily {
            direction: m.column(0).iter().copied().collect(),
            range: *iv,
        }),
        GammaSet::RankOneFamily { direction, range } => {
            let u = nalgebra::DVector::from_column_slice(direction);
            let mu = m * u;
            Ok(GammaSet::RankOneFamily {
                direction: mu.iter().copied().collect(),
                range: *range,
            })
        }
        GammaSet::DiagonalBox(ivs) => {
            if let Some(cols) = monomial_rows(m) {
                let mapped = cols
                    .iter()
                    .map(|&(j, c)| ivs[j].scaled(c * c))
                    .collect::<Result<Vec<_>, _>>()?;
                return Ok(GammaSet::DiagonalBox(mapped));
            }
            if let Some((u, w)) = rank_one_factors(m, 1e-12) {
                let lo = ivs.iter().zip(&w).map(|(iv, x)| x * x * iv.low()).sum();
                let hi = ivs.iter().zip(&w).map(|(iv, x)| x * x * iv.high()).sum();
                return Ok(GammaSet::RankOneFamily {
                    direction: u,
                    range: UncertaintyInterval::new(lo, hi)?,
                });
            }
            let images = box_vertices(ivs)?
                .iter()
                .map(|r| SymMatrix::diagonal(r).congruence(m))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(GammaSet::ConvexHull(images))
        }
        GammaSet::ConvexHull(gs) => Ok(GammaSet::ConvexHull(
            gs.iter()
                .map(|g| g.congruence(m))
                .collect::<Result<Vec<_>, _>>()?,
        )),
    }
}

/// `Γ' = {u r uᵀ : r ∈ [‖w‖²σ̲², ‖w‖²σ̄²]}`, the law of `u wᵀ Y`.
/// A zero `u` or `w` gives the singleton `{0}`.
pub fn rank_one_gamma(
    u: &[f64],
    w: &[f64],
    iv: &UncertaintyInterval,
) -> Result<GammaSet, GammaError> {
    if u.is_empty() {
        return Err(GammaError::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    if u.iter().chain(w).any(|v| !v.is_finite()) {
        return Err(GammaError::NonFinite);
    }
    let w_sq: f64 = w.iter().map(|x| x * x).sum();
    if w_sq == 0.0 || u.iter().all(|&x| x == 0.0) {
        return Ok(GammaSet::zero(u.len()));
    }
    Ok(GammaSet::RankOneFamily {
        direction: u.to_vec(),
        range: iv.scaled(w_sq)?,
    })
}

/// Whether `AΓAᵀ` contains only diagonal matrices for a 2×2 box `Γ`.
///
/// With strictly positive widths this is `a11·a21 = a12·a22 = 0`. For boxes
/// with a zero-width coordinate the vertex images are checked directly.
pub fn is_diagonal_image(a: &[[f64; 2]; 2], boxed: &[UncertaintyInterval; 2]) -> bool {
    let positive_widths = boxed.iter().all(|iv| iv.low() < iv.high());
    if positive_widths {
        return (a[0][0] * a[1][0]).abs() <= ALG_TOL && (a[0][1] * a[1][1]).abs() <= ALG_TOL;
    }
    vertex_off_diagonals(a, boxed)
        .iter()
        .all(|(_, off)| off.abs() <= ALG_TOL)
}

/// Off-diagonal entry `r1·a11·a21 + r2·a12·a22` of `A·diag(r1, r2)·Aᵀ` at each box vertex.
pub fn vertex_off_diagonals(
    a: &[[f64; 2]; 2],
    boxed: &[UncertaintyInterval; 2],
) -> Vec<([f64; 2], f64)> {
    let mut out = Vec::with_capacity(4);
    for r1 in [boxed[0].low(), boxed[0].high()] {
        for r2 in [boxed[1].low(), boxed[1].high()] {
            out.push(([r1, r2], r1 * a[0][0] * a[1][0] + r2 * a[0][1] * a[1][1]));
        }
    }
    out
}

/// A pair `(i, j)` with `α·[σ̲ᵢ², σ̄ᵢ²] = [σ̲ⱼ², σ̄ⱼ²]` for some `α > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingViolation {
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
}

/// Pairs breaking the rule that no two marginals of a sequentially independent
/// G-normal vector can be positive rescalings of one uncertain interval.
pub fn check_scaling_constraint(intervals: &[UncertaintyInterval]) -> Vec<ScalingViolation> {
    const REL: f64 = 1e-12;
    let mut out = Vec::new();
    for (i, a) in intervals.iter().enumerate() {
        if !a.is_strict() {
            continue;
        }
        for (j, b) in intervals.iter().enumerate() {
            if i == j || b.low() <= 0.0 {
                continue;
            }
            let alpha_low = b.low() / a.low();
            let alpha_high = b.high() / a.high();
            if (alpha_low - alpha_high).abs() <= REL * alpha_low.max(alpha_high) {
                out.push(ScalingViolation {
                    i,
                    j,
                    alpha: alpha_high,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> UncertaintyInterval {
        UncertaintyInterval::new(a, b).unwrap()
    }

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        let r = rows.len();
        let c = rows[0].len();
        DMatrix::from_row_slice(r, c, &rows.concat())
    }

    #[test]
    fn interval_validation() {
        assert!(UncertaintyInterval::new(2.0, 1.0).is_err());
        assert!(UncertaintyInterval::new(-1.0, 1.0).is_err());
        assert!(UncertaintyInterval::new(0.0, f64::INFINITY).is_err());
        assert!(iv(3.0, 3.0).is_classical());
        assert!(!iv(1.0, 4.0).is_classical());
    }

    #[test]
    fn g_of_zero_is_zero() {
        let sets = [
            GammaSet::interval(1.0, 4.0).unwrap(),
            GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(2.0, 3.0)]),
            GammaSet::convex_hull(vec![SymMatrix::identity(2)]).unwrap(),
        ];
        for s in &sets {
            assert_eq!(s.g_function(&SymMatrix::zeros(s.dim())).unwrap(), 0.0);
        }
    }

    #[test]
    fn g_examples() {
        let g = GammaSet::interval(1.0, 4.0).unwrap();
        assert_eq!(g.g_function(&SymMatrix::diagonal(&[2.0])).unwrap(), 4.0);
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(1.0, 4.0)]);
        assert_eq!(b.g_function(&SymMatrix::diagonal(&[1.0, -1.0])).unwrap(), 1.5);
    }

    #[test]
    fn g_dimension_mismatch() {
        let g = GammaSet::interval(1.0, 4.0).unwrap();
        assert!(matches!(
            g.g_function(&SymMatrix::zeros(2)),
            Err(GammaError::DimensionMismatch { .. })
        ));
        assert_eq!(GammaSet::convex_hull(vec![]), Err(GammaError::EmptyHull));
    }

    #[test]
    fn gbar_examples() {
        let i = iv(1.0, 4.0);
        assert_eq!(gbar(&i, 2.0), 4.0);
        assert_eq!(gbar(&i, -2.0), -1.0);
        let c = iv(2.5, 2.5);
        for x in [-3.0, 0.0, 1.7] {
            assert_eq!(gbar(&c, x), 0.5 * 2.5 * x);
        }
    }

    #[test]
    fn image_identity_is_same_set() {
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(2.0, 3.0)]);
        let img = image_gamma(&DMatrix::identity(2, 2), &b).unwrap();
        assert_eq!(img, b);
    }

    #[test]
    fn image_of_box_under_sum_difference() {
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(1.0, 4.0)]);
        let m = mat(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let img = image_gamma(&m, &b).unwrap();
        let mut expected = Vec::new();
        for r1 in [1.0, 4.0] {
            for r2 in [1.0, 4.0] {
                expected.push(
                    SymMatrix::from_rows(&[vec![r1 + r2, r1 - r2], vec![r1 - r2, r1 + r2]])
                        .unwrap(),
                );
            }
        }
        assert!(img.approx_eq(&GammaSet::ConvexHull(expected)));
    }

    #[test]
    fn image_of_box_under_row_vector() {
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(1.0, 4.0)]);
        let img = image_gamma(&mat(&[&[3.0, 4.0]]), &b).unwrap();
        assert_eq!(img, GammaSet::Interval1D(iv(25.0, 100.0)));
    }

    #[test]
    fn image_of_rank_one_map_is_rank_one_family() {
        let b = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(1.0, 4.0)]);
        // u = (1, 2), w = (3, 4)
        let m = mat(&[&[3.0, 4.0], &[6.0, 8.0]]);
        let img = image_gamma(&m, &b).unwrap();
        let expected = rank_one_gamma(&[1.0, 2.0], &[3.0, 4.0], &iv(1.0, 4.0)).unwrap();
        assert!(img.approx_eq(&expected));
    }

    #[test]
    fn rank_one_examples() {
        let g = rank_one_gamma(&[1.0, 0.0], &[1.0, 0.0], &iv(1.0, 4.0)).unwrap();
        let expected = GammaSet::DiagonalBox(vec![iv(1.0, 4.0), iv(0.0, 0.0)]);
        assert!(g.approx_eq(&expected));
        match rank_one_gamma(&[1.0, 2.0], &[3.0, 4.0], &iv(1.0, 4.0)).unwrap() {
            GammaSet::RankOneFamily { range, .. } => assert_eq!(range, iv(25.0, 100.0)),
            other => panic!("unexpected {other:?}"),
        }
        let zero = rank_one_gamma(&[1.0, 0.0], &[0.0, 0.0], &iv(1.0, 4.0)).unwrap();
        assert_eq!(zero, GammaSet::zero(2));
    }

    #[test]
    fn diagonal_image_examples() {
        let bx = [iv(1.0, 4.0), iv(1.0, 4.0)];
        assert!(is_diagonal_image(&[[1.0, 0.0], [0.0, 1.0]], &bx));
        assert!(is_diagonal_image(&[[0.0, 1.0], [1.0, 0.0]], &bx));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(!is_diagonal_image(&[[s, -s], [s, s]], &bx));
    }

    #[test]
    fn scaling_constraint_examples() {
        let v = check_scaling_constraint(&[iv(1.0, 4.0), iv(2.0, 8.0)]);
        assert!(v.iter().any(|x| x.i == 0 && x.j == 1 && (x.alpha - 2.0).abs() < 1e-12));
        assert!(check_scaling_constraint(&[iv(1.0, 4.0), iv(1.0, 9.0)]).is_empty());
        let v = check_scaling_constraint(&[iv(0.0, 0.0), iv(1.0, 4.0)]);
        assert!(v.iter().all(|x| x.i != 0));
    }

    #[test]
    fn psd_check_rejects_indefinite() {
        let m = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            GammaSet::convex_hull(vec![m]),
            Err(GammaError::NotPsd { .. })
        ));
        assert!(matches!(
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.5, 1.0]]),
            Err(GammaError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn box_vertex_cap() {
        let b = vec![iv(1.0, 2.0); MAX_BOX_VERTEX_DIM + 1];
        let m = DMatrix::from_element(2, MAX_BOX_VERTEX_DIM + 1, 1.0);
        let m = {
            let mut m = m;
            m[(1, 0)] = -1.0;
            m
        };
        assert!(matches!(
            image_gamma(&m, &GammaSet::DiagonalBox(b)),
            Err(GammaError::TooManyVertices { .. })
        ));
    }
}
