use crate::testfn::{Growth, TestFunction};

use super::PdeError;

/// Solver defaults shared by every expectation route.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Target relative tolerance; drives domain truncation.
    pub tolerance: f64,
    /// Initial truncation radius in standard deviations.
    pub truncation_sigmas: f64,
    /// Default spacing as a fraction of `σ̄√t`.
    pub spacing_factor: f64,
    /// Courant number used when the time step is derived.
    pub courant: f64,
    /// Absolute spacing override for every axis.
    pub spacing: Option<f64>,
    /// Absolute half-width override for every axis.
    pub half_width: Option<f64>,
    /// Time-step override; must respect the monotonicity limit.
    pub dt: Option<f64>,
    /// Time horizon `t` in `u(t, 0) = Ê[φ(√t X)]`.
    pub time_horizon: f64,
    /// Re-solve on the doubled-spacing grid to estimate discretization error.
    pub estimate_refinement: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            truncation_sigmas: 8.0,
            spacing_factor: 0.05,
            courant: 0.4,
            spacing: None,
            half_width: None,
            dt: None,
            time_horizon: 1.0,
            estimate_refinement: true,
        }
    }
}

impl SolverConfig {
    /// Same configuration with every grid spacing multiplied by `factor`.
    pub fn with_spacing_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.spacing_factor *= factor;
        out.spacing = self.spacing.map(|h| h * factor);
        out.dt = None;
        out
    }
}

/// Per-axis truncation and spacing. A zero spacing marks a degenerate axis
/// that carries a single node at the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub half_width: Vec<f64>,
    pub spacing: Vec<f64>,
    pub dt: Option<f64>,
}

impl GridSpec {
    /// Same `L` and `h` on each of `dims` axes.
    pub fn uniform(dims: usize, half_width: f64, spacing: f64) -> Self {
        Self {
            half_width: vec![half_width; dims],
            spacing: vec![spacing; dims],
            dt: None,
        }
    }

    pub fn dims(&self) -> usize {
        self.spacing.len()
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    /// Doubled spacing over the same domain (requires an even node count per half-axis).
    pub fn coarsened(&self) -> Self {
        Self {
            half_width: self.half_width.clone(),
            spacing: self.spacing.iter().map(|h| 2.0 * h).collect(),
            dt: None,
        }
    }

    /// Halved spacing over the same domain.
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width.clone(),
            spacing: self.spacing.iter().map(|h| 0.5 * h).collect(),
            dt: None,
        }
    }

    /// Builds the grid for a solve with per-axis standard deviations
    /// `sigma_high[i]` (largest diffusion on axis `i`).
    ///
    /// The half-width starts at `|x0_i| + k σ̄_i √t` and `k` grows until the tail
    /// bound `C(1 + L)^m L · e^{−k²/2}` falls below a tenth of the tolerance.
    pub fn auto(
        sigma_high: &[f64],
        t: f64,
        x0: &[f64],
        growth: Growth,
        cfg: &SolverConfig,
    ) -> Result<Self, PdeError> {
        let mut half_width = Vec::with_capacity(sigma_high.len());
        let mut spacing = Vec::with_capacity(sigma_high.len());
        for (&sigma, &x) in sigma_high.iter().zip(x0) {
            let scale = sigma * t.sqrt();
            if scale == 0.0 {
                half_width.push(0.0);
                spacing.push(0.0);
                continue;
            }
            let mut k = cfg.truncation_sigmas;
            let tail = |k: f64| growth.value_bound(x.abs() + k * scale).max(1.0) * (-0.5 * k * k).exp();
            while tail(k) > 0.1 * cfg.tolerance && k < 40.0 {
                k += 1.0;
            }
            let mut l = cfg.half_width.unwrap_or(x.abs() + k * scale);
            let h = cfg
                .spacing
                .unwrap_or_else(|| (0.02 * l).min(cfg.spacing_factor * scale));
            if !(h > 0.0 && h.is_finite()) {
                return Err(PdeError::BadGrid(format!("non-positive spacing {h}")));
            }
            let mut n = (l / h - 1e-9).ceil().max(8.0) as usize;
            if n % 2 == 1 {
                n += 1;
            }
            l = n as f64 * h;
            half_width.push(l);
            spacing.push(h);
        }
        Ok(Self {
            half_width,
            spacing,
            dt: cfg.dt,
        })
    }

    /// Checks `L/h ∈ ℕ`, `L/h ≥ 8` on every nondegenerate axis.
    pub fn validate(&self) -> Result<(), PdeError> {
        if self.half_width.len() != self.spacing.len() {
            return Err(PdeError::BadGrid("half_width and spacing lengths differ".into()));
        }
        for (i, (&l, &h)) in self.half_width.iter().zip(&self.spacing).enumerate() {
            if h == 0.0 && l == 0.0 {
                continue;
            }
            if !(l > 0.0 && h > 0.0 && l.is_finite() && h.is_finite()) {
                return Err(PdeError::BadGrid(format!("axis {i}: need L > 0 and h > 0, got L={l}, h={h}")));
            }
            let ratio = l / h;
            if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) || ratio.round() < 8.0 {
                return Err(PdeError::BadGrid(format!(
                    "axis {i}: L/h = {ratio} must be an integer >= 8"
                )));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(PdeError::BadGrid(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    /// Materializes the axes; degenerate axes sit at `x0`.
    pub fn axes(&self, x0: &[f64]) -> Result<Vec<Axis>, PdeError> {
        self.validate()?;
        self.half_width
            .iter()
            .zip(&self.spacing)
            .zip(x0)
            .map(|((&l, &h), &x)| {
                if h == 0.0 {
                    return Ok(Axis::point(x));
                }
                if x.abs() > l + 1e-12 {
                    return Err(PdeError::OutsideDomain {
                        coordinate: x,
                        half_width: l,
                    });
                }
                Ok(Axis::symmetric(l, h))
            })
            .collect()
    }
}

/// Uniform nodes `origin + k·spacing`, `k = 0..nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub spacing: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn symmetric(half_width: f64, spacing: f64) -> Self {
        let half = (half_width / spacing).round() as usize;
        Self {
            origin: -(half as f64) * spacing,
            spacing,
            nodes: 2 * half + 1,
        }
    }

    pub fn point(x: f64) -> Self {
        Self {
            origin: x,
            spacing: 0.0,
            nodes: 1,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.nodes == 1
    }

    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.spacing
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.nodes - 1) as f64 * self.spacing
    }

    /// Index of the node at 0 on a symmetric axis.
    pub fn center(&self) -> usize {
        self.nodes / 2
    }
}

/// Node values on a tensor grid, axis 0 slowest.
#[derive(Debug, Clone)]
pub struct Field {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn strides(axes: &[Axis]) -> Vec<usize> {
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].nodes;
        }
        strides
    }

    /// Tabulates `phi` on the grid, rejecting non-finite values.
    pub fn from_function(axes: Vec<Axis>, phi: &TestFunction) -> Result<Self, PdeError> {
        let total: usize = axes.iter().map(|a| a.nodes).product();
        let n = axes.len();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        let mut point = vec![0.0; n];
        for _ in 0..total {
            for d in 0..n {
                point[d] = axes[d].coord(idx[d]);
            }
            let v = phi.eval(&point);
            if !v.is_finite() {
                return Err(PdeError::NonFinite { at: point });
            }
            values.push(v);
            for d in (0..n).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].nodes {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self { axes, values })
    }

    /// Multilinear interpolation at `x` (clamped to the grid).
    pub fn sample(&self, x: &[f64]) -> f64 {
        let n = self.axes.len();
        let strides = Self::strides(&self.axes);
        let mut base = 0usize;
        let mut frac = vec![0.0; n];
        let mut live = vec![false; n];
        for d in 0..n {
            let ax = &self.axes[d];
            if ax.is_degenerate() {
                continue;
            }
            let s = ((x[d] - ax.origin) / ax.spacing).clamp(0.0, (ax.nodes - 1) as f64);
            let mut k = s.floor() as usize;
            if k >= ax.nodes - 1 {
                k = ax.nodes - 2;
            }
            let f = s - k as f64;
            base += k * strides[d];
            if f > 0.0 {
                frac[d] = f;
                live[d] = true;
            }
        }
        let live_axes: Vec<usize> = (0..n).filter(|&d| live[d]).collect();
        let mut acc = 0.0;
        for mask in 0..(1usize << live_axes.len()) {
            let mut w = 1.0;
            let mut p = base;
            for (bit, &d) in live_axes.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    w *= frac[d];
                    p += strides[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            acc += w * self.values[p];
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn auto_grid_is_even_and_aligned() {
        let cfg = SolverConfig::default();
        let g = GridSpec::auto(&[2.0], 1.0, &[0.0], catalog::monomial(4).growth(), &cfg).unwrap();
        g.validate().unwrap();
        let n = (g.half_width[0] / g.spacing[0]).round() as usize;
        assert_eq!(n % 2, 0);
        assert!((g.spacing[0] - 0.1).abs() < 1e-12);
        assert!(g.half_width[0] >= 16.0);
        g.coarsened().validate().unwrap();
    }

    #[test]
    fn zero_variance_axis_is_degenerate() {
        let cfg = SolverConfig::default();
        let g = GridSpec::auto(&[0.0, 1.0], 1.0, &[0.5, 0.0], catalog::xy().growth(), &cfg).unwrap();
        let axes = g.axes(&[0.5, 0.0]).unwrap();
        assert!(axes[0].is_degenerate());
        assert_eq!(axes[0].coord(0), 0.5);
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(GridSpec::uniform(1, 1.0, 0.3).validate().is_err());
        assert!(GridSpec::uniform(1, 0.5, 0.1).validate().is_err());
        assert!(GridSpec::uniform(1, 1.0, 0.1).axes(&[2.0]).is_err());
    }

    #[test]
    fn multilinear_sample_reproduces_bilinear() {
        let axes = vec![Axis::symmetric(1.0, 0.25), Axis::symmetric(1.0, 0.125)];
        let f = TestFunction::new("b", 2, 1, 4.0, |x| 1.0 + 2.0 * x[0] - x[1] + 3.0 * x[0] * x[1])
            .unwrap();
        let field = Field::from_function(axes, &f).unwrap();
        for p in [[0.1, -0.33], [0.9, 0.77], [-1.0, 1.0]] {
            assert!((field.sample(&p) - f.eval(&p)).abs() < 1e-12);
        }
    }
}
