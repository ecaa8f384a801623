//! Backward recursion for sequentially independent coordinates.
//!
//! `φ` is tabulated once on a tensor grid whose axes follow the order in which
//! the variables are revealed. The last axis is then integrated out slice by
//! slice: every contiguous 1D slice is evolved under that variable's `Ḡ` and
//! read back at its centre node. Because the centre node is `0` on every axis,
//! the reduced table lives on exactly the outer nodes and no interpolation is
//! needed.

use rayon::prelude::*;

use crate::gamma::UncertaintyInterval;
use crate::pde::{boundary_attenuation, evolve, Axis, Field, Generator, GridSpec, PdeError, SolveReport, SolverConfig};
use crate::testfn::{Growth, TestFunction};

/// Largest number of nested variables.
pub const MAX_NESTED: usize = 3;

/// Spacing multiplier applied to the default grid for three variables.
pub(crate) const THREE_VAR_SPACING: f64 = 2.0;

#[derive(Debug, Clone)]
pub(crate) struct NestedRun {
    pub value: f64,
    pub boundary: f64,
    /// One report per integrated variable, innermost first.
    pub levels: Vec<SolveReport>,
}

/// Growth bound of the intermediate `ψ_i`, used to size the shared grid.
pub(crate) fn propagated_growth(g: Growth, sigma_max: f64) -> Growth {
    let m = g.order as i32;
    let mm = f64::from(g.order).powi(m);
    Growth {
        order: g.order,
        constant: g.constant * (1.0 + sigma_max.powi(m) * mm),
    }
}

/// Grid for the recursion: the default per-axis grid at `x0 = 0`, coarser for
/// three variables.
pub(crate) fn nested_grid(
    ivs: &[UncertaintyInterval],
    phi: &TestFunction,
    cfg: &SolverConfig,
) -> Result<GridSpec, PdeError> {
    let sigma: Vec<f64> = ivs.iter().map(|iv| iv.sigma_high()).collect();
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cfg = if ivs.len() >= 3 && cfg.spacing.is_none() {
        cfg.with_spacing_scaled(THREE_VAR_SPACING)
    } else {
        cfg.clone()
    };
    let growth = propagated_growth(phi.growth(), smax * cfg.time_horizon.sqrt());
    GridSpec::auto(&sigma, cfg.time_horizon, &vec![0.0; ivs.len()], growth, &cfg)
}

/// Runs the recursion for `phi` whose arguments are already in reveal order.
pub(crate) fn run(
    ivs: &[UncertaintyInterval],
    phi: &TestFunction,
    grid: &GridSpec,
    cfg: &SolverConfig,
) -> Result<NestedRun, PdeError> {
    let n = ivs.len();
    let t = cfg.time_horizon;
    let origin = vec![0.0; n];
    let mut axes = grid.axes(&origin)?;
    let mut values = Field::from_function(axes.clone(), phi)?.values;
    let mut levels = Vec::with_capacity(n);
    let mut boundary = 0.0;
    for k in (0..n).rev() {
        let axis = axes[k];
        let iv = ivs[k];
        let (reduced, band, steps) = reduce_last_axis(&values, axis, iv, t, grid.dt, cfg.courant)?;
        values = reduced;
        axes.truncate(k);
        boundary += band;
        let centre = centre_value(&values, &axes);
        levels.push(SolveReport {
            value_at_origin: centre,
            boundary_influence_estimate: band,
            refinement_delta: None,
            coarse_value: None,
            steps_taken: steps,
            degenerate: iv.low() == 0.0 && iv.high() > 0.0,
        });
    }
    Ok(NestedRun {
        value: values[0],
        boundary,
        levels,
    })
}

fn centre_value(values: &[f64], axes: &[Axis]) -> f64 {
    let strides = Field::strides(axes);
    let idx: usize = axes.iter().zip(&strides).map(|(a, s)| a.center() * s).sum();
    values[idx]
}

/// Integrates out the fastest axis. Returns the reduced table, the summed
/// attenuated boundary influence, and the steps per slice.
fn reduce_last_axis(
    values: &[f64],
    axis: Axis,
    iv: UncertaintyInterval,
    t: f64,
    dt: Option<f64>,
    courant: f64,
) -> Result<(Vec<f64>, f64, usize), PdeError> {
    if axis.is_degenerate() || t == 0.0 {
        let c = axis.center();
        let reduced = values.chunks(axis.nodes).map(|s| s[c]).collect();
        return Ok((reduced, 0.0, 0));
    }
    let attenuation = boundary_attenuation(&[axis], &[iv.high()], &[0.0], t);
    let per_slice: Vec<(f64, f64, usize)> = values
        .par_chunks(axis.nodes)
        .map(|slice| {
            let field = Field {
                axes: vec![axis],
                values: slice.to_vec(),
            };
            let evo = evolve(field, Generator::Diagonal(vec![iv]), t, dt, courant)?;
            Ok((evo.field.values[axis.center()], evo.boundary_updates * attenuation, evo.steps))
        })
        .collect::<Result<_, PdeError>>()?;
    // Fixed-order reduction keeps the result independent of scheduling.
    let band = per_slice.iter().map(|p| p.1).sum();
    let steps = per_slice.first().map_or(0, |p| p.2);
    Ok((per_slice.into_iter().map(|p| p.0).collect(), band, steps))
}
