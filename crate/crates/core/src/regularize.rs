//! Regularization in time: sup/inf-convolution, multiplicative mollification, and a
//! semi-concavity estimator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;

/// Sup-convolution `max_{t'} u(t', z) - (t - t')^2 / (2 eps^2)` over grid times, with the
/// largest maximizer distance `|t - t'|` observed.
#[derive(Debug, Clone)]
pub struct Convolved {
    pub field: SpaceTimeField,
    pub max_shift: f64,
}

fn convolve_time(u: &SpaceTimeField, eps: f64, sign: f64) -> Result<Convolved> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let grid = u.grid();
    let s = grid.spatial_len();
    let slices = grid.slices();
    let dt = grid.dt();
    let penalty = 1.0 / (2.0 * eps * eps);
    let per_slice: Vec<(Vec<f64>, f64)> = (0..slices)
        .into_par_iter()
        .map(|k| {
            let mut out = vec![0.0; s];
            let mut shift: f64 = 0.0;
            for (i, o) in out.iter_mut().enumerate() {
                let mut best = f64::NEG_INFINITY;
                let mut arg = k;
                for kk in 0..slices {
                    let d = (k as f64 - kk as f64) * dt;
                    let v = sign * u.at(kk, i) - d * d * penalty;
                    if v > best {
                        best = v;
                        arg = kk;
                    }
                }
                *o = sign * best;
                shift = shift.max((k as f64 - arg as f64).abs() * dt);
            }
            (out, shift)
        })
        .collect();
    let max_shift = per_slice.iter().map(|p| p.1).fold(0.0, f64::max);
    let values = per_slice.into_iter().flat_map(|p| p.0).collect();
    Ok(Convolved {
        field: SpaceTimeField::new(u.grid_arc().clone(), values)?,
        max_shift,
    })
}

/// `u_eps(t, z) = max_{t'} u(t', z) - (t - t')^2 / (2 eps^2)`; `>= u`, semi-convex in `t`.
pub fn sup_convolution_time(u: &SpaceTimeField, eps: f64) -> Result<Convolved> {
    convolve_time(u, eps, 1.0)
}

/// `v_eps(t, z) = min_{t'} v(t', z) + (t - t')^2 / (2 eps^2)`; `<= v`, semi-concave in `t`.
pub fn inf_convolution_time(v: &SpaceTimeField, eps: f64) -> Result<Convolved> {
    convolve_time(v, eps, -1.0)
}

/// Even cut-off profiles on `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `exp(-1 / (1 - s^2))`
    #[default]
    Bump,
    /// `1 - s^2`
    Epanechnikov,
}

impl Kernel {
    pub fn profile(self, s: f64) -> f64 {
        if s.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Bump => (-1.0 / (1.0 - s * s)).exp(),
            Kernel::Epanechnikov => 1.0 - s * s,
        }
    }
}

/// Number of quadrature points in `s` for [`time_mollify`].
pub const MOLLIFY_POINTS: usize = 64;

#[derive(Debug, Clone)]
pub struct Mollified {
    pub field: SpaceTimeField,
    /// some `s t` fell outside `[0, T]` and was clamped
    pub clamped: bool,
}

/// `u^eps(t, z) = int u(s t, z) chi((s - 1) / eps) ds`, kernel normalized to unit mass.
///
/// Composite trapezoid on [`MOLLIFY_POINTS`] points of `[1 - eps, 1 + eps]`; `u(s t, .)` is
/// linearly interpolated between slices.
pub fn time_mollify(u: &SpaceTimeField, eps: f64, kernel: Kernel) -> Result<Mollified> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let grid = u.grid();
    let m = MOLLIFY_POINTS;
    let ds = 2.0 * eps / (m - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..m)
        .map(|j| {
            let sigma = -1.0 + 2.0 * j as f64 / (m - 1) as f64;
            let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
            (1.0 + eps * sigma, w * ds * kernel.profile(sigma))
        })
        .collect();
    let mass: f64 = nodes.iter().map(|n| n.1).sum();
    let t_final = grid.steps() as f64 * grid.dt();
    let s = grid.spatial_len();
    let mut clamped = false;
    let mut values = vec![0.0; grid.node_count()];
    for k in 0..grid.slices() {
        let t = grid.time(k);
        // (lower slice, fraction, weight) per quadrature point
        let taps: Vec<(usize, f64, f64)> = nodes
            .iter()
            .filter(|n| n.1 > 0.0)
            .map(|&(sv, w)| {
                let mut tt = sv * t;
                if tt > t_final || tt < 0.0 {
                    clamped = true;
                    tt = tt.clamp(0.0, t_final);
                }
                let x = tt / grid.dt();
                let lo = (x.floor() as usize).min(grid.steps().saturating_sub(1));
                (lo, x - lo as f64, w / mass)
            })
            .collect();
        for i in 0..s {
            values[k * s + i] = taps
                .iter()
                .map(|&(lo, fr, w)| {
                    let a = u.at(lo, i);
                    let b = if grid.steps() > 0 { u.at(lo + 1, i) } else { a };
                    w * (a + fr * (b - a))
                })
                .sum();
        }
    }
    Ok(Mollified {
        field: SpaceTimeField::new(u.grid_arc().clone(), values)?,
        clamped,
    })
}

/// `max_k (u_{k+1} - 2u_k + u_{k-1}) / dt^2`, positive part, over all spatial nodes.
pub fn semiconcavity_constant(u: &SpaceTimeField) -> Result<f64> {
    let grid = u.grid();
    if grid.slices() < 3 {
        return Err(Error::TooFewSlices {
            needed: 3,
            have: grid.slices(),
        });
    }
    let dt2 = grid.dt() * grid.dt();
    let mut worst: f64 = 0.0;
    for k in 1..grid.steps() {
        for i in 0..grid.spatial_len() {
            worst = worst.max((u.at(k + 1, i) - 2.0 * u.at(k, i) + u.at(k - 1, i)) / dt2);
        }
    }
    Ok(worst)
}

/// Minimum time second difference (semi-convexity modulus, negated) over all nodes.
pub fn min_time_second_difference(u: &SpaceTimeField) -> Result<f64> {
    let grid = u.grid();
    if grid.slices() < 3 {
        return Err(Error::TooFewSlices {
            needed: 3,
            have: grid.slices(),
        });
    }
    let dt2 = grid.dt() * grid.dt();
    let mut worst = f64::INFINITY;
    for k in 1..grid.steps() {
        for i in 0..grid.spatial_len() {
            worst = worst.min((u.at(k + 1, i) - 2.0 * u.at(k, i) + u.at(k - 1, i)) / dt2);
        }
    }
    Ok(worst)
}
