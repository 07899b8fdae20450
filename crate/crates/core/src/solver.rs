//! Backward Euler for the Cauchy-Dirichlet problem with a monotone inner solver.
//!
//! Each step solves, at every interior node,
//! `(phi - prev) / dt = log max(MA(phi), mu) - log g - F(t, z, phi)`
//! with the non-interior nodes pinned to `h(t, z)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{SliceField, SpaceTimeField};
use crate::grid::ComplexGrid;
use crate::problem::FlowProblem;
use crate::stencil::{StencilFrameSet, StencilPlan};

/// Floor inside the logarithm of the density.
pub const MU: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerSolver {
    /// `phi <- (1 - w) phi + w (prev + dt (log MA(phi) - log g - F))`, all nodes at once.
    /// Needs roughly `dt <= h^2` to contract.
    #[default]
    FixedPoint,
    /// Nonlinear Jacobi: each node solves its own scalar equation with the neighbors frozen.
    /// The scalar residual is strictly increasing, so the root is bracketed and found by
    /// safeguarded Newton; stable for any `dt`.
    Nodal,
}

#[derive(Debug, Clone)]
pub struct SolverParams {
    pub tol: f64,
    pub max_iter: usize,
    /// under-relaxation `w` in `(0, 1]` for the fixed-point iteration
    pub damping: f64,
    pub frames: StencilFrameSet,
    pub inner: InnerSolver,
}

impl SolverParams {
    pub fn default_for(n: usize) -> Self {
        SolverParams {
            tol: 1e-11,
            max_iter: 20_000,
            damping: 0.5,
            frames: StencilFrameSet::default_for(n),
            inner: InnerSolver::FixedPoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(
                "solver tol must be positive".into(),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter("damping must lie in (0, 1]".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub k: usize,
    pub iterations: usize,
    pub max_update: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: SpaceTimeField,
    pub steps: Vec<StepLog>,
}

/// Grid-bound solver state: stencil plan and `log g` at the interior nodes.
pub struct FlowSolver {
    grid: Arc<ComplexGrid>,
    prob: FlowProblem,
    params: SolverParams,
    plan: StencilPlan,
    log_g: Vec<f64>,
}

impl FlowSolver {
    pub fn new(grid: Arc<ComplexGrid>, prob: &FlowProblem, params: &SolverParams) -> Result<Self> {
        params.validate()?;
        if grid.domain() != &prob.domain {
            return Err(Error::GridMismatch);
        }
        let plan = StencilPlan::interior(&grid, &params.frames)?;
        let log_g = plan
            .nodes()
            .iter()
            .map(|&i| {
                let g = prob.g(grid.point(i))?;
                if g > 0.0 && g.is_finite() {
                    Ok(g.ln())
                } else {
                    Err(Error::DegenerateG { node: i, value: g })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FlowSolver {
            grid,
            prob: prob.clone(),
            params: params.clone(),
            plan,
            log_g,
        })
    }

    pub fn grid(&self) -> &Arc<ComplexGrid> {
        &self.grid
    }

    /// One backward Euler step from `prev` (slice `k - 1`) to slice `k`.
    pub fn step(&self, prev: &[f64], k: usize) -> Result<(Vec<f64>, StepLog)> {
        let grid = &self.grid;
        if prev.len() != grid.spatial_len() {
            return Err(Error::LengthMismatch {
                expected: grid.spatial_len(),
                got: prev.len(),
            });
        }
        if let Some(i) = prev.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let t = grid.time(k);
        let mut u = (0..grid.spatial_len())
            .map(|i| {
                if grid.is_interior(i) {
                    Ok(prev[i])
                } else {
                    self.prob.h(t, grid.point(i))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let (iterations, max_update) = match self.params.inner {
            InnerSolver::FixedPoint => self.fixed_point(prev, t, &mut u)?,
            InnerSolver::Nodal => self.nodal(prev, t, &mut u)?,
        };
        if max_update.is_nan() || max_update >= self.params.tol {
            return Err(Error::InnerDivergence {
                step: k,
                iterations,
                residual: max_update,
            });
        }
        Ok((
            u,
            StepLog {
                k,
                iterations,
                max_update,
            },
        ))
    }

    fn fixed_point(&self, prev: &[f64], t: f64, u: &mut [f64]) -> Result<(usize, f64)> {
        let dt = self.grid.dt();
        let w = self.params.damping;
        let conv = self.prob.convention;
        let mut update = f64::INFINITY;
        for it in 1..=self.params.max_iter {
            let next = (0..self.plan.nodes().len())
                .into_par_iter()
                .map(|p| -> Result<f64> {
                    let i = self.plan.nodes()[p];
                    let ma = self.plan.density_at(p, u, conv).max(MU);
                    let f = self.prob.source(t, self.grid.point(i), u[i])?;
                    let target = prev[i] + dt * (ma.ln() - self.log_g[p] - f);
                    Ok((1.0 - w) * u[i] + w * target)
                })
                .collect::<Result<Vec<_>>>()?;
            update = 0.0;
            for (p, v) in next.into_iter().enumerate() {
                let i = self.plan.nodes()[p];
                let d = (v - u[i]).abs();
                update = if d.is_nan() { f64::NAN } else { update.max(d) };
                u[i] = v;
            }
            if !update.is_finite() {
                return Ok((it, f64::NAN));
            }
            if update < self.params.tol {
                return Ok((it, update));
            }
        }
        Ok((self.params.max_iter, update))
    }

    fn nodal(&self, prev: &[f64], t: f64, u: &mut [f64]) -> Result<(usize, f64)> {
        let mut update = f64::INFINITY;
        for it in 1..=self.params.max_iter {
            let next = (0..self.plan.nodes().len())
                .into_par_iter()
                .map(|p| self.solve_node(p, prev, t, u))
                .collect::<Result<Vec<_>>>()?;
            update = 0.0;
            for (p, v) in next.into_iter().enumerate() {
                let i = self.plan.nodes()[p];
                update = update.max((v - u[i]).abs());
                u[i] = v;
            }
            if update < self.params.tol {
                return Ok((it, update));
            }
        }
        Ok((self.params.max_iter, update))
    }

    /// Root of `x - prev - dt (log max(MA(x), mu) - log g - F(t, z, x))` with neighbors frozen.
    fn solve_node(&self, p: usize, prev: &[f64], t: f64, u: &[f64]) -> Result<f64> {
        let i = self.plan.nodes()[p];
        let z = self.grid.point(i);
        let dt = self.grid.dt();
        let c_n = self.prob.convention.c_n;
        // each directional form is affine in the node value: a + c x with c < 0
        let affine: Vec<Vec<(f64, f64)>> = self
            .plan
            .forms(p)
            .iter()
            .map(|dirs| dirs.iter().map(|f| (f.apply(u, 0.0), f.center)).collect())
            .collect();
        let log_ma = |x: f64| -> (f64, f64) {
            let mut best = f64::INFINITY;
            let mut slope = 0.0;
            for dirs in &affine {
                let mut prod = 1.0;
                let mut s = 0.0;
                for &(a, c) in dirs {
                    let d = (a + c * x).max(0.0);
                    prod *= d;
                    s += if d > 0.0 { c / d } else { 0.0 };
                }
                if prod < best {
                    best = prod;
                    slope = s;
                }
            }
            let ma = c_n * best;
            if ma > MU {
                (ma.ln(), slope)
            } else {
                (MU.ln(), 0.0)
            }
        };
        let residual = |x: f64| -> Result<(f64, f64)> {
            let (l, dl) = log_ma(x);
            let f = self.prob.source(t, z, x)?;
            Ok((x - prev[i] - dt * (l - self.log_g[p] - f), 1.0 - dt * dl))
        };
        let x0 = u[i];
        let (r0, _) = residual(x0)?;
        if r0 == 0.0 {
            return Ok(x0);
        }
        // bracket [lo, hi] with r(lo) < 0 < r(hi)
        let mut step = r0.abs().max(1e-3);
        let (mut lo, mut hi) = (x0, x0);
        if r0 > 0.0 {
            loop {
                lo -= step;
                step *= 2.0;
                if residual(lo)?.0 < 0.0 {
                    break;
                }
                if !lo.is_finite() {
                    return Err(Error::InnerDivergence {
                        step: 0,
                        iterations: 0,
                        residual: r0,
                    });
                }
            }
        } else {
            loop {
                hi += step;
                step *= 2.0;
                if residual(hi)?.0 > 0.0 {
                    break;
                }
                if !hi.is_finite() {
                    return Err(Error::InnerDivergence {
                        step: 0,
                        iterations: 0,
                        residual: r0,
                    });
                }
            }
        }
        let mut x = x0.clamp(lo, hi);
        for _ in 0..200 {
            let (r, dr) = residual(x)?;
            if r == 0.0 || (dr > 0.0 && (r / dr).abs() < 1e-15 * x.abs().max(1.0)) {
                return Ok(x);
            }
            if r < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - r / dr;
            x = if dr > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        Ok(x)
    }

    /// All slices: `h(0, .)` first, then sequential implicit steps.
    pub fn solve(&self) -> Result<Solution> {
        let grid = &self.grid;
        let s = grid.spatial_len();
        let mut values = Vec::with_capacity(grid.node_count());
        for i in 0..s {
            values.push(self.prob.h(0.0, grid.point(i))?);
        }
        let mut steps = Vec::with_capacity(grid.steps());
        for k in 1..grid.slices() {
            let (next, log) = self.step(&values[(k - 1) * s..k * s], k)?;
            values.extend(next);
            steps.push(log);
        }
        Ok(Solution {
            field: SpaceTimeField::new(grid.clone(), values)?,
            steps,
        })
    }
}

/// One implicit step from `prev` to time `t_next`, which must be a grid time.
pub fn implicit_step(
    prev: &SliceField,
    t_next: f64,
    prob: &FlowProblem,
    params: &SolverParams,
) -> Result<SliceField> {
    let grid = prev.grid_arc().clone();
    let k = (t_next / grid.dt()).round() as usize;
    if k == 0 || k >= grid.slices() || (grid.time(k) - t_next).abs() > 1e-9 * grid.dt() {
        return Err(Error::InvalidParameter(format!(
            "t_next = {t_next} is not a positive grid time"
        )));
    }
    let solver = FlowSolver::new(grid.clone(), prob, params)?;
    let (values, _) = solver.step(prev.values(), k)?;
    SliceField::new(grid, k, values)
}

/// Solves on all of `grid` after checking the problem's preconditions.
pub fn solve_flow(
    prob: &FlowProblem,
    grid: &Arc<ComplexGrid>,
    params: &SolverParams,
) -> Result<Solution> {
    prob.validate_for_solve(grid)?;
    FlowSolver::new(grid.clone(), prob, params)?.solve()
}

/// `max |u - h|` over the initial slice and the spatial boundary nodes.
pub fn boundary_residual(u: &SpaceTimeField, prob: &FlowProblem) -> Result<f64> {
    let grid = u.grid();
    let mut worst: f64 = 0.0;
    for k in 0..grid.slices() {
        let t = grid.time(k);
        for i in 0..grid.spatial_len() {
            if k == 0 || !grid.is_interior(i) {
                worst = worst.max((u.at(k, i) - prob.h(t, grid.point(i))?).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{linf_distance, Region};
    use crate::grid::{build_grid, DomainSpec};
    use crate::stencil::MAConvention;

    fn abs2(x: &[f64]) -> f64 {
        x.iter().map(|c| c * c).sum()
    }

    fn quad1(h: f64, dt: f64, t: f64) -> (Arc<ComplexGrid>, FlowProblem) {
        let d = DomainSpec::unit_ball(1);
        let grid = Arc::new(build_grid(d.clone(), h, dt, t).unwrap());
        let prob = FlowProblem::from_sources(
            d,
            t,
            "0",
            "2",
            "log(2)*t + absz2",
            MAConvention::standard(1),
        )
        .unwrap();
        (grid, prob)
    }

    #[test]
    fn exact_step_reproduces_next_slice() {
        let (g, p) = quad1(0.1, 0.005, 0.05);
        let exact = SpaceTimeField::from_fn(g.clone(), |t, x| 2f64.ln() * t + abs2(x));
        let params = SolverParams::default_for(1);
        for inner in [InnerSolver::FixedPoint, InnerSolver::Nodal] {
            let params = SolverParams {
                inner,
                ..params.clone()
            };
            let next = implicit_step(&exact.slice(3).unwrap(), g.time(4), &p, &params).unwrap();
            for (a, b) in next.values().iter().zip(exact.slice_values(4)) {
                assert!((a - b).abs() < 1e-9, "{inner:?}");
            }
        }
    }

    #[test]
    fn degenerate_density_rejected() {
        let (g, p) = quad1(0.1, 0.005, 0.05);
        let p0 = FlowProblem::from_sources(
            p.domain.clone(),
            0.05,
            "0",
            "max(x1, 0)",
            "absz2",
            p.convention,
        )
        .unwrap();
        let prev = SliceField::from_fn(g.clone(), 0, abs2);
        let e = implicit_step(&prev, g.time(1), &p0, &SolverParams::default_for(1)).unwrap_err();
        assert!(matches!(e, Error::DegenerateG { .. }));
        assert!(implicit_step(&prev, 0.0123, &p, &SolverParams::default_for(1)).is_err());
    }

    #[test]
    fn huge_step_reaches_elliptic_solution() {
        let d = DomainSpec::unit_ball(1);
        let g = Arc::new(build_grid(d.clone(), 0.125, 100.0, 100.0).unwrap());
        let p = FlowProblem::from_sources(d, 100.0, "r", "1", "absz2", MAConvention::standard(1))
            .unwrap();
        let params = SolverParams {
            inner: InnerSolver::Nodal,
            ..SolverParams::default_for(1)
        };
        let next =
            implicit_step(&SliceField::from_fn(g.clone(), 0, abs2), 100.0, &p, &params).unwrap();
        let plan = StencilPlan::interior(&g, &params.frames).unwrap();
        let ma = plan.density(next.values(), p.convention);
        for (q, &i) in plan.nodes().iter().enumerate() {
            let phi = next.values()[i];
            // log MA = phi + (phi - prev) / dt, the last term O(1/dt)
            assert!((ma[q].ln() - phi).abs() < 0.05, "{} vs {}", ma[q].ln(), phi);
        }
    }

    #[test]
    fn quadratic_case_converges() {
        let (g, p) = quad1(0.2, 0.01, 0.25);
        let sol = solve_flow(&p, &g, &SolverParams::default_for(1)).unwrap();
        let exact = SpaceTimeField::from_fn(g.clone(), |t, x| 2f64.ln() * t + abs2(x));
        assert!(linf_distance(&sol.field, &exact, Region::All).unwrap() <= 0.05);
        assert_eq!(boundary_residual(&sol.field, &p).unwrap(), 0.0);
        assert_eq!(sol.steps.len(), g.steps());
    }

    #[test]
    fn time_dependent_case_converges() {
        let d = DomainSpec::unit_ball(1);
        let g = Arc::new(build_grid(d.clone(), 0.1, 0.005, 0.25).unwrap());
        let p = FlowProblem::from_sources(
            d,
            0.25,
            "log(1 + 0.5*t) - 0.5",
            "4*exp(-0.5*absz2)",
            "0.5*t + (1 + 0.5*t)*absz2",
            MAConvention::standard(1),
        )
        .unwrap();
        let sol = solve_flow(&p, &g, &SolverParams::default_for(1)).unwrap();
        let exact = SpaceTimeField::from_fn(g.clone(), |t, x| 0.5 * t + (1.0 + 0.5 * t) * abs2(x));
        assert!(linf_distance(&sol.field, &exact, Region::All).unwrap() <= 0.05);
    }

    #[test]
    fn boundary_shift_shifts_solution() {
        let (g, p) = quad1(0.2, 0.01, 0.1);
        let params = SolverParams::default_for(1);
        let a = solve_flow(&p, &g, &params).unwrap().field;
        let lifted = p.with_boundary(
            crate::expr::parse_slot("log(2)*t + absz2 + 0.1", crate::expr::Slot::Boundary).unwrap(),
        );
        let b = solve_flow(&lifted, &g, &params).unwrap().field;
        let d = linf_distance(&a, &b, Region::All).unwrap();
        assert!(d <= 0.1 + 1e-9, "{d}");
    }

    #[test]
    fn raising_boundary_never_lowers_interior() {
        let (g, p) = quad1(0.2, 0.01, 0.05);
        let params = SolverParams::default_for(1);
        let solver = FlowSolver::new(g.clone(), &p, &params).unwrap();
        let prev: Vec<f64> = (0..g.spatial_len()).map(|i| abs2(g.point(i))).collect();
        let (base, _) = solver.step(&prev, 1).unwrap();
        let bumped = p.with_boundary(
            crate::expr::parse_slot(
                "log(2)*t + absz2 + 0.3*max(x1, 0)",
                crate::expr::Slot::Boundary,
            )
            .unwrap(),
        );
        let solver = FlowSolver::new(g.clone(), &bumped, &params).unwrap();
        let (up, _) = solver.step(&prev, 1).unwrap();
        for (a, b) in base.iter().zip(&up) {
            assert!(b >= &(a - 1e-10));
        }
    }

    #[test]
    fn residual_examples() {
        let (g, p) = quad1(0.2, 0.01, 0.05);
        let exact = SpaceTimeField::from_fn(g.clone(), |t, x| 2f64.ln() * t + abs2(x));
        assert!(boundary_residual(&exact, &p).unwrap() < 1e-15);
        let up = exact.add_scalar(1.0).unwrap();
        assert!((boundary_residual(&up, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_params_rejected() {
        let (g, p) = quad1(0.2, 0.01, 0.05);
        let mut params = SolverParams::default_for(1);
        params.damping = 0.0;
        assert!(FlowSolver::new(g.clone(), &p, &params).is_err());
        params.damping = 1.0;
        params.tol = -1.0;
        assert!(FlowSolver::new(g, &p, &params).is_err());
    }
}
