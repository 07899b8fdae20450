//! Nodal checks of the four weak solution concepts for the flow.
//!
//! * pluripotential subsolution: `MA(u_t) >= g * sup_a (a f + a - a log a)`, `f = d+u/dt + F`;
//! * viscosity sub/supersolution: the inequality for a quadratic test fitted to the
//!   space-time neighborhood and lifted until it touches from above (below);
//! * pluripotential supersolution for fields semi-concave in `t`, with `d-u/dt`.
//!
//! Margins are `lhs - rhs` oriented so that a nonnegative margin satisfies the inequality.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{
    is_parabolic_potential_with, CheckReport, DerivativeMode, NodeMargin, SpaceTimeField,
};
use crate::grid::ComplexGrid;
use crate::problem::FlowProblem;
use crate::regularize::semiconcavity_constant;
use crate::stencil::{frame_min_product, function_frame_values, StencilFrameSet, StencilPlan};

/// Slack constant `C` in tolerances `C * (h^2 + dt)`, fixed on the stencil-exact `quad1` case.
pub const SLACK_C: f64 = 1.0;

/// Default bound on `(u_{k+1} - 2u_k + u_{k-1}) / dt^2` for supersolution checks.
pub const DEFAULT_SEMICONCAVITY_BOUND: f64 = 1e3;

/// `C * (h^2 + dt)`.
pub fn default_tolerance(grid: &ComplexGrid) -> f64 {
    SLACK_C * (grid.h() * grid.h() + grid.dt())
}

/// `a f + a - a log a`; its supremum over `a > 0` is `e^f`, attained at `a = e^f`.
pub fn legendre_density(f: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::NonpositiveA(a));
    }
    Ok(a * f + a - a * a.ln())
}

#[derive(Debug, Clone, PartialEq)]
pub enum LegendreParams {
    /// Uses `e^f` directly.
    Analytic,
    /// Maximum over the listed `a` values.
    Sampled(Vec<f64>),
    /// `samples` log-spaced values over `[e^{f_min - 2}, e^{f_max + 2}]`, range taken from the field.
    AutoSampled { samples: usize },
}

impl LegendreParams {
    pub fn log_spaced(f_min: f64, f_max: f64, samples: usize) -> Self {
        let (lo, hi) = (f_min - 2.0, f_max + 2.0);
        let m = samples.max(2);
        LegendreParams::Sampled(
            (0..m)
                .map(|k| (lo + (hi - lo) * k as f64 / (m - 1) as f64).exp())
                .collect(),
        )
    }
}

fn sampled_sup(f: f64, a_values: &[f64]) -> f64 {
    a_values
        .iter()
        .map(|&a| a * f + a - a * a.ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Per-neighborhood least-squares data for the quadratic tests.
struct NodeFit {
    /// `(spatial node, time offset)`
    points: Vec<(usize, i32)>,
    /// normalized `|xi|^2 + tau^2` per point, zero at the center
    weight: Vec<f64>,
    pinv: Arc<DMatrix<f64>>,
    with_tt: bool,
}

struct FitTable {
    /// index `2p + last` for interior position `p`, `last` = no slice after
    fits: Vec<Result<NodeFit>>,
}

fn quadratic_basis(tau: f64, xi: &[f64], with_tt: bool, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    out.push(tau);
    if with_tt {
        out.push(tau * tau);
    }
    out.extend_from_slice(xi);
    for a in 0..xi.len() {
        for b in a..xi.len() {
            out.push(xi[a] * xi[b]);
        }
    }
    out.extend(xi.iter().map(|x| tau * x));
    // time-dependent Hessians; these vanish at the node
    for a in 0..xi.len() {
        for b in a..xi.len() {
            out.push(tau * xi[a] * xi[b]);
        }
    }
}

fn spatial_offsets(dim: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i32>| {
                (-2..=2).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out.retain(|s| s.iter().map(|c| c * c).sum::<i32>() <= 4);
    out
}

impl FitTable {
    fn build(grid: &ComplexGrid) -> Self {
        let dim = grid.dim();
        let offsets = spatial_offsets(dim);
        let mut cache: HashMap<(Vec<bool>, bool), Result<Arc<DMatrix<f64>>>> = HashMap::new();
        let mut fits = Vec::with_capacity(2 * grid.interior().len());
        let mut m = vec![0i32; dim];
        let mut row = Vec::new();
        for &i in grid.interior() {
            let base = grid.offset(i);
            let mut spatial = vec![];
            let mut mask = vec![];
            for s in &offsets {
                for a in 0..dim {
                    m[a] = base[a] + s[a];
                }
                let hit = grid.lookup(&m);
                mask.push(hit.is_some());
                if let Some(j) = hit {
                    spatial.push((j, s.iter().map(|c| *c as f64).collect::<Vec<_>>()));
                }
            }
            for last in [false, true] {
                let dks: &[i32] = if last { &[-1, 0] } else { &[-1, 0, 1] };
                let with_tt = !last;
                let mut points = vec![];
                let mut weight = vec![];
                let mut rows = vec![];
                for &dk in dks {
                    for (j, xi) in &spatial {
                        points.push((*j, dk));
                        weight.push(xi.iter().map(|c| c * c).sum::<f64>() + (dk * dk) as f64);
                        quadratic_basis(dk as f64, xi, with_tt, &mut row);
                        rows.push(row.clone());
                    }
                }
                let key = (mask.clone(), last);
                let pinv = cache
                    .entry(key)
                    .or_insert_with(|| {
                        let ncols = rows[0].len();
                        let a = DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]);
                        if rows.len() < ncols {
                            return Err(Error::DegenerateFit { node: i });
                        }
                        let svd = a.svd(true, true);
                        let smax = svd.singular_values.max();
                        let smin = svd.singular_values.min();
                        if !(smin > 1e-10 * smax) {
                            return Err(Error::DegenerateFit { node: i });
                        }
                        svd.pseudo_inverse(1e-12 * smax)
                            .map(Arc::new)
                            .map_err(|_| Error::DegenerateFit { node: i })
                    })
                    .clone();
                fits.push(pinv.map(|pinv| NodeFit {
                    points,
                    weight,
                    pinv,
                    with_tt,
                }));
            }
        }
        FitTable { fits }
    }
}

/// A lifted quadratic test at a node: slope in `t` and real spatial Hessian.
#[derive(Debug, Clone)]
pub struct QuadraticTest {
    pub node: usize,
    pub value: f64,
    pub slope: f64,
    /// real Hessian in `(x1, y1, ...)`, row-major `2n x 2n`
    pub hessian: Vec<f64>,
    /// curvature added to make the test touch from the required side
    pub lift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Above,
    Below,
}

/// Checks sharing a stencil plan, density values and quadratic-fit tables on one grid.
pub struct Checker {
    grid: Arc<ComplexGrid>,
    prob: FlowProblem,
    frames: StencilFrameSet,
    plan: StencilPlan,
    g: Vec<f64>,
    fits: OnceLock<FitTable>,
    semiconcavity_bound: f64,
}

impl Checker {
    pub fn new(grid: Arc<ComplexGrid>, prob: &FlowProblem) -> Result<Self> {
        Self::with_frames(grid, prob, StencilFrameSet::default_for(prob.domain.n))
    }

    pub fn with_frames(
        grid: Arc<ComplexGrid>,
        prob: &FlowProblem,
        frames: StencilFrameSet,
    ) -> Result<Self> {
        if grid.domain() != &prob.domain {
            return Err(Error::GridMismatch);
        }
        let g = prob.density_values(&grid)?;
        if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeG { node: i, value: *v });
        }
        let plan = StencilPlan::interior(&grid, &frames)?;
        Ok(Checker {
            grid,
            prob: prob.clone(),
            frames,
            plan,
            g,
            fits: OnceLock::new(),
            semiconcavity_bound: DEFAULT_SEMICONCAVITY_BOUND,
        })
    }

    pub fn set_semiconcavity_bound(&mut self, bound: f64) {
        self.semiconcavity_bound = bound;
    }

    pub fn grid(&self) -> &Arc<ComplexGrid> {
        &self.grid
    }

    pub fn problem(&self) -> &FlowProblem {
        &self.prob
    }

    fn check_grid(&self, u: &SpaceTimeField) -> Result<()> {
        u.same_grid_as(&self.grid)
    }

    /// `(k, p)` for every interior space-time node, `p` indexing `grid.interior()`.
    fn interior_nodes(&self) -> Vec<(usize, usize)> {
        (1..self.grid.slices())
            .flat_map(|k| (0..self.plan.nodes().len()).map(move |p| (k, p)))
            .collect()
    }

    /// Exponent `f = du/dt + F(t, z, u)` at every interior node.
    fn exponents(&self, u: &SpaceTimeField, mode: DerivativeMode) -> Result<Vec<f64>> {
        let du = u.time_derivative(mode)?;
        self.interior_nodes()
            .into_iter()
            .map(|(k, p)| {
                let i = self.plan.nodes()[p];
                let t = self.grid.time(k);
                Ok(du.at(k, i) + self.prob.source(t, self.grid.point(i), u.at(k, i))?)
            })
            .collect()
    }

    fn densities(&self, u: &SpaceTimeField) -> Vec<f64> {
        let conv = self.prob.convention;
        (1..self.grid.slices())
            .into_par_iter()
            .flat_map_iter(|k| self.plan.density(u.slice_values(k), conv))
            .collect()
    }

    pub fn pluripotential_subsolution(
        &self,
        u: &SpaceTimeField,
        params: &LegendreParams,
        tol: f64,
    ) -> Result<CheckReport> {
        self.check_grid(u)?;
        let h = self.grid.h();
        let screen = is_parabolic_potential_with(u, &self.frames, h * h)?;
        if !screen.passed() {
            return Err(Error::NotParabolicPotential {
                margin: screen.worst_margin,
                node: screen.worst_node,
            });
        }
        let f = self.exponents(u, DerivativeMode::Forward)?;
        let ma = self.densities(u);
        let a_values = match params {
            LegendreParams::Analytic => None,
            LegendreParams::Sampled(a) => {
                if let Some(bad) = a.iter().find(|a| !(**a > 0.0)) {
                    return Err(Error::NonpositiveA(*bad));
                }
                Some(a.clone())
            }
            LegendreParams::AutoSampled { samples } => {
                let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                match LegendreParams::log_spaced(lo, hi, *samples) {
                    LegendreParams::Sampled(a) => Some(a),
                    _ => unreachable!(),
                }
            }
        };
        let margins = self
            .interior_nodes()
            .into_iter()
            .enumerate()
            .map(|(q, (k, p))| {
                let i = self.plan.nodes()[p];
                let rhs_factor = match &a_values {
                    None => f[q].exp(),
                    Some(a) => sampled_sup(f[q], a),
                };
                NodeMargin {
                    node: self.grid.node(k, i),
                    margin: ma[q] - self.g[i] * rhs_factor,
                }
            })
            .collect();
        Ok(CheckReport::from_margins(margins, tol, false))
    }

    /// Cell-averaged form of the subsolution inequality against tensor-product hat functions.
    ///
    /// Each cell spans two consecutive slices and a `2 x ... x 2` block of interior nodes;
    /// the trapezoid rule on the cell weights every corner equally.
    pub fn pluripotential_subsolution_weak(
        &self,
        u: &SpaceTimeField,
        tol: f64,
    ) -> Result<CheckReport> {
        let nodal = {
            self.check_grid(u)?;
            let f = self.exponents(u, DerivativeMode::Forward)?;
            let ma = self.densities(u);
            let mut m = vec![f64::NAN; self.grid.node_count()];
            for (q, (k, p)) in self.interior_nodes().into_iter().enumerate() {
                let i = self.plan.nodes()[p];
                m[self.grid.node(k, i)] = ma[q] - self.g[i] * f[q].exp();
            }
            m
        };
        let dim = self.grid.dim();
        let corners: Vec<Vec<i32>> = (0..1usize << dim)
            .map(|b| (0..dim).map(|a| (b >> a & 1) as i32).collect())
            .collect();
        let mut margins = vec![];
        let mut m = vec![0i32; dim];
        for k in 1..self.grid.steps() {
            for &i in self.grid.interior() {
                let base = self.grid.offset(i);
                let mut sum = 0.0;
                let mut count = 0;
                let mut complete = true;
                'cell: for c in &corners {
                    for a in 0..dim {
                        m[a] = base[a] + c[a];
                    }
                    match self.grid.lookup(&m).filter(|j| self.grid.is_interior(*j)) {
                        Some(j) => {
                            for kk in [k, k + 1] {
                                sum += nodal[self.grid.node(kk, j)];
                                count += 1;
                            }
                        }
                        None => {
                            complete = false;
                            break 'cell;
                        }
                    }
                }
                if complete {
                    margins.push(NodeMargin {
                        node: self.grid.node(k, i),
                        margin: sum / count as f64,
                    });
                }
            }
        }
        Ok(CheckReport::from_margins(margins, tol, false))
    }

    pub fn pluripotential_supersolution(
        &self,
        v: &SpaceTimeField,
        tol: f64,
    ) -> Result<CheckReport> {
        self.check_grid(v)?;
        let sc = semiconcavity_constant(v)?;
        if sc > self.semiconcavity_bound {
            return Err(Error::NotSemiConcave {
                constant: sc,
                bound: self.semiconcavity_bound,
            });
        }
        let f = self.exponents(v, DerivativeMode::Backward)?;
        let ma = self.densities(v);
        let margins = self
            .interior_nodes()
            .into_iter()
            .enumerate()
            .map(|(q, (k, p))| {
                let i = self.plan.nodes()[p];
                NodeMargin {
                    node: self.grid.node(k, i),
                    margin: self.g[i] * f[q].exp() - ma[q],
                }
            })
            .collect();
        Ok(CheckReport::from_margins(margins, tol, false))
    }

    fn fits(&self) -> &FitTable {
        self.fits.get_or_init(|| FitTable::build(&self.grid))
    }

    fn fitted_test(
        &self,
        u: &SpaceTimeField,
        k: usize,
        p: usize,
        side: Side,
    ) -> Result<QuadraticTest> {
        let last = k + 1 == self.grid.slices();
        let fit = self.fits().fits[2 * p + last as usize]
            .as_ref()
            .map_err(|e| e.clone())?;
        let i = self.plan.nodes()[p];
        let y = DVector::from_iterator(
            fit.points.len(),
            fit.points
                .iter()
                .map(|&(j, dk)| u.at((k as i32 + dk) as usize, j)),
        );
        let c = fit.pinv.as_ref() * &y;
        let u0 = u.at(k, i);
        let dim = self.grid.dim();
        let off = if fit.with_tt { 3 } else { 2 };
        // residual of the touching quadratic (constant replaced by u0)
        let fitted_at = |q: usize| -> f64 {
            let (j, dk) = fit.points[q];
            let xi: Vec<f64> = self
                .grid
                .offset(j)
                .iter()
                .zip(self.grid.offset(i))
                .map(|(a, b)| (a - b) as f64)
                .collect();
            let mut row = Vec::new();
            quadratic_basis(dk as f64, &xi, fit.with_tt, &mut row);
            row.iter()
                .zip(c.iter())
                .skip(1)
                .map(|(b, cc)| b * cc)
                .sum::<f64>()
                + u0
        };
        let mut lift: f64 = 0.0;
        for q in 0..fit.points.len() {
            if fit.weight[q] == 0.0 {
                continue;
            }
            let (j, dk) = fit.points[q];
            let uq = u.at((k as i32 + dk) as usize, j);
            let gap = match side {
                Side::Above => uq - fitted_at(q),
                Side::Below => fitted_at(q) - uq,
            };
            lift = lift.max(gap / fit.weight[q]);
        }
        let h = self.grid.h();
        let mut hessian = vec![0.0; dim * dim];
        let mut idx = off + dim;
        for a in 0..dim {
            for b in a..dim {
                if a == b {
                    hessian[a * dim + a] = 2.0 * c[idx] / (h * h);
                } else {
                    hessian[a * dim + b] = c[idx] / (h * h);
                    hessian[b * dim + a] = c[idx] / (h * h);
                }
                idx += 1;
            }
        }
        let sign = if side == Side::Above { 1.0 } else { -1.0 };
        for a in 0..dim {
            hessian[a * dim + a] += sign * 2.0 * lift / (h * h);
        }
        Ok(QuadraticTest {
            node: self.grid.node(k, i),
            value: u0,
            slope: c[1] / self.grid.dt(),
            hessian,
            lift,
        })
    }

    /// Directional Levi values of the test's spatial part at its node.
    fn test_frame_values(&self, test: &QuadraticTest) -> Vec<Vec<f64>> {
        let dim = self.grid.dim();
        let (_, i) = self.grid.split(test.node);
        let z0 = self.grid.point(i).to_vec();
        let hess = &test.hessian;
        let q = |x: &[f64]| {
            let mut s = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    s += 0.5 * (x[a] - z0[a]) * hess[a * dim + b] * (x[b] - z0[b]);
                }
            }
            s
        };
        function_frame_values(q, &z0, &self.frames, self.grid.h())
    }

    fn viscosity(&self, u: &SpaceTimeField, tol: f64, side: Side) -> Result<CheckReport> {
        self.check_grid(u)?;
        let conv = self.prob.convention;
        let margins = self
            .interior_nodes()
            .into_par_iter()
            .map(|(k, p)| -> Result<NodeMargin> {
                let test = self.fitted_test(u, k, p, side)?;
                let vals = self.test_frame_values(&test);
                let i = self.plan.nodes()[p];
                let t = self.grid.time(k);
                let rhs = self.g[i]
                    * (test.slope + self.prob.source(t, self.grid.point(i), test.value)?).exp();
                let ma = conv.c_n * frame_min_product(vals.iter().map(|f| f.iter().copied()));
                let margin = match side {
                    Side::Above => ma - rhs,
                    Side::Below => {
                        let semipositive = vals.iter().flatten().all(|v| *v >= 0.0);
                        rhs - if semipositive { ma } else { 0.0 }
                    }
                };
                Ok(NodeMargin {
                    node: test.node,
                    margin,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CheckReport::from_margins(margins, tol, false))
    }

    pub fn viscosity_subsolution(&self, u: &SpaceTimeField, tol: f64) -> Result<CheckReport> {
        self.viscosity(u, tol, Side::Above)
    }

    pub fn viscosity_supersolution(&self, v: &SpaceTimeField, tol: f64) -> Result<CheckReport> {
        self.viscosity(v, tol, Side::Below)
    }

    /// The lifted test from above at space-time node `(k, i)`.
    pub fn test_from_above(&self, u: &SpaceTimeField, k: usize, i: usize) -> Result<QuadraticTest> {
        let p = self.interior_position(k, i)?;
        self.fitted_test(u, k, p, Side::Above)
    }

    pub fn test_from_below(&self, u: &SpaceTimeField, k: usize, i: usize) -> Result<QuadraticTest> {
        let p = self.interior_position(k, i)?;
        self.fitted_test(u, k, p, Side::Below)
    }

    fn interior_position(&self, k: usize, i: usize) -> Result<usize> {
        if k == 0 || k >= self.grid.slices() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.grid.slices(),
            });
        }
        self.plan
            .nodes()
            .binary_search(&i)
            .map_err(|_| Error::IndexOutOfRange {
                index: i,
                len: self.grid.spatial_len(),
            })
    }
}

pub fn check_pluripotential_subsolution(
    u: &SpaceTimeField,
    prob: &FlowProblem,
    params: &LegendreParams,
    tol: f64,
) -> Result<CheckReport> {
    Checker::new(u.grid_arc().clone(), prob)?.pluripotential_subsolution(u, params, tol)
}

pub fn check_viscosity_subsolution(
    u: &SpaceTimeField,
    prob: &FlowProblem,
    tol: f64,
) -> Result<CheckReport> {
    Checker::new(u.grid_arc().clone(), prob)?.viscosity_subsolution(u, tol)
}

pub fn check_viscosity_supersolution(
    v: &SpaceTimeField,
    prob: &FlowProblem,
    tol: f64,
) -> Result<CheckReport> {
    Checker::new(v.grid_arc().clone(), prob)?.viscosity_supersolution(v, tol)
}

pub fn check_pluripotential_supersolution(
    v: &SpaceTimeField,
    prob: &FlowProblem,
    tol: f64,
) -> Result<CheckReport> {
    Checker::new(v.grid_arc().clone(), prob)?.pluripotential_supersolution(v, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use crate::stencil::MAConvention;

    fn quad1() -> (Arc<ComplexGrid>, FlowProblem) {
        let grid = Arc::new(build_grid(DomainSpec::unit_ball(1), 0.1, 0.01, 0.05).unwrap());
        let prob = FlowProblem::from_sources(
            DomainSpec::unit_ball(1),
            0.05,
            "0",
            "2",
            "log(2)*t + absz2",
            MAConvention::standard(1),
        )
        .unwrap();
        (grid, prob)
    }

    fn exact(grid: &Arc<ComplexGrid>) -> SpaceTimeField {
        SpaceTimeField::from_fn(grid.clone(), |t, x| {
            2f64.ln() * t + x[0] * x[0] + x[1] * x[1]
        })
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_density(0.0, 1.0).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert!((legendre_density(1.0, e).unwrap() - e).abs() < 1e-15);
        assert_eq!(legendre_density(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(legendre_density(1.0, 0.0), Err(Error::NonpositiveA(0.0)));
        assert!(legendre_density(1.0, -2.0).is_err());
    }

    #[test]
    fn pluripotential_subsolution_examples() {
        let (g, p) = quad1();
        let tol = default_tolerance(&g);
        let r = check_pluripotential_subsolution(&exact(&g), &p, &LegendreParams::Analytic, tol)
            .unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.abs() < 1e-9, "{}", r.worst_margin);
        let slower = exact(&g).map_nodes(|t, _, v| v - 0.1 * t).unwrap();
        let r =
            check_pluripotential_subsolution(&slower, &p, &LegendreParams::Analytic, tol).unwrap();
        // margin 4 - 2 e^{log 2 - 0.1} = 4 (1 - e^{-0.1})
        assert!((r.worst_margin - 4.0 * (1.0 - (-0.1f64).exp())).abs() < 1e-9);
        let zero = SpaceTimeField::constant(g.clone(), 0.0);
        let p1 =
            FlowProblem::from_sources(p.domain.clone(), 0.05, "0", "1", "0", p.convention).unwrap();
        let r =
            check_pluripotential_subsolution(&zero, &p1, &LegendreParams::Analytic, tol).unwrap();
        assert!(!r.passed());
        assert!((r.worst_margin + 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_potential_rejected() {
        let (g, p) = quad1();
        let bad = SpaceTimeField::from_fn(g.clone(), |_, x| -(x[0] * x[0]));
        let e = check_pluripotential_subsolution(&bad, &p, &LegendreParams::Analytic, 0.01)
            .unwrap_err();
        assert!(matches!(e, Error::NotParabolicPotential { .. }));
    }

    #[test]
    fn sampled_never_exceeds_analytic_rhs() {
        let (g, p) = quad1();
        let u = exact(&g).map_nodes(|t, x, v| v - 0.3 * t * x[0]).unwrap();
        let c = Checker::new(g.clone(), &p).unwrap();
        let a = c
            .pluripotential_subsolution(&u, &LegendreParams::Analytic, 0.01)
            .unwrap();
        let s = c
            .pluripotential_subsolution(&u, &LegendreParams::AutoSampled { samples: 64 }, 0.01)
            .unwrap();
        assert!(s.worst_margin >= a.worst_margin - 1e-12);
        assert!(s.worst_margin - a.worst_margin < 5e-2);
    }

    #[test]
    fn fit_recovers_quadratic() {
        let (g, p) = quad1();
        let c = Checker::new(g.clone(), &p).unwrap();
        let u = SpaceTimeField::from_fn(g.clone(), |t, x| {
            0.7 * t + 1.5 * x[0] * x[0] + 0.5 * x[1] * x[1] - 0.2 * x[0] * x[1]
                + 0.3 * t * x[0]
                + x[1]
        });
        let i = g.lookup(&[1, -2]).unwrap();
        for k in [1, 3, g.steps()] {
            let q = c.test_from_above(&u, k, i).unwrap();
            assert!(q.lift < 1e-10);
            let x = g.point(i)[0];
            assert!((q.slope - (0.7 + 0.3 * x)).abs() < 1e-8, "{}", q.slope);
            assert!((q.hessian[0] - 3.0).abs() < 1e-8);
            assert!((q.hessian[3] - 1.0).abs() < 1e-8);
            assert!((q.hessian[1] + 0.2).abs() < 1e-8);
        }
    }

    #[test]
    fn lifted_test_dominates_locally() {
        let (g, p) = quad1();
        let c = Checker::new(g.clone(), &p).unwrap();
        let u = SpaceTimeField::from_fn(g.clone(), |t, x| {
            (3.0 * x[0]).sin() + t * t * 10.0 + x[1].abs()
        });
        let i = g.lookup(&[0, 0]).unwrap();
        let q = c.test_from_above(&u, 2, i).unwrap();
        assert!(q.lift > 0.0);
        let q = c.test_from_below(&u, 2, i).unwrap();
        assert!(q.lift > 0.0);
    }

    #[test]
    fn viscosity_examples() {
        let (g, p) = quad1();
        let tol = default_tolerance(&g);
        let c = Checker::new(g.clone(), &p).unwrap();
        let r = c.viscosity_subsolution(&exact(&g), tol).unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.abs() < 1e-6, "{}", r.worst_margin);
        let r = c.viscosity_supersolution(&exact(&g), tol).unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.abs() < 1e-6);
        let p1 =
            FlowProblem::from_sources(p.domain.clone(), 0.05, "0", "1", "0", p.convention).unwrap();
        let c1 = Checker::new(g.clone(), &p1).unwrap();
        let r = c1
            .viscosity_subsolution(&SpaceTimeField::constant(g.clone(), 0.3), tol)
            .unwrap();
        assert!(!r.passed());
        let r = c1
            .viscosity_supersolution(&SpaceTimeField::constant(g.clone(), 50.0), tol)
            .unwrap();
        assert!(r.passed());
        let cap = SpaceTimeField::from_fn(g.clone(), |_, x| 3.0 - x[0] * x[0] - x[1] * x[1]);
        let r = c1.viscosity_supersolution(&cap, tol).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn pluripotential_supersolution_examples() {
        let (g, p) = quad1();
        let tol = default_tolerance(&g);
        let c = Checker::new(g.clone(), &p).unwrap();
        let r = c.pluripotential_supersolution(&exact(&g), tol).unwrap();
        assert!(r.passed() && r.worst_margin.abs() < 1e-9);
        let steeper = exact(&g).map_nodes(|t, _, v| v + 0.1 * t).unwrap();
        let r = c.pluripotential_supersolution(&steeper, tol).unwrap();
        assert!(r.worst_margin > 0.0);
        let flatter = exact(&g).map_nodes(|t, _, v| v - 0.1 * t).unwrap();
        let r = c.pluripotential_supersolution(&flatter, tol).unwrap();
        assert!(!r.passed());
        let kinky = exact(&g).map_nodes(|t, _, v| v + 1e4 * t * t).unwrap();
        assert!(matches!(
            c.pluripotential_supersolution(&kinky, tol),
            Err(Error::NotSemiConcave { .. })
        ));
    }

    #[test]
    fn weak_mode_agrees_on_exact() {
        let (g, p) = quad1();
        let c = Checker::new(g.clone(), &p).unwrap();
        let r = c.pluripotential_subsolution_weak(&exact(&g), 1e-8).unwrap();
        assert!(r.passed());
        let fast = exact(&g).map_nodes(|t, _, v| v + 0.2 * t).unwrap();
        assert!(!c
            .pluripotential_subsolution_weak(&fast, 1e-3)
            .unwrap()
            .passed());
    }
}
