//! Data `(F, g, h, T, Omega)` of the flow `(dd^c phi_t)^n = exp(dphi/dt + F(t,z,phi)) g dV`.

use crate::error::{Error, Result};
use crate::expr::{parse_slot, validate_monotone_r, Env, Expr, SampleBox, Slot};
use crate::field::SpaceTimeField;
use crate::grid::{ComplexGrid, DomainSpec};
use crate::stencil::{MAConvention, StencilFrameSet, StencilPlan};
use std::sync::Arc;

/// Source term `F(t, z, r)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    Expr(Expr),
    /// `inf { F(t + s, z, r) : |s| <= radius }`, sampled on `samples` points in `s`.
    TimeInf {
        base: Box<SourceTerm>,
        radius: f64,
        samples: usize,
    },
}

impl SourceTerm {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(SourceTerm::Expr(parse_slot(src, Slot::Source)?))
    }

    pub fn eval(&self, t: f64, x: &[f64], r: f64) -> Result<f64> {
        match self {
            SourceTerm::Expr(e) => e.eval(&Env::new(t, x, r)),
            SourceTerm::TimeInf {
                base,
                radius,
                samples,
            } => {
                let m = (*samples).max(2);
                let mut best = f64::INFINITY;
                for j in 0..m {
                    let s = -radius + 2.0 * radius * j as f64 / (m - 1) as f64;
                    best = best.min(base.eval(t + s, x, r)?);
                }
                Ok(best)
            }
        }
    }

    /// `F + c`.
    pub fn offset(&self, c: f64) -> SourceTerm {
        match self {
            SourceTerm::Expr(e) => SourceTerm::Expr(e.clone().add(Expr::num(c))),
            SourceTerm::TimeInf {
                base,
                radius,
                samples,
            } => SourceTerm::TimeInf {
                base: Box::new(base.offset(c)),
                radius: *radius,
                samples: *samples,
            },
        }
    }

    /// The time-shifted infimum used for sup-convolved subsolutions.
    pub fn time_inf(&self, radius: f64) -> SourceTerm {
        SourceTerm::TimeInf {
            base: Box::new(self.clone()),
            radius,
            samples: 33,
        }
    }
}

/// Data of a Cauchy-Dirichlet problem.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub domain: DomainSpec,
    pub t_final: f64,
    pub source: SourceTerm,
    pub density: Expr,
    pub boundary: Expr,
    pub convention: MAConvention,
}

impl FlowProblem {
    /// Parses the three expressions into their slots.
    pub fn from_sources(
        domain: DomainSpec,
        t_final: f64,
        source: &str,
        density: &str,
        boundary: &str,
        convention: MAConvention,
    ) -> Result<Self> {
        domain.validate()?;
        Ok(FlowProblem {
            domain,
            t_final,
            source: SourceTerm::parse(source)?,
            density: parse_slot(density, Slot::Density)?,
            boundary: parse_slot(boundary, Slot::Boundary)?,
            convention,
        })
    }

    pub fn source(&self, t: f64, x: &[f64], r: f64) -> Result<f64> {
        self.source.eval(t, x, r)
    }
    pub fn g(&self, x: &[f64]) -> Result<f64> {
        self.density.eval(&Env::space(x))
    }
    pub fn h(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.boundary.eval(&Env::space_time(t, x))
    }

    pub fn with_source(&self, source: SourceTerm) -> Self {
        FlowProblem {
            source,
            ..self.clone()
        }
    }

    pub fn with_boundary(&self, boundary: Expr) -> Self {
        FlowProblem {
            boundary,
            ..self.clone()
        }
    }

    /// `h` sampled at every node.
    pub fn boundary_field(&self, grid: &Arc<ComplexGrid>) -> Result<SpaceTimeField> {
        let s = grid.spatial_len();
        let vals = (0..grid.node_count())
            .map(|idx| self.h(grid.time(idx / s), grid.point(idx % s)))
            .collect::<Result<Vec<_>>>()?;
        SpaceTimeField::new(grid.clone(), vals)
    }

    /// `g` at each spatial node.
    pub fn density_values(&self, grid: &ComplexGrid) -> Result<Vec<f64>> {
        (0..grid.spatial_len())
            .map(|i| self.g(grid.point(i)))
            .collect()
    }

    /// Checks `g >= 0` on all nodes and `F` nondecreasing in `r` on a sample box.
    pub fn validate_for_checks(&self, grid: &ComplexGrid, r_bound: f64) -> Result<()> {
        if grid.domain() != &self.domain {
            return Err(Error::GridMismatch);
        }
        for (i, g) in self.density_values(grid)?.into_iter().enumerate() {
            if g < 0.0 || !g.is_finite() {
                return Err(Error::NegativeG { node: i, value: g });
            }
        }
        let report = validate_monotone_r_on(&self.source, grid, r_bound)?;
        if !report.passed() {
            return Err(Error::NotMonotoneInR {
                drop: -report.worst_margin,
            });
        }
        Ok(())
    }

    /// Solver preconditions: the checks above, `g > 0` at interior nodes and `h_0` psh.
    pub fn validate_for_solve(&self, grid: &Arc<ComplexGrid>) -> Result<()> {
        let hb = self.boundary_field(grid)?;
        let r_bound = hb.sup_abs() + 1.0;
        self.validate_for_checks(grid, r_bound)?;
        for &i in grid.interior() {
            let g = self.g(grid.point(i))?;
            if !(g > 0.0) {
                return Err(Error::DegenerateG { node: i, value: g });
            }
        }
        let plan = StencilPlan::interior(grid, &StencilFrameSet::default_for(grid.n()))?;
        let tol = grid.h() * grid.h();
        let levi = plan.lambda_min(hb.slice_values(0));
        if let Some((p, m)) = levi.iter().enumerate().find(|(_, m)| !(**m >= -tol)) {
            return Err(Error::NotParabolicPotential {
                margin: *m,
                node: plan.nodes()[p],
            });
        }
        Ok(())
    }
}

/// Samples `F` on a 17-point `r` ladder in `[-r_bound, r_bound]` over a spread of grid nodes.
pub fn validate_monotone_r_on(
    source: &SourceTerm,
    grid: &ComplexGrid,
    r_bound: f64,
) -> Result<crate::field::CheckReport> {
    let stride = (grid.spatial_len() / 16).max(1);
    let points: Vec<Vec<f64>> = (0..grid.spatial_len())
        .step_by(stride)
        .map(|i| grid.point(i).to_vec())
        .collect();
    let tstride = (grid.slices() / 8).max(1);
    let times: Vec<f64> = (0..grid.slices())
        .step_by(tstride)
        .map(|k| grid.time(k))
        .collect();
    match source {
        SourceTerm::Expr(e) => validate_monotone_r(
            e,
            &SampleBox {
                times,
                points,
                r_min: -r_bound,
                r_max: r_bound,
            },
        ),
        other => {
            // generic path through `eval`
            let ladder = crate::expr::MONOTONE_LADDER;
            let mut margins = vec![];
            let mut node = 0;
            for &t in &times {
                for x in &points {
                    let vals = (0..ladder)
                        .map(|k| {
                            let r = -r_bound + 2.0 * r_bound * k as f64 / (ladder - 1) as f64;
                            other.eval(t, x, r)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let worst = vals
                        .windows(2)
                        .map(|w| w[1] - w[0])
                        .fold(f64::INFINITY, f64::min);
                    margins.push(crate::field::NodeMargin {
                        node,
                        margin: worst,
                    });
                    node += 1;
                }
            }
            Ok(crate::field::CheckReport::from_margins(
                margins, 1e-12, false,
            ))
        }
    }
}
