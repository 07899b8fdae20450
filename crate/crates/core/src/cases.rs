//! Registry of problems with closed-form solutions (or envelope values) used as oracles.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{parse_slot, Env, Expr, Slot};
use crate::field::SpaceTimeField;
use crate::grid::{build_grid, ComplexGrid, DomainSpec};
use crate::problem::FlowProblem;
use crate::stencil::MAConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    /// `exact` solves the flow with the problem's data
    Flow,
    /// data for checker runs only (degenerate density); no exact solution
    CheckerOnly,
    /// `exact` is the psh envelope of the obstacle stored as the boundary expression
    Envelope,
}

#[derive(Debug, Clone)]
pub struct ExactCase {
    pub name: &'static str,
    pub kind: CaseKind,
    pub problem: FlowProblem,
    pub exact: Option<Expr>,
    pub h: f64,
    pub dt: f64,
}

pub const CASE_NAMES: [&str; 6] = [
    "quad1",
    "quad2",
    "tquad",
    "smooth1",
    "degen-check",
    "radial-env",
];

fn case(
    name: &'static str,
    kind: CaseKind,
    domain: DomainSpec,
    t_final: f64,
    data: [&str; 3],
    exact: Option<&str>,
    (h, dt): (f64, f64),
) -> Result<ExactCase> {
    let n = domain.n;
    let problem = FlowProblem::from_sources(
        domain,
        t_final,
        data[0],
        data[1],
        data[2],
        MAConvention::standard(n),
    )?;
    Ok(ExactCase {
        name,
        kind,
        problem,
        exact: exact.map(|e| parse_slot(e, Slot::Boundary)).transpose()?,
        h,
        dt,
    })
}

/// `phi* = a t + |z1|^2 + 2|z2|^2` on the unit ball of `C^2`; `c_2 det = 32 * 2 = e^a g`.
pub fn quad2_case(a: f64) -> Result<ExactCase> {
    let g = 64.0 * (-a).exp();
    case(
        "quad2",
        CaseKind::Flow,
        DomainSpec::unit_ball(2),
        0.1,
        [
            "0",
            &format!("{g:.17e}"),
            &format!("{a:.17e}*t + absz1sq + 2*absz2sq"),
        ],
        Some(&format!("{a:.17e}*t + absz1sq + 2*absz2sq")),
        (0.25, 0.01),
    )
}

/// Looks up a case by name.
pub fn exact_case(name: &str) -> Result<ExactCase> {
    match name {
        "quad1" => case(
            "quad1",
            CaseKind::Flow,
            DomainSpec::unit_ball(1),
            0.25,
            ["0", "2", "log(2)*t + absz2"],
            Some("log(2)*t + absz2"),
            (0.1, 0.005),
        ),
        "quad2" => quad2_case(std::f64::consts::LN_2),
        // a = 0.5, b = 1, c = 0.5
        "tquad" => case(
            "tquad",
            CaseKind::Flow,
            DomainSpec::unit_ball(1),
            0.25,
            [
                "log(1 + 0.5*t) - 0.5",
                "4*exp(-0.5*absz2)",
                "0.5*t + (1 + 0.5*t)*absz2",
            ],
            Some("0.5*t + (1 + 0.5*t)*absz2"),
            (0.1, 0.005),
        ),
        // not a quadratic, so the stencil is not exact: used for observed orders
        "smooth1" => case(
            "smooth1",
            CaseKind::Flow,
            DomainSpec::unit_ball(1),
            0.1,
            ["log(1 + t) + x1 - exp(x1)", "1", "(1 + t)*exp(x1)"],
            Some("(1 + t)*exp(x1)"),
            (0.2, 0.02),
        ),
        "degen-check" => case(
            "degen-check",
            CaseKind::CheckerOnly,
            DomainSpec::unit_ball(1),
            0.25,
            ["0", "4*max(x1, 0)", "absz2"],
            None,
            (0.1, 0.005),
        ),
        "radial-env" => case(
            "radial-env",
            CaseKind::Envelope,
            DomainSpec::unit_ball(1),
            0.1,
            ["0", "1", "-absz2"],
            Some("-1"),
            (0.1, 0.05),
        ),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

impl ExactCase {
    pub fn default_grid(&self) -> Result<Arc<ComplexGrid>> {
        self.grid(self.h, self.dt)
    }

    pub fn grid(&self, h: f64, dt: f64) -> Result<Arc<ComplexGrid>> {
        Ok(Arc::new(build_grid(
            self.problem.domain.clone(),
            h,
            dt,
            self.problem.t_final,
        )?))
    }

    /// The exact expression sampled at every node.
    pub fn exact_field(&self, grid: &Arc<ComplexGrid>) -> Result<SpaceTimeField> {
        let e = self.exact.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("case {} has no exact field", self.name))
        })?;
        let s = grid.spatial_len();
        let vals = (0..grid.node_count())
            .map(|idx| e.eval(&Env::space_time(grid.time(idx / s), grid.point(idx % s))))
            .collect::<Result<Vec<_>>>()?;
        SpaceTimeField::new(grid.clone(), vals)
    }
}
