//! Numerical lab for degenerate parabolic complex Monge-Ampere flows
//! `(dd^c phi_t)^n = exp(dphi/dt + F(t, z, phi)) g dV` on balls and polydiscs of `C^n`.
//!
//! The crate discretizes fields on a space-time lattice and checks the four weak
//! solution concepts of the flow against each other, builds envelopes of subsolutions,
//! and solves the Cauchy-Dirichlet problem by backward Euler.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cases;
pub mod checkers;
pub mod envelope;
pub mod error;
pub mod expr;
pub mod field;
pub mod grid;
pub mod harness;
pub mod io;
pub mod problem;
pub mod regularize;
pub mod solver;
pub mod stencil;

pub use checkers::{default_tolerance, Checker, LegendreParams, SLACK_C};
pub use error::{Error, Result};
pub use field::{
    CheckReport, DerivativeMode, NodeMargin, Region, SliceField, SpaceTimeField, Verdict,
};
pub use grid::{build_grid, ComplexGrid, DomainKind, DomainSpec, NodeClass};
pub use problem::{FlowProblem, SourceTerm};
pub use solver::{solve_flow, InnerSolver, SolverParams};
pub use stencil::{MAConvention, StencilFrameSet, StencilPlan};
