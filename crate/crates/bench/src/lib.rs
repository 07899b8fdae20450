//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use maflow_core::cases::exact_case;
use maflow_core::{build_grid, ComplexGrid, DomainSpec, FlowProblem, SliceField};

/// Unit ball in `C^n` at spacing `h`, one time step.
pub fn ball_grid(n: usize, h: f64) -> Arc<ComplexGrid> {
    Arc::new(build_grid(DomainSpec::unit_ball(n), h, 0.01, 0.01).expect("valid grid"))
}

/// `|z|^2 + 0.3 sin(3 x1)` on the first slice: convex with some texture.
pub fn textured_slice(grid: &Arc<ComplexGrid>) -> SliceField {
    SliceField::from_fn(grid.clone(), 0, |x| {
        x.iter().map(|c| c * c).sum::<f64>() + 0.3 * (3.0 * x[0]).sin()
    })
}

/// `-|z|^2`, whose envelope is `-1`.
pub fn radial_obstacle(grid: &Arc<ComplexGrid>) -> SliceField {
    SliceField::from_fn(grid.clone(), 0, |x| -x.iter().map(|c| c * c).sum::<f64>())
}

/// The `quad1` problem with its initial slice on a grid of spacing `h`.
pub fn quad1_start(h: f64, dt: f64) -> (FlowProblem, SliceField) {
    let case = exact_case("quad1").expect("registry case");
    let grid = case.grid(h, dt).expect("valid grid");
    let exact = case.exact_field(&grid).expect("exact field");
    (case.problem, exact.slice(0).expect("first slice"))
}
