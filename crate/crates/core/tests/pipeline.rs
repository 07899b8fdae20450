use approx::assert_abs_diff_eq;
use maflow_core::checkers::{Checker, LegendreParams};
use maflow_core::expr::Expr;
use maflow_core::field::{linf_distance, Region};
use maflow_core::harness::{convergence_study, exact_case, stability_experiment};
use maflow_core::io::{load_field, save_field, ProblemConfig};
use maflow_core::regularize::{inf_convolution_time, sup_convolution_time};
use maflow_core::{default_tolerance, solve_flow, InnerSolver, SolverParams};

const QUAD1: &str = r#"{
    "domain": {"kind": "ball", "n": 1, "radius": 1.0},
    "T": 0.25, "h": 0.1, "dt": 0.005,
    "F": "0", "g": "2", "hdata": "log(2)*t + absz2"
}"#;

#[test]
fn config_to_solution_file_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("quad1.json");
    std::fs::write(&cfg_path, QUAD1).unwrap();
    let cfg = ProblemConfig::load(&cfg_path).unwrap();
    let grid = cfg.grid().unwrap();
    let sol = solve_flow(
        &cfg.problem().unwrap(),
        &grid,
        &cfg.solver_params().unwrap(),
    )
    .unwrap();
    let out = dir.path().join("u.field");
    save_field(&out, &sol.field).unwrap();
    let back = load_field(&out).unwrap();
    assert_eq!(back.values(), sol.field.values());
    // log(2) t + |z|^2 at the origin, final time
    let origin = (0..grid.spatial_len())
        .find(|&i| grid.point(i).iter().all(|c| *c == 0.0))
        .unwrap();
    assert_abs_diff_eq!(
        back.at(grid.steps(), origin),
        0.25 * 2f64.ln(),
        epsilon = 1e-8
    );
}

#[test]
fn solution_passes_all_four_checks() {
    let case = exact_case("tquad").unwrap();
    let grid = case.default_grid().unwrap();
    let sol = solve_flow(&case.problem, &grid, &SolverParams::default_for(1)).unwrap();
    let tol = default_tolerance(&grid);
    let checker = Checker::new(grid.clone(), &case.problem).unwrap();
    assert!(checker
        .pluripotential_subsolution(&sol.field, &LegendreParams::Analytic, tol)
        .unwrap()
        .passed());
    assert!(checker
        .pluripotential_supersolution(&sol.field, tol)
        .unwrap()
        .passed());
    assert!(checker
        .viscosity_subsolution(&sol.field, tol)
        .unwrap()
        .passed());
    assert!(checker
        .viscosity_supersolution(&sol.field, tol)
        .unwrap()
        .passed());
    // lowering by much more than tol breaks the boundary data, not the interior inequality
    let low = sol.field.add_scalar(-0.5).unwrap();
    assert!(checker.viscosity_subsolution(&low, tol).unwrap().passed());
}

#[test]
fn convolutions_bracket_the_field() {
    let case = exact_case("smooth1").unwrap();
    let grid = case.default_grid().unwrap();
    let u = case.exact_field(&grid).unwrap();
    let sup = sup_convolution_time(&u, 0.05).unwrap();
    let inf = inf_convolution_time(&u, 0.05).unwrap();
    for ((a, b), c) in inf
        .field
        .values()
        .iter()
        .zip(u.values())
        .zip(sup.field.values())
    {
        assert!(a <= b && b <= c);
    }
    assert!(linf_distance(&sup.field, &inf.field, Region::All).unwrap() < 0.05);
}

#[test]
fn smooth_case_converges() {
    // dt / h^2 = 0.5 is beyond the damped fixed point's reach on this case
    let params = SolverParams {
        inner: InnerSolver::Nodal,
        ..SolverParams::default_for(1)
    };
    let table = convergence_study(&exact_case("smooth1").unwrap(), 3, &params).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!(table.rows.windows(2).all(|w| w[1].error < w[0].error));
    let order = table.fitted_order.unwrap();
    assert!(order >= 1.5, "{order}");
    assert!(table
        .to_csv()
        .starts_with("h,dt,sup_error,observed_order\n"));
}

#[test]
fn boundary_perturbations_are_stable() {
    let case = exact_case("quad1").unwrap();
    let grid = case.grid(0.2, 0.01).unwrap();
    let tol = default_tolerance(&grid);
    let js = [1.0, 2.0, 4.0, 8.0];
    let perturbations: Vec<_> = js
        .iter()
        .map(|j| {
            let h = case.problem.boundary.clone().add(Expr::num(1.0 / j));
            (format!("h+1/{j}"), case.problem.with_boundary(h))
        })
        .collect();
    let rows = stability_experiment(
        &case.problem,
        &perturbations,
        &grid,
        &SolverParams::default_for(1),
    )
    .unwrap();
    for (r, j) in rows.iter().zip(js) {
        assert_abs_diff_eq!(r.alpha, 1.0 / j, epsilon = 1e-12);
        assert!(r.error <= 1.0 / j + tol, "{}: {}", r.label, r.error);
    }
    assert!(rows.windows(2).all(|w| w[1].error < w[0].error));
}
