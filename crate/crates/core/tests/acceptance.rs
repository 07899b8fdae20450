//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use maflow_core::checkers::{legendre_density, Checker, LegendreParams};
use maflow_core::envelope::{psh_envelope, EnvelopeOptions};
use maflow_core::field::{linf_distance, Region, SliceField, SpaceTimeField};
use maflow_core::grid::{build_grid, DomainSpec};
use maflow_core::harness::{
    agreement_corpus, agreement_suite, comparison_corpus, comparison_gap, exact_case,
    mollifier_correction, mollifier_test_case, perron_family, quad2_case, stability_experiment,
};
use maflow_core::regularize::{min_time_second_difference, sup_convolution_time, Kernel};
use maflow_core::solver::{solve_flow, FlowSolver, SolverParams};
use maflow_core::{default_tolerance, Result, StencilFrameSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_611;

/// Criterion 1: sup error of the quad1 solve.
const EXACT_SOLVE_ERROR: f64 = 1e-6;
const EXACT_SOLVE_TIME: Duration = Duration::from_secs(10);
const AGREEMENT_TIME: Duration = Duration::from_secs(120);
/// Criterion 5: distance from -1 in units of `h`.
const ENVELOPE_H_MULTIPLE: f64 = 2.0;
const RANDOM_OBSTACLES: usize = 20;
/// Criterion 7: analytic/sampled agreement in units of `tol`, and the direct identity.
const LEGENDRE_BAND: f64 = 5.0;
const LEGENDRE_IDENTITY: f64 = 1e-10;
/// Criterion 8: rounding allowance for the mollified checks.
const MOLLIFY_TOL: f64 = 1e-9;
const QUAD2_H: f64 = 0.2;
const QUAD2_ERROR: f64 = 1e-5;
const QUAD2_TIME: Duration = Duration::from_secs(300);

type Outcome = Result<(bool, String)>;

fn quad1_solve() -> Result<(Arc<maflow_core::ComplexGrid>, SpaceTimeField, f64)> {
    let case = exact_case("quad1")?;
    let grid = case.default_grid()?;
    let sol = solve_flow(&case.problem, &grid, &SolverParams::default_for(1))?;
    let err = linf_distance(&sol.field, &case.exact_field(&grid)?, Region::All)?;
    Ok((grid, sol.field, err))
}

fn exact_case_solve() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    let start = Instant::now();
    let (_, _, err) = pool.install(quad1_solve)?;
    let elapsed = start.elapsed();
    Ok((
        err <= EXACT_SOLVE_ERROR && elapsed <= EXACT_SOLVE_TIME,
        format!(
            "sup error {err:.3e} (<= {EXACT_SOLVE_ERROR:e}), {:.2} s single-threaded",
            elapsed.as_secs_f64()
        ),
    ))
}

fn agreement() -> Outcome {
    let start = Instant::now();
    let corpus = agreement_corpus(SEED)?;
    let tol = default_tolerance(corpus[0].field.grid());
    let table = agreement_suite(&corpus, tol)?;
    let elapsed = start.elapsed();
    let banded = table.rows.iter().filter(|r| r.banded).count();
    for r in table.rows.iter().filter(|r| r.banded) {
        println!(
            "    in band {}: {:.4e} / {:.4e}",
            r.name, r.pluripotential, r.viscosity
        );
    }
    for r in table.rows.iter().filter(|r| r.counts_as_disagreement()) {
        println!(
            "    disagreement {}: {:.4e} vs {:.4e}",
            r.name, r.pluripotential, r.viscosity
        );
    }
    let m = table.matrix;
    Ok((
        table.disagreements == 0 && elapsed <= AGREEMENT_TIME,
        format!(
            "{} fields, pass/pass {} fail/fail {} pass/fail {} fail/pass {}, {} in band, {} counted disagreements, {:.1} s",
            corpus.len(),
            m[1][1],
            m[0][0],
            m[1][0],
            m[0][1],
            banded,
            table.disagreements,
            elapsed.as_secs_f64()
        ),
    ))
}

fn comparison() -> Outcome {
    let pairs = comparison_corpus(&SolverParams::default_for(1), SEED)?;
    let tol = default_tolerance(pairs[0].u.grid());
    let mut ok = true;
    let mut verified = 0;
    let mut worst = f64::INFINITY;
    for p in &pairs {
        let gap = comparison_gap(&p.u, &p.v, &p.prob_f, &p.prob_g, tol)?;
        verified += gap.verified as usize;
        worst = worst.min(gap.slack);
        if gap.slack < -tol || !gap.verified {
            ok = false;
            println!(
                "    {}: lhs {:.4e} rhs {:.4e} slack {:.4e} verified {}",
                p.name, gap.lhs, gap.rhs, gap.slack, gap.verified
            );
        }
    }
    Ok((
        ok,
        format!(
            "{} pairings, {verified} with verified hypotheses, min slack {worst:.3e} (>= -{tol:.3e})",
            pairs.len()
        ),
    ))
}

fn stability() -> Outcome {
    let case = exact_case("quad1")?;
    let grid = case.default_grid()?;
    let tol = default_tolerance(&grid);
    let perturbations: Vec<_> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|j| {
            let p = case
                .problem
                .with_source(case.problem.source.offset(1.0 / j));
            (format!("j={j}"), p)
        })
        .collect();
    let rows = stability_experiment(
        &case.problem,
        &perturbations,
        &grid,
        &SolverParams::default_for(1),
    )?;
    let t = grid.t_final();
    let mut ok = true;
    for (r, j) in rows.iter().zip([1.0, 2.0, 4.0, 8.0]) {
        ok &= r.error <= t / j + tol;
    }
    ok &= rows.windows(2).all(|w| w[1].error < w[0].error);
    let errs: Vec<String> = rows.iter().map(|r| format!("{:.4e}", r.error)).collect();
    Ok((
        ok,
        format!(
            "e_j = [{}] against T/j + tol, tol {tol:.3e}",
            errs.join(", ")
        ),
    ))
}

fn envelope_oracle() -> Outcome {
    let case = exact_case("radial-env")?;
    let grid = case.default_grid()?;
    let h = grid.h();
    let frames = StencilFrameSet::default_for(1);
    let obstacle = SliceField::from_fn(grid.clone(), 0, |x| -(x[0] * x[0] + x[1] * x[1]));
    // the obstacle is a function on the closed disc; collar arms are cut at the circle
    let opts = EnvelopeOptions {
        frames,
        tol: 1e-12,
        max_iter: 2_000_000,
        ..EnvelopeOptions::new(1)
    };
    let obstacle_fn = |x: &[f64]| -(x[0] * x[0] + x[1] * x[1]);
    let env = maflow_core::envelope::psh_envelope_with(&obstacle, &opts, Some(&obstacle_fn))?;
    let dev_of = |s: &SliceField| {
        grid.interior()
            .iter()
            .map(|&i| (s.values()[i] + 1.0).abs())
            .fold(0.0, f64::max)
    };
    let dev = dev_of(&env.slice);
    let pinned = dev_of(&psh_envelope(&obstacle, &opts.frames, 1e-12, 2_000_000)?.slice);
    let mut ok = env.converged && dev <= ENVELOPE_H_MULTIPLE * h;
    let small = Arc::new(build_grid(DomainSpec::unit_ball(1), 0.125, 0.1, 0.1)?);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let opts = EnvelopeOptions {
        tol: 1e-12,
        ..EnvelopeOptions::new(1)
    };
    let env_of = |v: &SliceField| -> Result<SliceField> {
        Ok(maflow_core::envelope::psh_envelope_with(v, &opts, None)?.slice)
    };
    let (mut idem, mut mono): (f64, f64) = (0.0, 0.0);
    for _ in 0..RANDOM_OBSTACLES {
        let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lift = rng.gen_range(0.0..0.5);
        let v = SliceField::from_fn(small.clone(), 0, |x| {
            c[0] * x[0] + c[1] * x[1] * x[1] - c[2].abs() * x[0] * x[0]
                + c[3] * (3.0 * x[0] * x[1]).sin()
                + c[4]
        });
        let p = env_of(&v)?;
        let pp = env_of(&p)?;
        for (a, b) in p.values().iter().zip(pp.values()) {
            idem = idem.max((a - b).abs());
        }
        let w = SliceField::new(
            small.clone(),
            0,
            v.values()
                .iter()
                .enumerate()
                .map(|(i, x)| x + lift * (1.0 + (i as f64).sin()))
                .collect(),
        )?;
        let pw = env_of(&w)?;
        for (a, b) in p.values().iter().zip(pw.values()) {
            mono = mono.max(a - b);
        }
    }
    ok &= idem <= 1e-9 && mono <= 1e-9;
    Ok((
        ok,
        format!(
            "max |P(v) + 1| = {dev:.4e} (<= {ENVELOPE_H_MULTIPLE}h = {:.2}; {pinned:.4e} with the collar pinned to v), idempotence defect {idem:.1e}, monotonicity defect {mono:.1e} over {RANDOM_OBSTACLES} obstacles",
            ENVELOPE_H_MULTIPLE * h
        ),
    ))
}

fn perron_domination() -> Outcome {
    let (grid, sol, _) = quad1_solve()?;
    let tol = default_tolerance(&grid);
    let case = exact_case("quad1")?;
    let checker = Checker::new(grid.clone(), &case.problem)?;
    let family = perron_family(SEED)?;
    let mut ok = true;
    let mut worst_excess = f64::NEG_INFINITY;
    for f in &family {
        let sub = checker.pluripotential_subsolution(&f.field, &LegendreParams::Analytic, tol)?;
        let excess = f
            .field
            .values()
            .iter()
            .zip(sol.values())
            .fold(f64::NEG_INFINITY, |m, (u, s)| m.max(u - s));
        worst_excess = worst_excess.max(excess);
        if !sub.passed() || excess > tol {
            ok = false;
            println!(
                "    {}: subsolution {} excess {excess:.3e}",
                f.name,
                sub.passed()
            );
        }
    }
    let checks = [
        checker.pluripotential_subsolution(&sol, &LegendreParams::Analytic, tol)?,
        checker.pluripotential_supersolution(&sol, tol)?,
        checker.viscosity_subsolution(&sol, tol)?,
        checker.viscosity_supersolution(&sol, tol)?,
    ];
    ok &= checks.iter().all(|c| c.passed());
    let margins: Vec<String> = checks
        .iter()
        .map(|c| format!("{:.2e}", c.worst_margin))
        .collect();
    Ok((
        ok,
        format!(
            "{} subsolutions, max (u - solution) = {worst_excess:.3e} (<= {tol:.3e}); solution margins psub/psuper/vsub/vsuper [{}]",
            family.len(),
            margins.join(", ")
        ),
    ))
}

fn legendre() -> Outcome {
    let mut identity: f64 = 0.0;
    for j in 0..100 {
        let f = -5.0 + 10.0 * j as f64 / 99.0;
        let a = f.exp();
        identity = identity.max((legendre_density(f, a)? - a).abs());
        // the maximizer is not beaten by nearby a
        for s in [0.9, 0.99, 1.01, 1.1] {
            identity = identity.max((legendre_density(f, a * s)? - a).max(0.0));
        }
    }
    let corpus = agreement_corpus(SEED)?;
    let tol = default_tolerance(corpus[0].field.grid());
    let mut worst: f64 = 0.0;
    for c in &corpus {
        let checker = Checker::new(c.field.grid_arc().clone(), &c.problem)?;
        let a = checker.pluripotential_subsolution(&c.field, &LegendreParams::Analytic, tol)?;
        let s = checker.pluripotential_subsolution(
            &c.field,
            &LegendreParams::AutoSampled { samples: 64 },
            tol,
        )?;
        worst = worst.max((a.worst_margin - s.worst_margin).abs());
    }
    Ok((
        identity <= LEGENDRE_IDENTITY && worst <= LEGENDRE_BAND * tol,
        format!(
            "identity defect {identity:.2e} at 100 f-values, analytic vs 64-sample worst-margin gap {worst:.3e} (<= {:.3e}) over {} fields",
            LEGENDRE_BAND * tol,
            corpus.len()
        ),
    ))
}

fn regularizers() -> Outcome {
    let corpus = agreement_corpus(SEED)?;
    let mut ok = true;
    let mut notes = vec![];
    for eps in [0.2, 0.1, 0.05] {
        for c in corpus.iter().take(12) {
            let sc = sup_convolution_time(&c.field, eps)?;
            let above = sc
                .field
                .values()
                .iter()
                .zip(c.field.values())
                .all(|(a, b)| a >= b);
            let semi = min_time_second_difference(&sc.field)? >= -1.0 / (eps * eps) - 1e-9;
            ok &= above && semi;
        }
    }
    let (u, prob) = mollifier_test_case(0.3, 2.0)?;
    let checker = Checker::new(u.grid_arc().clone(), &prob)?;
    // u is tight on every slice, so only rounding is forgiven
    ok &= checker
        .pluripotential_subsolution(&u, &LegendreParams::Analytic, MOLLIFY_TOL)?
        .passed();
    let mut cs = vec![];
    for eps in [0.2, 0.1, 0.05] {
        let c = mollifier_correction(&u, &prob, eps, Kernel::Bump, MOLLIFY_TOL)?;
        let m = maflow_core::regularize::time_mollify(&u, eps, Kernel::Bump)?.field;
        let w = m.map_nodes(|t, _, v| v - c * (t + 1.0))?;
        ok &= checker
            .pluripotential_subsolution(&w, &LegendreParams::Analytic, MOLLIFY_TOL)?
            .passed();
        cs.push(c);
        notes.push(format!("c({eps}) = {c:.4e}"));
    }
    ok &= cs.windows(2).all(|w| w[1] < w[0]);
    Ok((
        ok,
        format!(
            "sup-convolutions above input and semi-convex on 36 runs; {}",
            notes.join(", ")
        ),
    ))
}

fn quad2_smoke() -> Outcome {
    let case = quad2_case(std::f64::consts::LN_2)?;
    let prob = case.problem.clone();
    // 9 lattice values per real axis inside the unit ball: -0.8, ..., 0.8
    let grid = case.grid(QUAD2_H, case.dt)?;
    let axis: std::collections::BTreeSet<i64> = (0..grid.spatial_len())
        .map(|i| (grid.point(i)[0] / grid.h()).round() as i64)
        .collect();
    let start = Instant::now();
    let sol = FlowSolver::new(grid.clone(), &prob, &SolverParams::default_for(2))?.solve()?;
    let elapsed = start.elapsed();
    let exact = SpaceTimeField::from_fn(grid.clone(), |t, x| {
        std::f64::consts::LN_2 * t + x[0] * x[0] + x[1] * x[1] + 2.0 * (x[2] * x[2] + x[3] * x[3])
    });
    let err = linf_distance(&sol.field, &exact, Region::All)?;
    Ok((
        err <= QUAD2_ERROR && elapsed <= QUAD2_TIME && axis.len() == 9 && grid.steps() == 10,
        format!(
            "{} values per axis, {} spatial nodes x {} steps, sup error {err:.3e} (<= {QUAD2_ERROR:e}), {:.1} s",
            axis.len(),
            grid.spatial_len(),
            grid.steps(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 exact-case solve", exact_case_solve),
        ("2 subsolution agreement", agreement),
        ("3 comparison principle", comparison),
        ("4 stability", stability),
        ("5 envelope oracle", envelope_oracle),
        ("6 Perron domination", perron_domination),
        ("7 Legendre identity", legendre),
        ("8 regularizer contracts", regularizers),
        ("9 n=2 smoke test", quad2_smoke),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !ok as usize;
        println!(
            "criterion {name}: {} ({detail})",
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
