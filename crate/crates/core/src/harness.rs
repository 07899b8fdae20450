//! Desk-scale experiments: comparison, stability, convergence, and agreement of the two
//! subsolution concepts on a corpus of fields.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use crate::cases::{exact_case, quad2_case, CaseKind, ExactCase, CASE_NAMES};
use crate::checkers::{default_tolerance, Checker, LegendreParams};
use crate::error::{Error, Result};
use crate::field::{linf_distance, Region, SpaceTimeField};
use crate::grid::ComplexGrid;
use crate::io::fmt_num;
use crate::problem::{FlowProblem, SourceTerm};
use crate::regularize::{sup_convolution_time, time_mollify, Kernel};
use crate::solver::{FlowSolver, SolverParams};

/// Number of `r` samples in `[-C0, C0]` for sup norms of source differences.
pub const R_SAMPLES: usize = 33;

/// Width of the margin band, in units of `tol`, inside which verdicts may disagree.
pub const BAND: f64 = 5.0;

/// `max (G - F)_+` (or `max |G - F|` when `absolute`) over all nodes and `r` in `[-c0, c0]`.
pub fn source_gap(
    f: &SourceTerm,
    g: &SourceTerm,
    grid: &ComplexGrid,
    c0: f64,
    absolute: bool,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..grid.slices() {
        let t = grid.time(k);
        for i in 0..grid.spatial_len() {
            let x = grid.point(i);
            for j in 0..R_SAMPLES {
                let r = -c0 + 2.0 * c0 * j as f64 / (R_SAMPLES - 1) as f64;
                let d = g.eval(t, x, r)? - f.eval(t, x, r)?;
                worst = worst.max(if absolute { d.abs() } else { d });
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonGap {
    /// `max (u - v)` over all nodes
    pub lhs: f64,
    /// `boundary_term + source_term`
    pub rhs: f64,
    /// `max (u - v)_+` over the parabolic boundary
    pub boundary_term: f64,
    /// `T max (G - F)_+`
    pub source_term: f64,
    pub slack: f64,
    /// `u` passed the subsolution check for `F` and `v` the supersolution check for `G`
    pub verified: bool,
}

/// Both sides of the comparison estimate
/// `max (u - v) <= max_{parabolic boundary} (u - v)_+ + T max (G - F)_+`.
pub fn comparison_gap(
    u: &SpaceTimeField,
    v: &SpaceTimeField,
    prob_f: &FlowProblem,
    prob_g: &FlowProblem,
    tol: f64,
) -> Result<ComparisonGap> {
    let grid = u.grid_arc();
    v.same_grid_as(grid)?;
    if prob_f.domain != prob_g.domain || grid.domain() != &prob_f.domain {
        return Err(Error::GridMismatch);
    }
    let mut lhs = f64::NEG_INFINITY;
    let mut boundary: f64 = 0.0;
    for k in 0..grid.slices() {
        for i in 0..grid.spatial_len() {
            let d = u.at(k, i) - v.at(k, i);
            lhs = lhs.max(d);
            if k == 0 || !grid.is_interior(i) {
                boundary = boundary.max(d);
            }
        }
    }
    let c0 = u.sup_abs().max(v.sup_abs());
    let source = grid.t_final() * source_gap(&prob_f.source, &prob_g.source, grid, c0, false)?;
    let sub_ok = Checker::new(grid.clone(), prob_f)
        .and_then(|c| c.pluripotential_subsolution(u, &LegendreParams::Analytic, tol))
        .map(|r| r.passed())
        .unwrap_or(false);
    let super_ok = Checker::new(grid.clone(), prob_g)
        .and_then(|c| c.pluripotential_supersolution(v, tol))
        .map(|r| r.passed())
        .unwrap_or(false);
    let rhs = boundary + source;
    Ok(ComparisonGap {
        lhs,
        rhs,
        boundary_term: boundary,
        source_term: source,
        slack: rhs - lhs,
        verified: sub_ok && super_ok,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub label: String,
    /// `max_{parabolic boundary} |h_j - h| + T max |F_j - F|`
    pub alpha: f64,
    /// `max |phi_j - phi|`
    pub error: f64,
}

/// Solves the base problem and each perturbation on `grid`, recording predicted and
/// measured distances.
pub fn stability_experiment(
    prob: &FlowProblem,
    perturbations: &[(String, FlowProblem)],
    grid: &Arc<ComplexGrid>,
    params: &SolverParams,
) -> Result<Vec<StabilityRow>> {
    let base = FlowSolver::new(grid.clone(), prob, params)?.solve()?.field;
    let hb = prob.boundary_field(grid)?;
    perturbations
        .iter()
        .map(|(label, pj)| {
            let phi = FlowSolver::new(grid.clone(), pj, params)?.solve()?.field;
            let hj = pj.boundary_field(grid)?;
            let mut bdry: f64 = 0.0;
            for k in 0..grid.slices() {
                for i in 0..grid.spatial_len() {
                    if k == 0 || !grid.is_interior(i) {
                        bdry = bdry.max((hj.at(k, i) - hb.at(k, i)).abs());
                    }
                }
            }
            let c0 = phi.sup_abs().max(base.sup_abs());
            let src = source_gap(&prob.source, &pj.source, grid, c0, true)?;
            Ok(StabilityRow {
                label: label.clone(),
                alpha: bdry + grid.t_final() * src,
                error: linf_distance(&phi, &base, Region::All)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    pub error: f64,
    /// `log2(e_prev / e)` against the previous level
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub case: String,
    pub rows: Vec<ConvergenceRow>,
    /// least-squares slope of `log e` against `log h`, over errors above round-off
    pub fitted_order: Option<f64>,
}

/// Errors below this are treated as round-off and excluded from order estimates.
pub const ROUNDOFF: f64 = 1e-11;

/// Halves `h` and quarters `dt` per level from the case defaults; sup error against the
/// exact field over all nodes.
pub fn convergence_study(
    case: &ExactCase,
    levels: usize,
    params: &SolverParams,
) -> Result<ConvergenceTable> {
    if levels < 2 {
        return Err(Error::InvalidParameter(
            "a convergence study needs at least 2 levels".into(),
        ));
    }
    if case.kind != CaseKind::Flow {
        return Err(Error::InvalidParameter(format!(
            "case {} has no flow solution",
            case.name
        )));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for l in 0..levels {
        let scale = (1u32 << l) as f64;
        let (h, dt) = (case.h / scale, case.dt / (scale * scale));
        let grid = case.grid(h, dt)?;
        let sol = FlowSolver::new(grid.clone(), &case.problem, params)?.solve()?;
        let error = linf_distance(&sol.field, &case.exact_field(&grid)?, Region::All)?;
        let order = rows.last().and_then(|p| {
            (p.error > ROUNDOFF && error > ROUNDOFF).then(|| (p.error / error).log2())
        });
        rows.push(ConvergenceRow {
            h,
            dt,
            error,
            order,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > ROUNDOFF)
        .map(|r| (r.h.ln(), r.error.ln()))
        .collect();
    let fitted_order = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ConvergenceTable {
        case: case.name.to_string(),
        rows,
        fitted_order,
    })
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,dt,sup_error,observed_order\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(r.h),
                fmt_num(r.dt),
                fmt_num(r.error),
                r.order.map(fmt_num).unwrap_or_default()
            ));
        }
        out
    }
}

/// A named field with the data it is checked against.
#[derive(Debug, Clone)]
pub struct CorpusField {
    pub name: String,
    pub field: SpaceTimeField,
    pub problem: FlowProblem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub name: String,
    pub pluripotential: f64,
    pub viscosity: f64,
    pub pluripotential_pass: bool,
    pub viscosity_pass: bool,
    /// both margins inside `[-BAND tol, BAND tol]`
    pub banded: bool,
}

impl AgreementRow {
    pub fn counts_as_disagreement(&self) -> bool {
        self.pluripotential_pass != self.viscosity_pass && !self.banded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementTable {
    pub rows: Vec<AgreementRow>,
    /// `matrix[pluripotential passed][viscosity passed]`
    pub matrix: [[usize; 2]; 2],
    pub disagreements: usize,
    /// largest `|margin|` among counted disagreements, 0 if none
    pub worst_disagreement: f64,
    pub tol: f64,
}

/// Runs both subsolution checkers on every corpus field.
pub fn agreement_suite(corpus: &[CorpusField], tol: f64) -> Result<AgreementTable> {
    let mut rows = Vec::with_capacity(corpus.len());
    let mut matrix = [[0usize; 2]; 2];
    for c in corpus {
        let checker = Checker::new(c.field.grid_arc().clone(), &c.problem)?;
        let p = checker.pluripotential_subsolution(&c.field, &LegendreParams::Analytic, tol)?;
        let v = checker.viscosity_subsolution(&c.field, tol)?;
        let band = BAND * tol;
        let row = AgreementRow {
            name: c.name.clone(),
            pluripotential: p.worst_margin,
            viscosity: v.worst_margin,
            pluripotential_pass: p.passed(),
            viscosity_pass: v.passed(),
            banded: p.worst_margin.abs() <= band && v.worst_margin.abs() <= band,
        };
        matrix[row.pluripotential_pass as usize][row.viscosity_pass as usize] += 1;
        rows.push(row);
    }
    let counted: Vec<&AgreementRow> = rows.iter().filter(|r| r.counts_as_disagreement()).collect();
    let worst_disagreement = counted
        .iter()
        .map(|r| r.pluripotential.abs().max(r.viscosity.abs()))
        .fold(0.0, f64::max);
    Ok(AgreementTable {
        disagreements: counted.len(),
        rows,
        matrix,
        worst_disagreement,
        tol,
    })
}

impl AgreementTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "field,pluripotential_margin,viscosity_margin,pluripotential,viscosity,banded\n",
        );
        let v = |b: bool| if b { "pass" } else { "fail" };
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.name,
                fmt_num(r.pluripotential),
                fmt_num(r.viscosity),
                v(r.pluripotential_pass),
                v(r.viscosity_pass),
                r.banded
            ));
        }
        out
    }
}

/// `sum_i lambda_i |<z, w_i>|^2 + Re(sum a_jk z_j z_k) + Re(<b, z>) + slope t`, seeded.
///
/// The first part is psh and the rest pluriharmonic, so the Levi form is `sum lambda_i w_i w_i^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPshQuadratic {
    pub slope: f64,
    /// `(lambda_i, w_i)` with `w_i` in real coordinates
    pub terms: Vec<(f64, Vec<f64>)>,
    /// real and imaginary parts of the symmetric pluriharmonic coefficients, row-major
    pub harmonic: Vec<(f64, f64)>,
    pub linear: Vec<f64>,
}

impl RandomPshQuadratic {
    pub fn sample(rng: &mut impl Rng, n: usize) -> Self {
        let terms = (0..n + 1)
            .map(|_| {
                let lam = rng.gen_range(0.1..1.0);
                let w: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (lam, w)
            })
            .collect();
        let harmonic = (0..n * n)
            .map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
            .collect();
        let linear = (0..2 * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        RandomPshQuadratic {
            slope: rng.gen_range(-1.0..1.0),
            terms,
            harmonic,
            linear,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let n = x.len() / 2;
        let mut s = self.slope * t;
        for (lam, w) in &self.terms {
            // <z, w> = sum z_j conj(w_j)
            let (mut re, mut im) = (0.0, 0.0);
            for j in 0..n {
                let (zr, zi, wr, wi) = (x[2 * j], x[2 * j + 1], w[2 * j], w[2 * j + 1]);
                re += zr * wr + zi * wi;
                im += zi * wr - zr * wi;
            }
            s += lam * (re * re + im * im);
        }
        for j in 0..n {
            for k in 0..n {
                let (ar, ai) = self.harmonic[j * n + k];
                let (zr, zi, wr, wi) = (x[2 * j], x[2 * j + 1], x[2 * k], x[2 * k + 1]);
                let (pr, pi) = (zr * wr - zi * wi, zr * wi + zi * wr);
                s += ar * pr - ai * pi;
            }
        }
        s + self.linear.iter().zip(x).map(|(b, c)| b * c).sum::<f64>()
    }
}

/// The 30-field agreement corpus on the default `quad1` grid.
///
/// Exact solutions, slower and faster variants, downward shifts, sup-convolutions checked
/// against the time-shifted source, seeded random psh quadratics, constants, and smooth
/// non-quadratic potentials.
pub fn agreement_corpus(seed: u64) -> Result<Vec<CorpusField>> {
    let quad1 = exact_case("quad1")?;
    let tquad = exact_case("tquad")?;
    let grid = quad1.default_grid()?;
    let exact = quad1.exact_field(&grid)?;
    let p1 = quad1.problem.clone();
    let mut out = vec![];
    let mut push = |name: String, field: SpaceTimeField, problem: &FlowProblem| {
        out.push(CorpusField {
            name,
            field,
            problem: problem.clone(),
        })
    };
    push("exact".into(), exact.clone(), &p1);
    for s in [0.05, 0.1, 0.2, 0.5, 1.0] {
        push(
            format!("slower-{s}"),
            exact.map_nodes(|t, _, v| v - s * t)?,
            &p1,
        );
    }
    for s in [0.1, 0.3, 1.0] {
        push(
            format!("faster-{s}"),
            exact.map_nodes(|t, _, v| v + s * t)?,
            &p1,
        );
    }
    for c in [0.5, 2.0] {
        push(format!("shift-{c}"), exact.add_scalar(-c)?, &p1);
    }
    let tq = tquad.exact_field(&grid)?.map_nodes(|t, _, v| v - 0.2 * t)?;
    for eps in [0.05, 0.1, 0.2] {
        let sc = sup_convolution_time(&tq, eps)?;
        let shifted = tquad
            .problem
            .with_source(tquad.problem.source.time_inf(sc.max_shift));
        push(format!("supconv-{eps}"), sc.field, &shifted);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..8 {
        let q = RandomPshQuadratic::sample(&mut rng, 1);
        push(
            format!("random-{j}"),
            SpaceTimeField::from_fn(grid.clone(), |t, x| q.eval(t, x)),
            &p1,
        );
    }
    for c in [0.0, 1.0, -0.5] {
        push(
            format!("constant-{c}"),
            SpaceTimeField::constant(grid.clone(), c),
            &p1,
        );
    }
    let ln2 = std::f64::consts::LN_2;
    let a2 = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
    let smooth: [(&str, Box<dyn Fn(f64, &[f64]) -> f64>); 5] = [
        (
            "quartic-slow",
            Box::new(move |t, x| (ln2 - 0.3) * t + a2(x) + 0.1 * a2(x) * a2(x)),
        ),
        (
            "exp-plus",
            Box::new(move |t, x| x[0].exp() + 0.5 * a2(x) + 0.1 * t),
        ),
        ("log-slow", Box::new(move |t, x| (1.0 + a2(x)).ln() - t)),
        (
            "log-fast",
            Box::new(move |t, x| (1.0 + a2(x)).ln() + 0.5 * t),
        ),
        (
            "quartic-flat",
            Box::new(move |t, x| a2(x) * a2(x) + 0.2 * t),
        ),
    ];
    for (name, f) in smooth {
        push(
            name.into(),
            SpaceTimeField::from_fn(grid.clone(), |t, x| f(t, x)),
            &p1,
        );
    }
    Ok(out)
}

/// A sub/supersolution pair with its data, for the comparison estimate.
#[derive(Debug, Clone)]
pub struct ComparisonPairing {
    pub name: String,
    pub u: SpaceTimeField,
    pub v: SpaceTimeField,
    pub prob_f: FlowProblem,
    pub prob_g: FlowProblem,
}

/// Twelve pairings on the `quad1` grid, four of them built from solver runs.
pub fn comparison_corpus(params: &SolverParams, seed: u64) -> Result<Vec<ComparisonPairing>> {
    let quad1 = exact_case("quad1")?;
    let grid = quad1.default_grid()?;
    let p = quad1.problem.clone();
    let exact = quad1.exact_field(&grid)?;
    let solve = |prob: &FlowProblem| -> Result<SpaceTimeField> {
        Ok(FlowSolver::new(grid.clone(), prob, params)?.solve()?.field)
    };
    let shifted_f = |c: f64| p.with_source(p.source.offset(c));
    let lifted_h = p.with_boundary(p.boundary.clone().add(crate::expr::Expr::num(0.1)));
    let base = solve(&p)?;
    let pair =
        |name: &str, u: SpaceTimeField, v: SpaceTimeField, pf: &FlowProblem, pg: &FlowProblem| {
            ComparisonPairing {
                name: name.into(),
                u,
                v,
                prob_f: pf.clone(),
                prob_g: pg.clone(),
            }
        };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // a random psh quadratic made a subsolution and pushed below the data
    let random_sub = {
        let mut q = RandomPshQuadratic::sample(&mut rng, 1);
        let levi: f64 = q
            .terms
            .iter()
            .map(|(l, w)| l * w.iter().map(|c| c * c).sum::<f64>())
            .sum();
        q.slope = (2.0 * levi).ln() - 0.1;
        let raw = SpaceTimeField::from_fn(grid.clone(), |t, x| q.eval(t, x));
        let excess = raw
            .values()
            .iter()
            .zip(exact.values())
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b));
        raw.add_scalar(-excess.max(0.0))?
    };
    let slow = exact.map_nodes(|t, _, v| v - 0.2 * t)?;
    let tquad = exact_case("tquad")?;
    let tq = tquad.exact_field(&grid)?;
    let f_low = shifted_f(-0.2);
    let f_lower = shifted_f(-0.5);
    Ok(vec![
        pair("exact-exact", exact.clone(), exact.clone(), &p, &p),
        pair(
            "shifted-exact",
            exact.add_scalar(-0.3)?,
            exact.clone(),
            &p,
            &p,
        ),
        pair("solve-F-solve-G", solve(&f_low)?, base.clone(), &f_low, &p),
        pair(
            "slower-faster",
            exact.map_nodes(|t, _, v| v - 0.1 * t)?,
            exact.map_nodes(|t, _, v| v + 0.1 * t)?,
            &p,
            &p,
        ),
        pair(
            "down-up",
            exact.add_scalar(-0.5)?,
            exact.add_scalar(0.5)?,
            &p,
            &p,
        ),
        pair("slower-solve", slow.clone(), base.clone(), &p, &p),
        pair(
            "solve-faster",
            base.clone(),
            exact.map_nodes(|t, _, v| v + 0.2 * t)?,
            &p,
            &p,
        ),
        pair("random-exact", random_sub, exact.clone(), &p, &p),
        pair(
            "supconv-exact",
            sup_convolution_time(&slow, 0.1)?.field,
            exact.clone(),
            &p,
            &p,
        ),
        pair(
            "solve-lowF-exact",
            solve(&f_lower)?,
            exact.clone(),
            &f_lower,
            &p,
        ),
        pair(
            "tquad-exact",
            tq.clone(),
            tq,
            &tquad.problem,
            &tquad.problem,
        ),
        pair("lifted-data", solve(&lifted_h)?, base, &lifted_h, &p),
    ])
}

/// Subsolutions of `quad1` lying below its boundary data, for Perron domination.
pub fn perron_family(seed: u64) -> Result<Vec<CorpusField>> {
    let quad1 = exact_case("quad1")?;
    let grid = quad1.default_grid()?;
    let p = quad1.problem.clone();
    let exact = quad1.exact_field(&grid)?;
    let mut fields = vec![];
    for s in [0.05, 0.2, 1.0] {
        fields.push((format!("slower-{s}"), exact.map_nodes(|t, _, v| v - s * t)?));
    }
    fields.push(("shift-0.5".into(), exact.add_scalar(-0.5)?));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hb = p.boundary_field(&grid)?;
    for j in 0..4 {
        let mut q = RandomPshQuadratic::sample(&mut rng, 1);
        let levi: f64 = q
            .terms
            .iter()
            .map(|(l, w)| l * w.iter().map(|c| c * c).sum::<f64>())
            .sum();
        q.slope = (2.0 * levi).ln() - 0.05;
        let raw = SpaceTimeField::from_fn(grid.clone(), |t, x| q.eval(t, x));
        let mut excess = f64::NEG_INFINITY;
        for k in 0..grid.slices() {
            for i in 0..grid.spatial_len() {
                if k == 0 || !grid.is_interior(i) {
                    excess = excess.max(raw.at(k, i) - hb.at(k, i));
                }
            }
        }
        fields.push((format!("random-{j}"), raw.add_scalar(-excess)?));
    }
    let max_pair = crate::envelope::perron_envelope(&[fields[1].1.clone(), fields[4].1.clone()])?;
    fields.push(("max-slower-random".into(), max_pair));
    Ok(fields
        .into_iter()
        .map(|(name, field)| CorpusField {
            name,
            field,
            problem: p.clone(),
        })
        .collect())
}

/// Smallest `c >= 0` (to relative precision `1e-6`) with `u^eps - c (t + 1)` passing the
/// pluripotential subsolution check.
pub fn mollifier_correction(
    u: &SpaceTimeField,
    prob: &FlowProblem,
    eps: f64,
    kernel: Kernel,
    tol: f64,
) -> Result<f64> {
    let m = time_mollify(u, eps, kernel)?.field;
    let checker = Checker::new(u.grid_arc().clone(), prob)?;
    let passes = |c: f64| -> Result<bool> {
        let w = m.map_nodes(|t, _, v| v - c * (t + 1.0))?;
        Ok(checker
            .pluripotential_subsolution(&w, &LegendreParams::Analytic, tol)?
            .passed())
    };
    if passes(0.0)? {
        return Ok(0.0);
    }
    let mut hi = 1e-6;
    while !passes(hi)? {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::InvalidParameter(
                "no finite mollifier correction found".into(),
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `u = |z|^2 + a t + beta t^2` on the `quad1` grid with `g = 4 e^{-a}` and
/// `F(t) = -beta (2 t + dt)`, so the forward-difference subsolution margin of `u` is zero on
/// every slice. Any upward drift of the time derivative under mollification then shows up
/// as a positive correction.
pub fn mollifier_test_case(a: f64, beta: f64) -> Result<(SpaceTimeField, FlowProblem)> {
    let quad1 = exact_case("quad1")?;
    let grid = quad1.default_grid()?;
    let t_final = grid.t_final();
    let prob = FlowProblem::from_sources(
        quad1.problem.domain.clone(),
        t_final,
        &format!("{}*(2*t + {})", fmt_num(-beta), fmt_num(grid.dt())),
        &fmt_num(4.0 * (-a).exp()),
        &format!("absz2 + {}*t + {}*t^2", fmt_num(a), fmt_num(beta)),
        quad1.problem.convention,
    )?;
    let u = SpaceTimeField::from_fn(grid, |t, x| {
        x[0] * x[0] + x[1] * x[1] + a * t + beta * t * t
    });
    Ok((u, prob))
}

/// Default checker tolerance on a case's grid.
pub fn case_tolerance(case: &ExactCase) -> Result<f64> {
    Ok(default_tolerance(&*case.default_grid()?))
}
