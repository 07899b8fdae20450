use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use maflow_core::cases::{exact_case, CaseKind};
use maflow_core::checkers::{
    default_tolerance, Checker, LegendreParams, DEFAULT_SEMICONCAVITY_BOUND,
};
use maflow_core::envelope::{perron_envelope, psh_envelope_with, EnvelopeOptions, Sweep};
use maflow_core::expr::{parse_slot, Env, Slot};
use maflow_core::field::{is_parabolic_potential, CheckReport, SpaceTimeField, Verdict};
use maflow_core::harness::convergence_study;
use maflow_core::io::{fmt_num, load_field, report_json, save_field, step_log_csv, ProblemConfig};
use maflow_core::regularize::{inf_convolution_time, sup_convolution_time, time_mollify, Kernel};
use maflow_core::{solve_flow, Error, InnerSolver, SolverParams, StencilFrameSet};

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "maflow",
    version,
    about = "Degenerate parabolic complex Monge-Ampere flows on a lattice"
)]
struct Cli {
    /// worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Cauchy-Dirichlet problem; writes the field and a per-step CSV log.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// step log (default: OUT with extension .csv)
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Check a field against the config's problem; prints a JSON report.
    Check {
        kind: CheckKind,
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// default: h^2 + dt
        #[arg(long)]
        tol: Option<f64>,
        /// `analytic`, `sampled:M` (log-spaced in [1e-3, 1e3]) or `auto:M`
        #[arg(long, default_value = "analytic")]
        a_mode: String,
        /// time semi-concavity bound for psuper
        #[arg(long, default_value_t = DEFAULT_SEMICONCAVITY_BOUND)]
        semiconcavity: f64,
    },
    /// Slice psh envelope of an obstacle field, or the Perron envelope of a family.
    Envelope {
        kind: EnvelopeKind,
        #[arg(long, required_if_eq("kind", "psh"))]
        obstacle: Option<PathBuf>,
        #[arg(long, num_args = 1.., required_if_eq("kind", "perron"))]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// obstacle on the domain boundary, e.g. `-absz2`; cuts the collar arms there.
        /// Without it the collar stays at the obstacle.
        #[arg(long)]
        boundary: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        #[arg(long)]
        gauss_seidel: bool,
    },
    /// Regularize a field in time.
    Regularize {
        kind: RegularizeKind,
        #[arg(long)]
        eps: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "bump")]
        kernel: KernelArg,
    },
    /// Convergence table of a registry case on stdout (CSV).
    Study {
        #[arg(long)]
        case: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, value_enum, default_value = "fixed-point")]
        inner: InnerArg,
    },
    /// Sample an expression, or a registry case's exact field, on a grid.
    Sample {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        case: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// expression in t, x1, y1, ...; default: the case's exact field, or the obstacle
        /// for envelope cases, or the config's boundary data
        #[arg(long)]
        expr: Option<String>,
        #[arg(long, requires = "case")]
        h: Option<f64>,
        #[arg(long, requires = "case")]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Psub,
    Vsub,
    Vsuper,
    Psuper,
    Potential,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum EnvelopeKind {
    Psh,
    Perron,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegularizeKind {
    Sup,
    Inf,
    Mollify,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Bump,
    Epanechnikov,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    FixedPoint,
    Nodal,
}

impl From<InnerArg> for InnerSolver {
    fn from(a: InnerArg) -> Self {
        match a {
            InnerArg::FixedPoint => InnerSolver::FixedPoint,
            InnerArg::Nodal => InnerSolver::Nodal,
        }
    }
}

fn parse_a_mode(s: &str) -> Result<LegendreParams, Error> {
    let bad = || Error::InvalidParameter(format!("bad --a-mode `{s}`"));
    match s.split_once(':') {
        None if s == "analytic" => Ok(LegendreParams::Analytic),
        Some(("sampled", m)) => Ok(LegendreParams::log_spaced(
            1e-3,
            1e3,
            m.parse().map_err(|_| bad())?,
        )),
        Some(("auto", m)) => Ok(LegendreParams::AutoSampled {
            samples: m.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn solve(config: &Path, out: &Path, log: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = ProblemConfig::load(config)?;
    let grid = cfg.grid()?;
    let sol = solve_flow(&cfg.problem()?, &grid, &cfg.solver_params()?)?;
    save_field(out, &sol.field)?;
    let log = log.unwrap_or_else(|| out.with_extension("csv"));
    std::fs::write(&log, step_log_csv(&sol.steps))?;
    Ok(0)
}

fn check(
    kind: CheckKind,
    field: &Path,
    config: &Path,
    tol: Option<f64>,
    a_mode: &str,
    semiconcavity: f64,
) -> Result<u8, Error> {
    let cfg = ProblemConfig::load(config)?;
    let grid = cfg.grid()?;
    let u = load_field(field)?;
    u.same_grid_as(&grid)?;
    let tol = tol.unwrap_or_else(|| default_tolerance(&grid));
    let params = parse_a_mode(a_mode)?;
    let prob = cfg.problem()?;
    let result = match kind {
        CheckKind::Potential => is_parabolic_potential(&u, tol),
        _ => {
            let mut checker = Checker::with_frames(grid.clone(), &prob, cfg.frames()?)?;
            checker.set_semiconcavity_bound(semiconcavity);
            match kind {
                CheckKind::Psub => checker.pluripotential_subsolution(&u, &params, tol),
                CheckKind::Vsub => checker.viscosity_subsolution(&u, tol),
                CheckKind::Vsuper => checker.viscosity_supersolution(&u, tol),
                CheckKind::Psuper => checker.pluripotential_supersolution(&u, tol),
                CheckKind::Potential => unreachable!(),
            }
        }
    };
    let report = match result {
        Ok(r) => r,
        // a field that is not psh fails the check rather than the command
        Err(Error::NotParabolicPotential { margin, node }) => CheckReport {
            verdict: Verdict::Fail,
            worst_margin: margin,
            worst_node: node,
            tol,
            margins: None,
        },
        Err(e @ Error::NotSemiConcave { .. }) => {
            eprintln!("check failed: {e}");
            return Ok(EXIT_CHECK_FAILED);
        }
        Err(e) => return Err(e),
    };
    println!("{}", report_json(&report));
    Ok(if report.passed() {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

#[allow(clippy::too_many_arguments)]
fn envelope(
    kind: EnvelopeKind,
    obstacle: Option<PathBuf>,
    inputs: &[PathBuf],
    out: &Path,
    boundary: Option<String>,
    frames: Option<usize>,
    tol: f64,
    max_iter: usize,
    gauss_seidel: bool,
) -> Result<u8, Error> {
    if kind == EnvelopeKind::Perron {
        let family = inputs
            .iter()
            .map(|p| load_field(p))
            .collect::<Result<Vec<_>, _>>()?;
        save_field(out, &perron_envelope(&family)?)?;
        return Ok(0);
    }
    let v = load_field(
        obstacle
            .as_deref()
            .expect("clap requires --obstacle for psh"),
    )?;
    let n = v.grid().n();
    let opts = EnvelopeOptions {
        frames: match frames {
            Some(m) => StencilFrameSet::new(n, m)?,
            None => StencilFrameSet::default_for(n),
        },
        tol,
        max_iter,
        sweep: if gauss_seidel {
            Sweep::GaussSeidel
        } else {
            Sweep::Jacobi
        },
    };
    let boundary = boundary
        .map(|b| parse_slot(&b, Slot::Boundary))
        .transpose()?;
    let mut result = v.clone();
    let mut converged = true;
    for k in 0..v.grid().slices() {
        let slice = v.slice(k)?;
        let t = slice.time();
        let env = match &boundary {
            Some(e) => {
                let f = |x: &[f64]| e.eval(&Env::space_time(t, x)).unwrap_or(f64::NAN);
                psh_envelope_with(&slice, &opts, Some(&f))?
            }
            None => psh_envelope_with(&slice, &opts, None)?,
        };
        if !env.converged {
            eprintln!(
                "slice {k}: no convergence after {} sweeps (last update {})",
                env.iterations,
                fmt_num(env.max_update)
            );
        }
        converged &= env.converged;
        result.set_slice(&env.slice)?;
    }
    save_field(out, &result)?;
    Ok(if converged { 0 } else { EXIT_DIVERGED })
}

fn regularize(
    kind: RegularizeKind,
    eps: f64,
    input: &Path,
    out: &Path,
    kernel: KernelArg,
) -> Result<u8, Error> {
    let u = load_field(input)?;
    let field = match kind {
        RegularizeKind::Sup | RegularizeKind::Inf => {
            let c = if matches!(kind, RegularizeKind::Sup) {
                sup_convolution_time(&u, eps)?
            } else {
                inf_convolution_time(&u, eps)?
            };
            eprintln!("max_shift={}", fmt_num(c.max_shift));
            c.field
        }
        RegularizeKind::Mollify => {
            let kernel = match kernel {
                KernelArg::Bump => Kernel::Bump,
                KernelArg::Epanechnikov => Kernel::Epanechnikov,
            };
            let m = time_mollify(&u, eps, kernel)?;
            if m.clamped {
                eprintln!("warning: {}", Error::KernelOutOfRange);
            }
            m.field
        }
    };
    save_field(out, &field)?;
    Ok(0)
}

fn study(case: &str, levels: usize, inner: InnerArg) -> Result<u8, Error> {
    let case = exact_case(case)?;
    let params = SolverParams {
        inner: inner.into(),
        ..SolverParams::default_for(case.problem.domain.n)
    };
    print!("{}", convergence_study(&case, levels, &params)?.to_csv());
    Ok(0)
}

fn sample(
    case: Option<String>,
    config: Option<PathBuf>,
    expr: Option<String>,
    h: Option<f64>,
    dt: Option<f64>,
    out: &Path,
) -> Result<u8, Error> {
    let (grid, default) = match (case, config) {
        (Some(name), _) => {
            let c = exact_case(&name)?;
            let grid = c.grid(h.unwrap_or(c.h), dt.unwrap_or(c.dt))?;
            let field = match (&c.exact, c.kind) {
                (Some(_), CaseKind::Flow) => c.exact_field(&grid)?,
                _ => c.problem.boundary_field(&grid)?,
            };
            (grid, field)
        }
        (None, Some(path)) => {
            let cfg = ProblemConfig::load(&path)?;
            let grid = cfg.grid()?;
            let field = cfg.problem()?.boundary_field(&grid)?;
            (grid, field)
        }
        (None, None) => unreachable!("clap requires --case or --config"),
    };
    let field = match expr {
        Some(src) => sample_expr(&grid, &src)?,
        None => default,
    };
    save_field(out, &field)?;
    Ok(0)
}

fn sample_expr(grid: &Arc<maflow_core::ComplexGrid>, src: &str) -> Result<SpaceTimeField, Error> {
    let e = parse_slot(src, Slot::Boundary)?;
    let s = grid.spatial_len();
    let values = (0..grid.node_count())
        .map(|idx| e.eval(&Env::space_time(grid.time(idx / s), grid.point(idx % s))))
        .collect::<Result<Vec<_>, _>>()?;
    SpaceTimeField::new(grid.clone(), values)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.cmd {
        Cmd::Solve { config, out, log } => solve(&config, &out, log),
        Cmd::Check {
            kind,
            field,
            config,
            tol,
            a_mode,
            semiconcavity,
        } => check(kind, &field, &config, tol, &a_mode, semiconcavity),
        Cmd::Envelope {
            kind,
            obstacle,
            inputs,
            out,
            boundary,
            frames,
            tol,
            max_iter,
            gauss_seidel,
        } => envelope(
            kind,
            obstacle,
            &inputs,
            &out,
            boundary,
            frames,
            tol,
            max_iter,
            gauss_seidel,
        ),
        Cmd::Regularize {
            kind,
            eps,
            input,
            out,
            kernel,
        } => regularize(kind, eps, &input, &out, kernel),
        Cmd::Study {
            case,
            levels,
            inner,
        } => study(&case, levels, inner),
        Cmd::Sample {
            case,
            config,
            expr,
            h,
            dt,
            out,
        } => sample(case, config, expr, h, dt, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InnerDivergence { .. } | Error::MaxIterExceeded { .. } => EXIT_DIVERGED,
                _ => EXIT_CONFIG,
            })
        }
    }
}
