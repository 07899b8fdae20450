//! Problem configs (JSON), field files, check reports and CSV logs.

use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CheckReport, SpaceTimeField};
use crate::grid::{build_grid, ComplexGrid, DomainKind, DomainSpec};
use crate::problem::FlowProblem;
use crate::solver::{InnerSolver, SolverParams, StepLog};
use crate::stencil::{MAConvention, StencilFrameSet};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_num(x: f64) -> String {
    if x.is_finite() {
        fmt_num(x)
    } else {
        "null".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub n: usize,
    /// ball radius, or the common polyradius
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// polyradii, one per complex coordinate
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConventionConfig {
    pub cn: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    /// frame-set resolution `m`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    /// `"fixed-point"` or `"nodal"`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub h: f64,
    pub dt: f64,
    #[serde(rename = "F")]
    pub source: String,
    pub g: String,
    pub hdata: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<ConventionConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        let d = &self.domain;
        let radii = match (d.kind, &d.radii, d.radius) {
            (_, Some(r), None) => r.clone(),
            (DomainKind::Ball, None, Some(r)) => vec![r],
            (DomainKind::Polydisc, None, Some(r)) => vec![r; d.n],
            (_, None, None) => return Err(Error::Format("domain needs radius or radii".into())),
            (_, Some(_), Some(_)) => {
                return Err(Error::Format(
                    "domain takes radius or radii, not both".into(),
                ))
            }
        };
        let spec = DomainSpec {
            kind: d.kind,
            n: d.n,
            center: d.center.clone().unwrap_or_else(|| vec![0.0; 2 * d.n]),
            radii,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn convention(&self) -> Result<MAConvention> {
        match self.convention {
            Some(c) => MAConvention::new(c.cn),
            None => Ok(MAConvention::standard(self.domain.n)),
        }
    }

    pub fn problem(&self) -> Result<FlowProblem> {
        FlowProblem::from_sources(
            self.domain_spec()?,
            self.t_final,
            &self.source,
            &self.g,
            &self.hdata,
            self.convention()?,
        )
    }

    pub fn grid(&self) -> Result<Arc<ComplexGrid>> {
        Ok(Arc::new(build_grid(
            self.domain_spec()?,
            self.h,
            self.dt,
            self.t_final,
        )?))
    }

    pub fn frames(&self) -> Result<StencilFrameSet> {
        match self.solver.frames {
            Some(m) => StencilFrameSet::new(self.domain.n, m),
            None => Ok(StencilFrameSet::default_for(self.domain.n)),
        }
    }

    pub fn solver_params(&self) -> Result<SolverParams> {
        let mut p = SolverParams::default_for(self.domain.n);
        let s = &self.solver;
        if let Some(t) = s.tol {
            p.tol = t;
        }
        if let Some(m) = s.max_iter {
            p.max_iter = m;
        }
        if let Some(d) = s.damping {
            p.damping = d;
        }
        p.frames = self.frames()?;
        p.inner = match s.inner.as_deref() {
            None | Some("fixed-point") => InnerSolver::FixedPoint,
            Some("nodal") => InnerSolver::Nodal,
            Some(other) => return Err(Error::Format(format!("unknown inner solver {other:?}"))),
        };
        p.validate()?;
        Ok(p)
    }
}

const MAGIC: &str = "MAFLOW1";

fn domain_line(d: &DomainSpec) -> String {
    let kind = match d.kind {
        DomainKind::Ball => "ball",
        DomainKind::Polydisc => "polydisc",
    };
    let list = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",");
    format!("{kind};radii={};center={}", list(&d.radii), list(&d.center))
}

fn parse_domain_line(n: usize, s: &str) -> Result<DomainSpec> {
    let bad = || Error::Format(format!("bad domain line {s:?}"));
    let mut parts = s.split(';');
    let kind = match parts.next() {
        Some("ball") => DomainKind::Ball,
        Some("polydisc") => DomainKind::Polydisc,
        _ => return Err(bad()),
    };
    let mut radii = None;
    let mut center = None;
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(bad)?;
        let vals = v
            .split(',')
            .map(|x| x.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        match k {
            "radii" => radii = Some(vals),
            "center" => center = Some(vals),
            _ => return Err(bad()),
        }
    }
    let spec = DomainSpec {
        kind,
        n,
        center: center.ok_or_else(bad)?,
        radii: radii.ok_or_else(bad)?,
    };
    spec.validate()?;
    Ok(spec)
}

/// Text header, `DATA`, then the values as little-endian `f64` in node order.
pub fn write_field(mut w: impl Write, field: &SpaceTimeField) -> Result<()> {
    let g = field.grid();
    let mut head = String::new();
    head.push_str(MAGIC);
    head.push('\n');
    head.push_str(&format!("n={}\n", g.n()));
    head.push_str(&format!("h={}\n", fmt_num(g.h())));
    head.push_str(&format!("dt={}\n", fmt_num(g.dt())));
    head.push_str(&format!("T={}\n", fmt_num(g.t_final())));
    head.push_str(&format!("nodes={}\n", g.node_count()));
    head.push_str(&format!("domain={}\n", domain_line(g.domain())));
    head.push_str("DATA\n");
    w.write_all(head.as_bytes())?;
    let mut buf = Vec::with_capacity(8 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_field(r: impl Read) -> Result<SpaceTimeField> {
    let mut r = std::io::BufReader::new(r);
    let mut line = String::new();
    let mut next_line = |r: &mut std::io::BufReader<_>| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };
    if next_line(&mut r)? != MAGIC {
        return Err(Error::Format("not a field file".into()));
    }
    let mut kv = std::collections::HashMap::new();
    loop {
        let l = next_line(&mut r)?;
        if l == "DATA" {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line {l:?}")))?;
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| {
        kv.get(k)
            .cloned()
            .ok_or_else(|| Error::Format(format!("missing header {k}")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("bad number for {k}")))
    };
    let n: usize = get("n")?
        .parse()
        .map_err(|_| Error::Format("bad n".into()))?;
    let nodes: usize = get("nodes")?
        .parse()
        .map_err(|_| Error::Format("bad nodes".into()))?;
    let domain = parse_domain_line(n, &get("domain")?)?;
    let grid = Arc::new(build_grid(domain, num("h")?, num("dt")?, num("T")?)?);
    if grid.node_count() != nodes {
        return Err(Error::LengthMismatch {
            expected: grid.node_count(),
            got: nodes,
        });
    }
    let mut bytes = Vec::with_capacity(8 * nodes);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * nodes {
        return Err(Error::LengthMismatch {
            expected: 8 * nodes,
            got: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    SpaceTimeField::new(grid, values)
}

pub fn save_field(path: &Path, field: &SpaceTimeField) -> Result<()> {
    let f =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_field(std::io::BufWriter::new(f), field)
}

pub fn load_field(path: &Path) -> Result<SpaceTimeField> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_field(f)
}

/// `{"verdict", "worstMargin", "worstNode", "tol"}`; non-finite numbers become `null`.
pub fn report_json(r: &CheckReport) -> String {
    let verdict = if r.passed() { "pass" } else { "fail" };
    format!(
        "{{\"verdict\":\"{verdict}\",\"worstMargin\":{},\"worstNode\":{},\"tol\":{}}}",
        json_num(r.worst_margin),
        r.worst_node,
        json_num(r.tol)
    )
}

pub fn step_log_csv(steps: &[StepLog]) -> String {
    let mut out = String::from("step,inner_iterations,final_residual\n");
    for s in steps {
        out.push_str(&format!(
            "{},{},{}\n",
            s.k,
            s.iterations,
            fmt_num(s.max_update)
        ));
    }
    out
}
