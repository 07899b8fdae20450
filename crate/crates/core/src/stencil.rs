//! Wide-stencil monotone discretization of the complex Monge-Ampere density.
//!
//! For a complex unit direction `v` the Levi form `u_{v vbar}` is approximated by
//!
//! ```text
//! [u(z+Lv) + u(z-Lv) + u(z+L iv) + u(z-L iv) - 4u(z)] / (4 L^2)
//! ```
//!
//! and the density of `(dd^c u)^n` by `c_n * min_frames prod_j max(u_{v_j vbar_j}, 0)`.
//! Arms that land on lattice points are read directly, other arms are
//! multilinearly interpolated, and arms cut by the boundary use
//! Shortley-Weller weights with Dirichlet data at the hit point. Every neighbor
//! weight is nonnegative, so the scheme is degenerate elliptic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SliceField;
use crate::grid::ComplexGrid;

/// Density normalization: the discrete density of a smooth `u` tends to `c_n * det(u_{j kbar})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MAConvention {
    pub c_n: f64,
}

impl MAConvention {
    /// `4^n * n!`; in dimension one the density equals the Laplacian.
    pub fn standard(n: usize) -> Self {
        let fact: usize = (1..=n).product();
        MAConvention {
            c_n: 4f64.powi(n as i32) * fact as f64,
        }
    }

    pub fn new(c_n: f64) -> Result<Self> {
        if !(c_n > 0.0) || !c_n.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "c_n must be positive, got {c_n}"
            )));
        }
        Ok(MAConvention { c_n })
    }
}

/// Multiply each complex component (stored as `(re, im)` pairs) by `i`.
pub fn times_i(v: &[f64]) -> Vec<f64> {
    v.chunks(2).flat_map(|c| [-c[1], c[0]]).collect()
}

/// Hermitian product `sum a_j conj(b_j)` as `(re, im)`.
pub fn hermitian(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.chunks(2)
        .zip(b.chunks(2))
        .fold((0.0, 0.0), |(re, im), (p, q)| {
            (
                re + p[0] * q[0] + p[1] * q[1],
                im + p[1] * q[0] - p[0] * q[1],
            )
        })
}

/// `n` mutually orthogonal complex unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub dirs: Vec<Vec<f64>>,
}

impl Frame {
    pub fn coordinate(n: usize) -> Self {
        let dirs = (0..n)
            .map(|j| {
                let mut v = vec![0.0; 2 * n];
                v[2 * j] = 1.0;
                v
            })
            .collect();
        Frame { dirs }
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, va) in self.dirs.iter().enumerate() {
            for (b, vb) in self.dirs.iter().enumerate() {
                let (re, im) = hermitian(va, vb);
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((re - want).abs()).max(im.abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilFrameSet {
    n: usize,
    resolution: usize,
    frames: Vec<Frame>,
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn cis(a: f64) -> (f64, f64) {
    (a.cos(), a.sin())
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

/// Columns of `e^{i alpha} [[a, b], [-conj b, conj a]]`, `a = e^{i psi} cos(theta)`, `b = e^{i chi} sin(theta)`.
fn su2_frame(theta: f64, psi: f64, chi: f64, alpha: f64) -> Frame {
    let g = cis(alpha);
    let a = cmul(g, (psi.cos() * theta.cos(), psi.sin() * theta.cos()));
    let b = cmul(g, (chi.cos() * theta.sin(), chi.sin() * theta.sin()));
    let a_bar = cmul(g, (psi.cos() * theta.cos(), -psi.sin() * theta.cos()));
    let mb_bar = cmul(g, (-chi.cos() * theta.sin(), chi.sin() * theta.sin()));
    Frame {
        dirs: vec![
            vec![a.0, a.1, mb_bar.0, mb_bar.1],
            vec![b.0, b.1, a_bar.0, a_bar.1],
        ],
    }
}

impl StencilFrameSet {
    /// Only the standard coordinate frame.
    pub fn coordinate(n: usize) -> Self {
        StencilFrameSet {
            n,
            resolution: 1,
            frames: vec![Frame::coordinate(n)],
        }
    }

    /// Deterministic frame net of size `m` (at least 1).
    ///
    /// `n = 1`: directions `e^{i k pi / (2m)}`. `n = 2`: the coordinate frame, the two
    /// lattice-aligned frames `{(1, +-1)/sqrt2}` and `{(1, +-i)/sqrt2}`, then Halton
    /// samples of `SU(2)` over four angles.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if !(1..=2).contains(&n) || m == 0 {
            return Err(Error::InvalidParameter(format!(
                "frame set needs n in {{1,2}} and m >= 1 (n = {n}, m = {m})"
            )));
        }
        let frames = match n {
            1 => (0..m)
                .map(|k| {
                    let th = k as f64 * std::f64::consts::FRAC_PI_2 / m as f64;
                    Frame {
                        dirs: vec![vec![th.cos(), th.sin()]],
                    }
                })
                .collect(),
            _ => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let fixed = [
                    Frame::coordinate(2),
                    Frame {
                        dirs: vec![vec![s, 0.0, s, 0.0], vec![s, 0.0, -s, 0.0]],
                    },
                    Frame {
                        dirs: vec![vec![s, 0.0, 0.0, s], vec![s, 0.0, 0.0, -s]],
                    },
                ];
                let mut frames: Vec<Frame> = fixed.into_iter().take(m).collect();
                let tau = std::f64::consts::TAU;
                let mut idx = 1;
                while frames.len() < m {
                    frames.push(su2_frame(
                        std::f64::consts::FRAC_PI_2 * halton(idx, 2),
                        tau * halton(idx, 3),
                        tau * halton(idx, 5),
                        tau * halton(idx, 7),
                    ));
                    idx += 1;
                }
                frames
            }
        };
        Ok(StencilFrameSet {
            n,
            resolution: m,
            frames,
        })
    }

    /// Coordinate frame for `n = 1`, the 16-frame net for `n = 2`.
    pub fn default_for(n: usize) -> Self {
        let m = if n == 1 { 1 } else { 16 };
        Self::new(n, m).expect("valid default frame set")
    }

    pub fn from_frames(n: usize, mut frames: Vec<Frame>) -> Result<Self> {
        for f in &frames {
            if f.dirs.len() != n || f.dirs.iter().any(|d| d.len() != 2 * n) {
                return Err(Error::InvalidParameter("frame has wrong shape".into()));
            }
            if f.orthonormality_defect() > 1e-12 {
                return Err(Error::InvalidParameter("frame is not unitary".into()));
            }
        }
        let coord = Frame::coordinate(n);
        if !frames.contains(&coord) {
            frames.insert(0, coord);
        }
        let resolution = frames.len();
        Ok(StencilFrameSet {
            n,
            resolution,
            frames,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

/// Linear form `sum w_j u_j + center * u(node) + constant` approximating `u_{v vbar}` at one node.
#[derive(Debug, Clone, Default)]
pub struct DirectionForm {
    pub terms: Vec<(usize, f64)>,
    pub center: f64,
    pub constant: f64,
}

impl DirectionForm {
    #[inline]
    pub fn apply(&self, u: &[f64], u0: f64) -> f64 {
        let mut s = self.constant + self.center * u0;
        for &(j, w) in &self.terms {
            s += w * u[j];
        }
        s
    }

    /// Value at the node that makes the form vanish with neighbors frozen.
    #[inline]
    pub fn balance(&self, u: &[f64]) -> f64 {
        (self.apply(u, 0.0)) / -self.center
    }
}

enum ArmValue {
    Nodes(Vec<(usize, f64)>),
    Boundary(Vec<f64>),
}

enum ArmFailure {
    NeedsBoundary,
    Unresolvable,
}

const LATTICE_EPS: f64 = 1e-9;

/// Arm length for the real direction `w`: the lattice vector length when `w` is
/// parallel to some `m` in `{-1,0,1}^{2n}`, else `h`.
fn arm_length(w: &[f64], h: f64) -> f64 {
    for k2 in 1..=w.len() {
        let k = (k2 as f64).sqrt();
        let on_lattice = w.iter().all(|c| {
            let s = c * k;
            (s - s.round()).abs() < LATTICE_EPS && s.round().abs() <= 1.0
        });
        if on_lattice {
            return k * h;
        }
    }
    h
}

fn resolve_arm(
    grid: &ComplexGrid,
    i: usize,
    w: &[f64],
    len: f64,
    allow_cut: bool,
) -> std::result::Result<(ArmValue, f64), ArmFailure> {
    let h = grid.h();
    let base = grid.offset(i);
    let q: Vec<f64> = base
        .iter()
        .zip(w)
        .map(|(m, c)| *m as f64 + len * c / h)
        .collect();
    let floor: Vec<i32> = q
        .iter()
        .map(|x| {
            let r = x.round();
            if (x - r).abs() < LATTICE_EPS {
                r as i32
            } else {
                x.floor() as i32
            }
        })
        .collect();
    let frac: Vec<f64> = q
        .iter()
        .zip(&floor)
        .map(|(x, f)| {
            let d = x - *f as f64;
            if d < LATTICE_EPS {
                0.0
            } else {
                d
            }
        })
        .collect();
    let active: Vec<usize> = (0..q.len()).filter(|&a| frac[a] > 0.0).collect();
    let mut terms = Vec::with_capacity(1 << active.len());
    let mut corner = floor.clone();
    let mut complete = true;
    for bits in 0..(1usize << active.len()) {
        let mut weight = 1.0;
        for (b, &a) in active.iter().enumerate() {
            if bits >> b & 1 == 1 {
                corner[a] = floor[a] + 1;
                weight *= frac[a];
            } else {
                corner[a] = floor[a];
                weight *= 1.0 - frac[a];
            }
        }
        match grid.lookup(&corner) {
            Some(j) => terms.push((j, weight)),
            None => {
                complete = false;
                break;
            }
        }
    }
    if complete {
        return Ok((ArmValue::Nodes(terms), len));
    }
    let z = grid.point(i);
    match grid.domain().ray_exit(z, w) {
        Some(s) if s <= len * (1.0 + 1e-9) => {
            if !allow_cut {
                return Err(ArmFailure::NeedsBoundary);
            }
            let s = s.min(len);
            let hit = z.iter().zip(w).map(|(a, c)| a + s * c).collect();
            Ok((ArmValue::Boundary(hit), s))
        }
        _ => Err(ArmFailure::Unresolvable),
    }
}

/// Adds `scale * D^2_w u` (Shortley-Weller when an arm is cut) to `form`.
fn add_second_difference(
    grid: &ComplexGrid,
    i: usize,
    w: &[f64],
    len: f64,
    scale: f64,
    boundary: Option<&dyn Fn(&[f64]) -> f64>,
    form: &mut DirectionForm,
) -> std::result::Result<(), ArmFailure> {
    let minus: Vec<f64> = w.iter().map(|c| -c).collect();
    let (plus_val, sp) = resolve_arm(grid, i, w, len, boundary.is_some())?;
    let (minus_val, sm) = resolve_arm(grid, i, &minus, len, boundary.is_some())?;
    let wp = scale * 2.0 / (sp * (sp + sm));
    let wm = scale * 2.0 / (sm * (sp + sm));
    form.center -= scale * 2.0 / (sp * sm);
    for (val, weight) in [(plus_val, wp), (minus_val, wm)] {
        match val {
            ArmValue::Nodes(terms) => {
                for (j, t) in terms {
                    if j == i {
                        form.center += weight * t;
                    } else {
                        form.terms.push((j, weight * t));
                    }
                }
            }
            ArmValue::Boundary(p) => {
                let f = boundary.expect("cut arms only with boundary data");
                form.constant += weight * f(&p);
            }
        }
    }
    Ok(())
}

fn direction_form(
    grid: &ComplexGrid,
    i: usize,
    v: &[f64],
    arm: Option<f64>,
    boundary: Option<&dyn Fn(&[f64]) -> f64>,
) -> std::result::Result<DirectionForm, ArmFailure> {
    let iv = times_i(v);
    let mut form = DirectionForm::default();
    for w in [v, &iv[..]] {
        let len = arm.unwrap_or_else(|| arm_length(w, grid.h()));
        add_second_difference(grid, i, w, len, 0.25, boundary, &mut form)?;
    }
    // merge duplicate neighbors so `apply` stays cheap
    form.terms.sort_by_key(|t| t.0);
    form.terms.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    Ok(form)
}

/// Discretized `u_{v vbar}` at spatial node `node` with arm length `arm`.
///
/// Arms leaving the node set need `boundary` (Dirichlet data on the true boundary).
pub fn dir_second_diff(
    slice: &SliceField,
    node: usize,
    v: &[f64],
    arm: f64,
    boundary: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<f64> {
    let grid = slice.grid();
    if node >= grid.spatial_len() {
        return Err(Error::IndexOutOfRange {
            index: node,
            len: grid.spatial_len(),
        });
    }
    if v.len() != grid.dim() || !(arm > 0.0) {
        return Err(Error::InvalidParameter(
            "bad direction or arm length".into(),
        ));
    }
    let form = direction_form(grid, node, v, Some(arm), boundary)
        .map_err(|_| Error::UnresolvableArm { node })?;
    let u = slice.values();
    Ok(form.apply(u, u[node]))
}

/// Precomputed direction forms for a set of spatial nodes.
#[derive(Debug, Clone)]
pub struct StencilPlan {
    nodes: Vec<usize>,
    /// `forms[p][f][j]`: node `nodes[p]`, frame `f`, direction `j`.
    forms: Vec<Vec<Vec<DirectionForm>>>,
}

impl StencilPlan {
    /// Forms at every interior node; all arms resolve inside the node set.
    pub fn interior(grid: &ComplexGrid, frames: &StencilFrameSet) -> Result<Self> {
        check_frames(grid, frames)?;
        let mut forms = Vec::with_capacity(grid.interior().len());
        for &i in grid.interior() {
            let mut per_node = Vec::with_capacity(frames.frames().len());
            for frame in frames.frames() {
                let dirs = frame
                    .dirs
                    .iter()
                    .map(|v| {
                        direction_form(grid, i, v, None, None)
                            .map_err(|_| Error::UnresolvableArm { node: i })
                    })
                    .collect::<Result<Vec<_>>>()?;
                per_node.push(dirs);
            }
            forms.push(per_node);
        }
        Ok(StencilPlan {
            nodes: grid.interior().to_vec(),
            forms,
        })
    }

    /// Forms at every spatial node, cutting arms at the boundary where `boundary` supplies values.
    ///
    /// Frames whose arms cannot be resolved at a node (interpolation cell straddling
    /// the boundary) are dropped there; the coordinate frame always resolves.
    pub fn with_boundary(
        grid: &ComplexGrid,
        frames: &StencilFrameSet,
        boundary: &dyn Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        check_frames(grid, frames)?;
        let mut forms = Vec::with_capacity(grid.spatial_len());
        for i in 0..grid.spatial_len() {
            let mut per_node = Vec::new();
            for frame in frames.frames() {
                let dirs: std::result::Result<Vec<_>, _> = frame
                    .dirs
                    .iter()
                    .map(|v| direction_form(grid, i, v, None, Some(boundary)))
                    .collect();
                if let Ok(d) = dirs {
                    per_node.push(d);
                }
            }
            if per_node.is_empty() {
                return Err(Error::UnresolvableArm { node: i });
            }
            forms.push(per_node);
        }
        Ok(StencilPlan {
            nodes: (0..grid.spatial_len()).collect(),
            forms,
        })
    }

    /// Spatial node indices covered by the plan.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn forms(&self, p: usize) -> &[Vec<DirectionForm>] {
        &self.forms[p]
    }

    /// Minimum of all directional values at plan position `p`.
    pub fn lambda_min_at(&self, p: usize, u: &[f64]) -> f64 {
        let u0 = u[self.nodes[p]];
        self.forms[p]
            .iter()
            .flatten()
            .map(|f| f.apply(u, u0))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn density_at(&self, p: usize, u: &[f64], conv: MAConvention) -> f64 {
        let u0 = u[self.nodes[p]];
        conv.c_n
            * frame_min_product(
                self.forms[p]
                    .iter()
                    .map(|dirs| dirs.iter().map(|f| f.apply(u, u0))),
            )
    }

    pub fn density_plus_at(&self, p: usize, u: &[f64], conv: MAConvention) -> f64 {
        if self.lambda_min_at(p, u) >= 0.0 {
            self.density_at(p, u, conv)
        } else {
            0.0
        }
    }

    pub fn lambda_min(&self, u: &[f64]) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|p| self.lambda_min_at(p, u))
            .collect()
    }

    pub fn density(&self, u: &[f64], conv: MAConvention) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|p| self.density_at(p, u, conv))
            .collect()
    }

    pub fn density_plus(&self, u: &[f64], conv: MAConvention) -> Vec<f64> {
        (0..self.nodes.len())
            .map(|p| self.density_plus_at(p, u, conv))
            .collect()
    }
}

fn check_frames(grid: &ComplexGrid, frames: &StencilFrameSet) -> Result<()> {
    if frames.n() != grid.n() {
        return Err(Error::InvalidParameter(format!(
            "frame set is for n = {}, grid has n = {}",
            frames.n(),
            grid.n()
        )));
    }
    Ok(())
}

/// `min_frames prod_j max(d_j, 0)`.
pub fn frame_min_product<I, J>(frames: I) -> f64
where
    I: IntoIterator<Item = J>,
    J: IntoIterator<Item = f64>,
{
    frames
        .into_iter()
        .map(|dirs| dirs.into_iter().map(|d| d.max(0.0)).product::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Directional values of a function (not a lattice field) at `z`, arm length `arm`.
///
/// Used for smooth test functions, where no interpolation is needed.
pub fn function_frame_values(
    f: impl Fn(&[f64]) -> f64,
    z: &[f64],
    frames: &StencilFrameSet,
    arm: f64,
) -> Vec<Vec<f64>> {
    let f0 = f(z);
    let mut p = z.to_vec();
    let mut eval = |w: &[f64], s: f64| {
        for (a, (zi, wi)) in z.iter().zip(w).enumerate() {
            p[a] = zi + s * wi;
        }
        f(&p)
    };
    frames
        .frames()
        .iter()
        .map(|frame| {
            frame
                .dirs
                .iter()
                .map(|v| {
                    let iv = times_i(v);
                    (eval(v, arm) + eval(v, -arm) + eval(&iv, arm) + eval(&iv, -arm) - 4.0 * f0)
                        / (4.0 * arm * arm)
                })
                .collect()
        })
        .collect()
}

/// Per-interior-node minimum directional value (aligned with `grid.interior()`).
pub fn lambda_min(slice: &SliceField, frames: &StencilFrameSet) -> Result<Vec<f64>> {
    let plan = StencilPlan::interior(slice.grid(), frames)?;
    Ok(plan.lambda_min(slice.values()))
}

/// Per-interior-node discrete Monge-Ampere density.
pub fn ma_density(
    slice: &SliceField,
    frames: &StencilFrameSet,
    conv: MAConvention,
) -> Result<Vec<f64>> {
    let plan = StencilPlan::interior(slice.grid(), frames)?;
    Ok(plan.density(slice.values(), conv))
}

/// Density truncated to zero where the discrete Levi form is not semipositive.
pub fn ma_density_plus(
    slice: &SliceField,
    frames: &StencilFrameSet,
    conv: MAConvention,
) -> Result<Vec<f64>> {
    let plan = StencilPlan::interior(slice.grid(), frames)?;
    Ok(plan.density_plus(slice.values(), conv))
}
