//! Space-time lattice over `]0,T[ x Omega` and its parabolic-boundary classification.
//!
//! Spatial nodes are the points `center + h*m`, `m` an integer vector in `R^{2n}`,
//! lying strictly inside the domain. Real coordinates are ordered
//! `(x1, y1, x2, y2)` with `z_j = x_j + i y_j`.
//!
//! A spatial node is *interior* when every node of the unit lattice cube around
//! it (`m + s`, `s` in `{-1,0,1}^{2n}`) is inside the domain; otherwise it belongs
//! to the boundary collar. On a ball the collar has width at most `h*sqrt(2n)`,
//! and every stencil arm of length `h` from an interior node can be resolved by
//! lattice lookup or multilinear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Ball,
    Polydisc,
}

/// A ball or polydisc in `C^n`, `n` in `{1, 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub n: usize,
    /// `2n` real coordinates.
    pub center: Vec<f64>,
    /// One radius for a ball, `n` polyradii for a polydisc.
    pub radii: Vec<f64>,
}

impl DomainSpec {
    pub fn ball(n: usize, radius: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Ball,
            n,
            center: vec![0.0; 2 * n],
            radii: vec![radius],
        }
    }

    pub fn unit_ball(n: usize) -> Self {
        Self::ball(n, 1.0)
    }

    pub fn polydisc(radii: Vec<f64>) -> Self {
        let n = radii.len();
        DomainSpec {
            kind: DomainKind::Polydisc,
            n,
            center: vec![0.0; 2 * n],
            radii,
        }
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = center;
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(Error::BadDomain(format!(
                "complex dimension must be 1 or 2, got {}",
                self.n
            )));
        }
        if self.center.len() != self.dim() {
            return Err(Error::BadDomain(format!(
                "center needs {} real coordinates, got {}",
                self.dim(),
                self.center.len()
            )));
        }
        let want = match self.kind {
            DomainKind::Ball => 1,
            DomainKind::Polydisc => self.n,
        };
        if self.radii.len() != want {
            return Err(Error::BadDomain(format!(
                "expected {want} radii, got {}",
                self.radii.len()
            )));
        }
        if self.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::BadDomain("radii must be positive".into()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadDomain("center must be finite".into()));
        }
        Ok(())
    }

    /// Radius bounding the real coordinate `axis`.
    fn axis_radius(&self, axis: usize) -> f64 {
        match self.kind {
            DomainKind::Ball => self.radii[0],
            DomainKind::Polydisc => self.radii[axis / 2],
        }
    }

    /// Defining function: negative exactly on the domain.
    ///
    /// For the ball this is `|z - c|^2 - r^2`, smooth and strictly psh.
    pub fn rho(&self, x: &[f64]) -> f64 {
        match self.kind {
            DomainKind::Ball => {
                let d2: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                d2 - self.radii[0] * self.radii[0]
            }
            DomainKind::Polydisc => (0..self.n)
                .map(|j| {
                    let dx = x[2 * j] - self.center[2 * j];
                    let dy = x[2 * j + 1] - self.center[2 * j + 1];
                    dx * dx + dy * dy - self.radii[j] * self.radii[j]
                })
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.rho(x) < 0.0
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Ball => 2.0 * self.radii[0],
            DomainKind::Polydisc => 2.0 * self.radii.iter().map(|r| r * r).sum::<f64>().sqrt(),
        }
    }

    /// Smallest `s > 0` with `x + s*v` on the boundary, for `x` inside.
    pub fn ray_exit(&self, x: &[f64], v: &[f64]) -> Option<f64> {
        let exit = |dx: &[f64], dv: &[f64], r: f64| -> Option<f64> {
            let a: f64 = dv.iter().map(|w| w * w).sum();
            if a <= 0.0 {
                return None;
            }
            let b: f64 = dx.iter().zip(dv).map(|(p, w)| p * w).sum();
            let c: f64 = dx.iter().map(|p| p * p).sum::<f64>() - r * r;
            let disc = b * b - a * c;
            if disc < 0.0 {
                return None;
            }
            let s = (-b + disc.sqrt()) / a;
            (s > 0.0).then_some(s)
        };
        let rel: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        match self.kind {
            DomainKind::Ball => exit(&rel, v, self.radii[0]),
            DomainKind::Polydisc => (0..self.n)
                .filter_map(|j| exit(&rel[2 * j..2 * j + 2], &v[2 * j..2 * j + 2], self.radii[j]))
                .min_by(f64::total_cmp),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialClass {
    Interior,
    Boundary,
}

/// Class of a space-time node against the parabolic boundary `{0} x Omega U [0,T[ x dOmega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    SpatialBoundary,
    InitialSlice,
}

/// Collar constant: boundary nodes lie within `h * kappa` of the boundary.
pub fn collar_kappa(n: usize) -> f64 {
    ((2 * n) as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct ComplexGrid {
    domain: DomainSpec,
    h: f64,
    dt: f64,
    t_final: f64,
    steps: usize,
    coords: Vec<f64>,
    offsets: Vec<i32>,
    spatial_class: Vec<SpatialClass>,
    interior: Vec<usize>,
    extent: Vec<i32>,
    lookup: Vec<u32>,
}

const MISSING: u32 = u32::MAX;

impl PartialEq for ComplexGrid {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.h == other.h
            && self.dt == other.dt
            && self.t_final == other.t_final
            && self.steps == other.steps
    }
}

/// Builds the lattice over `]0,T[ x Omega` with time slices `t_k = k*dt`, `k = 0..=T/dt`.
pub fn build_grid(domain: DomainSpec, h: f64, dt: f64, t_final: f64) -> Result<ComplexGrid> {
    if !(h > 0.0) || !(dt > 0.0) || !(t_final > 0.0) || !h.is_finite() || !dt.is_finite() {
        return Err(Error::BadSpacing { h, dt, t_final });
    }
    domain.validate()?;
    let steps_f = (t_final / dt).round();
    if steps_f < 1.0 || ((steps_f * dt) - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::BadSpacing { h, dt, t_final });
    }
    let steps = steps_f as usize;
    let dim = domain.dim();

    let extent: Vec<i32> = (0..dim)
        .map(|a| (domain.axis_radius(a) / h).ceil() as i32 + 1)
        .collect();
    let box_len: usize = extent.iter().map(|m| (2 * m + 1) as usize).product();
    let mut lookup = vec![MISSING; box_len];

    let mut coords = Vec::new();
    let mut offsets = Vec::new();
    let mut m: Vec<i32> = extent.iter().map(|e| -e).collect();
    let mut x = vec![0.0; dim];
    // First axis varies slowest, so the enumeration is lexicographic in (x1, y1, x2, y2).
    'outer: loop {
        for a in 0..dim {
            x[a] = domain.center[a] + h * m[a] as f64;
        }
        if domain.contains(&x) {
            let idx = coords.len() / dim;
            lookup[box_index(&extent, &m).expect("inside box")] = idx as u32;
            coords.extend_from_slice(&x);
            offsets.extend_from_slice(&m);
        }
        let mut a = dim;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            if m[a] < extent[a] {
                m[a] += 1;
                break;
            }
            m[a] = -extent[a];
        }
    }

    let spatial = coords.len() / dim;
    let cube = unit_cube(dim);
    let mut spatial_class = Vec::with_capacity(spatial);
    let mut interior = Vec::new();
    let mut shifted = vec![0i32; dim];
    for i in 0..spatial {
        let base = &offsets[i * dim..(i + 1) * dim];
        let full = cube.iter().all(|s| {
            for a in 0..dim {
                shifted[a] = base[a] + s[a];
            }
            box_index(&extent, &shifted).is_some_and(|b| lookup[b] != MISSING)
        });
        if full {
            spatial_class.push(SpatialClass::Interior);
            interior.push(i);
        } else {
            spatial_class.push(SpatialClass::Boundary);
        }
    }
    if interior.is_empty() {
        return Err(Error::EmptyInterior);
    }
    Ok(ComplexGrid {
        domain,
        h,
        dt,
        t_final,
        steps,
        coords,
        offsets,
        spatial_class,
        interior,
        extent,
        lookup,
    })
}

fn box_index(extent: &[i32], m: &[i32]) -> Option<usize> {
    let mut idx = 0usize;
    for (mi, e) in m.iter().zip(extent) {
        if mi.abs() > *e {
            return None;
        }
        idx = idx * (2 * *e + 1) as usize + (mi + e) as usize;
    }
    Some(idx)
}

pub(crate) fn unit_cube(dim: usize) -> Vec<Vec<i32>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                [-1, 0, 1].into_iter().map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

impl ComplexGrid {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }
    pub fn n(&self) -> usize {
        self.domain.n
    }
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t_final(&self) -> f64 {
        self.t_final
    }
    /// Number of time steps `K`; slices are `0..=K`.
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn slices(&self) -> usize {
        self.steps + 1
    }
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
    pub fn spatial_len(&self) -> usize {
        self.spatial_class.len()
    }
    pub fn node_count(&self) -> usize {
        self.spatial_len() * self.slices()
    }
    /// Global index of space-time node `(t_k, z_i)`.
    pub fn node(&self, k: usize, i: usize) -> usize {
        k * self.spatial_len() + i
    }
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node / self.spatial_len(), node % self.spatial_len())
    }
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }
    pub fn offset(&self, i: usize) -> &[i32] {
        let d = self.dim();
        &self.offsets[i * d..(i + 1) * d]
    }
    /// Node at integer lattice offset `m`, if it lies in the domain.
    pub fn lookup(&self, m: &[i32]) -> Option<usize> {
        box_index(&self.extent, m)
            .map(|b| self.lookup[b])
            .filter(|&v| v != MISSING)
            .map(|v| v as usize)
    }
    pub fn spatial_class(&self, i: usize) -> SpatialClass {
        self.spatial_class[i]
    }
    pub fn is_interior(&self, i: usize) -> bool {
        self.spatial_class[i] == SpatialClass::Interior
    }
    /// Spatial indices of interior nodes, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn class(&self, k: usize, i: usize) -> NodeClass {
        if k == 0 {
            NodeClass::InitialSlice
        } else if self.spatial_class[i] == SpatialClass::Boundary {
            NodeClass::SpatialBoundary
        } else {
            NodeClass::Interior
        }
    }

    /// `true` for initial-slice and spatial-boundary nodes.
    pub fn on_parabolic_boundary(&self, node: usize) -> bool {
        let (k, i) = self.split(node);
        self.class(k, i) != NodeClass::Interior
    }

    /// Distance along the unit direction `v` from `z` to the boundary, and the hit point.
    pub fn boundary_projection(&self, z: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>)> {
        let norm: f64 = v.iter().map(|w| w * w).sum::<f64>().sqrt();
        match self.domain.ray_exit(z, v) {
            Some(s) if norm > 0.0 && s <= self.domain.diameter() / norm + 1e-12 => {
                let hit = z.iter().zip(v).map(|(a, w)| a + s * w).collect();
                Ok((s, hit))
            }
            _ => Err(Error::NoIntersection {
                origin: z.to_vec(),
                direction: v.to_vec(),
            }),
        }
    }
}

/// Per-node class for every space-time node, in global node order.
pub fn classify_parabolic_boundary(grid: &ComplexGrid) -> Vec<NodeClass> {
    (0..grid.slices())
        .flat_map(|k| (0..grid.spatial_len()).map(move |i| (k, i)))
        .map(|(k, i)| grid.class(k, i))
        .collect()
}
