//! Discrete space-time fields, slices, time derivatives and the parabolic-potential test.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, NodeClass};
use crate::stencil::{StencilFrameSet, StencilPlan};

/// Values on the spatial nodes of time slice `k`.
#[derive(Debug, Clone)]
pub struct SliceField {
    grid: Arc<ComplexGrid>,
    k: usize,
    values: Vec<f64>,
}

impl SliceField {
    pub fn new(grid: Arc<ComplexGrid>, k: usize, values: Vec<f64>) -> Result<Self> {
        if k >= grid.slices() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: grid.slices(),
            });
        }
        check_values(&values, grid.spatial_len())?;
        Ok(SliceField { grid, k, values })
    }

    pub fn from_fn(grid: Arc<ComplexGrid>, k: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.spatial_len()).map(|i| f(grid.point(i))).collect();
        SliceField { grid, k, values }
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }
    pub fn grid_arc(&self) -> &Arc<ComplexGrid> {
        &self.grid
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn time(&self) -> f64 {
        self.grid.time(self.k)
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// One real value per space-time node, in the grid's node order.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: Arc<ComplexGrid>,
    values: Vec<f64>,
}

fn check_values(values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            got: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Forward,
    Backward,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    All,
    Interior,
}

impl SpaceTimeField {
    pub fn new(grid: Arc<ComplexGrid>, values: Vec<f64>) -> Result<Self> {
        check_values(&values, grid.node_count())?;
        Ok(SpaceTimeField { grid, values })
    }

    /// Samples `f(t, x)` at every node.
    pub fn from_fn(grid: Arc<ComplexGrid>, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let s = grid.spatial_len();
        let values = (0..grid.node_count())
            .map(|idx| f(grid.time(idx / s), grid.point(idx % s)))
            .collect();
        SpaceTimeField { grid, values }
    }

    pub fn constant(grid: Arc<ComplexGrid>, c: f64) -> Self {
        let values = vec![c; grid.node_count()];
        SpaceTimeField { grid, values }
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }
    pub fn grid_arc(&self) -> &Arc<ComplexGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[self.grid.node(k, i)]
    }

    pub fn slice_values(&self, k: usize) -> &[f64] {
        let s = self.grid.spatial_len();
        &self.values[k * s..(k + 1) * s]
    }

    pub fn slice(&self, k: usize) -> Result<SliceField> {
        if k >= self.grid.slices() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.grid.slices(),
            });
        }
        Ok(SliceField {
            grid: self.grid.clone(),
            k,
            values: self.slice_values(k).to_vec(),
        })
    }

    pub fn set_slice(&mut self, slice: &SliceField) -> Result<()> {
        self.same_grid_as(slice.grid())?;
        let s = self.grid.spatial_len();
        self.values[slice.k * s..(slice.k + 1) * s].copy_from_slice(&slice.values);
        Ok(())
    }

    pub fn same_grid_as(&self, other: &ComplexGrid) -> Result<()> {
        if *self.grid == *other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|v| f(*v)).collect(),
        )
    }

    /// Applies `f(t, x, value)` nodewise.
    pub fn map_nodes(&self, f: impl Fn(f64, &[f64], f64) -> f64) -> Result<Self> {
        let s = self.grid.spatial_len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, v)| f(self.grid.time(idx / s), self.grid.point(idx % s), *v))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid_as(other.grid())?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn max(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, f64::max)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Self> {
        self.map(|v| v + c)
    }

    /// Finite-difference time derivative on every node.
    ///
    /// Forward: `(u_{k+1} - u_k)/dt`, last slice copies the previous one. Backward is the
    /// mirror image. Centered uses `(u_{k+1} - u_{k-1})/(2dt)` inside and one-sided ends.
    pub fn time_derivative(&self, mode: DerivativeMode) -> Result<Self> {
        let slices = self.grid.slices();
        if slices < 2 {
            return Err(Error::TooFewSlices {
                needed: 2,
                have: slices,
            });
        }
        let s = self.grid.spatial_len();
        let dt = self.grid.dt();
        let last = slices - 1;
        let u = |k: usize, i: usize| self.values[k * s + i];
        let mut out = vec![0.0; self.values.len()];
        for k in 0..slices {
            for i in 0..s {
                let fwd = |k: usize| (u(k + 1, i) - u(k, i)) / dt;
                out[k * s + i] = match mode {
                    DerivativeMode::Forward => fwd(k.min(last - 1)),
                    DerivativeMode::Backward => fwd(k.max(1) - 1),
                    DerivativeMode::Centered => {
                        if k == 0 {
                            fwd(0)
                        } else if k == last {
                            fwd(last - 1)
                        } else {
                            (u(k + 1, i) - u(k - 1, i)) / (2.0 * dt)
                        }
                    }
                };
            }
        }
        Self::new(self.grid.clone(), out)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `max |a - b|` over all nodes or over interior space-time nodes.
pub fn linf_distance(a: &SpaceTimeField, b: &SpaceTimeField, region: Region) -> Result<f64> {
    a.same_grid_as(b.grid())?;
    let g = a.grid();
    let s = g.spatial_len();
    Ok(a.values
        .iter()
        .zip(&b.values)
        .enumerate()
        .filter(|(idx, _)| match region {
            Region::All => true,
            Region::Interior => g.class(idx / s, idx % s) == NodeClass::Interior,
        })
        .fold(0.0, |m, (_, (x, y))| m.max((x - y).abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeMargin {
    pub node: usize,
    pub margin: f64,
}

/// Outcome of a nodal inequality check: pass iff the worst margin is at least `-tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub worst_node: usize,
    pub tol: f64,
    pub margins: Option<Vec<NodeMargin>>,
}

impl CheckReport {
    /// Reduces `(node, margin)` pairs; ties go to the lowest node index.
    pub fn from_margins(margins: Vec<NodeMargin>, tol: f64, keep: bool) -> Self {
        let mut worst = f64::INFINITY;
        let mut worst_node = margins.first().map_or(0, |m| m.node);
        for m in &margins {
            if m.margin < worst || (m.margin == worst && m.node < worst_node) {
                worst = m.margin;
                worst_node = m.node;
            }
        }
        CheckReport {
            verdict: if worst >= -tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            worst_margin: worst,
            worst_node,
            tol,
            margins: keep.then_some(margins),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

/// Every slice must have discrete Levi form `>= -tol` at every interior node.
pub fn is_parabolic_potential(field: &SpaceTimeField, tol: f64) -> Result<CheckReport> {
    let frames = StencilFrameSet::default_for(field.grid().n());
    is_parabolic_potential_with(field, &frames, tol)
}

pub fn is_parabolic_potential_with(
    field: &SpaceTimeField,
    frames: &StencilFrameSet,
    tol: f64,
) -> Result<CheckReport> {
    let g = field.grid();
    let plan = StencilPlan::interior(g, frames)?;
    let plan = &plan;
    let margins = (0..g.slices())
        .flat_map(|k| {
            let u = field.slice_values(k);
            plan.nodes()
                .iter()
                .enumerate()
                .map(move |(p, &i)| NodeMargin {
                    node: g.node(k, i),
                    margin: plan.lambda_min_at(p, u),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(CheckReport::from_margins(margins, tol, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use proptest::prelude::*;

    fn grid(t: f64) -> Arc<ComplexGrid> {
        Arc::new(build_grid(DomainSpec::unit_ball(1), 0.25, 0.1, t).unwrap())
    }

    #[test]
    fn slicing() {
        let g = grid(0.3);
        let f = SpaceTimeField::constant(g.clone(), 3.0);
        assert!(f.slice(2).unwrap().values().iter().all(|v| *v == 3.0));
        let f = SpaceTimeField::from_fn(g.clone(), |t, _| t);
        assert!(f
            .slice(2)
            .unwrap()
            .values()
            .iter()
            .all(|v| (v - 0.2).abs() < 1e-15));
        assert!(matches!(f.slice(4), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn derivatives() {
        let g = grid(0.3);
        let lin = SpaceTimeField::from_fn(g.clone(), |t, x| t + x[0]);
        for mode in [
            DerivativeMode::Forward,
            DerivativeMode::Backward,
            DerivativeMode::Centered,
        ] {
            let d = lin.time_derivative(mode).unwrap();
            assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
        let sq = SpaceTimeField::from_fn(g.clone(), |t, _| t * t);
        let d = sq.time_derivative(DerivativeMode::Forward).unwrap();
        assert!((d.at(0, 0) - 0.1).abs() < 1e-12);
        let single = Arc::new(build_grid(DomainSpec::unit_ball(1), 0.25, 0.1, 0.1).unwrap());
        // one step still has two slices; a derivative needs both
        assert!(SpaceTimeField::constant(single, 0.0)
            .time_derivative(DerivativeMode::Backward)
            .is_ok());
    }

    #[test]
    fn distances() {
        let g = Arc::new(build_grid(DomainSpec::unit_ball(1), 0.25, 0.1, 0.5).unwrap());
        let a = SpaceTimeField::from_fn(g.clone(), |t, x| x[0] * t);
        assert_eq!(linf_distance(&a, &a, Region::All).unwrap(), 0.0);
        let one = SpaceTimeField::constant(g.clone(), 1.0);
        let m2 = SpaceTimeField::constant(g.clone(), -2.0);
        assert_eq!(linf_distance(&one, &m2, Region::All).unwrap(), 3.0);
        let b = a.map_nodes(|t, _, v| v + t).unwrap();
        assert!((linf_distance(&a, &b, Region::All).unwrap() - 0.5).abs() < 1e-12);
        let other = SpaceTimeField::constant(grid(0.3), 1.0);
        assert_eq!(
            linf_distance(&one, &other, Region::All),
            Err(Error::GridMismatch)
        );
    }

    #[test]
    fn nonfinite_rejected() {
        let g = grid(0.1);
        let mut v = vec![0.0; g.node_count()];
        v[3] = f64::NAN;
        assert_eq!(SpaceTimeField::new(g, v).unwrap_err(), Error::NonFinite(3));
    }

    #[test]
    fn potential_examples() {
        let g = grid(0.2);
        let r = is_parabolic_potential(
            &SpaceTimeField::from_fn(g.clone(), |_, x| x[0] * x[0] + x[1] * x[1]),
            1e-8,
        )
        .unwrap();
        assert!(r.passed());
        assert!((r.worst_margin - 1.0).abs() < 1e-9);
        let r = is_parabolic_potential(
            &SpaceTimeField::from_fn(g.clone(), |_, x| -(x[0] * x[0] + x[1] * x[1])),
            1e-8,
        )
        .unwrap();
        assert!(!r.passed());
        let r = is_parabolic_potential(
            &SpaceTimeField::from_fn(g.clone(), |_, x| x[0] * x[0] - x[1] * x[1]),
            1e-8,
        )
        .unwrap();
        assert!(r.passed());
        assert!(r.worst_margin.abs() < 1e-9);
    }

    #[test]
    fn report_ties_take_lowest_node() {
        let r = CheckReport::from_margins(
            vec![
                NodeMargin {
                    node: 7,
                    margin: -1.0,
                },
                NodeMargin {
                    node: 3,
                    margin: -1.0,
                },
                NodeMargin {
                    node: 5,
                    margin: 0.0,
                },
            ],
            0.5,
            false,
        );
        assert_eq!(r.worst_node, 3);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    proptest! {
        #[test]
        fn linf_is_a_metric(a in proptest::collection::vec(-5.0f64..5.0, 3),
                            b in proptest::collection::vec(-5.0f64..5.0, 3),
                            c in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let g = grid(0.1);
            let mk = |p: &[f64]| {
                let p = p.to_vec();
                SpaceTimeField::from_fn(g.clone(), move |t, x| p[0] * t + p[1] * x[0] + p[2] * x[1] * x[1])
            };
            let (fa, fb, fc) = (mk(&a), mk(&b), mk(&c));
            let ab = linf_distance(&fa, &fb, Region::All).unwrap();
            let ba = linf_distance(&fb, &fa, Region::All).unwrap();
            let ac = linf_distance(&fa, &fc, Region::All).unwrap();
            let cb = linf_distance(&fc, &fb, Region::All).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn max_of_potentials_is_potential(w1 in proptest::collection::vec(-1.0f64..1.0, 6),
                                          w2 in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let g = grid(0.2);
            let mk = |w: &[f64]| {
                let w = w.to_vec();
                SpaceTimeField::from_fn(g.clone(), move |t, x| {
                    let s = w[0] * w[0] + w[1] * w[1];
                    s * (x[0] * x[0] + x[1] * x[1]) + w[2] * (x[0] * x[0] - x[1] * x[1])
                        + w[3] * x[0] * x[1] + w[4] * x[0] + w[5] * t
                })
            };
            let tol = 1e-8;
            let (u, v) = (mk(&w1), mk(&w2));
            prop_assert!(is_parabolic_potential(&u, tol).unwrap().passed());
            prop_assert!(is_parabolic_potential(&v, tol).unwrap().passed());
            prop_assert!(is_parabolic_potential(&u.max(&v).unwrap(), tol).unwrap().passed());
        }
    }
}
