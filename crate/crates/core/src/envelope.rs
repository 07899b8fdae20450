//! Plurisubharmonic envelope of an obstacle on a slice, and Perron envelopes of families.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{SliceField, SpaceTimeField};
use crate::stencil::{StencilFrameSet, StencilPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sweep {
    /// order-independent, node-parallel
    #[default]
    Jacobi,
    /// in-place lexicographic sweeps; converges faster, result depends on order within `tol`
    GaussSeidel,
}

#[derive(Debug, Clone)]
pub struct EnvelopeOptions {
    pub frames: StencilFrameSet,
    pub tol: f64,
    pub max_iter: usize,
    pub sweep: Sweep,
}

impl EnvelopeOptions {
    pub fn new(n: usize) -> Self {
        EnvelopeOptions {
            frames: StencilFrameSet::default_for(n),
            tol: 1e-10,
            max_iter: 1_000_000,
            sweep: Sweep::Jacobi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Envelope {
    pub slice: SliceField,
    pub iterations: usize,
    /// `false` when `max_iter` ran out; `slice` is then the last iterate
    pub converged: bool,
    pub max_update: f64,
}

/// Largest discrete psh function below `obstacle`.
///
/// Iterates `u(z) <- min(obstacle(z), min_d balance_d(u))`, where `balance_d` is the value
/// at `z` zeroing the directional form `d` with neighbors frozen, starting from the obstacle.
/// Nodes outside the interior are held at the obstacle unless `boundary` supplies Dirichlet
/// data on the true boundary, in which case their cut arms use it.
pub fn psh_envelope_with(
    obstacle: &SliceField,
    opts: &EnvelopeOptions,
    boundary: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<Envelope> {
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "max_iter must be at least 1".into(),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let grid = obstacle.grid();
    let plan = match boundary {
        Some(b) => StencilPlan::with_boundary(grid, &opts.frames, b)?,
        None => StencilPlan::interior(grid, &opts.frames)?,
    };
    let obs = obstacle.values();
    let target = |p: usize, u: &[f64]| -> f64 {
        let i = plan.nodes()[p];
        plan.forms(p)
            .iter()
            .flatten()
            .map(|f| f.balance(u))
            .fold(obs[i], f64::min)
    };
    let mut u = obs.to_vec();
    let mut iterations = 0;
    let mut max_update = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        max_update = match opts.sweep {
            Sweep::Jacobi => {
                let next: Vec<f64> = (0..plan.nodes().len())
                    .into_par_iter()
                    .map(|p| target(p, &u))
                    .collect();
                let mut m: f64 = 0.0;
                for (p, v) in next.into_iter().enumerate() {
                    let i = plan.nodes()[p];
                    m = m.max((u[i] - v).abs());
                    u[i] = v;
                }
                m
            }
            Sweep::GaussSeidel => {
                let mut m: f64 = 0.0;
                for p in 0..plan.nodes().len() {
                    let v = target(p, &u);
                    let i = plan.nodes()[p];
                    m = m.max((u[i] - v).abs());
                    u[i] = v;
                }
                m
            }
        };
        if max_update < opts.tol {
            break;
        }
    }
    Ok(Envelope {
        slice: SliceField::new(obstacle.grid_arc().clone(), obstacle.k(), u)?,
        iterations,
        converged: max_update < opts.tol,
        max_update,
    })
}

/// [`psh_envelope_with`] with Jacobi sweeps and no boundary data.
pub fn psh_envelope(
    obstacle: &SliceField,
    frames: &StencilFrameSet,
    tol: f64,
    max_iter: usize,
) -> Result<Envelope> {
    let opts = EnvelopeOptions {
        frames: frames.clone(),
        tol,
        max_iter,
        sweep: Sweep::Jacobi,
    };
    psh_envelope_with(obstacle, &opts, None)
}

/// Slice-wise envelope of a space-time field; `converged` is the conjunction over slices.
pub fn psh_envelope_field(
    v: &SpaceTimeField,
    opts: &EnvelopeOptions,
) -> Result<(SpaceTimeField, bool)> {
    let mut out = v.clone();
    let mut converged = true;
    for k in 0..v.grid().slices() {
        let env = psh_envelope_with(&v.slice(k)?, opts, None)?;
        converged &= env.converged;
        out.set_slice(&env.slice)?;
    }
    Ok((out, converged))
}

/// Pointwise maximum of a family on one grid.
pub fn perron_envelope(family: &[SpaceTimeField]) -> Result<SpaceTimeField> {
    let (first, rest) = family.split_first().ok_or(Error::EmptyFamily)?;
    rest.iter().try_fold(first.clone(), |acc, u| acc.max(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{is_parabolic_potential, Region};
    use crate::grid::{build_grid, ComplexGrid, DomainSpec};
    use crate::stencil::lambda_min;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn disc(h: f64) -> Arc<ComplexGrid> {
        Arc::new(build_grid(DomainSpec::unit_ball(1), h, 0.1, 0.2).unwrap())
    }

    fn abs2(x: &[f64]) -> f64 {
        x.iter().map(|c| c * c).sum()
    }

    #[test]
    fn psh_obstacles_are_fixed() {
        let g = disc(0.1);
        let fs = StencilFrameSet::default_for(1);
        let v = SliceField::from_fn(g.clone(), 0, abs2);
        let e = psh_envelope(&v, &fs, 1e-12, 10).unwrap();
        assert!(e.converged && e.iterations == 1);
        assert_eq!(e.slice.values(), v.values());
        let c = SliceField::from_fn(g.clone(), 0, |_| 0.25);
        assert_eq!(
            psh_envelope(&c, &fs, 1e-12, 10).unwrap().slice.values(),
            c.values()
        );
        assert!(psh_envelope(&c, &fs, 1e-12, 0).is_err());
    }

    #[test]
    fn radial_obstacle_with_boundary_data() {
        let g = disc(0.1);
        let mut opts = EnvelopeOptions::new(1);
        opts.sweep = Sweep::GaussSeidel;
        let v = SliceField::from_fn(g.clone(), 0, |x| -abs2(x));
        let e = psh_envelope_with(&v, &opts, Some(&|x: &[f64]| -abs2(x))).unwrap();
        assert!(e.converged);
        for u in e.slice.values() {
            assert!((u + 1.0).abs() < 1e-7, "{u}");
        }
    }

    #[test]
    fn radial_obstacle_pinned_collar() {
        for h in [0.2, 0.1] {
            let g = disc(h);
            let v = SliceField::from_fn(g.clone(), 0, |x| -abs2(x));
            let e = psh_envelope(&v, &StencilFrameSet::default_for(1), 1e-11, 1_000_000).unwrap();
            assert!(e.converged);
            for &i in g.interior() {
                let u = e.slice.values()[i];
                assert!((u + 1.0).abs() < 4.0 * h, "h {h}: {u}");
                assert!(u <= v.values()[i] + 1e-12);
            }
            let lm = lambda_min(&e.slice, &StencilFrameSet::default_for(1)).unwrap();
            assert!(lm.iter().all(|l| *l >= -1e-7));
        }
    }

    #[test]
    fn complementarity_and_idempotence() {
        let g = disc(0.125);
        let fs = StencilFrameSet::default_for(1);
        let v = SliceField::from_fn(g.clone(), 0, |x| (3.0 * x[0]).sin() - x[1] * x[1]);
        let e = psh_envelope(&v, &fs, 1e-12, 1_000_000).unwrap();
        let lm = lambda_min(&e.slice, &fs).unwrap();
        for (p, &i) in g.interior().iter().enumerate() {
            let gap = v.values()[i] - e.slice.values()[i];
            assert!(gap >= -1e-12);
            assert!(lm[p] >= -1e-8);
            assert!(gap < 1e-9 || lm[p] < 1e-8, "node {i}");
        }
        let again = psh_envelope(&e.slice, &fs, 1e-12, 1_000_000).unwrap();
        let d = again
            .slice
            .values()
            .iter()
            .zip(e.slice.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-9);
    }

    #[test]
    fn two_dimensional_quadratic_obstacle() {
        let g = Arc::new(build_grid(DomainSpec::unit_ball(2), 0.25, 0.1, 0.1).unwrap());
        let fs = StencilFrameSet::default_for(2);
        let v = SliceField::from_fn(g.clone(), 0, |x| x[0] * x[0] - 0.5 * x[2] * x[2] + x[3]);
        let e = psh_envelope(&v, &fs, 1e-11, 1_000_000).unwrap();
        assert!(e.converged);
        let lm = lambda_min(&e.slice, &fs).unwrap();
        assert!(lm.iter().all(|l| *l >= -1e-7));
    }

    #[test]
    fn perron_examples() {
        let g = disc(0.25);
        let u = SpaceTimeField::from_fn(g.clone(), |t, x| t + abs2(x));
        assert!(matches!(perron_envelope(&[]), Err(Error::EmptyFamily)));
        assert_eq!(perron_envelope(&[u.clone()]).unwrap().values(), u.values());
        let fam: Vec<_> = [0.0, 0.5, 1.0]
            .iter()
            .map(|c| u.add_scalar(-c).unwrap())
            .collect();
        let p = perron_envelope(&fam).unwrap();
        assert_eq!(
            crate::field::linf_distance(&p, &u, Region::All).unwrap(),
            0.0
        );
        let other = Arc::new(build_grid(DomainSpec::unit_ball(1), 0.2, 0.1, 0.2).unwrap());
        let w = SpaceTimeField::constant(other, 0.0);
        assert!(matches!(perron_envelope(&[u, w]), Err(Error::GridMismatch)));
    }

    #[test]
    fn slicewise_envelope_is_potential() {
        let g = disc(0.2);
        let v = SpaceTimeField::from_fn(g.clone(), |t, x| (1.0 - t) * x[0].abs() - x[1] * x[1]);
        let (p, ok) = psh_envelope_field(&v, &EnvelopeOptions::new(1)).unwrap();
        assert!(ok);
        assert!(is_parabolic_potential(&p, 1e-7).unwrap().passed());
    }

    fn random_obstacle(g: &Arc<ComplexGrid>, c: &[f64]) -> SliceField {
        let c = c.to_vec();
        SliceField::from_fn(g.clone(), 0, move |x| {
            c[0] * x[0] + c[1] * x[1] * x[1] + c[2] * (2.0 * x[0] * x[1]).sin() - c[3] * x[0] * x[0]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn monotone_and_concave_in_obstacle(
            a in prop::collection::vec(-1.0..1.0f64, 4),
            b in prop::collection::vec(-1.0..1.0f64, 4),
            lift in 0.0..0.5f64,
        ) {
            let g = disc(0.25);
            let fs = StencilFrameSet::default_for(1);
            let va = random_obstacle(&g, &a);
            let vb = random_obstacle(&g, &b);
            let env = |v: &SliceField| psh_envelope(v, &fs, 1e-12, 1_000_000).unwrap().slice;
            let pa = env(&va);
            let vhigh = SliceField::new(g.clone(), 0, va.values().iter().zip(vb.values()).map(|(x, y)| x.max(*y) + lift).collect()).unwrap();
            let ph = env(&vhigh);
            for (x, y) in pa.values().iter().zip(ph.values()) {
                prop_assert!(x <= &(y + 1e-9));
            }
            let pb = env(&vb);
            let mid = SliceField::new(g.clone(), 0, va.values().iter().zip(vb.values()).map(|(x, y)| 0.5 * (x + y)).collect()).unwrap();
            let pm = env(&mid);
            for i in 0..pm.values().len() {
                prop_assert!(pm.values()[i] >= 0.5 * (pa.values()[i] + pb.values()[i]) - 1e-9);
            }
        }
    }
}
