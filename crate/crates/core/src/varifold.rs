//! Time slices of a graphical flow as unit-density discrete varifolds.
//!
//! A slice stores, per grid node, the ambient point `(x, f(x, t))`, the
//! tangent projection `S` of the graph, the area element `√g` and the
//! area weight `w = √g · ω`, where `ω` is the trapezoid weight of the node
//! (cell volume included). Integrals against the weight measure are then
//! `∫ φ d‖V‖ ≈ Σ φ(position) w`, the area formula evaluated by the same
//! node quadrature as everywhere else in the crate.

use std::ops::Range;

use rayon::prelude::*;

use crate::discretization::{gradient_of_slice, hessian_of_slice, trapezoid_weights, GraphFlow, Region, SpaceTimeGrid};
use crate::geometry::{
    canonical_tangent_projection, induced_metric, mean_curvature_with_metric, GradientMatrix, HessianTensor,
};
use crate::{par, Error, Real, Result};

/// A smooth ambient vector field `g: R^n → R^n` with analytic derivative,
/// used as a test field for the first variation.
pub trait AmbientVectorField<T>: Sync {
    /// `g(z)` for an ambient point `z`.
    fn value(&self, z: &[T], out: &mut [T]);

    /// `out[i·n + j] = ∂_j g^i(z)`.
    fn jacobian(&self, z: &[T], out: &mut [T]);

    /// Bounding box `(lo, hi)` of the projection of the support onto the
    /// base plane, or `None` if the field is not compactly supported in the
    /// base-plane directions.
    fn tangent_support(&self) -> Option<(Vec<T>, Vec<T>)>;
}

/// One time slice of a graph, viewed as the varifold `|graph f(·, t)|`.
#[derive(Clone, Debug)]
pub struct DiscreteVarifold<T> {
    grid: SpaceTimeGrid<T>,
    time_index: usize,
    position: Vec<T>,
    gradient: Vec<T>,
    tangent: Vec<T>,
    sqrt_g: Vec<T>,
    base_weight: Vec<T>,
    weight: Vec<T>,
    curvature: Vec<T>,
}

struct NodeGeometry<T> {
    tangent: Vec<T>,
    sqrt_g: T,
    curvature: Vec<T>,
}

impl<T: Real> DiscreteVarifold<T> {
    /// Builds the slice at time level `m`. The gradient and Hessian come
    /// from the finite-difference stencils, the mean curvature from the
    /// graph formula at each node.
    pub fn from_flow(flow: &GraphFlow<T>, m: usize) -> Result<Self> {
        flow.check_time_index(m)?;
        let grid = flow.grid();
        let (k, codim, n) = (grid.k(), grid.codim(), grid.ambient_dim());
        let slice = flow.slice(m);
        let gradient = gradient_of_slice(grid, slice)?;
        let hessian = hessian_of_slice(grid, slice)?;
        let (pl, ql) = (k * codim, codim * crate::geometry::sym_len(k));
        let nodes: Vec<NodeGeometry<T>> = (0..grid.num_nodes())
            .into_par_iter()
            .map(|node| {
                let p = GradientMatrix::new(k, codim, gradient[node * pl..(node + 1) * pl].to_vec())?;
                let q = HessianTensor::from_packed(k, codim, hessian[node * ql..(node + 1) * ql].to_vec())?;
                let metric = induced_metric(&p);
                Ok(NodeGeometry {
                    tangent: canonical_tangent_projection(&p).as_slice().to_vec(),
                    sqrt_g: metric.sqrt_g,
                    curvature: mean_curvature_with_metric(&p, &q, &metric.g_inv),
                })
            })
            .collect::<Result<_>>()?;
        let mut position = vec![T::zero(); grid.num_nodes() * n];
        for (node, z) in position.chunks_mut(n).enumerate() {
            grid.coords_into(node, &mut z[..k]);
            z[k..].copy_from_slice(&slice[node * codim..(node + 1) * codim]);
        }
        let base_weight = trapezoid_weights(grid, &Region::All);
        let sqrt_g: Vec<T> = nodes.iter().map(|g| g.sqrt_g).collect();
        let weight = base_weight.iter().zip(&sqrt_g).map(|(&b, &s)| b * s).collect();
        let mut tangent = Vec::with_capacity(grid.num_nodes() * n * n);
        let mut curvature = Vec::with_capacity(grid.num_nodes() * n);
        for g in nodes {
            tangent.extend(g.tangent);
            curvature.extend(g.curvature);
        }
        Ok(Self {
            grid: grid.clone(),
            time_index: m,
            position,
            gradient,
            tangent,
            sqrt_g,
            base_weight,
            weight,
            curvature,
        })
    }

    pub fn grid(&self) -> &SpaceTimeGrid<T> {
        &self.grid
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn time(&self) -> T {
        self.grid.time(self.time_index)
    }

    pub fn num_nodes(&self) -> usize {
        self.grid.num_nodes()
    }

    /// Ambient point `(x, f(x, t))` of a node.
    pub fn position(&self, node: usize) -> &[T] {
        let n = self.grid.ambient_dim();
        &self.position[node * n..(node + 1) * n]
    }

    /// `P = ∇f` at a node, layout `a·k + i`.
    pub fn gradient(&self, node: usize) -> &[T] {
        let l = self.grid.k() * self.grid.codim();
        &self.gradient[node * l..(node + 1) * l]
    }

    /// Tangent projection `S` at a node, row-major `n×n`.
    pub fn tangent(&self, node: usize) -> &[T] {
        let n = self.grid.ambient_dim();
        &self.tangent[node * n * n..(node + 1) * n * n]
    }

    /// Mean curvature vector at a node.
    pub fn mean_curvature(&self, node: usize) -> &[T] {
        let n = self.grid.ambient_dim();
        &self.curvature[node * n..(node + 1) * n]
    }

    pub fn sqrt_g(&self) -> &[T] {
        &self.sqrt_g
    }

    /// Area weights `w = √g · ω`.
    pub fn weights(&self) -> &[T] {
        &self.weight
    }

    /// Area weights restricted to a base-plane region.
    pub fn region_weights(&self, region: &Region<T>) -> Result<Vec<T>> {
        if let Region::All = region {
            return Ok(self.weight.clone());
        }
        region.check_within(&self.grid)?;
        Ok(trapezoid_weights(&self.grid, region)
            .into_iter()
            .zip(&self.sqrt_g)
            .map(|(b, &s)| b * s)
            .collect())
    }

    /// `‖V‖(R^n)`, the area of the slice.
    pub fn mass(&self) -> T {
        par::sum(self.weight.len(), |i| self.weight[i])
    }

    /// Trapezoid weights of the base grid (no area element).
    pub fn base_weights(&self) -> &[T] {
        &self.base_weight
    }
}

/// `‖V‖(φ) = ∫ φ d‖V‖ = Σ φ(position) w`.
pub fn weight_integral<T: Real>(v: &DiscreteVarifold<T>, phi: impl Fn(&[T]) -> T + Sync) -> T {
    par::sum(v.num_nodes(), |node| phi(v.position(node)) * v.weight[node])
}

/// Rejects fields whose support reaches the outermost node layer, where
/// the varifold has a boundary and the first variation picks up boundary
/// terms.
fn check_support<T: Real>(grid: &SpaceTimeGrid<T>, field: &dyn AmbientVectorField<T>) -> Result<()> {
    let Some((lo, hi)) = field.tangent_support() else {
        return Err(Error::Support("test field is not compactly supported".into()));
    };
    let slack = T::lit(1e-9) * grid.h();
    for d in 0..grid.k() {
        let (a, b) = (grid.lo()[d] + grid.h(), grid.hi()[d] - grid.h());
        if lo[d] < a - slack || hi[d] > b + slack {
            return Err(Error::Support(format!(
                "support [{}, {}] on axis {d} leaves the interior [{a}, {b}]",
                lo[d], hi[d]
            )));
        }
    }
    Ok(())
}

/// First variation `δV(g) = ∫ tr(S ∇g) d‖V‖`.
pub fn first_variation<T: Real>(v: &DiscreteVarifold<T>, field: &impl AmbientVectorField<T>) -> Result<T> {
    check_support(&v.grid, field)?;
    let n = v.grid.ambient_dim();
    Ok(par::sum(v.num_nodes(), |node| {
        let w = v.weight[node];
        if w == T::zero() {
            return T::zero();
        }
        let mut jac = vec![T::zero(); n * n];
        field.jacobian(v.position(node), &mut jac);
        // S is symmetric, so tr(S ∇g) = Σ_ij S_ij ∂_j g^i.
        let s = v.tangent(node);
        let div: T = s.iter().zip(&jac).map(|(&a, &b)| a * b).sum();
        div * w
    }))
}

/// `∫ g · h d‖V‖` with the nodal mean curvature.
pub fn curvature_pairing<T: Real>(v: &DiscreteVarifold<T>, field: &impl AmbientVectorField<T>) -> T {
    let n = v.grid.ambient_dim();
    par::sum(v.num_nodes(), |node| {
        let w = v.weight[node];
        if w == T::zero() {
            return T::zero();
        }
        let mut g = vec![T::zero(); n];
        field.value(v.position(node), &mut g);
        let gh: T = g.iter().zip(v.mean_curvature(node)).map(|(&a, &b)| a * b).sum();
        gh * w
    })
}

/// `|δV(g) + ∫ g·h d‖V‖| / max(1, |δV(g)|)`: the defect in the defining
/// relation `δV(g) = −∫ g·h d‖V‖` of the generalized mean curvature.
pub fn mean_curvature_duality_residual<T: Real>(
    v: &DiscreteVarifold<T>,
    field: &impl AmbientVectorField<T>,
) -> Result<T> {
    let dv = first_variation(v, field)?;
    let pairing = curvature_pairing(v, field);
    Ok((dv + pairing).abs() / dv.abs().max(T::one()))
}

/// The space-time measure `dμ = d‖V_t‖ dt` of consecutive slices with a
/// uniform step.
#[derive(Clone, Debug)]
pub struct SpaceTimeMeasure<T> {
    slices: Vec<DiscreteVarifold<T>>,
    first_level: usize,
    dt: T,
}

impl<T: Real> SpaceTimeMeasure<T> {
    /// All stored time levels of a flow.
    pub fn from_flow(flow: &GraphFlow<T>) -> Result<Self> {
        Self::from_flow_levels(flow, 0..flow.time_levels())
    }

    /// The time levels `levels` of a flow.
    pub fn from_flow_levels(flow: &GraphFlow<T>, levels: Range<usize>) -> Result<Self> {
        if levels.is_empty() || levels.end > flow.time_levels() {
            return Err(Error::TimeIndex {
                index: levels.end.saturating_sub(1).max(levels.start),
                levels: flow.time_levels(),
            });
        }
        let slices = levels
            .clone()
            .into_par_iter()
            .map(|m| DiscreteVarifold::from_flow(flow, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            slices,
            first_level: levels.start,
            dt: flow.grid().dt(),
        })
    }

    pub fn slices(&self) -> &[DiscreteVarifold<T>] {
        &self.slices
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn grid(&self) -> &SpaceTimeGrid<T> {
        self.slices[0].grid()
    }

    /// Time levels covered, as indices into the flow.
    pub fn levels(&self) -> Range<usize> {
        self.first_level..self.first_level + self.slices.len()
    }

    /// The slice at flow time level `m`.
    pub fn slice(&self, m: usize) -> Result<&DiscreteVarifold<T>> {
        self.levels()
            .contains(&m)
            .then(|| &self.slices[m - self.first_level])
            .ok_or(Error::TimeIndex {
                index: m,
                levels: self.levels().end,
            })
    }

    /// The covered time level at time `t`; `t` must be a grid time.
    pub fn level_at(&self, t: T) -> Result<usize> {
        level_at(self.grid(), self.levels(), t)
    }
}

/// The level in `levels` whose time is `t` (to `10⁻⁹ dt`).
pub(crate) fn level_at<T: Real>(grid: &SpaceTimeGrid<T>, levels: Range<usize>, t: T) -> Result<usize> {
    let x = (t - grid.t_start()) / grid.dt();
    let m = x.round();
    let window_err = || Error::Window {
        t1: t.to_f64_lossy(),
        t2: t.to_f64_lossy(),
    };
    if (x - m).abs() > T::lit(1e-9) || m < T::zero() {
        return Err(window_err());
    }
    let m = m.to_usize().ok_or_else(window_err)?;
    if levels.contains(&m) {
        Ok(m)
    } else {
        Err(window_err())
    }
}

/// Trapezoid weights in time for the levels `m1..=m2`.
pub(crate) fn time_weight<T: Real>(m: usize, m1: usize, m2: usize, dt: T) -> T {
    if m == m1 || m == m2 {
        T::lit(0.5) * dt
    } else {
        dt
    }
}

/// `(∫∫ |h|² d‖V_t‖ dt)^{1/2}` over a base-plane region, trapezoid in time
/// over all slices of the measure.
pub fn h_l2_norm<T: Real>(measure: &SpaceTimeMeasure<T>, region: &Region<T>) -> Result<T> {
    region.check_within(measure.grid())?;
    let levels = measure.levels();
    let (m1, m2) = (levels.start, levels.end - 1);
    let n = measure.grid().ambient_dim();
    let mut total = T::zero();
    for slice in measure.slices() {
        let w = slice.region_weights(region)?;
        let spatial = par::sum(slice.num_nodes(), |node| {
            let h = &slice.curvature[node * n..(node + 1) * n];
            h.iter().map(|&x| x * x).sum::<T>() * w[node]
        });
        total += if m1 == m2 {
            spatial
        } else {
            spatial * time_weight(slice.time_index(), m1, m2, measure.dt())
        };
    }
    Ok(total.sqrt())
}
