//! Uniform space-time grids over axis-aligned boxes, the sampled graph
//! function living on them, finite-difference stencils and quadrature.
//!
//! Storage is time-major, then row-major over space (last axis fastest),
//! then codimension component.

mod dump;
mod quadrature;
mod stencil;

pub use dump::{read_flow_csv, write_field_csv, write_flow_csv};
pub use quadrature::{cell_quadrature, trapezoid_weights, Quadrature, Region};
pub use stencil::{gradient, gradient_of_slice, hessian, hessian_of_slice, time_derivative, MIN_NODES};

use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid<T> {
    k: usize,
    codim: usize,
    lo: Vec<T>,
    hi: Vec<T>,
    h: T,
    nodes: Vec<usize>,
    t_start: T,
    dt: T,
    time_levels: usize,
}

fn cells_for<T: Real>(len: T, h: T) -> Result<usize> {
    let ratio = len / h;
    let cells = ratio.round();
    if !(ratio > T::zero()) || (ratio - cells).abs() > T::lit(1e-9) * ratio.max(T::one()) {
        return Err(Error::InvalidGrid(format!(
            "length {len} is not an integer multiple of spacing {h}"
        )));
    }
    Ok(cells.to_usize().unwrap_or(0))
}

impl<T: Real> SpaceTimeGrid<T> {
    /// Strict constructor: every box side and the time range must be integer
    /// multiples of `h` and `dt`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(k: usize, codim: usize, lo: Vec<T>, hi: Vec<T>, h: T, t_range: (T, T), dt: T) -> Result<Self> {
        if k == 0 || codim == 0 {
            return Err(Error::InvalidGrid("need k ≥ 1 and codim ≥ 1".into()));
        }
        if lo.len() != k || hi.len() != k {
            return Err(Error::InvalidGrid(format!("box needs {k} axes")));
        }
        if !(h > T::zero()) || !(dt > T::zero()) {
            return Err(Error::InvalidGrid("h and dt must be positive".into()));
        }
        let mut nodes = Vec::with_capacity(k);
        for d in 0..k {
            if !(hi[d] > lo[d]) {
                return Err(Error::InvalidGrid(format!("axis {d} has empty extent")));
            }
            nodes.push(cells_for(hi[d] - lo[d], h)? + 1);
        }
        for (axis, &n) in nodes.iter().enumerate() {
            if n < MIN_NODES {
                return Err(Error::GridTooSmall {
                    axis,
                    nodes: n,
                    needed: MIN_NODES,
                });
            }
        }
        let (t0, t1) = t_range;
        if !(t1 > t0) {
            return Err(Error::InvalidGrid("time range must be increasing".into()));
        }
        let steps = cells_for(t1 - t0, dt)?;
        Ok(Self {
            k,
            codim,
            lo,
            hi,
            h,
            nodes,
            t_start: t0,
            dt,
            time_levels: steps + 1,
        })
    }

    /// Grid whose spacing is the largest `h ≤ h_max` dividing the first
    /// axis, and whose step is the largest `dt ≤ dt_max` dividing the time
    /// range into a multiple of `step_multiple` steps.
    #[allow(clippy::too_many_arguments)]
    pub fn fitted(
        k: usize,
        codim: usize,
        lo: Vec<T>,
        hi: Vec<T>,
        h_max: T,
        t_range: (T, T),
        dt_max: T,
        step_multiple: usize,
    ) -> Result<Self> {
        if lo.is_empty() || hi.is_empty() {
            return Err(Error::InvalidGrid("empty box".into()));
        }
        let cells = ((hi[0] - lo[0]) / h_max).ceil();
        let h = (hi[0] - lo[0]) / cells;
        let dt = fit_step(t_range, dt_max, step_multiple)?;
        Self::new(k, codim, lo, hi, h, t_range, dt)
    }

    /// Same box and spacing with a different time sampling.
    pub fn with_time(&self, t_start: T, dt: T, time_levels: usize) -> Self {
        Self {
            t_start,
            dt,
            time_levels,
            ..self.clone()
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn ambient_dim(&self) -> usize {
        self.k + self.codim
    }

    pub fn lo(&self) -> &[T] {
        &self.lo
    }

    pub fn hi(&self) -> &[T] {
        &self.hi
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn t_start(&self) -> T {
        self.t_start
    }

    pub fn t_end(&self) -> T {
        self.time(self.time_levels - 1)
    }

    pub fn time_levels(&self) -> usize {
        self.time_levels
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    #[inline]
    pub fn time(&self, m: usize) -> T {
        self.t_start + T::from_usize_lossy(m) * self.dt
    }

    /// Row-major stride of axis `d`.
    #[inline]
    pub fn stride(&self, d: usize) -> usize {
        self.nodes[d + 1..].iter().product()
    }

    /// Index of axis `d` for flat node `node`.
    #[inline]
    pub fn axis_index(&self, node: usize, d: usize) -> usize {
        (node / self.stride(d)) % self.nodes[d]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.k).map(|d| self.axis_index(node, d)).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .enumerate()
            .fold(0, |acc, (d, &i)| acc + i * self.stride(d))
    }

    #[inline]
    pub fn coord(&self, node: usize, d: usize) -> T {
        self.lo[d] + T::from_usize_lossy(self.axis_index(node, d)) * self.h
    }

    pub fn coords_into(&self, node: usize, out: &mut [T]) {
        for (d, o) in out.iter_mut().enumerate().take(self.k) {
            *o = self.coord(node, d);
        }
    }

    pub fn coords(&self, node: usize) -> Vec<T> {
        (0..self.k).map(|d| self.coord(node, d)).collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        (0..self.k).any(|d| {
            let i = self.axis_index(node, d);
            i == 0 || i + 1 == self.nodes[d]
        })
    }

    /// Parabolic scale `h² + dt` used by the discretization-error tolerances.
    pub fn error_scale(&self) -> T {
        self.h * self.h + self.dt
    }
}

/// Largest `dt ≤ dt_max` such that the range is a whole number of steps
/// that is itself a multiple of `step_multiple`.
pub fn fit_step<T: Real>(t_range: (T, T), dt_max: T, step_multiple: usize) -> Result<T> {
    let (t0, t1) = t_range;
    if !(t1 > t0) || !(dt_max > T::zero()) {
        return Err(Error::InvalidGrid("bad time range or step".into()));
    }
    let mult = T::from_usize_lossy(step_multiple.max(1));
    let blocks = ((t1 - t0) / (dt_max * mult)).ceil().max(T::one());
    Ok((t1 - t0) / (blocks * mult))
}

/// Boundary treatment recorded with a flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPolicy {
    DirichletExact,
    DirichletFrozen,
    Unspecified,
}

/// A graph function `f: box × times → R^{n−k}` sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFlow<T> {
    grid: SpaceTimeGrid<T>,
    values: Vec<T>,
    boundary: BoundaryPolicy,
}

impl<T: Real> GraphFlow<T> {
    pub fn new(grid: SpaceTimeGrid<T>, values: Vec<T>, boundary: BoundaryPolicy) -> Result<Self> {
        let per_level = grid.num_nodes() * grid.codim();
        let expected = per_level * grid.time_levels();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "flow has {} values, grid needs {expected}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let m = pos / per_level;
            let node = (pos % per_level) / grid.codim();
            return Err(Error::NonFinite {
                node: grid.coords(node).iter().map(|x| x.to_f64_lossy()).collect(),
                time: grid.time(m).to_f64_lossy(),
                component: pos % grid.codim(),
                value: values[pos].to_f64_lossy(),
            });
        }
        Ok(Self { grid, values, boundary })
    }

    /// Samples `f(x, t)` at every node and time level.
    pub fn from_fn(grid: SpaceTimeGrid<T>, boundary: BoundaryPolicy, f: impl Fn(&[T], T, &mut [T])) -> Result<Self> {
        let (nn, m) = (grid.num_nodes(), grid.codim());
        let mut values = vec![T::zero(); nn * m * grid.time_levels()];
        let mut x = vec![T::zero(); grid.k()];
        for lvl in 0..grid.time_levels() {
            let t = grid.time(lvl);
            for node in 0..nn {
                grid.coords_into(node, &mut x);
                let off = (lvl * nn + node) * m;
                f(&x, t, &mut values[off..off + m]);
            }
        }
        Self::new(grid, values, boundary)
    }

    pub fn grid(&self) -> &SpaceTimeGrid<T> {
        &self.grid
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn time_levels(&self) -> usize {
        self.grid.time_levels()
    }

    /// All node values at time level `m`, node-major then component.
    pub fn slice(&self, m: usize) -> &[T] {
        let len = self.grid.num_nodes() * self.grid.codim();
        &self.values[m * len..(m + 1) * len]
    }

    #[inline]
    pub fn value(&self, m: usize, node: usize, a: usize) -> T {
        let (nn, c) = (self.grid.num_nodes(), self.grid.codim());
        self.values[(m * nn + node) * c + a]
    }

    pub fn check_time_index(&self, m: usize) -> Result<()> {
        if m >= self.time_levels() {
            return Err(Error::TimeIndex {
                index: m,
                levels: self.time_levels(),
            });
        }
        Ok(())
    }

    /// Same flow with values multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * s).collect(),
            boundary: self.boundary,
        }
    }
}

/// A derived per-node field at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample<T> {
    grid: SpaceTimeGrid<T>,
    time_index: usize,
    ncomp: usize,
    data: Vec<T>,
}

impl<T: Real> FieldSample<T> {
    pub fn new(grid: SpaceTimeGrid<T>, time_index: usize, ncomp: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.num_nodes() * ncomp {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.num_nodes() * ncomp
            )));
        }
        Ok(Self {
            grid,
            time_index,
            ncomp,
            data,
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

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn node(&self, node: usize) -> &[T] {
        &self.data[node * self.ncomp..(node + 1) * self.ncomp]
    }

    /// Euclidean norm of the components at each node.
    pub fn magnitudes(&self) -> Vec<T> {
        self.data
            .chunks(self.ncomp)
            .map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt())
            .collect()
    }

    /// Largest magnitude over non-boundary nodes.
    pub fn interior_max(&self) -> T {
        let mags = self.magnitudes();
        (0..self.grid.num_nodes())
            .filter(|&n| !self.grid.is_boundary(n))
            .fold(T::zero(), |m, n| m.max(mags[n]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_incommensurate_spacing() {
        let err = SpaceTimeGrid::new(1, 1, vec![-1.2], vec![1.2], 1.0 / 64.0, (0.0, 1.0), 0.1);
        assert!(matches!(err, Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn grid_rejects_too_few_nodes() {
        assert!(SpaceTimeGrid::new(1, 1, vec![0.0], vec![1.0], 0.25, (0.0, 1.0), 0.5).is_ok());
        let err = SpaceTimeGrid::new(1, 1, vec![0.0], vec![1.0], 1.0 / 3.0, (0.0, 1.0), 0.5);
        assert!(matches!(err, Err(Error::GridTooSmall { nodes: 4, .. })));
    }

    #[test]
    fn fitted_grid_never_exceeds_requested_spacing() {
        let g = SpaceTimeGrid::<f64>::fitted(1, 1, vec![-1.2], vec![1.2], 1.0 / 64.0, (-0.25, 0.0), 1e-4, 7).unwrap();
        assert_eq!(g.nodes(), &[155]);
        assert!(g.h() <= 1.0 / 64.0);
        assert!(g.dt() <= 1e-4);
        assert_eq!((g.time_levels() - 1) % 7, 0);
        assert!((g.t_end() - 0.0).abs() < 1e-14);
    }

    #[test]
    fn row_major_indexing() {
        let g = SpaceTimeGrid::new(2, 1, vec![0.0, 0.0], vec![1.0, 2.0], 0.25, (0.0, 1.0), 0.5).unwrap();
        assert_eq!(g.nodes(), &[5, 9]);
        let node = g.flat_index(&[2, 7]);
        assert_eq!(node, 2 * 9 + 7);
        assert_eq!(g.multi_index(node), vec![2, 7]);
        assert_eq!(g.coords(node), vec![0.5, 1.75]);
        assert!(g.is_boundary(g.flat_index(&[0, 3])));
        assert!(!g.is_boundary(g.flat_index(&[1, 3])));
    }

    #[test]
    fn flow_rejects_nan_with_coordinates() {
        let g = SpaceTimeGrid::new(1, 1, vec![0.0], vec![1.0], 0.25, (0.0, 1.0), 0.5).unwrap();
        let mut v = vec![0.0; 15];
        v[5 + 3] = f64::NAN;
        match GraphFlow::new(g, v, BoundaryPolicy::Unspecified) {
            Err(Error::NonFinite { node, time, .. }) => {
                assert_eq!(node, vec![0.75]);
                assert_eq!(time, 0.5);
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }
}
