//! Mixed `L^{p,q}` norms, parabolic Hölder seminorms and empirical ratios
//! for the interior regularity estimates.
//!
//! Norms are taken over a base-plane region and a time window whose ends
//! are grid times. The spatial `L^p` norm uses the node trapezoid weights
//! of the region, the temporal `L^q` norm the trapezoid rule over the
//! window's levels; `p = ∞` or `q = ∞` are exact maxima over the samples.
//!
//! Hölder suprema are taken over sampled pairs of grid points, so they are
//! lower bounds for the continuous seminorm. When a scan has at most
//! `pair_cap` pairs every pair is visited. Otherwise the scan visits two
//! kinds of pairs. The coarse stratum is every pair on a sub-lattice that
//! keeps both end indices of every axis. The fine strata pair each coarse
//! point with its neighbors at offsets `2^j` along each axis, for every
//! scale below the coarse spacing.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;

use crate::discretization::{
    gradient_of_slice, hessian_of_slice, time_derivative, trapezoid_weights, GraphFlow, Region, SpaceTimeGrid,
};
use crate::flow_solver::ForcingSpec;
use crate::geometry::sym_index;
use crate::{par, Error, Real, Result};

/// Default cap on the number of pairs of a Hölder scan per stratum.
pub const DEFAULT_PAIR_CAP: usize = 40_000;

/// The field a norm is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormTarget {
    /// `f`.
    Value,
    /// `∇f`.
    Gradient,
    /// `∇²f`, full `k×k` per component.
    Hessian,
    /// `∂_t f`.
    TimeDerivative,
    /// The ambient forcing `u` evaluated at the graph points.
    Forcing,
}

/// A mixed-norm query: exponents, spatial region, time window and target.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRequest<T> {
    pub p: T,
    pub q: T,
    pub region: Region<T>,
    pub window: (T, T),
    pub target: NormTarget,
}

impl<T: Real> NormRequest<T> {
    pub fn new(p: T, q: T, region: Region<T>, window: (T, T), target: NormTarget) -> Result<Self> {
        let req = Self {
            p,
            q,
            region,
            window,
            target,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= T::one()) || !(self.q >= T::one()) {
            return Err(Error::Invalid(format!(
                "exponents must lie in [1, ∞], got p = {}, q = {}",
                self.p, self.q
            )));
        }
        if !(self.window.0 < self.window.1) {
            return Err(Error::Window {
                t1: self.window.0.to_f64_lossy(),
                t2: self.window.1.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// The levels from `t₀` to `t₁` inclusive; both must be grid times.
pub fn window_levels<T: Real>(grid: &SpaceTimeGrid<T>, window: (T, T)) -> Result<Range<usize>> {
    let err = || Error::Window {
        t1: window.0.to_f64_lossy(),
        t2: window.1.to_f64_lossy(),
    };
    let level = |t: T| -> Result<usize> {
        let x = (t - grid.t_start()) / grid.dt();
        let m = x.round();
        if (x - m).abs() > T::lit(1e-9) || m < T::zero() {
            return Err(err());
        }
        let m = m.to_usize().ok_or_else(err)?;
        if m < grid.time_levels() {
            Ok(m)
        } else {
            Err(err())
        }
    };
    let (a, b) = (level(window.0)?, level(window.1)?);
    if a > b {
        return Err(err());
    }
    Ok(a..b + 1)
}

/// Number of components of a target on a grid.
pub fn target_components<T: Real>(grid: &SpaceTimeGrid<T>, target: NormTarget) -> usize {
    let (k, m) = (grid.k(), grid.codim());
    match target {
        NormTarget::Value | NormTarget::TimeDerivative => m,
        NormTarget::Gradient => m * k,
        NormTarget::Hessian => m * k * k,
        NormTarget::Forcing => grid.ambient_dim(),
    }
}

/// The target sampled at every node of level `m`, node-major.
pub fn target_field<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    target: NormTarget,
    m: usize,
) -> Result<Vec<T>> {
    flow.check_time_index(m)?;
    let grid = flow.grid();
    let (k, codim, n) = (grid.k(), grid.codim(), grid.ambient_dim());
    match target {
        NormTarget::Value => Ok(flow.slice(m).to_vec()),
        NormTarget::Gradient => gradient_of_slice(grid, flow.slice(m)),
        NormTarget::TimeDerivative => Ok(time_derivative(flow, m)?.data().to_vec()),
        NormTarget::Hessian => {
            let packed = hessian_of_slice(grid, flow.slice(m))?;
            let sl = crate::geometry::sym_len(k);
            let mut full = Vec::with_capacity(grid.num_nodes() * codim * k * k);
            for node in 0..grid.num_nodes() {
                for a in 0..codim {
                    for i in 0..k {
                        for j in 0..k {
                            full.push(packed[node * codim * sl + a * sl + sym_index(k, i, j)]);
                        }
                    }
                }
            }
            Ok(full)
        }
        NormTarget::Forcing => {
            if forcing.dim() != n {
                return Err(Error::ShapeMismatch(format!(
                    "forcing has {} components, ambient dimension is {n}",
                    forcing.dim()
                )));
            }
            let slice = flow.slice(m);
            let t = grid.time(m);
            let mut out = vec![T::zero(); grid.num_nodes() * n];
            out.par_chunks_mut(n)
                .enumerate()
                .try_for_each(|(node, u)| -> Result<()> {
                    let mut z = grid.coords(node);
                    z.extend_from_slice(&slice[node * codim..(node + 1) * codim]);
                    forcing.eval(&z, t, u)
                })?;
            Ok(out)
        }
    }
}

fn magnitudes<T: Real>(values: &[T], ncomp: usize) -> Vec<T> {
    values
        .chunks(ncomp)
        .map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt())
        .collect()
}

/// `‖F‖_{L^{p,q}}` of a pointwise magnitude `|F|` supplied per level.
pub fn lpq_norm_with<T: Real>(
    grid: &SpaceTimeGrid<T>,
    p: T,
    q: T,
    region: &Region<T>,
    levels: Range<usize>,
    magnitude: impl Fn(usize) -> Result<Vec<T>> + Sync + Send,
) -> Result<T> {
    region.check_within(grid)?;
    if levels.len() < 2 {
        return Err(Error::Window {
            t1: grid.time(levels.start).to_f64_lossy(),
            t2: grid.time(levels.start).to_f64_lossy(),
        });
    }
    let w = trapezoid_weights(grid, region);
    if w.iter().all(|&x| x == T::zero()) {
        return Err(Error::EmptyRegion(format!("{region:?} contains no grid nodes")));
    }
    let spatial = levels
        .clone()
        .into_par_iter()
        .map(|m| {
            let f = magnitude(m)?;
            Ok(if p.is_infinite() {
                par::max(f.len(), |i| if w[i] > T::zero() { f[i] } else { T::zero() })
            } else {
                par::sum(f.len(), |i| w[i] * f[i].powf(p)).powf(T::one() / p)
            })
        })
        .collect::<Result<Vec<T>>>()?;
    let (m1, m2) = (levels.start, levels.end - 1);
    Ok(if q.is_infinite() {
        spatial.iter().fold(T::zero(), |a, &b| a.max(b))
    } else {
        spatial
            .iter()
            .enumerate()
            .map(|(i, &s)| crate::varifold::time_weight(m1 + i, m1, m2, grid.dt()) * s.powf(q))
            .fold(T::zero(), |a, b| a + b)
            .powf(T::one() / q)
    })
}

/// `‖F‖_{L^{p,q}(region × window)}` of the requested target of a flow.
pub fn lpq_norm<T: Real>(flow: &GraphFlow<T>, forcing: &ForcingSpec<T>, req: &NormRequest<T>) -> Result<T> {
    req.validate()?;
    let grid = flow.grid();
    let levels = window_levels(grid, req.window)?;
    let ncomp = target_components(grid, req.target);
    lpq_norm_with(grid, req.p, req.q, &req.region, levels, |m| {
        Ok(magnitudes(&target_field(flow, forcing, req.target, m)?, ncomp))
    })
}

/// Which quotient a Hölder scan takes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HolderQuotient<T> {
    /// `|F(x,t) − F(y,s)| / max(|x − y|^α, |t − s|^{α/2})`.
    Parabolic { alpha: T },
    /// `|F(x,t) − F(x,s)| / |t − s|^γ` over pairs at the same point.
    Time { exponent: T },
}

/// A space-time sample: the node's multi-index and the time level.
type SamplePoint = (Vec<usize>, usize);

/// Sample lattice of one axis: indices `0, s, 2s, …` plus the last index.
fn lattice(first: usize, last: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (first..=last).step_by(stride.max(1)).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// Index bounds of the nodes of a region along every axis.
fn region_bounds<T: Real>(grid: &SpaceTimeGrid<T>, region: &Region<T>) -> Result<Vec<(usize, usize)>> {
    let w = trapezoid_weights(grid, region);
    let k = grid.k();
    let mut b = vec![(usize::MAX, 0usize); k];
    for (node, &wn) in w.iter().enumerate() {
        if wn > T::zero() {
            for (d, bd) in b.iter_mut().enumerate() {
                let i = grid.axis_index(node, d);
                bd.0 = bd.0.min(i);
                bd.1 = bd.1.max(i);
            }
        }
    }
    if b.iter().any(|&(lo, _)| lo == usize::MAX) {
        return Err(Error::EmptyRegion(format!("{region:?} contains no grid nodes")));
    }
    Ok(b)
}

/// Supremum of a Hölder quotient over sampled pairs of the grid points in
/// `region × levels`; `field(m)` returns the node-major samples (with
/// `ncomp` components) at level `m`. See the module documentation for the
/// pair selection.
#[allow(clippy::too_many_arguments)]
pub fn holder_seminorm_with<T: Real>(
    grid: &SpaceTimeGrid<T>,
    region: &Region<T>,
    levels: Range<usize>,
    ncomp: usize,
    field: impl Fn(usize) -> Result<Vec<T>> + Sync + Send,
    quotient: HolderQuotient<T>,
    pair_cap: usize,
) -> Result<T> {
    region.check_within(grid)?;
    if levels.is_empty() {
        return Err(Error::TimeIndex {
            index: levels.start,
            levels: grid.time_levels(),
        });
    }
    let k = grid.k();
    let w = trapezoid_weights(grid, region);
    let bounds = region_bounds(grid, region)?;
    // Axes 0..k are spatial, axis k is time.
    let mut extent: Vec<(usize, usize)> = bounds.clone();
    extent.push((levels.start, levels.end - 1));
    let count = |s: &[usize]| -> usize {
        extent
            .iter()
            .zip(s)
            .map(|(&(a, b), &st)| lattice(a, b, st).len())
            .product()
    };
    let max_points = ((2.0 * pair_cap as f64).sqrt().floor() as usize).max(2);
    let mut stride = vec![1usize; k + 1];
    while count(&stride) > max_points {
        let d = (0..=k)
            .max_by_key(|&d| lattice(extent[d].0, extent[d].1, stride[d]).len())
            .unwrap();
        stride[d] *= 2;
    }
    let axes: Vec<Vec<usize>> = extent
        .iter()
        .zip(&stride)
        .map(|(&(a, b), &s)| lattice(a, b, s))
        .collect();
    // Coarse lattice points (spatial multi-index, level), restricted to the region.
    let mut points: Vec<SamplePoint> = Vec::new();
    let mut idx = vec![0usize; k + 1];
    loop {
        let multi: Vec<usize> = (0..k).map(|d| axes[d][idx[d]]).collect();
        if w[grid.flat_index(&multi)] > T::zero() {
            points.push((multi, axes[k][idx[k]]));
        }
        let mut d = 0;
        while d <= k {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d > k {
            break;
        }
    }
    let mut pairs: Vec<(SamplePoint, SamplePoint)> = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            pairs.push((points[i].clone(), points[j].clone()));
        }
    }
    for d in 0..=k {
        let mut off = 1;
        while off < stride[d] {
            for p in &points {
                let mut q = p.clone();
                let pos = if d < k { &mut q.0[d] } else { &mut q.1 };
                let (a, b) = extent[d];
                if *pos + off <= b {
                    *pos += off;
                } else if *pos >= a + off {
                    *pos -= off;
                } else {
                    continue;
                }
                let inside = w[grid.flat_index(&q.0)] > T::zero();
                if inside {
                    pairs.push((p.clone(), q));
                }
            }
            off *= 2;
        }
    }
    if let HolderQuotient::Time { .. } = quotient {
        pairs.retain(|(a, b)| a.0 == b.0);
    }
    // Evaluate the field once per needed level.
    let mut needed: BTreeMap<usize, Vec<T>> = BTreeMap::new();
    for (a, b) in &pairs {
        needed.entry(a.1).or_default();
        needed.entry(b.1).or_default();
    }
    let lv: Vec<usize> = needed.keys().copied().collect();
    let fields = lv.par_iter().map(|&m| field(m)).collect::<Result<Vec<_>>>()?;
    for (m, f) in lv.into_iter().zip(fields) {
        needed.insert(m, f);
    }
    let h = grid.h();
    let dt = grid.dt();
    let quotient_of = |(a, b): &(SamplePoint, SamplePoint)| -> T {
        let (na, nb) = (grid.flat_index(&a.0), grid.flat_index(&b.0));
        let (fa, fb) = (&needed[&a.1], &needed[&b.1]);
        let diff: T = (0..ncomp)
            .map(|c| {
                let x = fa[na * ncomp + c] - fb[nb * ncomp + c];
                x * x
            })
            .sum::<T>()
            .sqrt();
        let dx: T =
            a.0.iter()
                .zip(&b.0)
                .map(|(&i, &j)| {
                    let x = T::from_usize_lossy(i.abs_diff(j)) * h;
                    x * x
                })
                .sum::<T>()
                .sqrt();
        let dtime = T::from_usize_lossy(a.1.abs_diff(b.1)) * dt;
        let den = match quotient {
            HolderQuotient::Parabolic { alpha } => dx.powf(alpha).max(dtime.powf(alpha / T::lit(2.0))),
            HolderQuotient::Time { exponent } => dtime.powf(exponent),
        };
        if den > T::zero() {
            diff / den
        } else {
            T::zero()
        }
    };
    Ok(par::max(pairs.len(), |i| quotient_of(&pairs[i])))
}

/// Parabolic Hölder seminorm of a flow over `region × window`:
/// order 0 is `[f]_α`; order 1 is `[∇f]_α + sup |f(x,t) − f(x,s)| / |t − s|^{(1+α)/2}`;
/// order 2 is `[∂_t f]_α + [∇²f]_α`.
pub fn parabolic_holder<T: Real>(
    flow: &GraphFlow<T>,
    alpha: T,
    order: usize,
    region: &Region<T>,
    window: (T, T),
    pair_cap: usize,
) -> Result<T> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::Invalid(format!(
            "Hölder exponent must lie in (0, 1], got {alpha}"
        )));
    }
    let grid = flow.grid();
    let levels = window_levels(grid, window)?;
    let zero = ForcingSpec::Zero { n: grid.ambient_dim() };
    let scan = |target: NormTarget, quotient: HolderQuotient<T>| {
        holder_seminorm_with(
            grid,
            region,
            levels.clone(),
            target_components(grid, target),
            |m| target_field(flow, &zero, target, m),
            quotient,
            pair_cap,
        )
    };
    let par_q = HolderQuotient::Parabolic { alpha };
    match order {
        0 => scan(NormTarget::Value, par_q),
        1 => Ok(scan(NormTarget::Gradient, par_q)?
            + scan(
                NormTarget::Value,
                HolderQuotient::Time {
                    exponent: (T::one() + alpha) / T::lit(2.0),
                },
            )?),
        2 => Ok(scan(NormTarget::TimeDerivative, par_q)? + scan(NormTarget::Hessian, par_q)?),
        _ => Err(Error::Invalid(format!("Hölder order must be 0, 1 or 2, got {order}"))),
    }
}

/// A parabolic cylinder `B_R(center) × (t_top − R², t_top]` in base-plane
/// coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder<T> {
    pub center: Vec<T>,
    pub t_top: T,
    pub radius: T,
}

impl<T: Real> Cylinder<T> {
    /// The cylinder of radius `R` centered at the origin and ending at `t_top`.
    pub fn centered(k: usize, radius: T, t_top: T) -> Self {
        Self {
            center: vec![T::zero(); k],
            t_top,
            radius,
        }
    }

    /// Base-plane ball of radius `factor · R`.
    pub fn region(&self, factor: T) -> Region<T> {
        Region::ball(self.center.clone(), factor * self.radius)
    }

    /// Time window `[t_top − (factor R)², t_top]`.
    pub fn window(&self, factor: T) -> (T, T) {
        let r = factor * self.radius;
        (self.t_top - r * r, self.t_top)
    }
}

/// Which regularity estimate a report refers to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimateKind<T> {
    /// `‖∂_t f‖ + ‖∇²f‖` on `Q_{R/2}` against `R⁻²‖f‖ + ‖u‖` on `Q_R`.
    Lpq,
    /// Sup norms plus `R^α`-weighted Hölder seminorms.
    Holder { alpha: T },
}

/// Empirical ratio between the two sides of an interior estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport<T> {
    pub kind: EstimateKind<T>,
    pub p: T,
    pub q: T,
    pub radius: T,
    pub lhs: T,
    pub rhs_parts: Vec<T>,
    /// `lhs / Σ rhs_parts`; `None` when the right side vanishes.
    pub ratio: Option<T>,
    pub degenerate: bool,
    /// Caller-assigned refinement index.
    pub refinement_level: usize,
}

impl<T: Real> EstimateReport<T> {
    fn new(kind: EstimateKind<T>, p: T, q: T, radius: T, lhs: T, rhs_parts: Vec<T>) -> Self {
        let rhs: T = rhs_parts.iter().copied().sum();
        let degenerate = !(rhs > T::zero());
        Self {
            kind,
            p,
            q,
            radius,
            lhs,
            ratio: (!degenerate).then(|| lhs / rhs),
            rhs_parts,
            degenerate,
            refinement_level: 0,
        }
    }
}

/// The `L^{p,q}` interior estimate: `lhs = ‖∂_t f‖ + ‖∇²f‖` on `Q_{R/2}`,
/// `rhs_parts = (R⁻² ‖f‖_{Q_R}, ‖u‖_{Q_R})`. The forcing norm is taken
/// against `dx` along the graph, so both sides are linear under
/// `(f, u) → (λ f, λ u)`.
pub fn estimate_report<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    p: T,
    q: T,
    cylinder: &Cylinder<T>,
) -> Result<EstimateReport<T>> {
    let half = T::lit(0.5);
    let req = |target: NormTarget, factor: T| {
        NormRequest::new(p, q, cylinder.region(factor), cylinder.window(factor), target)
    };
    let norm = |target: NormTarget, factor: T| lpq_norm(flow, forcing, &req(target, factor)?);
    let lhs = norm(NormTarget::TimeDerivative, half)? + norm(NormTarget::Hessian, half)?;
    let r2 = cylinder.radius * cylinder.radius;
    let rhs = vec![
        norm(NormTarget::Value, T::one())? / r2,
        norm(NormTarget::Forcing, T::one())?,
    ];
    Ok(EstimateReport::new(EstimateKind::Lpq, p, q, cylinder.radius, lhs, rhs))
}

/// The Hölder interior estimate:
/// `lhs = ‖∂_t f‖₀ + ‖∇²f‖₀ + R^α([∂_t f]_α + [∇²f]_α)` on `Q_{R/2}`,
/// `rhs_parts = (R⁻² ‖f‖₀, ‖u‖₀, R^α [u]_α)` on `Q_R`.
pub fn holder_estimate_report<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    alpha: T,
    cylinder: &Cylinder<T>,
    pair_cap: usize,
) -> Result<EstimateReport<T>> {
    let (half, one, inf) = (T::lit(0.5), T::one(), T::infinity());
    let grid = flow.grid();
    let sup = |target: NormTarget, factor: T| {
        lpq_norm(
            flow,
            forcing,
            &NormRequest::new(inf, inf, cylinder.region(factor), cylinder.window(factor), target)?,
        )
    };
    let semi = |target: NormTarget, factor: T| {
        holder_seminorm_with(
            grid,
            &cylinder.region(factor),
            window_levels(grid, cylinder.window(factor))?,
            target_components(grid, target),
            |m| target_field(flow, forcing, target, m),
            HolderQuotient::Parabolic { alpha },
            pair_cap,
        )
    };
    let ra = cylinder.radius.powf(alpha);
    let lhs = sup(NormTarget::TimeDerivative, half)?
        + sup(NormTarget::Hessian, half)?
        + ra * (semi(NormTarget::TimeDerivative, half)? + semi(NormTarget::Hessian, half)?);
    let r2 = cylinder.radius * cylinder.radius;
    let rhs = vec![
        sup(NormTarget::Value, one)? / r2,
        sup(NormTarget::Forcing, one)?,
        ra * semi(NormTarget::Forcing, one)?,
    ];
    Ok(EstimateReport::new(
        EstimateKind::Holder { alpha },
        inf,
        inf,
        cylinder.radius,
        lhs,
        rhs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::BoundaryPolicy;
    use crate::exact::ExactSolution;
    use proptest::prelude::*;

    fn flow_of(
        k: usize,
        lo: f64,
        hi: f64,
        h: f64,
        t_range: (f64, f64),
        dt: f64,
        f: impl Fn(&[f64], f64) -> f64,
    ) -> GraphFlow<f64> {
        let g = SpaceTimeGrid::new(k, 1, vec![lo; k], vec![hi; k], h, t_range, dt).unwrap();
        GraphFlow::from_fn(
            g,
            BoundaryPolicy::DirichletFrozen,
            |x: &[f64], t: f64, out: &mut [f64]| out[0] = f(x, t),
        )
        .unwrap()
    }

    fn zero(n: usize) -> ForcingSpec<f64> {
        ForcingSpec::Zero { n }
    }

    fn value_req(p: f64, q: f64, window: (f64, f64)) -> NormRequest<f64> {
        NormRequest::new(p, q, Region::All, window, NormTarget::Value).unwrap()
    }

    #[test]
    fn unit_field_on_unit_time_interval() {
        // (∫_{−1}^{0} (∫_{−1}^{1} 1 dx)^{2/2} dt)^{1/2} = √2.
        let flow = flow_of(1, -1.0, 1.0, 1.0 / 128.0, (-1.0, 0.0), 1.0 / 64.0, |_, _| 1.0);
        let v = lpq_norm(&flow, &zero(2), &value_req(2.0, 2.0, (-1.0, 0.0))).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn equal_exponents_give_the_space_time_norm() {
        let f = |x: &[f64], t: f64| (x[0] * 3.0).sin() * (1.0 + t) + x[1] * x[1];
        let flow = flow_of(2, -1.0, 1.0, 1.0 / 16.0, (0.0, 1.0), 0.125, f);
        let g = flow.grid();
        for &p in &[1.0, 2.0, 3.5] {
            let norm = lpq_norm(&flow, &zero(3), &value_req(p, p, (0.0, 1.0))).unwrap();
            // Direct tensor-product trapezoid of |f|^p over space-time.
            let w = trapezoid_weights(g, &Region::All);
            let mut total = 0.0;
            for m in 0..g.time_levels() {
                let tw = if m == 0 || m + 1 == g.time_levels() { 0.5 } else { 1.0 } * g.dt();
                for (node, &wn) in w.iter().enumerate() {
                    total += tw * wn * flow.value(m, node, 0).abs().powf(p);
                }
            }
            assert!((norm - total.powf(1.0 / p)).abs() <= 1e-12 * norm);
        }
    }

    #[test]
    fn infinite_exponents_are_maxima() {
        let flow = flow_of(1, 0.0, 1.0, 0.125, (0.0, 1.0), 0.25, |x, t| x[0] * t - 0.3);
        let v = lpq_norm(&flow, &zero(2), &value_req(f64::INFINITY, f64::INFINITY, (0.0, 1.0))).unwrap();
        assert_eq!(v, 0.7);
        // Sup over levels of the spatial L¹ norm, summed directly.
        let g = flow.grid();
        let w = trapezoid_weights(g, &Region::All);
        let direct = (0..g.time_levels())
            .map(|m| {
                (0..g.num_nodes())
                    .map(|i| w[i] * flow.value(m, i, 0).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let v = lpq_norm(&flow, &zero(2), &value_req(1.0, f64::INFINITY, (0.0, 1.0))).unwrap();
        assert!((v - direct).abs() < 1e-15);
    }

    #[test]
    fn windows_must_be_grid_times() {
        let flow = flow_of(1, 0.0, 1.0, 0.125, (0.0, 1.0), 0.25, |_, _| 1.0);
        assert!(matches!(
            lpq_norm(&flow, &zero(2), &value_req(2.0, 2.0, (0.1, 1.0))),
            Err(Error::Window { .. })
        ));
        assert!(NormRequest::new(0.5, 2.0, Region::All, (0.0, 1.0), NormTarget::Value).is_err());
        let empty = NormRequest::new(2.0, 2.0, Region::ball(vec![0.51], 0.001), (0.0, 1.0), NormTarget::Value).unwrap();
        assert!(matches!(lpq_norm(&flow, &zero(2), &empty), Err(Error::EmptyRegion(_))));
    }

    fn random_flow(seed: &[f64]) -> GraphFlow<f64> {
        let s = seed.to_vec();
        flow_of(1, -1.0, 1.0, 0.125, (0.0, 1.0), 0.25, move |x, t| {
            s[0] * (s[1] * x[0] + t).sin() + s[2] * x[0] * x[0] * t - s[3]
        })
    }

    proptest! {
        #[test]
        fn norm_is_homogeneous_monotone_and_subadditive(
            a in proptest::collection::vec(-2.0f64..2.0, 4),
            b in proptest::collection::vec(-2.0f64..2.0, 4),
            p in 1.0f64..6.0,
            q in 1.0f64..6.0,
            lambda in -3.0f64..3.0,
        ) {
            let (fa, fb) = (random_flow(&a), random_flow(&b));
            let sum = GraphFlow::new(
                fa.grid().clone(),
                fa.values().iter().zip(fb.values()).map(|(x, y)| x + y).collect(),
                fa.boundary(),
            ).unwrap();
            let req = value_req(p, q, (0.0, 1.0));
            let z = zero(2);
            let (na, nb, ns) = (
                lpq_norm(&fa, &z, &req).unwrap(),
                lpq_norm(&fb, &z, &req).unwrap(),
                lpq_norm(&sum, &z, &req).unwrap(),
            );
            prop_assert!(ns <= (na + nb) * (1.0 + 1e-12));
            let scaled = lpq_norm(&fa.scaled(lambda), &z, &req).unwrap();
            prop_assert!((scaled - lambda.abs() * na).abs() <= 1e-12 * na.max(1e-300) * lambda.abs().max(1.0));
            let inner = NormRequest::new(p, q, Region::ball(vec![0.0], 0.5), (0.0, 1.0), NormTarget::Value).unwrap();
            prop_assert!(lpq_norm(&fa, &z, &inner).unwrap() <= na * (1.0 + 1e-12));
        }
    }

    #[test]
    fn holder_of_constant_is_zero() {
        let flow = flow_of(2, 0.0, 1.0, 1.0 / 16.0, (0.0, 1.0), 0.25, |_, _| 4.0);
        for order in 0..3 {
            let v = parabolic_holder(&flow, 0.5, order, &Region::All, (0.0, 1.0), DEFAULT_PAIR_CAP).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn holder_of_identity_in_space() {
        // sup |x − y| / |x − y|^{1/2} over [0, 1] is 1, at distance 1.
        let flow = flow_of(1, 0.0, 1.0, 1.0 / 128.0, (0.0, 1.0), 0.5, |x, _| x[0]);
        let v = parabolic_holder(&flow, 0.5, 0, &Region::All, (0.0, 0.0), DEFAULT_PAIR_CAP).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn holder_of_identity_in_time() {
        // sup |t − s| / |t − s|^{α/2} over a unit window is 1 for α < 2.
        let flow = flow_of(1, 0.0, 1.0, 1.0 / 128.0, (0.0, 1.0), 1.0 / 128.0, |_, t| t);
        for &alpha in &[0.25, 0.5, 0.9] {
            let v = parabolic_holder(&flow, alpha, 0, &Region::All, (0.0, 1.0), DEFAULT_PAIR_CAP).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "alpha {alpha}: {v}");
        }
    }

    #[test]
    fn holder_order_one_adds_the_time_quotient() {
        // f = x + t: [∇f]_α = 0, and sup |t − s| / |t − s|^{(1+α)/2} = 1.
        let flow = flow_of(1, 0.0, 1.0, 1.0 / 32.0, (0.0, 1.0), 1.0 / 32.0, |x, t| x[0] + t);
        let v = parabolic_holder(&flow, 0.5, 1, &Region::All, (0.0, 1.0), DEFAULT_PAIR_CAP).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn holder_of_lipschitz_field_is_bounded() {
        // |F(x,t) − F(y,s)| ≤ λ max(|x − y|, |t − s|^{1/2}) implies the
        // α-quotient is at most λ diam^{1−α}.
        let lambda = 1.7;
        let f =
            move |x: &[f64], t: f64| lambda * (0.6 * (2.0 * x[0]).sin() / 2.0 + 0.4 * (x[1] - 0.5 * t.max(0.0).sqrt()));
        let flow = flow_of(2, 0.0, 1.0, 1.0 / 32.0, (0.0, 1.0), 1.0 / 64.0, f);
        let diam = 2f64.sqrt().max(1.0);
        for &alpha in &[0.3, 0.7, 1.0] {
            let v = parabolic_holder(&flow, alpha, 0, &Region::All, (0.0, 1.0), DEFAULT_PAIR_CAP).unwrap();
            assert!(
                v > 0.0 && v <= lambda * diam.powf(1.0 - alpha) * (1.0 + 1e-12),
                "alpha {alpha}: {v}"
            );
        }
    }

    #[test]
    fn flat_static_estimate_is_degenerate() {
        let flow = flow_of(1, -1.0, 1.0, 1.0 / 16.0, (-1.0, 0.0), 1.0 / 16.0, |_, _| 0.0);
        let r = estimate_report(&flow, &zero(2), 2.0, 2.0, &Cylinder::centered(1, 1.0, 0.0)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.degenerate && r.ratio.is_none());
    }

    fn grim_reaper(h: f64) -> GraphFlow<f64> {
        let s = ExactSolution::<f64>::grim_reaper();
        let g = SpaceTimeGrid::fitted(1, 1, vec![-1.2], vec![1.2], h, (-1.0, 0.0), 0.45 * h * h, 4).unwrap();
        GraphFlow::from_fn(
            g,
            BoundaryPolicy::DirichletExact,
            |x: &[f64], t: f64, out: &mut [f64]| s.eval(x, t, out),
        )
        .unwrap()
    }

    #[test]
    fn grim_reaper_estimate_ratio_is_stable() {
        let cyl = Cylinder::centered(1, 1.0, 0.0);
        let ratio = |h: f64| {
            estimate_report(&grim_reaper(h), &zero(2), 2.0, 2.0, &cyl)
                .unwrap()
                .ratio
                .unwrap()
        };
        let (a, b) = (ratio(1.0 / 16.0), ratio(1.0 / 32.0));
        assert!(a.is_finite() && a > 0.0);
        assert!((a - b).abs() <= 0.1 * b, "{a} vs {b}");
    }

    #[test]
    fn estimate_ratio_is_invariant_under_joint_scaling() {
        let flow = grim_reaper(1.0 / 16.0);
        let u = ForcingSpec::Constant(vec![0.3, 0.8]);
        let cyl = Cylinder::centered(1, 1.0, 0.0);
        let base = estimate_report(&flow, &u, 2.0, 3.0, &cyl).unwrap().ratio.unwrap();
        for &lambda in &[0.5, 3.0] {
            let r = estimate_report(&flow.scaled(lambda), &u.scaled(lambda).unwrap(), 2.0, 3.0, &cyl)
                .unwrap()
                .ratio
                .unwrap();
            assert!((r - base).abs() <= 1e-12 * base, "{r} vs {base}");
        }
    }

    #[test]
    fn holder_estimate_is_finite_for_grim_reaper() {
        let cyl = Cylinder::centered(1, 1.0, 0.0);
        let r = holder_estimate_report(&grim_reaper(1.0 / 16.0), &zero(2), 0.5, &cyl, DEFAULT_PAIR_CAP).unwrap();
        assert!(r.ratio.unwrap().is_finite());
        assert_eq!(r.rhs_parts.len(), 3);
        assert_eq!(r.rhs_parts[1], 0.0);
    }
}
