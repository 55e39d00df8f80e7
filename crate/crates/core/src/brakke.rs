//! The weak formulation of the flow evaluated on a discrete flow: the Brakke
//! inequality (an equality for smooth flows), the velocity identity for
//! graphs and the motion law `v = h + u^⊥`.
//!
//! Test functions are products of the compactly supported profile
//! `b(s) = (1 − s)³` (for `s < 1`, zero otherwise) in squared normalized
//! distances. `b` vanishes to second order at `s = 1`, so every block is
//! `C²` with closed-form derivatives.

use std::ops::Range;

use rayon::prelude::*;

use crate::discretization::{
    gradient_of_slice, hessian_of_slice, time_derivative, FieldSample, GraphFlow, SpaceTimeGrid,
};
use crate::flow_solver::ForcingSpec;
use crate::geometry::{
    canonical_tangent_projection, induced_metric, mean_curvature_with_metric, sym_len, GradientMatrix, HessianTensor,
};
use crate::varifold::{level_at, time_weight, AmbientVectorField, DiscreteVarifold, SpaceTimeMeasure};
use crate::{par, Error, Real, Result};

#[inline]
fn profile<T: Real>(s: T) -> T {
    if s < T::one() {
        let r = T::one() - s;
        r * r * r
    } else {
        T::zero()
    }
}

#[inline]
fn profile_derivative<T: Real>(s: T) -> T {
    if s < T::one() {
        let r = T::one() - s;
        T::lit(-3.0) * r * r
    } else {
        T::zero()
    }
}

/// A radial block `b(|z − c|² / r²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> Bump<T> {
    fn s(&self, z: &[T]) -> T {
        let d2: T = z.iter().zip(&self.center).map(|(&a, &c)| (a - c) * (a - c)).sum();
        d2 / (self.radius * self.radius)
    }

    pub fn eval(&self, z: &[T]) -> T {
        profile(self.s(z))
    }

    /// Value and gradient `b'(s) · 2(z − c)/r²` written to `out`.
    fn eval_with_gradient(&self, z: &[T], out: &mut [T]) -> T {
        let s = self.s(z);
        let ds = profile_derivative(s) * T::lit(2.0) / (self.radius * self.radius);
        for ((o, &a), &c) in out.iter_mut().zip(z).zip(&self.center) {
            *o = ds * (a - c);
        }
        profile(s)
    }
}

/// `φ(x, y, t) = b_T(x) · b_N(y) · b_I(t)` with a base-plane block, an
/// optional normal-space block and an optional time block. Without a time
/// block `φ` is constant in time, which on a window `[t₁, t₂]` is the same
/// as a time cutoff equal to one on the window.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction<T> {
    id: usize,
    k: usize,
    tangent: Bump<T>,
    normal: Option<Bump<T>>,
    time: Option<(T, T)>,
}

impl<T: Real> TestFunction<T> {
    /// Builds a test function and checks that its support lies inside the
    /// grid box (base-plane block) and the grid's time range (time block).
    pub fn new(
        id: usize,
        center: Vec<T>,
        radius: T,
        normal: Option<(Vec<T>, T)>,
        time: Option<(T, T)>,
        grid: &SpaceTimeGrid<T>,
    ) -> Result<Self> {
        let k = grid.k();
        let positive = |r: T| r > T::zero() && r.is_finite();
        if center.len() != k || !positive(radius) {
            return Err(Error::Invalid(format!(
                "base-plane block needs {k} center coordinates and a positive radius"
            )));
        }
        let slack = T::lit(1e-9) * grid.h();
        for (d, &c) in center.iter().enumerate() {
            if c - radius < grid.lo()[d] - slack || c + radius > grid.hi()[d] + slack {
                return Err(Error::Support(format!(
                    "base-plane support [{}, {}] on axis {d} leaves the grid box [{}, {}]",
                    c - radius,
                    c + radius,
                    grid.lo()[d],
                    grid.hi()[d]
                )));
            }
        }
        let normal = match normal {
            Some((c, r)) if c.len() != grid.codim() || !positive(r) => {
                return Err(Error::Invalid(format!(
                    "normal block needs {} center coordinates and a positive radius",
                    grid.codim()
                )))
            }
            Some((center, radius)) => Some(Bump { center, radius }),
            None => None,
        };
        if let Some((c, tau)) = time {
            let slack = T::lit(1e-9) * grid.dt();
            if !positive(tau) || c - tau < grid.t_start() - slack || c + tau > grid.t_end() + slack {
                return Err(Error::Support(format!(
                    "time support [{}, {}] leaves [{}, {}]",
                    c - tau,
                    c + tau,
                    grid.t_start(),
                    grid.t_end()
                )));
            }
        }
        Ok(Self {
            id,
            k,
            tangent: Bump { center, radius },
            normal,
            time,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tangent_block(&self) -> &Bump<T> {
        &self.tangent
    }

    pub fn normal_block(&self) -> Option<&Bump<T>> {
        self.normal.as_ref()
    }

    pub fn time_block(&self) -> Option<(T, T)> {
        self.time
    }

    /// The same function with its time block dropped.
    pub fn time_independent(&self) -> Self {
        Self {
            time: None,
            ..self.clone()
        }
    }

    fn time_factor(&self, t: T) -> (T, T) {
        match self.time {
            None => (T::one(), T::zero()),
            Some((c, tau)) => {
                let s = (t - c) * (t - c) / (tau * tau);
                (profile(s), profile_derivative(s) * T::lit(2.0) * (t - c) / (tau * tau))
            }
        }
    }

    /// The spatial factor `b_T(x) · b_N(y)`.
    fn spatial(&self, z: &[T]) -> T {
        let (x, y) = z.split_at(self.k);
        let bt = self.tangent.eval(x);
        if bt == T::zero() {
            return T::zero();
        }
        bt * self.normal.as_ref().map_or(T::one(), |b| b.eval(y))
    }

    /// The time factor `b_I(t)`, identically one without a time block.
    pub fn time_cutoff(&self, t: T) -> T {
        self.time_factor(t).0
    }

    /// `φ(z, t)` at an ambient point `z = (x, y)`.
    pub fn eval(&self, z: &[T], t: T) -> T {
        let (x, y) = z.split_at(self.k);
        let bt = self.tangent.eval(x);
        if bt == T::zero() {
            return T::zero();
        }
        let bn = self.normal.as_ref().map_or(T::one(), |b| b.eval(y));
        bt * bn * self.time_factor(t).0
    }

    /// `φ(z, t)` together with `∇φ(z, t) ∈ R^n` (written to `grad`) and
    /// `∂_t φ(z, t)`.
    pub fn eval_with_derivatives(&self, z: &[T], t: T, grad: &mut [T]) -> (T, T) {
        let k = self.k;
        let (x, y) = z.split_at(k);
        let (gx, gy) = grad.split_at_mut(k);
        let bt = self.tangent.eval_with_gradient(x, gx);
        let bn = match &self.normal {
            Some(b) => b.eval_with_gradient(y, gy),
            None => {
                gy.fill(T::zero());
                T::one()
            }
        };
        let (bi, dbi) = self.time_factor(t);
        for v in gx.iter_mut() {
            *v *= bn * bi;
        }
        for v in gy.iter_mut() {
            *v *= bt * bi;
        }
        (bt * bn * bi, bt * bn * dbi)
    }

    /// A deterministic family of `count` test functions adapted to a flow:
    /// base-plane centers and radii from low-discrepancy sequences, a
    /// normal block on every other function (centered in the range of the
    /// flow's values), and a time block on two out of three.
    pub fn standard_family(flow: &GraphFlow<T>, count: usize) -> Result<Vec<Self>> {
        let grid = flow.grid();
        let (k, codim) = (grid.k(), grid.codim());
        let mut y_lo = vec![T::infinity(); codim];
        let mut y_hi = vec![T::neg_infinity(); codim];
        for chunk in flow.values().chunks(codim) {
            for a in 0..codim {
                y_lo[a] = y_lo[a].min(chunk[a]);
                y_hi[a] = y_hi[a].max(chunk[a]);
            }
        }
        let y_mid: Vec<T> = y_lo.iter().zip(&y_hi).map(|(&a, &b)| T::lit(0.5) * (a + b)).collect();
        let y_half = y_lo
            .iter()
            .zip(&y_hi)
            .fold(T::zero(), |m, (&a, &b)| m.max(T::lit(0.5) * (b - a)));
        // Fractional parts of multiples of irrationals.
        let seq = |i: usize, j: usize| {
            let alpha = [
                0.618_033_988_749_895,
                0.414_213_562_373_095,
                0.732_050_807_568_877,
                0.236_067_977_499_790,
                0.302_775_637_731_995,
            ];
            T::lit(((i + 1) as f64 * alpha[j % alpha.len()]).fract())
        };
        let span = (0..k).fold(T::infinity(), |m, d| m.min(grid.hi()[d] - grid.lo()[d]));
        let margin = T::lit(2.0) * grid.h();
        let t_span = grid.t_end() - grid.t_start();
        (0..count)
            .map(|i| {
                let radius = ((T::lit(0.15) + T::lit(0.2) * seq(i, 0)) * span)
                    .min(T::lit(0.475) * (span - T::lit(2.0) * margin));
                let center: Vec<T> = (0..k)
                    .map(|d| {
                        let room = grid.hi()[d] - grid.lo()[d] - T::lit(2.0) * (margin + radius);
                        grid.lo()[d] + margin + radius + seq(i, d + 1) * room
                    })
                    .collect();
                let normal = (i % 2 == 1).then(|| {
                    let c = y_mid
                        .iter()
                        .map(|&m| m + (seq(i, k + 1) - T::lit(0.5)) * y_half)
                        .collect();
                    (c, (T::lit(1.2) + T::lit(0.6) * seq(i, k + 2)) * (y_half + T::lit(0.25)))
                });
                let time = (i % 3 != 2).then(|| {
                    let tau = (T::lit(0.3) + T::lit(0.2) * seq(i, k + 3)) * t_span;
                    (grid.t_start() + tau + seq(i, k + 4) * (t_span - T::lit(2.0) * tau), tau)
                });
                Self::new(i, center, radius, normal, time, grid)
            })
            .collect()
    }
}

/// Grid-time windows `(t₁, t₂)` at fixed fractions of the time range.
pub fn standard_windows<T: Real>(grid: &SpaceTimeGrid<T>) -> Vec<(T, T)> {
    let last = grid.time_levels() - 1;
    let level = |f: f64| ((f * last as f64).round() as usize).min(last);
    [(0.2, 0.8), (0.0, 1.0), (0.0, 0.5), (0.5, 1.0), (0.1, 0.4), (0.3, 0.95)]
        .iter()
        .map(|&(a, b)| (level(a), level(b)))
        .filter(|(a, b)| a < b)
        .map(|(a, b)| (grid.time(a), grid.time(b)))
        .collect()
}

/// The vector field `φ(·, t) d` for a fixed time `t` and direction `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpVectorField<T> {
    phi: TestFunction<T>,
    direction: Vec<T>,
    time: T,
}

impl<T: Real> BumpVectorField<T> {
    pub fn new(phi: TestFunction<T>, direction: Vec<T>, time: T) -> Result<Self> {
        let n = phi.k
            + phi
                .normal
                .as_ref()
                .map_or(direction.len().saturating_sub(phi.k), |b| b.center.len());
        if direction.len() != n || direction.len() <= phi.k {
            return Err(Error::ShapeMismatch(format!(
                "direction has {} components, expected the ambient dimension {n}",
                direction.len()
            )));
        }
        Ok(Self { phi, direction, time })
    }
}

impl<T: Real> AmbientVectorField<T> for BumpVectorField<T> {
    fn value(&self, z: &[T], out: &mut [T]) {
        let p = self.phi.eval(z, self.time);
        for (o, &d) in out.iter_mut().zip(&self.direction) {
            *o = p * d;
        }
    }

    fn jacobian(&self, z: &[T], out: &mut [T]) {
        let n = self.direction.len();
        let mut grad = vec![T::zero(); n];
        self.phi.eval_with_derivatives(z, self.time, &mut grad);
        for (i, &d) in self.direction.iter().enumerate() {
            for j in 0..n {
                out[i * n + j] = d * grad[j];
            }
        }
    }

    fn tangent_support(&self) -> Option<(Vec<T>, Vec<T>)> {
        let b = &self.phi.tangent;
        Some((
            b.center.iter().map(|&c| c - b.radius).collect(),
            b.center.iter().map(|&c| c + b.radius).collect(),
        ))
    }
}

/// How a velocity field was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VelocitySource {
    /// `v = S^⊥ (0, ∂_t f)`, the normal velocity of the moving graph.
    GraphMotion,
    /// `v = h + u^⊥`, the motion law.
    MotionLaw,
}

/// Ambient velocity vectors at every node of a range of time levels,
/// defined along the graph.
#[derive(Clone, Debug)]
pub struct VelocityField<T> {
    grid: SpaceTimeGrid<T>,
    levels: Range<usize>,
    source: VelocitySource,
    data: Vec<T>,
}

impl<T: Real> VelocityField<T> {
    pub fn source(&self) -> VelocitySource {
        self.source
    }

    pub fn levels(&self) -> Range<usize> {
        self.levels.clone()
    }

    pub fn grid(&self) -> &SpaceTimeGrid<T> {
        &self.grid
    }

    /// `v` at node `node` of flow time level `m`.
    pub fn at(&self, m: usize, node: usize) -> &[T] {
        assert!(self.levels.contains(&m), "level {m} outside {:?}", self.levels);
        let n = self.grid.ambient_dim();
        let base = ((m - self.levels.start) * self.grid.num_nodes() + node) * n;
        &self.data[base..base + n]
    }

    fn check_covers(&self, levels: Range<usize>) -> Result<()> {
        if levels.start < self.levels.start || levels.end > self.levels.end {
            return Err(Error::TimeIndex {
                index: if levels.start < self.levels.start {
                    levels.start
                } else {
                    levels.end - 1
                },
                levels: self.levels.end,
            });
        }
        Ok(())
    }
}

fn check_levels<T: Real>(flow: &GraphFlow<T>, levels: &Range<usize>) -> Result<()> {
    if levels.is_empty() || levels.end > flow.time_levels() {
        return Err(Error::TimeIndex {
            index: levels.end.saturating_sub(1).max(levels.start),
            levels: flow.time_levels(),
        });
    }
    Ok(())
}

fn build_velocity<T: Real>(
    flow: &GraphFlow<T>,
    levels: Range<usize>,
    source: VelocitySource,
    level: impl Fn(usize) -> Result<Vec<T>> + Sync + Send,
) -> Result<VelocityField<T>> {
    check_levels(flow, &levels)?;
    let per_level = levels.clone().into_par_iter().map(level).collect::<Result<Vec<_>>>()?;
    Ok(VelocityField {
        grid: flow.grid().clone(),
        levels,
        source,
        data: per_level.concat(),
    })
}

fn gradient_matrix<T: Real>(p: &[T], k: usize, codim: usize, node: usize) -> Result<GradientMatrix<T>> {
    GradientMatrix::new(k, codim, p[node * k * codim..(node + 1) * k * codim].to_vec())
}

/// `(I − S) w` for the tangent projection `S` (row-major `n×n`).
fn normal_part<T: Real>(s: &[T], w: &[T], out: &mut [T]) {
    let n = w.len();
    for r in 0..n {
        out[r] = w[r] - (0..n).map(|c| s[r * n + c] * w[c]).sum::<T>();
    }
}

fn graph_velocity_level<T: Real>(flow: &GraphFlow<T>, m: usize) -> Result<Vec<T>> {
    let grid = flow.grid();
    let (k, codim, n) = (grid.k(), grid.codim(), grid.ambient_dim());
    let p = gradient_of_slice(grid, flow.slice(m))?;
    let ft = time_derivative(flow, m)?;
    let mut out = vec![T::zero(); grid.num_nodes() * n];
    out.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(node, v)| -> Result<()> {
            let s = canonical_tangent_projection(&gradient_matrix(&p, k, codim, node)?);
            let mut w = vec![T::zero(); n];
            w[k..].copy_from_slice(ft.node(node));
            normal_part(s.as_slice(), &w, v);
            Ok(())
        })?;
    Ok(out)
}

fn motion_law_level<T: Real>(flow: &GraphFlow<T>, forcing: &ForcingSpec<T>, m: usize) -> Result<Vec<T>> {
    let grid = flow.grid();
    let (k, codim, n) = (grid.k(), grid.codim(), grid.ambient_dim());
    if forcing.dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "forcing has {} components, ambient dimension is {n}",
            forcing.dim()
        )));
    }
    let slice = flow.slice(m);
    let p = gradient_of_slice(grid, slice)?;
    let q = hessian_of_slice(grid, slice)?;
    let ql = codim * sym_len(k);
    let t = grid.time(m);
    let mut out = vec![T::zero(); grid.num_nodes() * n];
    out.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(node, v)| -> Result<()> {
            let pm = gradient_matrix(&p, k, codim, node)?;
            let qm = HessianTensor::from_packed(k, codim, q[node * ql..(node + 1) * ql].to_vec())?;
            let metric = induced_metric(&pm);
            let h = mean_curvature_with_metric(&pm, &qm, &metric.g_inv);
            let s = canonical_tangent_projection(&pm);
            let mut z = grid.coords(node);
            z.extend_from_slice(&slice[node * codim..(node + 1) * codim]);
            let mut u = vec![T::zero(); n];
            forcing.eval(&z, t, &mut u)?;
            normal_part(s.as_slice(), &u, v);
            for (vi, &hi) in v.iter_mut().zip(&h) {
                *vi += hi;
            }
            Ok(())
        })?;
    Ok(out)
}

/// Normal velocity of the graph at level `m`: `v = S^⊥ (0, ∂_t f)`.
pub fn velocity_from_graph<T: Real>(flow: &GraphFlow<T>, m: usize) -> Result<VelocityField<T>> {
    velocity_from_graph_levels(flow, m..m + 1)
}

/// [`velocity_from_graph`] on a range of levels.
pub fn velocity_from_graph_levels<T: Real>(flow: &GraphFlow<T>, levels: Range<usize>) -> Result<VelocityField<T>> {
    build_velocity(flow, levels, VelocitySource::GraphMotion, |m| {
        graph_velocity_level(flow, m)
    })
}

/// Motion-law velocity at level `m`: `v = h + u^⊥` with `u` evaluated at
/// the graph points.
pub fn velocity_from_motion_law<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    m: usize,
) -> Result<VelocityField<T>> {
    velocity_from_motion_law_levels(flow, forcing, m..m + 1)
}

/// [`velocity_from_motion_law`] on a range of levels.
pub fn velocity_from_motion_law_levels<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    levels: Range<usize>,
) -> Result<VelocityField<T>> {
    build_velocity(flow, levels, VelocitySource::MotionLaw, |m| {
        motion_law_level(flow, forcing, m)
    })
}

/// Both sides of the Brakke inequality for one test function and window.
#[derive(Clone, Debug, PartialEq)]
pub struct BrakkeReport<T> {
    pub phi_id: usize,
    pub t1: T,
    pub t2: T,
    /// `‖V_{t₂}‖(φ(·, t₂)) − ‖V_{t₁}‖(φ(·, t₁))`.
    pub lhs: T,
    /// `∫∫ (−φ h + ∇φ) · v + ∂_t φ dμ` over `[t₁, t₂]`.
    pub rhs: T,
    /// `rhs − lhs`; non-negative for a Brakke flow, zero for a smooth one.
    pub residual: T,
    /// `max(|lhs|, |rhs|, μ(supp φ))`.
    pub scale: T,
    /// Discretization tolerance `C (h² + dt) · scale`.
    pub tol: T,
}

impl<T: Real> BrakkeReport<T> {
    pub fn relative(&self) -> T {
        if self.scale > T::zero() {
            self.residual.abs() / self.scale
        } else {
            self.residual.abs()
        }
    }

    /// The inequality holds up to the discretization tolerance.
    pub fn one_sided(&self) -> bool {
        self.residual >= -self.tol
    }

    /// Equality holds up to the discretization tolerance.
    pub fn within_tolerance(&self) -> bool {
        self.residual.abs() <= self.tol
    }
}

/// Evaluates both sides of the Brakke inequality for `φ` on `[t₁, t₂]`;
/// `t₁ < t₂` must be grid times. Spatial integrals use the slices' area
/// weights. In time, the flux `(−φ h + ∇φ) · v` is integrated by the
/// trapezoid rule, while the `∂_t φ` term, with `φ = ψ(z) b_I(t)`, is
/// integrated step by step as `(b_I(t_{m+1}) − b_I(t_m))` times the mean of
/// `‖V‖(ψ)` at the two ends. Both rules are second order in `dt`; the second
/// makes the discrete balance exact whenever the slices do not move.
/// `c_report` sets the reported tolerance `C (h² + dt) · scale`.
pub fn brakke_residual<T: Real>(
    measure: &SpaceTimeMeasure<T>,
    velocity: &VelocityField<T>,
    phi: &TestFunction<T>,
    t1: T,
    t2: T,
    c_report: T,
) -> Result<BrakkeReport<T>> {
    if !(t1 < t2) {
        return Err(Error::Window {
            t1: t1.to_f64_lossy(),
            t2: t2.to_f64_lossy(),
        });
    }
    let grid = measure.grid();
    if velocity.grid() != grid {
        return Err(Error::ShapeMismatch(
            "velocity and measure live on different grids".into(),
        ));
    }
    let window_err = || Error::Window {
        t1: t1.to_f64_lossy(),
        t2: t2.to_f64_lossy(),
    };
    let m1 = measure.level_at(t1).map_err(|_| window_err())?;
    let m2 = measure.level_at(t2).map_err(|_| window_err())?;
    velocity.check_covers(m1..m2 + 1)?;
    let terms = |m: usize| -> Result<LevelTerms<T>> { Ok(level_terms(measure.slice(m)?, velocity, m, phi)) };
    assemble_report(phi, grid, m1, m2, terms, c_report)
}

/// The integrals of one test function over one slice.
#[derive(Clone, Copy, Debug)]
struct LevelTerms<T> {
    /// `‖V_t‖(ψ)` for the spatial factor `ψ`.
    spatial_mass: T,
    /// `∫ (−φ h + ∇φ) · v d‖V_t‖`.
    flux: T,
    /// `‖V_t‖({φ(·, t) > 0})`.
    support: T,
}

fn level_terms<T: Real>(
    v: &DiscreteVarifold<T>,
    velocity: &VelocityField<T>,
    m: usize,
    phi: &TestFunction<T>,
) -> LevelTerms<T> {
    LevelTerms {
        spatial_mass: par::sum(v.num_nodes(), |node| phi.spatial(v.position(node)) * v.weights()[node]),
        flux: slice_flux(v, velocity, m, phi),
        support: slice_support(v, phi),
    }
}

/// `∫ (−φ h + ∇φ) · v d‖V_t‖` on one slice.
fn slice_flux<T: Real>(v: &DiscreteVarifold<T>, velocity: &VelocityField<T>, m: usize, phi: &TestFunction<T>) -> T {
    let n = v.grid().ambient_dim();
    let t = v.time();
    let w = v.weights();
    par::sum(v.num_nodes(), |node| {
        if w[node] == T::zero() {
            return T::zero();
        }
        let z = v.position(node);
        let mut grad = vec![T::zero(); n];
        let (p, _) = phi.eval_with_derivatives(z, t, &mut grad);
        if p == T::zero() && grad.iter().all(|&g| g == T::zero()) {
            return T::zero();
        }
        let h = v.mean_curvature(node);
        let vel = velocity.at(m, node);
        let flux: T = (0..n).map(|i| (grad[i] - p * h[i]) * vel[i]).sum();
        flux * w[node]
    })
}

/// `‖V_t‖({φ(·, t) > 0})` on one slice.
fn slice_support<T: Real>(v: &DiscreteVarifold<T>, phi: &TestFunction<T>) -> T {
    let t = v.time();
    let w = v.weights();
    par::sum(v.num_nodes(), |node| {
        if phi.eval(v.position(node), t) > T::zero() {
            w[node]
        } else {
            T::zero()
        }
    })
}

/// Combines per-level integrals into a report for the window `m1..=m2`.
fn assemble_report<T: Real>(
    phi: &TestFunction<T>,
    grid: &SpaceTimeGrid<T>,
    m1: usize,
    m2: usize,
    terms: impl Fn(usize) -> Result<LevelTerms<T>>,
    c_report: T,
) -> Result<BrakkeReport<T>> {
    let eta = |m: usize| phi.time_cutoff(grid.time(m));
    let (first, last) = (terms(m1)?, terms(m2)?);
    let lhs = eta(m2) * last.spatial_mass - eta(m1) * first.spatial_mass;
    let mut rhs = T::zero();
    let mut support = T::zero();
    let mut prev: Option<LevelTerms<T>> = None;
    for m in m1..=m2 {
        let cur = terms(m)?;
        let tw = time_weight(m, m1, m2, grid.dt());
        rhs += tw * cur.flux;
        support += tw * cur.support;
        if let Some(p) = prev {
            rhs += (eta(m) - eta(m - 1)) * T::lit(0.5) * (p.spatial_mass + cur.spatial_mass);
        }
        prev = Some(cur);
    }
    let residual = rhs - lhs;
    let scale = lhs.abs().max(rhs.abs()).max(support);
    let tol = c_report * (grid.h() * grid.h() + grid.dt()) * scale;
    Ok(BrakkeReport {
        phi_id: phi.id(),
        t1: grid.time(m1),
        t2: grid.time(m2),
        lhs,
        rhs,
        residual,
        scale,
        tol,
    })
}

/// [`brakke_residual`] for every pair of test function and window, in
/// parallel; the order of the reports is test-function-major.
pub fn brakke_residuals<T: Real>(
    measure: &SpaceTimeMeasure<T>,
    velocity: &VelocityField<T>,
    phis: &[TestFunction<T>],
    windows: &[(T, T)],
    c_report: T,
) -> Result<Vec<BrakkeReport<T>>> {
    let tuples: Vec<(usize, usize)> = (0..phis.len())
        .flat_map(|i| (0..windows.len()).map(move |j| (i, j)))
        .collect();
    tuples
        .into_par_iter()
        .map(|(i, j)| brakke_residual(measure, velocity, &phis[i], windows[j].0, windows[j].1, c_report))
        .collect()
}

/// [`brakke_residuals`] without holding the space-time measure: each level
/// of the flow becomes a varifold once, its integrals against every test
/// function are kept, and the windows are assembled from those. Memory is
/// one slice per worker plus three numbers per level and test function;
/// the reports equal those of [`brakke_residuals`] bit for bit.
pub fn brakke_residuals_streaming<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    source: VelocitySource,
    phis: &[TestFunction<T>],
    windows: &[(T, T)],
    c_report: T,
) -> Result<Vec<BrakkeReport<T>>> {
    let grid = flow.grid();
    let all = 0..flow.time_levels();
    let spans = windows
        .iter()
        .map(|&(t1, t2)| {
            let err = || Error::Window {
                t1: t1.to_f64_lossy(),
                t2: t2.to_f64_lossy(),
            };
            if !(t1 < t2) {
                return Err(err());
            }
            let m1 = level_at(grid, all.clone(), t1).map_err(|_| err())?;
            let m2 = level_at(grid, all.clone(), t2).map_err(|_| err())?;
            Ok((m1, m2))
        })
        .collect::<Result<Vec<_>>>()?;
    let (Some(lo), Some(hi)) = (spans.iter().map(|s| s.0).min(), spans.iter().map(|s| s.1).max()) else {
        return Ok(Vec::new());
    };
    // terms[m - lo][i]: integrals of test function i over level m.
    let terms = (lo..hi + 1)
        .into_par_iter()
        .map(|m| -> Result<Vec<LevelTerms<T>>> {
            let v = DiscreteVarifold::from_flow(flow, m)?;
            let velocity = match source {
                VelocitySource::GraphMotion => velocity_from_graph(flow, m)?,
                VelocitySource::MotionLaw => velocity_from_motion_law(flow, forcing, m)?,
            };
            Ok(phis.iter().map(|phi| level_terms(&v, &velocity, m, phi)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(phis.len() * spans.len());
    for (i, phi) in phis.iter().enumerate() {
        for &(m1, m2) in &spans {
            reports.push(assemble_report(phi, grid, m1, m2, |m| Ok(terms[m - lo][i]), c_report)?);
        }
    }
    Ok(reports)
}

/// A nodal residual with its interior maximum and interior `L²` norm.
#[derive(Clone, Debug)]
pub struct NodalResidual<T> {
    pub field: FieldSample<T>,
    pub max: T,
    pub l2: T,
}

fn nodal_residual<T: Real>(grid: &SpaceTimeGrid<T>, m: usize, data: Vec<T>) -> Result<NodalResidual<T>> {
    let cell = grid.h().powi(grid.k() as i32);
    let interior = |node: usize| !grid.is_boundary(node);
    let max = par::max(data.len(), |node| if interior(node) { data[node] } else { T::zero() });
    let l2 = par::sum(data.len(), |node| {
        if interior(node) {
            data[node] * data[node] * cell
        } else {
            T::zero()
        }
    })
    .sqrt();
    Ok(NodalResidual {
        field: FieldSample::new(grid.clone(), m, 1, data)?,
        max,
        l2,
    })
}

/// Per node `|∂_t f − (T^⊥ v)_{normal} + ∇f · (T v)|`: the defect in the
/// identity `∂_t f = T^⊥ v − ∇_{T v} f` relating the normal velocity `v`
/// of the graph points to the time derivative of the graph function.
pub fn identity_residual<T: Real>(flow: &GraphFlow<T>, v: &VelocityField<T>, m: usize) -> Result<NodalResidual<T>> {
    v.check_covers(m..m + 1)?;
    let grid = flow.grid();
    if v.grid() != grid {
        return Err(Error::ShapeMismatch("velocity and flow live on different grids".into()));
    }
    let (k, codim) = (grid.k(), grid.codim());
    let p = gradient_of_slice(grid, flow.slice(m))?;
    let ft = time_derivative(flow, m)?;
    let data: Vec<T> = (0..grid.num_nodes())
        .into_par_iter()
        .map(|node| {
            let vel = v.at(m, node);
            let pn = &p[node * k * codim..(node + 1) * k * codim];
            (0..codim)
                .map(|a| {
                    let r = ft.node(node)[a] - vel[k + a] + (0..k).map(|i| pn[a * k + i] * vel[i]).sum::<T>();
                    r * r
                })
                .sum::<T>()
                .sqrt()
        })
        .collect();
    nodal_residual(grid, m, data)
}

/// Per node `|v_graph − v_law|` between the graph's normal velocity and
/// the motion law `h + u^⊥`.
pub fn motion_law_residual<T: Real>(
    flow: &GraphFlow<T>,
    forcing: &ForcingSpec<T>,
    m: usize,
) -> Result<NodalResidual<T>> {
    flow.check_time_index(m)?;
    let n = flow.grid().ambient_dim();
    let a = graph_velocity_level(flow, m)?;
    let b = motion_law_level(flow, forcing, m)?;
    let data = a
        .chunks(n)
        .zip(b.chunks(n))
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt())
        .collect();
    nodal_residual(flow.grid(), m, data)
}
