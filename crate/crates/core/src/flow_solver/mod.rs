//! Time stepping of the forced graphical mean curvature flow
//!
//! ```text
//! ∂_t f^a = g^{ij} ∂_{ij} f^a + U^a,    U^a = (u^⊥)^{k+a} − (u^⊥)^j ∂_j f^a,
//! ```
//!
//! with `u` evaluated along the graph, `ũ(x, t) = u(x + f(x, t), t)`.
//! The non-divergence form is discretized directly with the central
//! stencils of [`crate::discretization`]; only interior nodes are advanced,
//! box-face nodes carry Dirichlet data.
//!
//! Because the eigenvalues of `g^{ij}` never exceed one, the explicit scheme
//! is stable under the uniform restriction `dt ≤ h²/(2k)`.

mod forcing;
mod linear;

use std::time::Instant;

use rayon::prelude::*;

pub use forcing::{forcing_term, forcing_term_reduced, ForcingSpec, GriddedField};
pub use linear::bicgstab;

use crate::discretization::{gradient_of_slice, hessian_of_slice, BoundaryPolicy, GraphFlow, SpaceTimeGrid};
use crate::geometry::{metric_into, sym_index, sym_len};
use crate::linalg::spd_inverse_slice;
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Forward Euler with coefficients from the current slice.
    Explicit,
    /// Coefficients frozen at the current slice, `(I − dt L_m) f^{m+1} =
    /// f^m + dt U^m` solved by BiCGSTAB.
    SemiImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Face values from a known exact solution at every step.
    DirichletExact,
    /// Face values frozen at the initial trace.
    DirichletFrozen,
}

impl BoundaryMode {
    pub fn policy(self) -> BoundaryPolicy {
        match self {
            BoundaryMode::DirichletExact => BoundaryPolicy::DirichletExact,
            BoundaryMode::DirichletFrozen => BoundaryPolicy::DirichletFrozen,
        }
    }
}

/// How the time step is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep<T> {
    /// A fixed upper bound on `dt`.
    Fixed(T),
    /// `dt ≤ σ h²/(2k)` with safety factor `σ ∈ (0, 1]`.
    Cfl(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    pub scheme: Scheme,
    pub time_step: TimeStep<T>,
    /// Abort once `max |∇f|` exceeds this.
    pub gradient_limit: T,
    pub boundary: BoundaryMode,
    /// Relative residual target of the semi-implicit linear solves.
    pub linear_tol: T,
    pub max_linear_iterations: usize,
    /// Store every `stride`-th time level.
    pub stride: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            scheme: Scheme::Explicit,
            time_step: TimeStep::Cfl(T::lit(0.9)),
            gradient_limit: T::lit(10.0),
            boundary: BoundaryMode::DirichletFrozen,
            linear_tol: T::lit(1e-10),
            max_linear_iterations: 2000,
            stride: 1,
        }
    }
}

/// `h²/(2k)`, the explicit stability limit.
pub fn cfl_limit<T: Real>(h: T, k: usize) -> T {
    h * h / (T::lit(2.0) * T::from_usize_lossy(k))
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        match self.time_step {
            TimeStep::Cfl(s) if !(s > T::zero() && s <= T::one()) => {
                return Err(Error::Invalid(format!("CFL safety factor {s} not in (0, 1]")));
            }
            TimeStep::Fixed(dt) if !(dt > T::zero()) => {
                return Err(Error::Invalid(format!("time step {dt} must be positive")));
            }
            _ => {}
        }
        if !(self.gradient_limit > T::zero()) {
            return Err(Error::Invalid("gradient limit must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::Invalid("stride must be at least 1".into()));
        }
        if !(self.linear_tol > T::zero()) {
            return Err(Error::Invalid("linear tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Largest admissible step for spacing `h` in dimension `k`.
    pub fn dt_max(&self, h: T, k: usize) -> T {
        match self.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl(s) => s * cfl_limit(h, k),
        }
    }

    /// A solver grid over the box with spacing `≤ h_max` and a step
    /// `≤ dt_max` that divides the time range into a multiple of `stride`.
    #[allow(clippy::too_many_arguments)]
    pub fn grid(
        &self,
        k: usize,
        codim: usize,
        lo: Vec<T>,
        hi: Vec<T>,
        h_max: T,
        t_range: (T, T),
    ) -> Result<SpaceTimeGrid<T>> {
        self.validate()?;
        let probe = SpaceTimeGrid::fitted(
            k,
            codim,
            lo.clone(),
            hi.clone(),
            h_max,
            t_range,
            t_range.1 - t_range.0,
            1,
        )?;
        let dt = self.dt_max(probe.h(), k);
        SpaceTimeGrid::fitted(k, codim, lo, hi, h_max, t_range, dt, self.stride)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Completed,
    GradientGuard,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowRunReport<T> {
    pub scheme: Scheme,
    pub boundary: BoundaryMode,
    pub h: T,
    pub dt: T,
    /// Steps taken.
    pub steps: usize,
    /// `max |∇f|` (Frobenius, over all nodes) at levels `0..=steps`.
    pub max_gradient: Vec<T>,
    /// `dt / (h²/(2k))`.
    pub cfl_ratio: T,
    pub linear_iterations: usize,
    pub wall_time_s: f64,
    pub termination: Termination,
}

impl<T: Real> FlowRunReport<T> {
    pub fn to_f64(&self) -> FlowRunReport<f64> {
        FlowRunReport {
            scheme: self.scheme,
            boundary: self.boundary,
            h: self.h.to_f64_lossy(),
            dt: self.dt.to_f64_lossy(),
            steps: self.steps,
            max_gradient: self.max_gradient.iter().map(|g| g.to_f64_lossy()).collect(),
            cfl_ratio: self.cfl_ratio.to_f64_lossy(),
            linear_iterations: self.linear_iterations,
            wall_time_s: self.wall_time_s,
            termination: self.termination,
        }
    }
}

/// Exact boundary data `f(x, t)`.
pub type BoundaryFn<'a, T> = &'a (dyn Fn(&[T], T, &mut [T]) + Sync);

/// What one step reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo<T> {
    /// `max |∇f|` of the slice the step started from.
    pub max_gradient: T,
    pub linear_iterations: usize,
}

pub struct Solver<'a, T> {
    grid: SpaceTimeGrid<T>,
    config: SolverConfig<T>,
    forcing: &'a ForcingSpec<T>,
    exact: Option<BoundaryFn<'a, T>>,
    interior: Vec<usize>,
}

struct Scratch<T> {
    g: Vec<T>,
    g_inv: Vec<T>,
    l: Vec<T>,
    point: Vec<T>,
    u: Vec<T>,
}

impl<T: Real> Scratch<T> {
    fn new(k: usize, m: usize) -> Self {
        Self {
            g: vec![T::zero(); k * k],
            g_inv: vec![T::zero(); k * k],
            l: vec![T::zero(); k * k],
            point: vec![T::zero(); k + m],
            u: vec![T::zero(); k + m],
        }
    }

    /// Fills `g_inv` from the gradient `p` of one node.
    fn metric(&mut self, p: &[T], k: usize, m: usize) {
        metric_into(p, k, m, &mut self.g);
        spd_inverse_slice(&self.g, k, &mut self.g_inv, &mut self.l).expect("g_ij = I + PᵀP is positive definite");
    }
}

fn max_frobenius<T: Real>(grad: &[T], ncomp: usize) -> T {
    crate::par::max(grad.len() / ncomp, |n| {
        grad[n * ncomp..(n + 1) * ncomp]
            .iter()
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
    })
}

impl<'a, T: Real> Solver<'a, T> {
    /// `grid` is the solver grid: its `dt` is the step and its levels are
    /// every step of the run.
    pub fn new(grid: SpaceTimeGrid<T>, config: SolverConfig<T>, forcing: &'a ForcingSpec<T>) -> Result<Self> {
        config.validate()?;
        if forcing.dim() != grid.ambient_dim() {
            return Err(Error::ShapeMismatch(format!(
                "forcing lives in R^{}, the flow in R^{}",
                forcing.dim(),
                grid.ambient_dim()
            )));
        }
        if config.scheme == Scheme::Explicit {
            let limit = cfl_limit(grid.h(), grid.k());
            if grid.dt() > limit * (T::one() + T::lit(1e-12)) {
                return Err(Error::Cfl {
                    dt: grid.dt().to_f64_lossy(),
                    limit: limit.to_f64_lossy(),
                });
            }
        }
        let interior = (0..grid.num_nodes()).filter(|&n| !grid.is_boundary(n)).collect();
        Ok(Self {
            grid,
            config,
            forcing,
            exact: None,
            interior,
        })
    }

    /// Supplies the exact solution used by [`BoundaryMode::DirichletExact`].
    pub fn with_exact_boundary(mut self, f: BoundaryFn<'a, T>) -> Self {
        self.exact = Some(f);
        self
    }

    pub fn grid(&self) -> &SpaceTimeGrid<T> {
        &self.grid
    }

    fn set_boundary(&self, level: usize, current: &[T], next: &mut [T]) -> Result<()> {
        let m = self.grid.codim();
        match (self.config.boundary, self.exact) {
            (BoundaryMode::DirichletFrozen, _) => {
                for n in (0..self.grid.num_nodes()).filter(|&n| self.grid.is_boundary(n)) {
                    next[n * m..(n + 1) * m].copy_from_slice(&current[n * m..(n + 1) * m]);
                }
            }
            (BoundaryMode::DirichletExact, Some(f)) => {
                let t = self.grid.time(level);
                let mut x = vec![T::zero(); self.grid.k()];
                for n in (0..self.grid.num_nodes()).filter(|&n| self.grid.is_boundary(n)) {
                    self.grid.coords_into(n, &mut x);
                    f(&x, t, &mut next[n * m..(n + 1) * m]);
                }
            }
            (BoundaryMode::DirichletExact, None) => {
                return Err(Error::Invalid(
                    "dirichlet-exact boundary needs exact boundary data".into(),
                ));
            }
        }
        Ok(())
    }

    /// Forcing term `U` at every interior node of `slice` at time `t`,
    /// packed `interior_index · codim + a`.
    fn forcing_terms(&self, slice: &[T], grad: &[T], t: T) -> Result<Vec<T>> {
        let (k, m) = (self.grid.k(), self.grid.codim());
        let mut out = vec![T::zero(); self.interior.len() * m];
        if self.forcing.is_zero() {
            return Ok(out);
        }
        out.par_chunks_mut(m).zip(self.interior.par_iter()).try_for_each_init(
            || Scratch::new(k, m),
            |s, (o, &n)| -> Result<()> {
                self.grid.coords_into(n, &mut s.point[..k]);
                s.point[k..].copy_from_slice(&slice[n * m..(n + 1) * m]);
                self.forcing.eval(&s.point, t, &mut s.u)?;
                forcing_term_reduced(&grad[n * k * m..(n + 1) * k * m], k, &s.u, o);
                Ok(())
            },
        )?;
        Ok(out)
    }

    /// Advances level `level` (values `current`) to `level + 1`.
    pub fn step(&self, level: usize, current: &[T], next: &mut [T]) -> Result<StepInfo<T>> {
        let (k, m) = (self.grid.k(), self.grid.codim());
        let len = self.grid.num_nodes() * m;
        if current.len() != len || next.len() != len {
            return Err(Error::ShapeMismatch(format!("slice needs {len} values")));
        }
        let t = self.grid.time(level);
        let dt = self.grid.dt();
        let grad = gradient_of_slice(&self.grid, current)?;
        let max_gradient = max_frobenius(&grad, k * m);
        let big_u = self.forcing_terms(current, &grad, t)?;
        self.set_boundary(level + 1, current, next)?;
        let sl = sym_len(k);
        let mut linear_iterations = 0;
        match self.config.scheme {
            Scheme::Explicit => {
                let hess = hessian_of_slice(&self.grid, current)?;
                let mut updates = vec![T::zero(); self.interior.len() * m];
                updates
                    .par_chunks_mut(m)
                    .zip(self.interior.par_iter())
                    .enumerate()
                    .for_each_init(
                        || Scratch::new(k, m),
                        |s, (ii, (o, &n))| {
                            let q = &hess[n * m * sl..(n + 1) * m * sl];
                            s.metric(&grad[n * k * m..(n + 1) * k * m], k, m);
                            for (a, oa) in o.iter_mut().enumerate() {
                                let mut lap = T::zero();
                                for i in 0..k {
                                    for j in 0..k {
                                        lap += s.g_inv[i * k + j] * q[a * sl + sym_index(k, i, j)];
                                    }
                                }
                                *oa = current[n * m + a] + dt * (lap + big_u[ii * m + a]);
                            }
                        },
                    );
                for (ii, &n) in self.interior.iter().enumerate() {
                    next[n * m..(n + 1) * m].copy_from_slice(&updates[ii * m..(ii + 1) * m]);
                }
            }
            Scheme::SemiImplicit => {
                // Frozen coefficients g^{ij} at every interior node.
                let mut coeffs = vec![T::zero(); self.interior.len() * k * k];
                coeffs
                    .par_chunks_mut(k * k)
                    .zip(self.interior.par_iter())
                    .for_each_init(
                        || Scratch::new(k, m),
                        |s, (c, &n)| {
                            s.metric(&grad[n * k * m..(n + 1) * k * m], k, m);
                            c.copy_from_slice(&s.g_inv);
                        },
                    );
                let mut rhs = next.to_vec();
                for (ii, &n) in self.interior.iter().enumerate() {
                    for a in 0..m {
                        rhs[n * m + a] = current[n * m + a] + dt * big_u[ii * m + a];
                    }
                }
                let apply = |v: &[T], out: &mut [T]| {
                    let hess = hessian_of_slice(&self.grid, v).expect("grid validated at construction");
                    out.copy_from_slice(v);
                    let rows: Vec<T> = self
                        .interior
                        .par_iter()
                        .enumerate()
                        .flat_map_iter(|(ii, &n)| {
                            let c = &coeffs[ii * k * k..(ii + 1) * k * k];
                            let q = &hess[n * m * sl..(n + 1) * m * sl];
                            (0..m).map(move |a| {
                                let mut lap = T::zero();
                                for i in 0..k {
                                    for j in 0..k {
                                        lap += c[i * k + j] * q[a * sl + sym_index(k, i, j)];
                                    }
                                }
                                v[n * m + a] - dt * lap
                            })
                        })
                        .collect();
                    for (ii, &n) in self.interior.iter().enumerate() {
                        out[n * m..(n + 1) * m].copy_from_slice(&rows[ii * m..(ii + 1) * m]);
                    }
                };
                // The explicit forcing predictor is the initial guess; for
                // flat data it is already the solution.
                let mut x = rhs.clone();
                let (iters, _) = bicgstab(
                    apply,
                    &rhs,
                    &mut x,
                    self.config.linear_tol,
                    self.config.max_linear_iterations,
                )?;
                linear_iterations = iters;
                next.copy_from_slice(&x);
            }
        }
        Ok(StepInfo {
            max_gradient,
            linear_iterations,
        })
    }

    /// Runs from `initial` (level 0) over every level of the solver grid and
    /// returns the flow thinned to every `stride`-th level.
    pub fn run(&self, initial: &[T]) -> Result<(GraphFlow<T>, FlowRunReport<T>)> {
        let start = Instant::now();
        let grid = &self.grid;
        let (k, m) = (grid.k(), grid.codim());
        let len = grid.num_nodes() * m;
        // Validates shape and finiteness with node diagnostics.
        GraphFlow::new(
            grid.with_time(grid.t_start(), grid.dt(), 1),
            initial.to_vec(),
            BoundaryPolicy::Unspecified,
        )?;
        let steps = grid.time_levels() - 1;
        let stride = self.config.stride;
        if !steps.is_multiple_of(stride) {
            return Err(Error::Invalid(format!(
                "{steps} steps are not a multiple of the stride {stride}"
            )));
        }
        let mut report = FlowRunReport {
            scheme: self.config.scheme,
            boundary: self.config.boundary,
            h: grid.h(),
            dt: grid.dt(),
            steps: 0,
            max_gradient: Vec::with_capacity(steps + 1),
            cfl_ratio: grid.dt() / cfl_limit(grid.h(), k),
            linear_iterations: 0,
            wall_time_s: 0.0,
            termination: Termination::Completed,
        };
        let mut stored = Vec::with_capacity(len * (steps / stride + 1));
        stored.extend_from_slice(initial);
        let mut current = initial.to_vec();
        let mut next = vec![T::zero(); len];
        let limit = self.config.gradient_limit;
        let guard = |report: &mut FlowRunReport<T>, g: T, step: usize| -> Result<()> {
            if g <= limit {
                return Ok(());
            }
            report.termination = Termination::GradientGuard;
            report.wall_time_s = start.elapsed().as_secs_f64();
            Err(Error::GradientGuard {
                step,
                max_gradient: g.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
                report: Box::new(report.to_f64()),
            })
        };
        for level in 0..steps {
            let info = self.step(level, &current, &mut next)?;
            report.max_gradient.push(info.max_gradient);
            report.linear_iterations += info.linear_iterations;
            guard(&mut report, info.max_gradient, level)?;
            report.steps += 1;
            std::mem::swap(&mut current, &mut next);
            if (level + 1) % stride == 0 {
                stored.extend_from_slice(&current);
            }
        }
        let last = max_frobenius(&gradient_of_slice(grid, &current)?, k * m);
        report.max_gradient.push(last);
        guard(&mut report, last, steps)?;
        report.wall_time_s = start.elapsed().as_secs_f64();
        let out_grid = grid.with_time(
            grid.t_start(),
            grid.dt() * T::from_usize_lossy(stride),
            steps / stride + 1,
        );
        let flow = GraphFlow::new(out_grid, stored, self.config.boundary.policy())?;
        Ok((flow, report))
    }
}
