//! Turns a [`ScenarioConfig`] into a solver grid, initial data, forcing and
//! (where one exists) a closed-form solution.

use graflow_core::discretization::{BoundaryPolicy, GraphFlow, SpaceTimeGrid};
use graflow_core::exact::ExactSolution;
use graflow_core::expr::Expr;
use graflow_core::flow_solver::{BoundaryMode, FlowRunReport, ForcingSpec, Scheme, Solver, SolverConfig, TimeStep};

use crate::config::{BoundaryId, ScenarioConfig, ScenarioId, SchemeId};
use crate::error::{solver_error, CliError, Result};

/// A closed-form graph function `f(x, t)`.
#[derive(Clone, Debug)]
pub enum ClosedForm {
    Builtin(ExactSolution<f64>),
    /// One expression per graph component in `x1..xk` and `t`.
    Expressions(Vec<Expr>),
}

impl ClosedForm {
    pub fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) {
        match self {
            ClosedForm::Builtin(s) => s.eval(x, t, out),
            ClosedForm::Expressions(list) => {
                for (o, e) in out.iter_mut().zip(list) {
                    *o = e.eval(x, &[], t);
                }
            }
        }
    }
}

/// Everything needed to run or check one scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub solver: SolverConfig<f64>,
    /// The solver grid: one level per time step.
    pub grid: SpaceTimeGrid<f64>,
    pub forcing: ForcingSpec<f64>,
    /// Initial data as a function of `(x, t)`, evaluated at the start time.
    pub initial: ClosedForm,
    /// The closed-form solution, when the scenario has one.
    pub exact: Option<ClosedForm>,
}

fn parse_all(list: &[String]) -> Result<Vec<Expr>> {
    list.iter()
        .map(|s| Expr::parse(s).map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

/// The fitted solver grid: spacing `≤ h`, step `≤` the configured bound, and
/// a step count divisible by `stride · step_multiple`.
fn solver_grid(config: &ScenarioConfig, solver: &SolverConfig<f64>) -> graflow_core::Result<SpaceTimeGrid<f64>> {
    solver.validate()?;
    let (k, m) = (config.k, config.codim());
    let (lo, hi) = (config.domain.lo.clone(), config.domain.hi.clone());
    let t_range = (config.t_range[0], config.t_range[1]);
    let probe = SpaceTimeGrid::fitted(
        k,
        m,
        lo.clone(),
        hi.clone(),
        config.h,
        t_range,
        t_range.1 - t_range.0,
        1,
    )?;
    let dt = solver.dt_max(probe.h(), k);
    SpaceTimeGrid::fitted(
        k,
        m,
        lo,
        hi,
        config.h,
        t_range,
        dt,
        solver.stride * config.solver.step_multiple,
    )
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let (k, m, n) = (config.k, config.codim(), config.n);
        let p = &config.params;
        let builtin = match config.scenario {
            ScenarioId::Flat => Some(ExactSolution::Flat { k, codim: m }),
            ScenarioId::Affine => Some(ExactSolution::Affine {
                k,
                codim: m,
                offset: p.offset.clone().unwrap_or_else(|| vec![0.0; m]),
                slope: p.slope.clone().unwrap_or_else(|| vec![0.5; m * k]),
            }),
            ScenarioId::ForcedTranslation => Some(ExactSolution::Translation {
                k,
                codim: m,
                velocity: p.velocity.clone().unwrap_or_else(|| vec![1.0; m]),
            }),
            ScenarioId::GrimReaper => Some(ExactSolution::GrimReaper {
                scale: config.grim_scale(),
            }),
            ScenarioId::ParaboloidCap => Some(ExactSolution::Paraboloid { k, codim: m }),
            ScenarioId::CustomExpression => None,
        };
        if let Some(s) = &builtin {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        let forcing = match (&config.forcing, &builtin) {
            (Some(list), _) => {
                ForcingSpec::analytic(k, parse_all(list)?).map_err(|e| CliError::Config(e.to_string()))?
            }
            (None, Some(s)) if s.is_solution() && !s.constant_forcing().iter().all(|&c| c == 0.0) => {
                ForcingSpec::Constant(s.constant_forcing())
            }
            (None, _) => ForcingSpec::Zero { n },
        };
        let (initial, exact) = match (&builtin, &config.exact, &config.initial) {
            (Some(s), _, _) => {
                let closed = ClosedForm::Builtin(s.clone());
                (closed.clone(), s.is_solution().then_some(closed))
            }
            (None, Some(list), _) => {
                let closed = ClosedForm::Expressions(parse_all(list)?);
                (closed.clone(), Some(closed))
            }
            (None, None, Some(list)) => (ClosedForm::Expressions(parse_all(list)?), None),
            (None, None, None) => return Err(CliError::Config("no initial data".into())),
        };
        let solver = SolverConfig {
            scheme: match config.scheme {
                SchemeId::Explicit => Scheme::Explicit,
                SchemeId::SemiImplicit => Scheme::SemiImplicit,
            },
            time_step: match (config.dt, config.cfl) {
                (Some(dt), _) => TimeStep::Fixed(dt),
                (None, Some(s)) => TimeStep::Cfl(s),
                (None, None) => TimeStep::Cfl(0.9),
            },
            gradient_limit: config.solver.gradient_limit,
            boundary: match config.boundary() {
                BoundaryId::Exact => BoundaryMode::DirichletExact,
                BoundaryId::Frozen => BoundaryMode::DirichletFrozen,
            },
            linear_tol: config.solver.linear_tol,
            max_linear_iterations: config.solver.max_linear_iterations,
            stride: config.solver.stride,
        };
        let grid = solver_grid(&config, &solver).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            config,
            solver,
            grid,
            forcing,
            initial,
            exact,
        })
    }

    pub fn boundary_policy(&self) -> BoundaryPolicy {
        self.solver.boundary.policy()
    }

    /// The grid of the stored flow: the solver grid thinned by the stride.
    pub fn output_grid(&self) -> SpaceTimeGrid<f64> {
        let stride = self.solver.stride;
        let steps = self.grid.time_levels() - 1;
        self.grid
            .with_time(self.grid.t_start(), self.grid.dt() * stride as f64, steps / stride + 1)
    }

    /// Level-0 values; non-finite initial data is an input error.
    pub fn initial_data(&self) -> Result<Vec<f64>> {
        let first = self.grid.with_time(self.grid.t_start(), self.grid.dt(), 1);
        let init = &self.initial;
        let flow = GraphFlow::from_fn(
            first,
            BoundaryPolicy::Unspecified,
            |x: &[f64], t: f64, out: &mut [f64]| init.eval(x, t, out),
        )
        .map_err(|e| CliError::Input(format!("initial data: {e}")))?;
        Ok(flow.values().to_vec())
    }

    /// Runs the time stepper over the configured range.
    pub fn solve(&self) -> Result<(GraphFlow<f64>, FlowRunReport<f64>)> {
        let initial = self.initial_data()?;
        let solver = Solver::new(self.grid.clone(), self.solver.clone(), &self.forcing).map_err(solver_error)?;
        let exact = self.exact.as_ref();
        let boundary = move |x: &[f64], t: f64, out: &mut [f64]| {
            if let Some(e) = exact {
                e.eval(x, t, out)
            }
        };
        let solver = if self.solver.boundary == BoundaryMode::DirichletExact {
            solver.with_exact_boundary(&boundary)
        } else {
            solver
        };
        solver.run(&initial).map_err(solver_error)
    }

    /// The same scenario with `h` halved `level` times; a fixed `dt` shrinks
    /// by `4^level` so that `dt/h²` stays put.
    pub fn refined(&self, level: u32) -> Result<Self> {
        let mut cfg = self.config.clone();
        let f = 2f64.powi(level as i32);
        cfg.h /= f;
        if let Some(dt) = cfg.dt.as_mut() {
            *dt /= f * f;
        }
        Scenario::new(cfg)
    }

    pub fn name(&self) -> &'static str {
        self.config.scenario.name()
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    fn scenario(text: &str) -> Scenario {
        Scenario::new(ScenarioConfig::from_json(text, Path::new("t.json")).unwrap()).unwrap()
    }

    #[test]
    fn forced_translation_forcing_is_the_normal_velocity() {
        let s = scenario(
            r#"{"scenario": "forced-translation", "k": 1, "n": 3,
                "box": {"lo": [-1.0], "hi": [1.0]}, "h": 0.25, "t_range": [0.0, 0.1],
                "params": {"velocity": [0.5, -0.25]}}"#,
        );
        assert_eq!(s.forcing, ForcingSpec::Constant(vec![0.0, 0.5, -0.25]));
        assert!(s.exact.is_some());
        let (flow, _) = s.solve().unwrap();
        let last = flow.time_levels() - 1;
        let t = flow.grid().time(last);
        for node in 0..flow.grid().num_nodes() {
            assert!((flow.value(last, node, 0) - 0.5 * t).abs() <= 1e-14);
            assert!((flow.value(last, node, 1) + 0.25 * t).abs() <= 1e-14);
        }
    }

    #[test]
    fn paraboloid_has_no_closed_form_and_frozen_faces() {
        let s = scenario(
            r#"{"scenario": "paraboloid-cap", "k": 2, "n": 3,
                "box": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]}, "h": 0.125, "t_range": [0.0, 0.01]}"#,
        );
        assert!(s.exact.is_none());
        assert_eq!(s.boundary_policy(), BoundaryPolicy::DirichletFrozen);
        let init = s.initial_data().unwrap();
        let g = &s.grid;
        for (node, &v) in init.iter().enumerate() {
            let x = g.coords(node);
            assert_eq!(v, 0.5 * (x[0] * x[0] + x[1] * x[1]));
        }
    }

    #[test]
    fn stride_thins_the_output_grid() {
        let s = scenario(
            r#"{"scenario": "flat", "k": 1, "n": 2, "box": {"lo": [0.0], "hi": [1.0]},
                "h": 0.25, "dt": 0.01, "t_range": [0.0, 0.2], "solver": {"stride": 4}}"#,
        );
        let out = s.output_grid();
        let (flow, report) = s.solve().unwrap();
        assert_eq!(flow.grid(), &out);
        assert_eq!(report.steps, (out.time_levels() - 1) * 4);
    }

    #[test]
    fn step_multiple_puts_quarter_times_on_the_grid() {
        let s = scenario(
            r#"{"scenario": "flat", "k": 1, "n": 2, "box": {"lo": [0.0], "hi": [1.0]},
                "h": 0.1, "t_range": [-1.0, 0.0], "solver": {"stride": 3, "step_multiple": 4}}"#,
        );
        let out = s.output_grid();
        assert_eq!((out.time_levels() - 1) % 4, 0);
        assert!(out.dt() <= 3.0 * 0.9 * out.h() * out.h() / 2.0 * (1.0 + 1e-12));
    }

    #[test]
    fn refinement_keeps_the_parabolic_ratio() {
        let s = scenario(
            r#"{"scenario": "flat", "k": 1, "n": 2, "box": {"lo": [0.0], "hi": [1.0]},
                "h": 0.25, "dt": 0.01, "t_range": [0.0, 0.16]}"#,
        );
        let r = s.refined(2).unwrap();
        assert_eq!(r.grid.h(), s.grid.h() / 4.0);
        assert!((r.grid.dt() - s.grid.dt() / 16.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_initial_data_is_an_input_error() {
        let s = scenario(
            r#"{"scenario": "custom-expression", "k": 1, "n": 2, "box": {"lo": [-1.0], "hi": [1.0]},
                "h": 0.25, "t_range": [0.0, 0.1], "initial": ["log(x1)"]}"#,
        );
        match s.initial_data() {
            Err(CliError::Input(msg)) => assert!(msg.contains("non-finite"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
