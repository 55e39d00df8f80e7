//! Residual checks, norms and estimates on a stored flow.
//!
//! Every number here is a function of the flow values and the config only,
//! so a flow read back from its CSV dump reproduces them bit for bit.

use graflow_core::brakke::{
    brakke_residuals_streaming, identity_residual, motion_law_residual, standard_windows, velocity_from_motion_law,
    BrakkeReport, BumpVectorField, TestFunction, VelocitySource,
};
use graflow_core::discretization::{GraphFlow, Region};
use graflow_core::norms::{estimate_report, lpq_norm, Cylinder, EstimateReport, NormRequest, NormTarget};
use graflow_core::varifold::{mean_curvature_duality_residual, DiscreteVarifold};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Exponent, RegionSpec, TargetId, VelocityId};
use crate::error::{input_error, CliError, Result};
use crate::scenario::Scenario;

/// One pass/fail entry of a run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrakkeRecord {
    pub phi_id: usize,
    pub t1: f64,
    pub t2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub scale: f64,
    pub tol: f64,
}

impl From<&BrakkeReport<f64>> for BrakkeRecord {
    fn from(r: &BrakkeReport<f64>) -> Self {
        Self {
            phi_id: r.phi_id,
            t1: r.t1,
            t2: r.t2,
            lhs: r.lhs,
            rhs: r.rhs,
            residual: r.residual,
            scale: r.scale,
            tol: r.tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub p: Exponent,
    pub q: Exponent,
    pub target: TargetId,
    pub region: RegionSpec,
    pub window: [f64; 2],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub p: Exponent,
    pub q: Exponent,
    #[serde(rename = "R")]
    pub radius: f64,
    pub lhs: f64,
    pub rhs_parts: Vec<f64>,
    pub ratio: Option<f64>,
    pub degenerate: bool,
    pub refinement_level: usize,
}

impl From<&EstimateReport<f64>> for EstimateRecord {
    fn from(r: &EstimateReport<f64>) -> Self {
        Self {
            p: Exponent(r.p),
            q: Exponent(r.q),
            radius: r.radius,
            lhs: r.lhs,
            rhs_parts: r.rhs_parts.clone(),
            ratio: r.ratio,
            degenerate: r.degenerate,
            refinement_level: r.refinement_level,
        }
    }
}

/// Raw residual maxima; `None` when the check is disabled or does not
/// apply.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub error: Option<f64>,
    pub brakke: Option<f64>,
    pub identity: Option<f64>,
    pub motion_law: Option<f64>,
    pub duality: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verification {
    pub checks: Vec<CheckResult>,
    pub residuals: Residuals,
    pub brakke: Vec<BrakkeRecord>,
    pub norms: Vec<NormRecord>,
    pub estimates: Vec<EstimateRecord>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, measured: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: measured <= tolerance,
        measured,
        tolerance,
    }
}

/// `max |f − f_exact|` over every stored value.
pub fn solution_error(flow: &GraphFlow<f64>, exact: &crate::scenario::ClosedForm) -> f64 {
    let grid = flow.grid();
    let m = grid.codim();
    (0..flow.time_levels())
        .into_par_iter()
        .map(|lvl| {
            let t = grid.time(lvl);
            let mut want = vec![0.0; m];
            let slice = flow.slice(lvl);
            (0..grid.num_nodes()).fold(0.0f64, |acc, node| {
                exact.eval(&grid.coords(node), t, &mut want);
                want.iter()
                    .zip(&slice[node * m..(node + 1) * m])
                    .fold(acc, |a, (w, v)| a.max((w - v).abs()))
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Maxima over all levels of the identity residual (with the motion-law
/// velocity), the motion-law residual and `|v|`, interior nodes only.
fn nodal_maxima(scenario: &Scenario, flow: &GraphFlow<f64>) -> Result<(f64, f64, f64)> {
    let grid = flow.grid();
    let per_level = (0..flow.time_levels())
        .into_par_iter()
        .map(|m| -> graflow_core::Result<(f64, f64, f64)> {
            let v = velocity_from_motion_law(flow, &scenario.forcing, m)?;
            let id = identity_residual(flow, &v, m)?.max;
            let law = motion_law_residual(flow, &scenario.forcing, m)?.max;
            let speed = (0..grid.num_nodes())
                .filter(|&node| !grid.is_boundary(node))
                .map(|node| v.at(m, node).iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            Ok((id, law, speed))
        })
        .collect::<graflow_core::Result<Vec<_>>>()
        .map_err(input_error)?;
    Ok(per_level
        .into_iter()
        .fold((0.0, 0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2))))
}

/// Unit vertical directions `(0, d)` with `d` spread over the sphere of
/// the normal space `{0} × R^{n-k}`, deterministic. Vertical fields are the
/// variations of the graph function itself.
fn vertical_direction(i: usize, k: usize, n: usize) -> Vec<f64> {
    let d: Vec<f64> = (0..n)
        .map(|j| {
            if j < k {
                0.0
            } else {
                (1.0 + i as f64 * 0.618_033_988_749_895 + j as f64 * 2.399_963_229_728_653).cos()
            }
        })
        .collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    d.into_iter().map(|x| x / norm).collect()
}

/// Worst duality residual over `count` bump fields on the first, middle
/// and last stored slices.
fn duality_maximum(flow: &GraphFlow<f64>, count: usize) -> Result<f64> {
    let family = TestFunction::standard_family(flow, count).map_err(input_error)?;
    let (k, n) = (flow.grid().k(), flow.grid().ambient_dim());
    let last = flow.time_levels() - 1;
    let mut levels = vec![0, last / 2, last];
    levels.dedup();
    let mut worst = 0.0f64;
    for m in levels {
        let v = DiscreteVarifold::from_flow(flow, m).map_err(input_error)?;
        for (i, phi) in family.iter().enumerate() {
            let field = BumpVectorField::new(phi.time_independent(), vertical_direction(i, k, n), v.time())
                .map_err(input_error)?;
            worst = worst.max(mean_curvature_duality_residual(&v, &field).map_err(input_error)?);
        }
    }
    Ok(worst)
}

fn region(spec: &RegionSpec) -> Region<f64> {
    match spec {
        RegionSpec::All => Region::All,
        RegionSpec::Box { lo, hi } => Region::Box {
            lo: lo.clone(),
            hi: hi.clone(),
        },
        RegionSpec::Ball { center, radius } => Region::ball(center.clone(), *radius),
    }
}

fn target(t: TargetId) -> NormTarget {
    match t {
        TargetId::Value => NormTarget::Value,
        TargetId::Gradient => NormTarget::Gradient,
        TargetId::Hessian => NormTarget::Hessian,
        TargetId::TimeDerivative => NormTarget::TimeDerivative,
        TargetId::Forcing => NormTarget::Forcing,
    }
}

/// The configured norm requests on `flow`.
pub fn norms(scenario: &Scenario, flow: &GraphFlow<f64>) -> Result<Vec<NormRecord>> {
    let grid = flow.grid();
    scenario
        .config
        .norms
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let window = spec.window.unwrap_or([grid.t_start(), grid.t_end()]);
            let value = NormRequest::new(
                spec.p.0,
                spec.q.0,
                region(&spec.region),
                (window[0], window[1]),
                target(spec.target),
            )
            .and_then(|req| lpq_norm(flow, &scenario.forcing, &req))
            .map_err(|e| CliError::Config(format!("norms[{i}]: {e}")))?;
            Ok(NormRecord {
                p: spec.p,
                q: spec.q,
                target: spec.target,
                region: spec.region.clone(),
                window,
                value,
            })
        })
        .collect()
}

/// The configured interior estimates on `flow`, tagged with
/// `refinement_level`.
pub fn estimates(scenario: &Scenario, flow: &GraphFlow<f64>, refinement_level: usize) -> Result<Vec<EstimateRecord>> {
    let grid = flow.grid();
    scenario
        .config
        .estimates
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let cylinder = Cylinder {
                center: spec.center.clone().unwrap_or_else(|| vec![0.0; grid.k()]),
                t_top: spec.t_top.unwrap_or(grid.t_end()),
                radius: spec.radius,
            };
            let mut report = estimate_report(flow, &scenario.forcing, spec.p.0, spec.q.0, &cylinder)
                .map_err(|e| CliError::Config(format!("estimates[{i}]: {e}")))?;
            report.refinement_level = refinement_level;
            Ok(EstimateRecord::from(&report))
        })
        .collect()
}

/// Runs every enabled check, the norm requests and the estimates.
pub fn verify_flow(scenario: &Scenario, flow: &GraphFlow<f64>, refinement_level: usize) -> Result<Verification> {
    let cfg = &scenario.config;
    let toggles = &cfg.checks;
    let opts = &cfg.verification;
    let grid = flow.grid();
    let (h, dt) = (grid.h(), grid.dt());
    let discretization = opts.c_report * (h * h + dt);
    let mut out = Verification::default();

    if toggles.solution_error {
        if let Some(exact) = &scenario.exact {
            let err = solution_error(flow, exact);
            out.residuals.error = Some(err);
            out.checks.push(check("solution_error", err, opts.error_tol));
        }
    }

    if toggles.brakke {
        let phis = TestFunction::standard_family(flow, opts.test_functions).map_err(input_error)?;
        let windows = standard_windows(grid);
        let source = match opts.brakke_velocity {
            VelocityId::MotionLaw => VelocitySource::MotionLaw,
            VelocityId::Graph => VelocitySource::GraphMotion,
        };
        let reports = brakke_residuals_streaming(flow, &scenario.forcing, source, &phis, &windows, opts.c_report)
            .map_err(input_error)?;
        let worst = reports.iter().map(|r| r.relative()).fold(0.0, f64::max);
        let below = reports
            .iter()
            .map(|r| {
                if r.scale > 0.0 {
                    (-r.residual).max(0.0) / r.scale
                } else {
                    (-r.residual).max(0.0)
                }
            })
            .fold(0.0, f64::max);
        let mut equality = check("brakke", worst, discretization);
        equality.passed = reports.iter().all(|r| r.within_tolerance());
        let mut one_sided = check("brakke_one_sided", below, discretization);
        one_sided.passed = reports.iter().all(|r| r.one_sided());
        out.residuals.brakke = Some(worst);
        out.checks.push(equality);
        out.checks.push(one_sided);
        out.brakke = reports.iter().map(BrakkeRecord::from).collect();
    }

    if toggles.identity || toggles.motion_law {
        let (id, law, speed) = nodal_maxima(scenario, flow)?;
        let tol = discretization * (1.0 + speed);
        if toggles.identity {
            out.residuals.identity = Some(id);
            out.checks.push(check("identity", id, tol));
        }
        if toggles.motion_law {
            out.residuals.motion_law = Some(law);
            out.checks.push(check("motion_law", law, tol));
        }
    }

    if toggles.duality {
        let worst = duality_maximum(flow, opts.duality_fields)?;
        out.residuals.duality = Some(worst);
        out.checks.push(check("duality", worst, opts.c_report * h * h));
    }

    out.norms = norms(scenario, flow)?;
    out.estimates = estimates(scenario, flow, refinement_level)?;
    Ok(out)
}
