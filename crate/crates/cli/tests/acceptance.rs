//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Runs without the libtest harness so that criteria execute in order,
//! print a single summary line each and share solved flows. The process
//! exits non-zero if any criterion fails.
//!
//! Every threshold is pinned in [`tol`] with the reason it has that value.

use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use graflow::checks::{estimates, solution_error};
use graflow::config::ScenarioConfig;
use graflow::manifest::{RunManifest, WallTimes};
use graflow::run::{simulate, verify, BRAKKE_FILE, FLOW_FILE, MANIFEST_FILE, ROUNDOFF_FLOOR};
use graflow::scenario::Scenario;
use graflow_core::brakke::{
    brakke_residuals_streaming, identity_residual, motion_law_residual, standard_windows, velocity_from_motion_law,
    BumpVectorField, TestFunction, VelocitySource,
};
use graflow_core::discretization::{BoundaryPolicy, GraphFlow, Region, SpaceTimeGrid};
use graflow_core::flow_solver::ForcingSpec;
use graflow_core::geometry::{
    induced_metric, legendre_hadamard, sharp_ellipticity_bound, symmetric_extremes, unsquared_ellipticity_bound,
    GradientMatrix,
};
use graflow_core::norms::{lpq_norm, parabolic_holder, NormRequest, NormTarget, DEFAULT_PAIR_CAP};
use graflow_core::varifold::{mean_curvature_duality_residual, DiscreteVarifold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Pinned thresholds.
mod tol {
    /// Max-norm error of the grim reaper at `h = 1/64`.
    pub const GRIM_ERROR: f64 = 5e-3;
    /// Error reduction when `h` halves (second order would give 4).
    pub const GRIM_ERROR_RATIO: f64 = 3.0;
    /// Wall-clock budget of the `h = 1/64` grim reaper solve on one thread.
    pub const GRIM_RUNTIME_S: f64 = 10.0;
    /// Forced translation: the scheme is exact on `f = c·t`, so only
    /// rounding in `t = t₀ + m·dt` remains.
    pub const TRANSLATION_ERROR: f64 = 1e-12;
    /// `C` in `tol_discr = C·(h² + dt)·scale`, the same default the CLI uses.
    /// It is not a fitted constant: it only has to absorb the one-sided
    /// slack of a consistent discretization.
    pub const C_REPORT: f64 = 8.0;
    /// Empirical order of the Brakke, identity and motion-law residuals.
    pub const FIRST_ORDER: f64 = 1.0;
    /// Empirical order of the duality residual (second-order stencils).
    pub const DUALITY_ORDER: f64 = 1.5;
    /// Legendre–Hadamard and metric eigenvalue slack.
    pub const ALGEBRAIC: f64 = 1e-12;
    /// Closed-form norm and seminorm examples at `h = 1/128`.
    pub const NORM_ORACLE: f64 = 1e-3;
    /// Order of the quadrature-limited norm oracles (trapezoid rule).
    pub const NORM_ORDER: f64 = 1.5;
    /// Relative spread of an estimate ratio across two refinements.
    pub const ESTIMATE_SPREAD: f64 = 0.10;
}

/// Random samples per (k, codim) combination; four combinations give 10⁴.
const SAMPLES_PER_SHAPE: usize = 2_500;
const SEED: u64 = 0x6772_6166_6c6f_7721;

type Outcome = Result<(bool, String), String>;

/// Per scenario: identity and motion-law maxima on each level.
type NodalLadders = Vec<(Vec<f64>, Vec<f64>)>;

fn scenario(cfg: Value) -> Result<Scenario, String> {
    let cfg = ScenarioConfig::from_json(&cfg.to_string(), Path::new("acceptance")).map_err(|e| e.to_string())?;
    Scenario::new(cfg).map_err(|e| e.to_string())
}

fn solve(s: &Scenario) -> Result<GraphFlow<f64>, String> {
    s.solve().map(|(flow, _)| flow).map_err(|e| e.to_string())
}

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Least-squares slope of `log e` against `log h`.
fn fitted_order(hs: &[f64], es: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ")
}

fn grim_config(h: f64, step_multiple: usize) -> Value {
    json!({
        "scenario": "grim-reaper", "k": 1, "n": 2,
        "box": {"lo": [-1.2], "hi": [1.2]},
        "h": h, "cfl": 0.9, "t_range": [-0.25, 0.0], "boundary": "exact",
        "solver": {"step_multiple": step_multiple}
    })
}

fn translation_config(h: f64, step_multiple: usize) -> Value {
    json!({
        "scenario": "forced-translation", "k": 1, "n": 2,
        "box": {"lo": [-1.0], "hi": [1.0]},
        "h": h, "cfl": 0.9, "t_range": [0.0, 0.25],
        "params": {"velocity": [0.7]},
        "solver": {"step_multiple": step_multiple}
    })
}

/// The refinement ladder shared by the residual criteria.
const STUDY_H: [f64; 3] = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];

/// Solved flows of one scenario on [`STUDY_H`]. The step count is a
/// multiple of 20 so that the coarse grid's window times are grid times on
/// every level.
struct Study {
    name: &'static str,
    forcing: ForcingSpec<f64>,
    flows: Vec<GraphFlow<f64>>,
}

impl Study {
    fn spacings(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.grid().h()).collect()
    }

    fn steps(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.grid().dt()).collect()
    }
}

fn studies() -> &'static Result<Vec<Study>, String> {
    static CELL: OnceLock<Result<Vec<Study>, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let build = |name: &'static str, cfg: fn(f64, usize) -> Value| -> Result<Study, String> {
            let mut forcing = None;
            let flows = STUDY_H
                .iter()
                .map(|&h| {
                    let s = scenario(cfg(h, 20))?;
                    forcing = Some(s.forcing.clone());
                    solve(&s)
                })
                .collect::<Result<Vec<_>, String>>()?;
            Ok(Study {
                name,
                forcing: forcing.expect("at least one level"),
                flows,
            })
        };
        Ok(vec![
            build("grim-reaper", grim_config)?,
            build("forced-translation", translation_config)?,
        ])
    })
}

fn c1_grim_reaper_tracking() -> Outcome {
    let run = |h: f64| -> Result<(f64, f64), String> {
        let s = scenario(grim_config(h, 1))?;
        let exact = s.exact.clone().ok_or("grim reaper has a closed form")?;
        single_thread(|| {
            let start = Instant::now();
            let flow = solve(&s)?;
            let elapsed = start.elapsed().as_secs_f64();
            Ok((solution_error(&flow, &exact), elapsed))
        })
    };
    let (coarse, secs) = run(1.0 / 64.0)?;
    let (fine, _) = run(1.0 / 128.0)?;
    let ratio = coarse / fine;
    let passed = coarse <= tol::GRIM_ERROR && ratio >= tol::GRIM_ERROR_RATIO && secs <= tol::GRIM_RUNTIME_S;
    Ok((
        passed,
        format!(
            "error(1/64) = {coarse:.2e} <= {:.0e}, error(1/128) = {fine:.2e}, ratio {ratio:.2} >= {}, solve {secs:.2} s <= {} s on 1 thread",
            tol::GRIM_ERROR,
            tol::GRIM_ERROR_RATIO,
            tol::GRIM_RUNTIME_S
        ),
    ))
}

fn c2_forced_translation_exact() -> Outcome {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (k, n, velocity) in [(1, 2, json!([0.7])), (2, 4, json!([0.7, -0.3]))] {
        for scheme in ["explicit", "semi-implicit"] {
            let cfg = json!({
                "scenario": "forced-translation", "k": k, "n": n,
                "box": {"lo": vec![-1.0; k], "hi": vec![1.0; k]},
                "h": 0.0625, "cfl": 0.9, "t_range": [0.0, 0.25], "scheme": scheme,
                "params": {"velocity": velocity}
            });
            let s = scenario(cfg)?;
            let exact = s.exact.clone().ok_or("translation has a closed form")?;
            worst = worst.max(solution_error(&solve(&s)?, &exact));
            cases += 1;
        }
    }
    Ok((
        worst <= tol::TRANSLATION_ERROR,
        format!(
            "max error {worst:.2e} <= {:.0e} over {cases} runs (k = 1, 2; explicit and semi-implicit)",
            tol::TRANSLATION_ERROR
        ),
    ))
}

fn c3_brakke_equality() -> Outcome {
    let studies = studies().as_ref().map_err(Clone::clone)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for study in studies {
        let coarse = &study.flows[0];
        let phis = TestFunction::standard_family(coarse, 24).map_err(|e| e.to_string())?;
        let windows = standard_windows(coarse.grid());
        let mut worst = Vec::new();
        let mut one_sided = true;
        let mut count = 0;
        for flow in &study.flows {
            let reports = brakke_residuals_streaming(
                flow,
                &study.forcing,
                VelocitySource::MotionLaw,
                &phis,
                &windows,
                tol::C_REPORT,
            )
            .map_err(|e| e.to_string())?;
            one_sided &= reports.iter().all(|r| r.one_sided());
            worst.push(reports.iter().map(|r| r.relative()).fold(0.0, f64::max));
            count = reports.len();
        }
        let order = fitted_order(&study.spacings(), &worst);
        let decreasing = worst.windows(2).all(|w| w[1] < w[0]);
        passed &= one_sided && decreasing && order >= tol::FIRST_ORDER && phis.len() >= 20 && windows.len() >= 5;
        parts.push(format!(
            "{}: {} phi x {} windows ({count} reports/level), max |rhs-lhs|/scale [{}], order {order:.2} >= {}, one-sided {}",
            study.name,
            phis.len(),
            windows.len(),
            sci(&worst),
            tol::FIRST_ORDER,
            if one_sided { "yes" } else { "NO" }
        ));
    }
    Ok((passed, parts.join("; ")))
}

/// Per-level maxima of the identity residual (motion-law velocity) and the
/// motion-law residual.
fn nodal_study(study: &Study) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut id = Vec::new();
    let mut law = Vec::new();
    for flow in &study.flows {
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for m in 0..flow.time_levels() {
            let v = velocity_from_motion_law(flow, &study.forcing, m).map_err(|e| e.to_string())?;
            a = a.max(identity_residual(flow, &v, m).map_err(|e| e.to_string())?.max);
            b = b.max(
                motion_law_residual(flow, &study.forcing, m)
                    .map_err(|e| e.to_string())?
                    .max,
            );
        }
        id.push(a);
        law.push(b);
    }
    Ok((id, law))
}

fn nodal_cache() -> &'static Result<NodalLadders, String> {
    static CELL: OnceLock<Result<NodalLadders, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let studies = studies().as_ref().map_err(Clone::clone)?;
        studies.iter().map(nodal_study).collect()
    })
}

/// A residual ladder either sits at rounding level throughout (exact
/// scheme, order undefined) or has a fitted order of at least `min_order`.
/// With `fit_constant`, `C` is fit on the two coarsest levels and the
/// finest must satisfy `e ≤ C·(h² + dt)`.
fn ladder_verdict(study: &Study, es: &[f64], min_order: f64, fit_constant: bool) -> (bool, String) {
    if es.iter().all(|&e| e <= ROUNDOFF_FLOOR) {
        return (
            true,
            format!(
                "{}: [{}] all <= {ROUNDOFF_FLOOR:.0e} (exact, order n/a)",
                study.name,
                sci(es)
            ),
        );
    }
    let hs = study.spacings();
    let dts = study.steps();
    let scale: Vec<f64> = hs.iter().zip(&dts).map(|(h, dt)| h * h + dt).collect();
    let order = fitted_order(&hs, es);
    let mut ok = order >= min_order;
    let mut text = format!("{}: [{}], order {order:.2} >= {min_order}", study.name, sci(es));
    if fit_constant {
        let c = (es[0] / scale[0]).max(es[1] / scale[1]);
        let bound = c * scale[2];
        ok &= es[2] <= bound;
        text.push_str(&format!(
            ", C = {c:.3} fit on levels 0-1, finest {:.2e} <= {bound:.2e}",
            es[2]
        ));
    }
    (ok, text)
}

fn c4_velocity_identity() -> Outcome {
    let studies = studies().as_ref().map_err(Clone::clone)?;
    let nodal = nodal_cache().as_ref().map_err(Clone::clone)?;
    let verdicts: Vec<_> = studies
        .iter()
        .zip(nodal)
        .map(|(s, (id, _))| ladder_verdict(s, id, tol::FIRST_ORDER, true))
        .collect();
    Ok((
        verdicts.iter().all(|v| v.0),
        verdicts.into_iter().map(|v| v.1).collect::<Vec<_>>().join("; "),
    ))
}

fn c5_motion_law() -> Outcome {
    let studies = studies().as_ref().map_err(Clone::clone)?;
    let nodal = nodal_cache().as_ref().map_err(Clone::clone)?;
    let verdicts: Vec<_> = studies
        .iter()
        .zip(nodal)
        .map(|(s, (_, law))| ladder_verdict(s, law, tol::FIRST_ORDER, false))
        .collect();
    Ok((
        verdicts.iter().all(|v| v.0),
        verdicts.into_iter().map(|v| v.1).collect::<Vec<_>>().join("; "),
    ))
}

const SHAPES: [(usize, usize); 4] = [(1, 1), (1, 2), (2, 1), (2, 2)];

/// Uniform direction scaled to a Frobenius norm uniform in `[0, max_norm]`.
fn random_gradient(rng: &mut ChaCha8Rng, k: usize, codim: usize, max_norm: f64) -> GradientMatrix<f64> {
    let raw: Vec<f64> = (0..k * codim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let len = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = max_norm * rng.gen::<f64>();
    GradientMatrix::new(k, codim, raw.iter().map(|x| x * r / len).collect()).expect("shape")
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn c6_legendre_hadamard() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut total, mut held, mut equality_gap) = (0usize, 0usize, 0.0f64);
    for (k, codim) in SHAPES {
        for _ in 0..SAMPLES_PER_SHAPE {
            let p = random_gradient(&mut rng, k, codim, 10.0);
            let (xi, eta) = (random_vector(&mut rng, k), random_vector(&mut rng, codim));
            let lh = legendre_hadamard(&p, &xi, &eta).map_err(|e| e.to_string())?;
            total += 1;
            held += usize::from(lh.holds());
            if (k, codim) == (1, 1) {
                equality_gap = equality_gap.max((lh.lhs - lh.rhs).abs() / lh.lhs.abs().max(1.0));
            }
        }
    }
    Ok((
        held == total && equality_gap <= tol::ALGEBRAIC,
        format!(
            "{held}/{total} samples hold (|P|_F <= 10, k, codim in {{1, 2}}); k = codim = 1 equality gap {equality_gap:.2e} <= {:.0e}",
            tol::ALGEBRAIC
        ),
    ))
}

fn c7_metric_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let (mut total, mut inside, mut literal_total, mut literal_ok) = (0usize, 0usize, 0usize, 0usize);
    let mut worst_margin = f64::INFINITY;
    for (k, codim) in SHAPES {
        for _ in 0..SAMPLES_PER_SHAPE {
            let p = random_gradient(&mut rng, k, codim, 10.0);
            let (lo, hi) = symmetric_extremes(&induced_metric(&p).g_inv);
            let bound = sharp_ellipticity_bound(&p);
            worst_margin = worst_margin.min(lo - bound);
            total += 1;
            inside += usize::from(lo >= bound - tol::ALGEBRAIC && hi <= 1.0 + tol::ALGEBRAIC);

            let q = random_gradient(&mut rng, k, codim, 1.0);
            let (lo, _) = symmetric_extremes(&induced_metric(&q).g_inv);
            literal_total += 1;
            literal_ok += usize::from(lo >= unsquared_ellipticity_bound(&q) - tol::ALGEBRAIC);
        }
    }
    Ok((
        inside == total && literal_ok == literal_total,
        format!(
            "{inside}/{total} spectra in [1/(1+|P|^2) - 1e-12, 1 + 1e-12] (min margin {worst_margin:.2e}); 1/(1+|P|) bound {literal_ok}/{literal_total} for |P|_F <= 1"
        ),
    ))
}

fn static_flow(
    k: usize,
    lo: f64,
    hi: f64,
    h: f64,
    t_range: (f64, f64),
    dt: f64,
    f: impl Fn(&[f64], f64) -> f64,
) -> Result<GraphFlow<f64>, String> {
    let grid = SpaceTimeGrid::new(k, 1, vec![lo; k], vec![hi; k], h, t_range, dt).map_err(|e| e.to_string())?;
    GraphFlow::from_fn(grid, BoundaryPolicy::Unspecified, |x, t, out| out[0] = f(x, t)).map_err(|e| e.to_string())
}

fn c8_paraboloid_duality() -> Outcome {
    let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let paraboloid = |x: &[f64], _t: f64| 0.5 * (x[0] * x[0] + x[1] * x[1]);
    let coarse = static_flow(2, -1.0, 1.0, hs[0], (0.0, 1.0), 1.0, paraboloid)?;
    // Ten fields with generic (not purely vertical) directions; supports
    // stay one coarse cell inside the box.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let fields: Vec<(TestFunction<f64>, Vec<f64>)> = (0..10)
        .map(|i| {
            let center = vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
            let radius = rng.gen_range(0.35..0.55);
            let normal = (i % 2 == 1).then(|| (vec![rng.gen_range(0.0..0.3)], 1.0));
            let mut d = random_vector(&mut rng, 3);
            let len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            d.iter_mut().for_each(|x| *x /= len);
            TestFunction::new(i, center, radius, normal, None, coarse.grid())
                .map(|phi| (phi, d))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    let mut worst = Vec::new();
    for &h in &hs {
        let flow = static_flow(2, -1.0, 1.0, h, (0.0, 1.0), 1.0, paraboloid)?;
        let v = DiscreteVarifold::from_flow(&flow, 0).map_err(|e| e.to_string())?;
        let mut w = 0.0f64;
        for (phi, d) in &fields {
            let g = BumpVectorField::new(phi.clone(), d.clone(), 0.0).map_err(|e| e.to_string())?;
            w = w.max(mean_curvature_duality_residual(&v, &g).map_err(|e| e.to_string())?);
        }
        worst.push(w);
    }
    let order = fitted_order(&hs, &worst);
    Ok((
        order >= tol::DUALITY_ORDER,
        format!(
            "10 fields, h = 1/8..1/64: max residual [{}], order {order:.2} >= {}",
            sci(&worst),
            tol::DUALITY_ORDER
        ),
    ))
}

fn norm_of(flow: &GraphFlow<f64>, p: f64, q: f64, window: (f64, f64)) -> Result<f64, String> {
    let zero = ForcingSpec::Zero { n: 2 };
    NormRequest::new(p, q, Region::All, window, NormTarget::Value)
        .and_then(|req| lpq_norm(flow, &zero, &req))
        .map_err(|e| e.to_string())
}

fn holder_of(flow: &GraphFlow<f64>, alpha: f64) -> Result<f64, String> {
    let window = (flow.grid().t_start(), flow.grid().t_end());
    parabolic_holder(flow, alpha, 0, &Region::All, window, DEFAULT_PAIR_CAP).map_err(|e| e.to_string())
}

fn c9_norm_oracles() -> Outcome {
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    // (name, exact value, value at h) — the first three are exact at every h,
    // the last two are limited by quadrature / sampling and must converge.
    type Oracle = (&'static str, f64, Box<dyn Fn(f64) -> Result<f64, String>>);
    let oracles: Vec<Oracle> = vec![
        (
            "|1|_{2,2} on [-1,1]x[-1,0]",
            2f64.sqrt(),
            Box::new(|h| {
                norm_of(
                    &static_flow(1, -1.0, 1.0, h, (-1.0, 0.0), h, |_, _| 1.0)?,
                    2.0,
                    2.0,
                    (-1.0, 0.0),
                )
            }),
        ),
        (
            "[x]_{1/2} on [0,1]",
            1.0,
            Box::new(|h| holder_of(&static_flow(1, 0.0, 1.0, h, (0.0, 1.0), 1.0, |x, _| x[0])?, 0.5)),
        ),
        (
            "[t]_{1/2} on a unit window",
            1.0,
            Box::new(|h| holder_of(&static_flow(1, 0.0, 1.0, h, (0.0, 1.0), h, |_, t| t)?, 0.5)),
        ),
        (
            "|x^2|_{4,2} on [-1,1]x[-1,0]",
            (2.0f64 / 9.0).powf(0.25),
            Box::new(|h| {
                norm_of(
                    &static_flow(1, -1.0, 1.0, h, (-1.0, 0.0), h, |x, _| x[0] * x[0])?,
                    4.0,
                    2.0,
                    (-1.0, 0.0),
                )
            }),
        ),
        (
            "[x^2]_{1/2} on [0,1]",
            4.0 * 6f64.sqrt() / 9.0,
            Box::new(|h| holder_of(&static_flow(1, 0.0, 1.0, h, (0.0, 1.0), 1.0, |x, _| x[0] * x[0])?, 0.5)),
        ),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, exact, value) in &oracles {
        let errs = hs
            .iter()
            .map(|&h| value(h).map(|v| (v - exact).abs()))
            .collect::<Result<Vec<_>, _>>()?;
        let fine = errs[2];
        let mut ok = fine <= tol::NORM_ORACLE;
        let mut text = format!("{name}: err(1/128) {fine:.1e}");
        if errs.iter().all(|&e| e <= ROUNDOFF_FLOOR) {
            text.push_str(" (exact)");
        } else {
            let order = fitted_order(&hs, &errs);
            ok &= order >= tol::NORM_ORDER;
            text.push_str(&format!(", order {order:.2}"));
        }
        passed &= ok;
        parts.push(text);
    }
    Ok((
        passed,
        format!(
            "tol {:.0e}, min order {}: {}",
            tol::NORM_ORACLE,
            tol::NORM_ORDER,
            parts.join("; ")
        ),
    ))
}

fn c10_estimate_stability() -> Outcome {
    let configs = [
        json!({"scenario": "grim-reaper", "k": 1, "n": 2, "box": {"lo": [-1.2], "hi": [1.2]}, "boundary": "exact"}),
        json!({"scenario": "forced-translation", "k": 1, "n": 2, "box": {"lo": [-1.25], "hi": [1.25]},
               "params": {"velocity": [0.7]}}),
        json!({"scenario": "paraboloid-cap", "k": 1, "n": 2, "box": {"lo": [-1.25], "hi": [1.25]}}),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    let mut suite_bound = 0.0f64;
    for base in configs {
        let mut ratios = Vec::new();
        let mut name = String::new();
        for (level, &h) in STUDY_H.iter().enumerate() {
            let mut cfg = base.clone();
            cfg["h"] = json!(h);
            cfg["cfl"] = json!(0.9);
            cfg["t_range"] = json!([-1.0, 0.0]);
            // R = 1 puts the inner cylinder's start at t = -1/4, a grid time
            // when the step count is a multiple of 4.
            cfg["solver"] = json!({"step_multiple": 4});
            cfg["estimates"] = json!([{"p": 2, "q": 2, "radius": 1.0}]);
            let s = scenario(cfg)?;
            name = s.name().to_string();
            let flow = solve(&s)?;
            let est = estimates(&s, &flow, level).map_err(|e| e.to_string())?;
            let ratio = est
                .first()
                .and_then(|e| e.ratio)
                .ok_or(format!("{name}: degenerate estimate"))?;
            ratios.push(ratio);
        }
        let fine = ratios[ratios.len() - 1];
        let spread = ratios.iter().map(|r| (r - fine).abs() / fine).fold(0.0, f64::max);
        suite_bound = suite_bound.max(ratios.iter().copied().fold(0.0, f64::max));
        let ok = spread <= tol::ESTIMATE_SPREAD && ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        passed &= ok;
        parts.push(format!(
            "{name}: ratios [{}], spread {:.1}%",
            sci(&ratios),
            100.0 * spread
        ));
    }
    Ok((
        passed,
        format!(
            "p = q = 2, R = 1: {}; spread <= {:.0}%; suite bound C = {suite_bound:.3}",
            parts.join("; "),
            100.0 * tol::ESTIMATE_SPREAD
        ),
    ))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn canonical<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn without_wall_times(mut m: RunManifest) -> String {
    m.wall_times = WallTimes::default();
    canonical(&m)
}

fn c11_determinism_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let cfg = json!({
        "scenario": "grim-reaper", "k": 1, "n": 2,
        "box": {"lo": [-1.2], "hi": [1.2]},
        "h": 1.0 / 32.0, "cfl": 0.9, "t_range": [-0.25, 0.0],
        "solver": {"step_multiple": 16},
        "norms": [{"p": 2, "q": 2}, {"p": "inf", "q": 2, "target": "gradient"}],
        "estimates": [{"p": 2, "q": 2, "radius": 0.5}]
    });
    let config = root.join("grim.json");
    std::fs::write(&config, serde_json::to_string_pretty(&cfg).expect("json")).map_err(|e| e.to_string())?;
    let (one, two, checked) = (root.join("one"), root.join("two"), root.join("verified"));

    let pool = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool")
    };
    let first = pool(1)
        .install(|| simulate(&config, Some(&one)))
        .map_err(|e| e.to_string())?;
    let second = pool(2)
        .install(|| simulate(&config, Some(&two)))
        .map_err(|e| e.to_string())?;
    let replay = verify(&config, &one.join(FLOW_FILE), Some(&checked)).map_err(|e| e.to_string())?;

    let mut mismatches = Vec::new();
    for file in [FLOW_FILE, BRAKKE_FILE] {
        if read_bytes(&one.join(file))? != read_bytes(&two.join(file))? {
            mismatches.push(format!("rerun {file}"));
        }
    }
    let on_disk = RunManifest::read(&one.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    if without_wall_times(first.clone()) != without_wall_times(second) {
        mismatches.push("rerun manifest".into());
    }
    if without_wall_times(first.clone()) != without_wall_times(on_disk) {
        mismatches.push("manifest file".into());
    }
    if read_bytes(&one.join(BRAKKE_FILE))? != read_bytes(&checked.join(BRAKKE_FILE))? {
        mismatches.push("verify brakke.json".into());
    }
    let pairs = [
        ("checks", canonical(&first.checks), canonical(&replay.checks)),
        ("residuals", canonical(&first.residuals), canonical(&replay.residuals)),
        ("norms", canonical(&first.norms), canonical(&replay.norms)),
        ("estimates", canonical(&first.estimates), canonical(&replay.estimates)),
        ("grid", canonical(&first.grid), canonical(&replay.grid)),
    ];
    for (what, a, b) in pairs {
        if a != b {
            mismatches.push(format!("verify {what}"));
        }
    }
    let n_brakke = serde_json::from_slice::<Vec<Value>>(&read_bytes(&one.join(BRAKKE_FILE))?)
        .map_err(|e| e.to_string())?
        .len();
    Ok((
        mismatches.is_empty() && first.passed,
        format!(
            "{} checks, {n_brakke} Brakke records, {} norms, {} estimates; simulate(1 thread) = simulate(2 threads) = verify(dump): {}",
            first.checks.len(),
            first.norms.len(),
            first.estimates.len(),
            if mismatches.is_empty() {
                "bit-identical".to_string()
            } else {
                format!("differ in {}", mismatches.join(", "))
            }
        ),
    ))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        ("exact-solution tracking", c1_grim_reaper_tracking),
        ("forced-translation exactness", c2_forced_translation_exact),
        ("Brakke equality and one-sidedness", c3_brakke_equality),
        ("velocity identity", c4_velocity_identity),
        ("motion law", c5_motion_law),
        ("Legendre-Hadamard", c6_legendre_hadamard),
        ("metric bounds", c7_metric_bounds),
        ("first-variation duality", c8_paraboloid_duality),
        ("norm oracles", c9_norm_oracles),
        ("estimate stability", c10_estimate_stability),
        ("determinism and round trip", c11_determinism_round_trip),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failures += usize::from(!passed);
        println!(
            "[{}] C{} {name}: {detail} ({:.1} s)",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
