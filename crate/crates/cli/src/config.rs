//! The scenario config: a fixed JSON schema, parsed strictly.
//!
//! Every table rejects unknown keys. Defaults are filled in at parse time so
//! that a key left out and the same key spelled with its default value
//! produce the same [`ScenarioConfig`], and therefore the same hash.

use std::fmt;
use std::path::Path;

use graflow_core::expr::Expr;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// A Lebesgue exponent: a number `≥ 1` or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Exponent(x)),
            Raw::Str(s) if s == "inf" => Ok(Exponent(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "exponent must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    Flat,
    Affine,
    ForcedTranslation,
    GrimReaper,
    ParaboloidCap,
    CustomExpression,
}

impl ScenarioId {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Flat => "flat",
            ScenarioId::Affine => "affine",
            ScenarioId::ForcedTranslation => "forced-translation",
            ScenarioId::GrimReaper => "grim-reaper",
            ScenarioId::ParaboloidCap => "paraboloid-cap",
            ScenarioId::CustomExpression => "custom-expression",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    #[default]
    Explicit,
    SemiImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryId {
    /// Face values from the scenario's exact solution.
    Exact,
    /// Face values frozen at the initial trace.
    Frozen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityId {
    /// `v = h + u^⊥`.
    MotionLaw,
    /// The normal velocity of the graph points, `S^⊥ (0, ∂_t f)`.
    Graph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Closed-form data of the built-in scenarios. Keys that do not apply to
/// the chosen scenario are rejected during validation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    /// `affine`: constant term per graph component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    /// `affine`: gradient, row-major `(component, axis)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<Vec<f64>>,
    /// `forced-translation`: constant normal forcing per graph component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    /// `grim-reaper`: parabolic scale `λ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default = "defaults::gradient_limit")]
    pub gradient_limit: f64,
    #[serde(default = "defaults::linear_tol")]
    pub linear_tol: f64,
    #[serde(default = "defaults::max_linear_iterations")]
    pub max_linear_iterations: usize,
    /// Store every `stride`-th step.
    #[serde(default = "defaults::one")]
    pub stride: usize,
    /// The number of stored intervals is a multiple of this, so that times
    /// such as `t_end − (t_end − t_start)/4` fall on stored levels.
    #[serde(default = "defaults::one")]
    pub step_multiple: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gradient_limit: defaults::gradient_limit(),
            linear_tol: defaults::linear_tol(),
            max_linear_iterations: defaults::max_linear_iterations(),
            stride: 1,
            step_multiple: 1,
        }
    }
}

/// Which residual checks run. `solution_error` is skipped for scenarios
/// without a closed-form solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckToggles {
    #[serde(default = "defaults::yes")]
    pub solution_error: bool,
    #[serde(default = "defaults::yes")]
    pub brakke: bool,
    #[serde(default = "defaults::yes")]
    pub identity: bool,
    #[serde(default = "defaults::yes")]
    pub motion_law: bool,
    #[serde(default = "defaults::yes")]
    pub duality: bool,
}

impl Default for CheckToggles {
    fn default() -> Self {
        Self {
            solution_error: true,
            brakke: true,
            identity: true,
            motion_law: true,
            duality: true,
        }
    }
}

/// Test-function counts and tolerance constants of the checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    #[serde(default = "defaults::test_functions")]
    pub test_functions: usize,
    #[serde(default = "defaults::duality_fields")]
    pub duality_fields: usize,
    /// Velocity fed to the Brakke integrand.
    #[serde(default = "defaults::brakke_velocity")]
    pub brakke_velocity: VelocityId,
    /// `C` in the discretization tolerances `C (h² + dt)` and `C h²`.
    #[serde(default = "defaults::c_report")]
    pub c_report: f64,
    /// Absolute tolerance of the max-norm solution error.
    #[serde(default = "defaults::error_tol")]
    pub error_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            test_functions: defaults::test_functions(),
            duality_fields: defaults::duality_fields(),
            brakke_velocity: defaults::brakke_velocity(),
            c_report: defaults::c_report(),
            error_tol: defaults::error_tol(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetId {
    Value,
    Gradient,
    Hessian,
    TimeDerivative,
    Forcing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSpec {
    All,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// `‖target‖_{L^{p,q}(region × window)}`; the window defaults to the
/// whole run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub p: Exponent,
    pub q: Exponent,
    #[serde(default = "defaults::target")]
    pub target: TargetId,
    #[serde(default = "defaults::region")]
    pub region: RegionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

/// An interior `L^{p,q}` estimate on the cylinder of radius `radius`
/// centred at `center` (default: the origin) and ending at `t_top`
/// (default: the end of the run).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSpec {
    pub p: Exponent,
    pub q: Exponent,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_top: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub k: usize,
    /// Ambient dimension.
    pub n: usize,
    #[serde(rename = "box")]
    pub domain: BoxSpec,
    /// Upper bound on the grid spacing; the grid is fitted to the box.
    pub h: f64,
    /// Upper bound on the time step. Mutually exclusive with `cfl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Safety factor `σ` in `dt ≤ σ h²/(2k)`. Defaults to 0.9 when neither
    /// `dt` nor `cfl` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    pub t_range: [f64; 2],
    #[serde(default)]
    pub scheme: SchemeId,
    /// Defaults to `exact` when the scenario has a closed-form solution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryId>,
    /// Ambient forcing, one expression per component in `x1..xk`,
    /// `y1..y(n-k)` and `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<Vec<String>>,
    /// `custom-expression`: initial data, one expression per graph
    /// component in `x1..xk` and `t` (evaluated at the start time).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<String>>,
    /// `custom-expression`: a closed-form solution used for the boundary
    /// data and the solution error. Implies the initial data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<String>>,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub checks: CheckToggles,
    #[serde(default)]
    pub verification: VerifyOptions,
    #[serde(default)]
    pub norms: Vec<NormSpec>,
    #[serde(default)]
    pub estimates: Vec<EstimateSpec>,
    /// Where artifacts go when `--out` is not given. Not part of the hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

mod defaults {
    use super::{RegionSpec, TargetId, VelocityId};

    pub fn gradient_limit() -> f64 {
        10.0
    }
    pub fn linear_tol() -> f64 {
        1e-10
    }
    pub fn max_linear_iterations() -> usize {
        2000
    }
    pub fn one() -> usize {
        1
    }
    pub fn yes() -> bool {
        true
    }
    pub fn test_functions() -> usize {
        24
    }
    pub fn duality_fields() -> usize {
        10
    }
    pub fn brakke_velocity() -> VelocityId {
        VelocityId::MotionLaw
    }
    pub fn c_report() -> f64 {
        8.0
    }
    pub fn error_tol() -> f64 {
        5e-3
    }
    pub fn target() -> TargetId {
        TargetId::Value
    }
    pub fn region() -> RegionSpec {
        RegionSpec::All
    }
}

impl ScenarioConfig {
    /// Parses and validates; syntax and schema errors carry the line and
    /// column of the offending token.
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| CliError::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, path)
    }

    /// Resolves defaults that depend on other fields.
    fn normalize(&mut self) {
        if self.dt.is_none() && self.cfl.is_none() {
            self.cfl = Some(0.9);
        }
        if self.boundary.is_none() {
            self.boundary = Some(if self.has_closed_form() {
                BoundaryId::Exact
            } else {
                BoundaryId::Frozen
            });
        }
    }

    pub fn codim(&self) -> usize {
        self.n.saturating_sub(self.k)
    }

    /// Whether the scenario comes with a closed-form solution of the flow.
    pub fn has_closed_form(&self) -> bool {
        match self.scenario {
            ScenarioId::ParaboloidCap => false,
            ScenarioId::CustomExpression => self.exact.is_some(),
            _ => true,
        }
    }

    pub fn boundary(&self) -> BoundaryId {
        self.boundary.unwrap_or(BoundaryId::Frozen)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let (k, n) = (self.k, self.n);
        if k == 0 || n <= k {
            return bad(format!("need 1 ≤ k < n, got k = {k}, n = {n}"));
        }
        if self.domain.lo.len() != k || self.domain.hi.len() != k {
            return bad(format!("box corners must have {k} coordinates"));
        }
        if self.domain.lo.iter().zip(&self.domain.hi).any(|(a, b)| !(a < b)) {
            return bad("box needs lo < hi on every axis".into());
        }
        if self.solver.stride == 0 || self.solver.step_multiple == 0 {
            return bad("solver.stride and solver.step_multiple must be at least 1".into());
        }
        if !(self.h > 0.0) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if self.dt.is_some() && self.cfl.is_some() {
            return bad("give either dt or cfl, not both".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt = {dt} must be positive"));
            }
        }
        if let Some(s) = self.cfl {
            if !(s > 0.0 && s <= 1.0) {
                return bad(format!("cfl = {s} must lie in (0, 1]"));
            }
        }
        if !(self.t_range[0] < self.t_range[1]) || self.t_range.iter().any(|t| !t.is_finite()) {
            return bad(format!("t_range {:?} must be increasing and finite", self.t_range));
        }
        if self.boundary() == BoundaryId::Exact && !self.has_closed_form() {
            return bad(format!(
                "boundary \"exact\" needs a closed-form solution, which {} lacks",
                self.scenario.name()
            ));
        }
        self.validate_scenario()?;
        self.validate_expressions()?;
        let v = &self.verification;
        if !(v.c_report > 0.0) || !(v.error_tol > 0.0) {
            return bad("verification constants must be positive".into());
        }
        if self.checks.brakke && v.test_functions == 0 {
            return bad("brakke check needs at least one test function".into());
        }
        if self.checks.duality && v.duality_fields == 0 {
            return bad("duality check needs at least one vector field".into());
        }
        for (i, r) in self.norms.iter().enumerate() {
            if !(r.p.0 >= 1.0 && r.q.0 >= 1.0) {
                return bad(format!("norms[{i}]: exponents must be ≥ 1"));
            }
            self.check_region(&r.region)
                .map_err(|m| CliError::Config(format!("norms[{i}]: {m}")))?;
            if let Some([a, b]) = r.window {
                if !(a < b) {
                    return bad(format!("norms[{i}]: window must be increasing"));
                }
            }
        }
        for (i, e) in self.estimates.iter().enumerate() {
            if !(e.p.0 >= 1.0 && e.q.0 >= 1.0) || !(e.radius > 0.0) {
                return bad(format!("estimates[{i}]: need exponents ≥ 1 and a positive radius"));
            }
            if e.center.as_ref().is_some_and(|c| c.len() != k) {
                return bad(format!("estimates[{i}]: center must have {k} coordinates"));
            }
        }
        Ok(())
    }

    fn check_region(&self, r: &RegionSpec) -> std::result::Result<(), String> {
        let k = self.k;
        match r {
            RegionSpec::All => Ok(()),
            RegionSpec::Box { lo, hi } if lo.len() != k || hi.len() != k => {
                Err(format!("region box corners must have {k} coordinates"))
            }
            RegionSpec::Ball { center, radius } if center.len() != k || !(*radius > 0.0) => {
                Err(format!("region ball needs a {k}-point center and a positive radius"))
            }
            _ => Ok(()),
        }
    }

    fn validate_scenario(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        let (k, m, id) = (self.k, self.codim(), self.scenario);
        let p = &self.params;
        let name = id.name();
        let only = |allowed: &[&str]| -> Result<()> {
            let given = [
                ("offset", p.offset.is_some()),
                ("slope", p.slope.is_some()),
                ("velocity", p.velocity.is_some()),
                ("scale", p.scale.is_some()),
            ];
            for (key, set) in given {
                if set && !allowed.contains(&key) {
                    return Err(CliError::Config(format!("params.{key} does not apply to {name}")));
                }
            }
            Ok(())
        };
        match id {
            ScenarioId::Flat | ScenarioId::ParaboloidCap => only(&[])?,
            ScenarioId::Affine => {
                only(&["offset", "slope"])?;
                if p.offset.as_ref().is_some_and(|o| o.len() != m) {
                    return bad(format!("params.offset must have {m} entries"));
                }
                if p.slope.as_ref().is_some_and(|s| s.len() != m * k) {
                    return bad(format!("params.slope must have {} entries", m * k));
                }
            }
            ScenarioId::ForcedTranslation => {
                only(&["velocity"])?;
                if p.velocity.as_ref().is_some_and(|v| v.len() != m) {
                    return bad(format!("params.velocity must have {m} entries"));
                }
            }
            ScenarioId::GrimReaper => {
                only(&["scale"])?;
                if k != 1 || self.n != 2 {
                    return bad("grim-reaper needs k = 1, n = 2".into());
                }
                let scale = self.grim_scale();
                if !(scale > 0.0) {
                    return bad("params.scale must be positive".into());
                }
                let reach = scale * std::f64::consts::FRAC_PI_2;
                if self.domain.lo[0] <= -reach || self.domain.hi[0] >= reach {
                    return bad(format!("grim-reaper box must lie inside (-{reach}, {reach})"));
                }
            }
            ScenarioId::CustomExpression => {
                only(&[])?;
                if self.initial.is_none() && self.exact.is_none() {
                    return bad("custom-expression needs initial or exact expressions".into());
                }
                if self.initial.is_some() && self.exact.is_some() {
                    return bad("give either initial or exact expressions, not both".into());
                }
            }
        }
        let closed = !matches!(id, ScenarioId::CustomExpression | ScenarioId::ParaboloidCap);
        if closed && self.forcing.is_some() {
            return bad(format!("{name} fixes its own forcing; remove the forcing key"));
        }
        if id != ScenarioId::CustomExpression && (self.initial.is_some() || self.exact.is_some()) {
            return bad(format!(
                "initial/exact expressions only apply to custom-expression, not {name}"
            ));
        }
        Ok(())
    }

    fn validate_expressions(&self) -> Result<()> {
        let (k, m) = (self.k, self.codim());
        let check = |key: &str, list: &[String], len: usize, allow_y: bool| -> Result<()> {
            if list.len() != len {
                return Err(CliError::Config(format!(
                    "{key} needs {len} expressions, got {}",
                    list.len()
                )));
            }
            for (i, src) in list.iter().enumerate() {
                let e = Expr::parse(src).map_err(|e| CliError::Config(format!("{key}[{i}]: {e}")))?;
                e.check_dims(k, if allow_y { m } else { 0 })
                    .map_err(|e| CliError::Config(format!("{key}[{i}]: {e}")))?;
            }
            Ok(())
        };
        if let Some(f) = &self.forcing {
            check("forcing", f, self.n, true)?;
        }
        if let Some(f) = &self.initial {
            check("initial", f, m, false)?;
        }
        if let Some(f) = &self.exact {
            check("exact", f, m, false)?;
        }
        Ok(())
    }

    pub fn grim_scale(&self) -> f64 {
        self.params.scale.unwrap_or(1.0)
    }

    /// SHA-256 of the canonical JSON form of the normalized config, minus
    /// the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// serde_json appends " at line L column C"; the diagnostic carries those
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
