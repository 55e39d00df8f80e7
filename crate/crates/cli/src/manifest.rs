//! The JSON record written next to every run's artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use graflow_core::discretization::SpaceTimeGrid;
use graflow_core::flow_solver::{BoundaryMode, FlowRunReport, Scheme, Termination};
use serde::{Deserialize, Serialize};

use crate::checks::{CheckResult, EstimateRecord, NormRecord, Residuals};
use crate::error::{CliError, Result};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub k: usize,
    pub n: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub h: f64,
    /// Spacing of the stored levels.
    pub dt: f64,
    pub nodes: usize,
    pub time_levels: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl From<&SpaceTimeGrid<f64>> for GridSummary {
    fn from(g: &SpaceTimeGrid<f64>) -> Self {
        Self {
            k: g.k(),
            n: g.ambient_dim(),
            lo: g.lo().to_vec(),
            hi: g.hi().to_vec(),
            h: g.h(),
            dt: g.dt(),
            nodes: g.num_nodes(),
            time_levels: g.time_levels(),
            t_start: g.t_start(),
            t_end: g.t_end(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub scheme: String,
    pub boundary: String,
    /// The solver step (the stored spacing divided by the stride).
    pub dt: f64,
    pub steps: usize,
    pub cfl_ratio: f64,
    pub linear_iterations: usize,
    pub max_gradient: f64,
    pub termination: String,
}

impl From<&FlowRunReport<f64>> for SolverSummary {
    fn from(r: &FlowRunReport<f64>) -> Self {
        Self {
            scheme: match r.scheme {
                Scheme::Explicit => "explicit",
                Scheme::SemiImplicit => "semi-implicit",
            }
            .into(),
            boundary: match r.boundary {
                BoundaryMode::DirichletExact => "exact",
                BoundaryMode::DirichletFrozen => "frozen",
            }
            .into(),
            dt: r.dt,
            steps: r.steps,
            cfl_ratio: r.cfl_ratio,
            linear_iterations: r.linear_iterations,
            max_gradient: r.max_gradient.iter().copied().fold(0.0, f64::max),
            termination: match r.termination {
                Termination::Completed => "completed",
                Termination::GradientGuard => "gradient-guard",
            }
            .into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub solve_s: Option<f64>,
    pub verify_s: f64,
    pub total_s: f64,
}

/// What a `simulate` or `verify` run did and whether its checks passed.
/// Everything except `wall_times` is a deterministic function of the
/// config (and, for `verify`, the dump).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub scenario: String,
    pub grid: GridSummary,
    pub solver: Option<SolverSummary>,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub residuals: Residuals,
    pub norms: Vec<NormRecord>,
    pub estimates: Vec<EstimateRecord>,
    /// File names written next to the manifest.
    pub artifacts: Vec<String>,
    pub wall_times: WallTimes,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}
