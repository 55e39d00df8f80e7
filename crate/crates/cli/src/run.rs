//! The `simulate`, `verify` and `converge` subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use graflow_core::discretization::{read_flow_csv, write_flow_csv, GraphFlow};
use serde::{Deserialize, Serialize};

use crate::checks::{verify_flow, BrakkeRecord, Verification};
use crate::config::ScenarioConfig;
use crate::error::{input_error, CliError, Result};
use crate::manifest::{write_json, GridSummary, RunManifest, SolverSummary, WallTimes, TOOL_NAME, TOOL_VERSION};
use crate::scenario::Scenario;

pub const FLOW_FILE: &str = "flow.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const BRAKKE_FILE: &str = "brakke.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// Residuals below this are roundoff; orders computed from them are
/// reported as `n/a`.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// `--out` if given, else the config's `output_dir`.
fn output_dir(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<PathBuf> {
    let dir = match (out, &cfg.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => {
            return Err(CliError::Config(
                "no output directory: pass --out or set output_dir".into(),
            ))
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn manifest(
    command: &str,
    scenario: &Scenario,
    flow: &GraphFlow<f64>,
    solver: Option<SolverSummary>,
    verification: Verification,
    artifacts: Vec<String>,
    wall_times: WallTimes,
) -> RunManifest {
    RunManifest {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        command: command.into(),
        config_hash: scenario.config.hash(),
        scenario: scenario.name().into(),
        grid: GridSummary::from(flow.grid()),
        solver,
        passed: verification.passed(),
        checks: verification.checks,
        residuals: verification.residuals,
        norms: verification.norms,
        estimates: verification.estimates,
        artifacts,
        wall_times,
    }
}

fn write_brakke(dir: &Path, records: &[BrakkeRecord], artifacts: &mut Vec<String>) -> Result<()> {
    if !records.is_empty() {
        write_json(&dir.join(BRAKKE_FILE), &records)?;
        artifacts.push(BRAKKE_FILE.into());
    }
    Ok(())
}

/// Solves the configured scenario, writes the flow dump, the Brakke reports
/// and the manifest, and returns the manifest.
pub fn simulate(config: &Path, out: Option<&Path>) -> Result<RunManifest> {
    let start = Instant::now();
    let scenario = Scenario::new(ScenarioConfig::load(config)?)?;
    let dir = output_dir(&scenario.config, out)?;
    let (flow, report) = scenario.solve()?;
    let solve_s = report.wall_time_s;
    let verify_start = Instant::now();
    let verification = verify_flow(&scenario, &flow, 0)?;
    let verify_s = verify_start.elapsed().as_secs_f64();

    let flow_path = dir.join(FLOW_FILE);
    let file = File::create(&flow_path).map_err(|e| CliError::io(&flow_path, e))?;
    let mut w = BufWriter::new(file);
    write_flow_csv(&flow, &mut w).map_err(|e| CliError::Verify(format!("{}: {e}", flow_path.display())))?;
    w.flush().map_err(|e| CliError::io(&flow_path, e))?;
    let mut artifacts = vec![FLOW_FILE.to_string()];
    write_brakke(&dir, &verification.brakke, &mut artifacts)?;
    artifacts.push(MANIFEST_FILE.into());

    let m = manifest(
        "simulate",
        &scenario,
        &flow,
        Some(SolverSummary::from(&report)),
        verification,
        artifacts,
        WallTimes {
            solve_s: Some(solve_s),
            verify_s,
            total_s: start.elapsed().as_secs_f64(),
        },
    );
    write_json(&dir.join(MANIFEST_FILE), &m)?;
    Ok(m)
}

/// Reads a flow dump written for `config` and reruns every enabled check
/// on it.
pub fn verify(config: &Path, flow_path: &Path, out: Option<&Path>) -> Result<RunManifest> {
    let start = Instant::now();
    let scenario = Scenario::new(ScenarioConfig::load(config)?)?;
    let dir = output_dir(&scenario.config, out)?;
    let file = File::open(flow_path).map_err(|e| CliError::io(flow_path, e))?;
    let flow = read_flow_csv(
        BufReader::new(file),
        &scenario.output_grid(),
        scenario.boundary_policy(),
    )
    .map_err(|e| match input_error(e) {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", flow_path.display())),
        other => other,
    })?;
    let verify_start = Instant::now();
    let verification = verify_flow(&scenario, &flow, 0)?;
    let verify_s = verify_start.elapsed().as_secs_f64();
    let mut artifacts = Vec::new();
    write_brakke(&dir, &verification.brakke, &mut artifacts)?;
    artifacts.push(MANIFEST_FILE.into());
    let m = manifest(
        "verify",
        &scenario,
        &flow,
        None,
        verification,
        artifacts,
        WallTimes {
            solve_s: None,
            verify_s,
            total_s: start.elapsed().as_secs_f64(),
        },
    );
    write_json(&dir.join(MANIFEST_FILE), &m)?;
    Ok(m)
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub error: Option<f64>,
    pub brakke_residual: Option<f64>,
    pub identity_residual: Option<f64>,
    pub motion_law_residual: Option<f64>,
    pub duality_residual: Option<f64>,
    pub error_order: Option<f64>,
    pub brakke_order: Option<f64>,
    pub identity_order: Option<f64>,
    pub motion_law_order: Option<f64>,
    pub duality_order: Option<f64>,
}

pub const CONVERGENCE_HEADER: [&str; 13] = [
    "level",
    "h",
    "dt",
    "error",
    "brakke_residual",
    "identity_residual",
    "motion_law_residual",
    "duality_residual",
    "error_order",
    "brakke_order",
    "identity_order",
    "motion_law_order",
    "duality_order",
];

/// `log₂(coarse / fine)`, or `None` when either value is missing or at
/// roundoff level.
pub fn order(coarse: Option<f64>, fine: Option<f64>) -> Option<f64> {
    match (coarse, fine) {
        (Some(a), Some(b)) if a > ROUNDOFF_FLOOR && b > ROUNDOFF_FLOOR => Some((a / b).log2()),
        _ => None,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.16e}"))
}

impl ConvergenceRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.level.to_string(),
            format!("{:.16e}", self.h),
            format!("{:.16e}", self.dt),
            cell(self.error),
            cell(self.brakke_residual),
            cell(self.identity_residual),
            cell(self.motion_law_residual),
            cell(self.duality_residual),
            cell(self.error_order),
            cell(self.brakke_order),
            cell(self.identity_order),
            cell(self.motion_law_order),
            cell(self.duality_order),
        ]
    }
}

/// Runs the scenario at `h, h/2, …` (`levels` runs) and writes the
/// convergence table.
pub fn converge(config: &Path, levels: usize, out: Option<&Path>) -> Result<Vec<ConvergenceRow>> {
    if levels < 2 {
        return Err(CliError::Config(format!(
            "converge needs at least 2 levels, got {levels}"
        )));
    }
    let base = Scenario::new(ScenarioConfig::load(config)?)?;
    let dir = output_dir(&base.config, out)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for level in 0..levels {
        let scenario = base.refined(level as u32)?;
        let (flow, _) = scenario.solve()?;
        let r = verify_flow(&scenario, &flow, level)?.residuals;
        let prev = rows.last();
        let ord = |pick: fn(&ConvergenceRow) -> Option<f64>, now: Option<f64>| prev.and_then(|p| order(pick(p), now));
        let row = ConvergenceRow {
            level,
            h: flow.grid().h(),
            dt: flow.grid().dt(),
            error_order: ord(|p| p.error, r.error),
            brakke_order: ord(|p| p.brakke_residual, r.brakke),
            identity_order: ord(|p| p.identity_residual, r.identity),
            motion_law_order: ord(|p| p.motion_law_residual, r.motion_law),
            duality_order: ord(|p| p.duality_residual, r.duality),
            error: r.error,
            brakke_residual: r.brakke,
            identity_residual: r.identity,
            motion_law_residual: r.motion_law,
            duality_residual: r.duality,
        };
        rows.push(row);
    }
    let path = dir.join(CONVERGENCE_FILE);
    let mut text = CONVERGENCE_HEADER.join(",");
    text.push('\n');
    for row in &rows {
        text.push_str(&row.to_record().join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

/// Parses a table written by [`converge`]; `n/a` cells become `None`.
pub fn read_convergence(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(CONVERGENCE_HEADER.join(",").as_str()) {
        return Err(CliError::Input(format!("{}: unexpected header", path.display())));
    }
    let bad = |row: usize| CliError::Input(format!("{}: malformed row {row}", path.display()));
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != CONVERGENCE_HEADER.len() {
                return Err(bad(i));
            }
            let num = |j: usize| -> Result<Option<f64>> {
                match cells[j] {
                    "n/a" => Ok(None),
                    s => s.parse().map(Some).map_err(|_| bad(i)),
                }
            };
            let req = |j: usize| num(j)?.ok_or_else(|| bad(i));
            Ok(ConvergenceRow {
                level: cells[0].parse().map_err(|_| bad(i))?,
                h: req(1)?,
                dt: req(2)?,
                error: num(3)?,
                brakke_residual: num(4)?,
                identity_residual: num(5)?,
                motion_law_residual: num(6)?,
                duality_residual: num(7)?,
                error_order: num(8)?,
                brakke_order: num(9)?,
                identity_order: num(10)?,
                motion_law_order: num(11)?,
                duality_order: num(12)?,
            })
        })
        .collect()
}
