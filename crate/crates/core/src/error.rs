use thiserror::Error;

use crate::flow_solver::FlowRunReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid too small for stencil: axis {axis} has {nodes} nodes, need at least {needed}")]
    GridTooSmall { axis: usize, nodes: usize, needed: usize },

    #[error("time derivative needs at least 3 time levels, flow has {0}")]
    TooFewTimeLevels(usize),

    #[error("time index {index} out of range (flow has {levels} levels)")]
    TimeIndex { index: usize, levels: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value {value} at node {node:?}, time {time}, component {component}")]
    NonFinite {
        node: Vec<f64>,
        time: f64,
        component: usize,
        value: f64,
    },

    #[error("CFL violation: dt = {dt:e} exceeds h^2/(2k) = {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("linear solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("gradient guard tripped at step {step}: max |grad f| = {max_gradient:e} > {limit:e}")]
    GradientGuard {
        step: usize,
        max_gradient: f64,
        limit: f64,
        report: Box<FlowRunReport<f64>>,
    },

    #[error("forcing queried outside its grid at {point:?}")]
    ForcingDomain { point: Vec<f64> },

    #[error("expression error at column {column}: {message}")]
    Expr { column: usize, message: String },

    #[error("test function support violation: {0}")]
    Support(String),

    #[error("invalid time window: t1 = {t1}, t2 = {t2}")]
    Window { t1: f64, t2: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
