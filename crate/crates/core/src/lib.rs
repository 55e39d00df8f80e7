//! Forced mean curvature flow of graphical submanifolds, and numerical
//! verification of its weak (varifold / Brakke) characterization.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: pointwise differential geometry of a graph over the
//!   canonical `k`-plane (induced metric, tangent projections, mean
//!   curvature, Legendre–Hadamard coefficients).
//! * [`discretization`]: uniform space-time grids, finite-difference
//!   stencils, trapezoid quadrature and the CSV field dump format.
//! * [`flow_solver`]: explicit and semi-implicit time stepping of
//!   `∂_t f^a = g^{ij} ∂_{ij} f^a + U^a`.
//! * [`varifold`]: time slices as unit-density discrete varifolds,
//!   first variation and mean-curvature duality.
//! * [`brakke`]: the Brakke inequality, the graph velocity identity and the
//!   motion law `v = h + u^⊥` evaluated on a discrete flow.
//! * [`norms`]: mixed `L^{p,q}` norms, parabolic Hölder seminorms and
//!   empirical regularity-estimate ratios.
//!
//! All numerics are generic over [`Real`]; the `*64` aliases at the crate
//! root fix the scalar to `f64`, which is what the batch driver uses.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub mod brakke;
pub mod discretization;
pub mod error;
pub mod exact;
pub mod expr;
pub mod flow_solver;
pub mod geometry;
pub mod linalg;
pub mod norms;
pub mod par;
pub mod varifold;

pub use error::{Error, Result};

/// Floating point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type GradientMatrix64 = geometry::GradientMatrix<f64>;
pub type HessianTensor64 = geometry::HessianTensor<f64>;
pub type MetricPack64 = geometry::MetricPack<f64>;
pub type ProjectionPair64 = geometry::ProjectionPair<f64>;
pub type Frame64 = geometry::Frame<f64>;
pub type SpaceTimeGrid64 = discretization::SpaceTimeGrid<f64>;
pub type GraphFlow64 = discretization::GraphFlow<f64>;
pub type FieldSample64 = discretization::FieldSample<f64>;
pub type ForcingSpec64 = flow_solver::ForcingSpec<f64>;
pub type SolverConfig64 = flow_solver::SolverConfig<f64>;
pub type FlowRunReport64 = flow_solver::FlowRunReport<f64>;
pub type DiscreteVarifold64 = varifold::DiscreteVarifold<f64>;
pub type SpaceTimeMeasure64 = varifold::SpaceTimeMeasure<f64>;
pub type TestFunction64 = brakke::TestFunction<f64>;
pub type VelocityField64 = brakke::VelocityField<f64>;
pub type BrakkeReport64 = brakke::BrakkeReport<f64>;
pub type NormRequest64 = norms::NormRequest<f64>;
pub type EstimateReport64 = norms::EstimateReport<f64>;

pub type GraphFlow32 = discretization::GraphFlow<f32>;
pub type MetricPack32 = geometry::MetricPack<f32>;
