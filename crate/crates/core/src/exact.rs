//! Closed-form graph functions used as initial data, Dirichlet boundary data
//! and error references.

use crate::{Error, Real, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ExactSolution<T> {
    /// `f ≡ 0`; static under zero forcing.
    Flat { k: usize, codim: usize },
    /// `f^a = offset^a + Σ_i slope[a·k + i] x_i`; static under zero forcing.
    Affine {
        k: usize,
        codim: usize,
        offset: Vec<T>,
        slope: Vec<T>,
    },
    /// `f^a = velocity^a · t`, the flat plane moved by the constant ambient
    /// forcing `u = (0, velocity)`.
    Translation { k: usize, codim: usize, velocity: Vec<T> },
    /// Translating curve `f = t/λ − λ log cos(x/λ)` (k = 1, codim 1), the
    /// parabolic rescaling by `λ` of `t − log cos x`. Needs `|x| < λπ/2`.
    GrimReaper { scale: T },
    /// `f^1 = |x|²/2`, other components zero. Static data only: it is not a
    /// solution of the flow.
    Paraboloid { k: usize, codim: usize },
}

impl<T: Real> ExactSolution<T> {
    pub fn grim_reaper() -> Self {
        ExactSolution::GrimReaper { scale: T::one() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(m.to_string()));
        match self {
            ExactSolution::Flat { k, codim } | ExactSolution::Paraboloid { k, codim } if *k == 0 || *codim == 0 => {
                bad("need k ≥ 1 and codim ≥ 1")
            }
            ExactSolution::Affine {
                k,
                codim,
                offset,
                slope,
            } if offset.len() != *codim || slope.len() != codim * k => bad("affine data has the wrong shape"),
            ExactSolution::Translation { codim, velocity, .. } if velocity.len() != *codim => {
                bad("translation velocity has the wrong length")
            }
            ExactSolution::GrimReaper { scale } if !(*scale > T::zero()) => bad("grim reaper scale must be positive"),
            _ => Ok(()),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ExactSolution::Flat { k, .. }
            | ExactSolution::Affine { k, .. }
            | ExactSolution::Translation { k, .. }
            | ExactSolution::Paraboloid { k, .. } => *k,
            ExactSolution::GrimReaper { .. } => 1,
        }
    }

    pub fn codim(&self) -> usize {
        match self {
            ExactSolution::Flat { codim, .. }
            | ExactSolution::Affine { codim, .. }
            | ExactSolution::Translation { codim, .. }
            | ExactSolution::Paraboloid { codim, .. } => *codim,
            ExactSolution::GrimReaper { .. } => 1,
        }
    }

    /// Whether the function solves the flow equation (with
    /// [`Self::constant_forcing`] as forcing).
    pub fn is_solution(&self) -> bool {
        !matches!(self, ExactSolution::Paraboloid { .. })
    }

    /// The constant ambient forcing under which this is a solution.
    pub fn constant_forcing(&self) -> Vec<T> {
        let n = self.k() + self.codim();
        let mut u = vec![T::zero(); n];
        if let ExactSolution::Translation { k, velocity, .. } = self {
            u[*k..].copy_from_slice(velocity);
        }
        u
    }

    pub fn eval(&self, x: &[T], t: T, out: &mut [T]) {
        match self {
            ExactSolution::Flat { .. } => out.fill(T::zero()),
            ExactSolution::Affine { k, offset, slope, .. } => {
                for (a, o) in out.iter_mut().enumerate() {
                    *o = offset[a] + (0..*k).map(|i| slope[a * k + i] * x[i]).sum::<T>();
                }
            }
            ExactSolution::Translation { velocity, .. } => {
                for (o, &c) in out.iter_mut().zip(velocity) {
                    *o = c * t;
                }
            }
            ExactSolution::GrimReaper { scale } => {
                let l = *scale;
                out[0] = t / l - l * (x[0] / l).cos().ln();
            }
            ExactSolution::Paraboloid { .. } => {
                out.fill(T::zero());
                out[0] = T::lit(0.5) * x.iter().map(|&v| v * v).sum::<T>();
            }
        }
    }

    /// `∂_i f^a` at `(x, t)`, layout `a·k + i`.
    pub fn gradient(&self, x: &[T], _t: T, out: &mut [T]) {
        out.fill(T::zero());
        match self {
            ExactSolution::Affine { slope, .. } => out.copy_from_slice(slope),
            ExactSolution::GrimReaper { scale } => out[0] = (x[0] / *scale).tan(),
            ExactSolution::Paraboloid { k, .. } => out[..*k].copy_from_slice(&x[..*k]),
            _ => {}
        }
    }

    /// `∂_t f^a` at `(x, t)`.
    pub fn time_derivative(&self, _x: &[T], _t: T, out: &mut [T]) {
        out.fill(T::zero());
        match self {
            ExactSolution::Translation { velocity, .. } => out.copy_from_slice(velocity),
            ExactSolution::GrimReaper { scale } => out[0] = T::one() / *scale,
            _ => {}
        }
    }
}
