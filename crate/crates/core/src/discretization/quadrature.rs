//! Node-based composite trapezoid quadrature over boxes and masked regions.
//!
//! A node belongs to a region iff its center does; there is no partial-cell
//! weighting, so curved regions carry an O(h) boundary error.

use super::{FieldSample, SpaceTimeGrid};
use crate::{par, Error, Real, Result};

/// A spatial region in base-plane coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Region<T> {
    /// The whole grid box.
    All,
    /// Closed axis-aligned sub-box.
    Box { lo: Vec<T>, hi: Vec<T> },
    /// Open ball `|x − center| < radius`.
    Ball { center: Vec<T>, radius: T },
}

impl<T: Real> Region<T> {
    pub fn ball(center: Vec<T>, radius: T) -> Self {
        Region::Ball { center, radius }
    }

    /// Whether a node center at `x` belongs to the region; `slack` absorbs
    /// roundoff in node coordinates on box faces.
    pub fn contains(&self, x: &[T], slack: T) -> bool {
        match self {
            Region::All => true,
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(&xi, (&l, &u))| xi >= l - slack && xi <= u + slack),
            Region::Ball { center, radius } => {
                let r2: T = x.iter().zip(center).map(|(&a, &c)| (a - c) * (a - c)).sum();
                r2 < *radius * *radius
            }
        }
    }

    /// Checks that the region lies inside the grid box.
    pub fn check_within(&self, grid: &SpaceTimeGrid<T>) -> Result<()> {
        let slack = T::lit(1e-9) * grid.h();
        let inside =
            |lo: &[T], hi: &[T]| (0..grid.k()).all(|d| lo[d] >= grid.lo()[d] - slack && hi[d] <= grid.hi()[d] + slack);
        let ok = match self {
            Region::All => true,
            Region::Box { lo, hi } => lo.len() == grid.k() && hi.len() == grid.k() && inside(lo, hi),
            Region::Ball { center, radius } => {
                center.len() == grid.k() && {
                    let lo: Vec<T> = center.iter().map(|&c| c - *radius).collect();
                    let hi: Vec<T> = center.iter().map(|&c| c + *radius).collect();
                    inside(&lo, &hi)
                }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("region {self:?} leaves the grid box")))
        }
    }
}

/// Result of a masked quadrature; `empty` flags a region containing no nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    pub empty: bool,
}

fn axis_weights<T: Real>(n: usize, first: usize, last: usize) -> Vec<T> {
    let mut w = vec![T::zero(); n];
    if first < last {
        for wi in w.iter_mut().take(last + 1).skip(first) {
            *wi = T::one();
        }
        w[first] = T::lit(0.5);
        w[last] = T::lit(0.5);
    }
    w
}

/// Per-node quadrature weights (including the cell volume `h^k`) for a
/// region: trapezoid end weights on the faces of the grid box, or of the
/// sub-box for [`Region::Box`]; node-center masking for balls.
pub fn trapezoid_weights<T: Real>(grid: &SpaceTimeGrid<T>, region: &Region<T>) -> Vec<T> {
    let k = grid.k();
    let slack = T::lit(1e-9) * grid.h();
    let per_axis: Vec<Vec<T>> = (0..k)
        .map(|d| {
            let n = grid.nodes()[d];
            match region {
                Region::Box { lo, hi } => {
                    let x = |i: usize| grid.lo()[d] + T::from_usize_lossy(i) * grid.h();
                    let inside: Vec<usize> = (0..n)
                        .filter(|&i| x(i) >= lo[d] - slack && x(i) <= hi[d] + slack)
                        .collect();
                    match (inside.first(), inside.last()) {
                        (Some(&a), Some(&b)) => axis_weights(n, a, b),
                        _ => vec![T::zero(); n],
                    }
                }
                _ => axis_weights(n, 0, n - 1),
            }
        })
        .collect();
    let cell = grid.h().powi(k as i32);
    let mut x = vec![T::zero(); k];
    (0..grid.num_nodes())
        .map(|node| {
            let mut w = cell;
            for (d, wd) in per_axis.iter().enumerate() {
                w *= wd[grid.axis_index(node, d)];
            }
            if w != T::zero() {
                if let Region::Ball { .. } = region {
                    grid.coords_into(node, &mut x);
                    if !region.contains(&x, slack) {
                        w = T::zero();
                    }
                }
            }
            w
        })
        .collect()
}

/// `∫_region field · weights dx` by the composite trapezoid rule. `field`
/// and the optional pointwise `weights` must be scalar samples on the same
/// grid. An empty region yields zero with `empty = true`.
pub fn cell_quadrature<T: Real>(
    field: &FieldSample<T>,
    weights: Option<&FieldSample<T>>,
    region: &Region<T>,
) -> Result<Quadrature<T>> {
    let grid = field.grid();
    if field.ncomp() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "quadrature needs a scalar field, got {} components",
            field.ncomp()
        )));
    }
    if let Some(w) = weights {
        if w.ncomp() != 1 || w.grid().nodes() != grid.nodes() {
            return Err(Error::ShapeMismatch("quadrature weights do not match the field".into()));
        }
    }
    let qw = trapezoid_weights(grid, region);
    let empty = qw.iter().all(|&w| w == T::zero());
    let f = field.data();
    let value = par::sum(qw.len(), |n| {
        let pw = weights.map_or(T::one(), |w| w.data()[n]);
        qw[n] * f[n] * pw
    });
    Ok(Quadrature { value, empty })
}
