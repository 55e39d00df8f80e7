//! Second-order finite differences.
//!
//! Interior nodes use central differences; nodes on a box face use
//! one-sided second-order formulas (3 points for first derivatives, 4 for
//! second derivatives). Mixed derivatives are the product of the two 1-D
//! first-derivative operators, which is the four-point cross stencil in the
//! interior. Every operator is exact on polynomials of degree ≤ 2.

use rayon::prelude::*;

use super::{FieldSample, GraphFlow, SpaceTimeGrid};
use crate::geometry::{sym_index, sym_len};
use crate::{Error, Real, Result};

/// Fewest nodes per axis for which all stencils are defined.
pub const MIN_NODES: usize = 5;

#[inline]
fn first_weights(i: usize, n: usize) -> [(isize, f64); 3] {
    if i == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if i + 1 == n {
        [(0, 1.5), (-1, -2.0), (-2, 0.5)]
    } else {
        [(-1, -0.5), (0, 0.0), (1, 0.5)]
    }
}

#[inline]
fn second_weights(i: usize, n: usize) -> [(isize, f64); 4] {
    if i == 0 {
        [(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if i + 1 == n {
        [(0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0)]
    } else {
        [(-1, 1.0), (0, -2.0), (1, 1.0), (0, 0.0)]
    }
}

#[inline]
fn shift(node: usize, off: isize, stride: usize) -> usize {
    (node as isize + off * stride as isize) as usize
}

fn check_grid<T: Real>(grid: &SpaceTimeGrid<T>) -> Result<()> {
    for (axis, &n) in grid.nodes().iter().enumerate() {
        if n < MIN_NODES {
            return Err(Error::GridTooSmall {
                axis,
                nodes: n,
                needed: MIN_NODES,
            });
        }
    }
    Ok(())
}

/// `∂_i f^a` at every node of one slice; layout `node * (codim·k) + a·k + i`.
pub fn gradient_of_slice<T: Real>(grid: &SpaceTimeGrid<T>, slice: &[T]) -> Result<Vec<T>> {
    check_grid(grid)?;
    let (k, m) = (grid.k(), grid.codim());
    let ncomp = k * m;
    let inv_h = T::one() / grid.h();
    let strides: Vec<usize> = (0..k).map(|d| grid.stride(d)).collect();
    let mut out = vec![T::zero(); grid.num_nodes() * ncomp];
    out.par_chunks_mut(ncomp).enumerate().for_each(|(node, g)| {
        for i in 0..k {
            let w = first_weights(grid.axis_index(node, i), grid.nodes()[i]);
            for a in 0..m {
                let mut s = T::zero();
                for &(off, c) in &w {
                    if c != 0.0 {
                        s += T::lit(c) * slice[shift(node, off, strides[i]) * m + a];
                    }
                }
                g[a * k + i] = s * inv_h;
            }
        }
    });
    Ok(out)
}

/// Packed Hessian at every node of one slice; layout
/// `node * (codim·sym_len(k)) + a·sym_len(k) + sym_index(k, i, j)`.
pub fn hessian_of_slice<T: Real>(grid: &SpaceTimeGrid<T>, slice: &[T]) -> Result<Vec<T>> {
    check_grid(grid)?;
    let (k, m) = (grid.k(), grid.codim());
    let sl = sym_len(k);
    let ncomp = m * sl;
    let inv_h2 = T::one() / (grid.h() * grid.h());
    let strides: Vec<usize> = (0..k).map(|d| grid.stride(d)).collect();
    let mut out = vec![T::zero(); grid.num_nodes() * ncomp];
    out.par_chunks_mut(ncomp).enumerate().for_each(|(node, q)| {
        for i in 0..k {
            let ii = grid.axis_index(node, i);
            let w2 = second_weights(ii, grid.nodes()[i]);
            for a in 0..m {
                let mut s = T::zero();
                for &(off, c) in &w2 {
                    if c != 0.0 {
                        s += T::lit(c) * slice[shift(node, off, strides[i]) * m + a];
                    }
                }
                q[a * sl + sym_index(k, i, i)] = s * inv_h2;
            }
            let wi = first_weights(ii, grid.nodes()[i]);
            for j in i + 1..k {
                let wj = first_weights(grid.axis_index(node, j), grid.nodes()[j]);
                for a in 0..m {
                    let mut s = T::zero();
                    for &(oi, ci) in &wi {
                        if ci == 0.0 {
                            continue;
                        }
                        let ni = shift(node, oi, strides[i]);
                        for &(oj, cj) in &wj {
                            if cj != 0.0 {
                                s += T::lit(ci * cj) * slice[shift(ni, oj, strides[j]) * m + a];
                            }
                        }
                    }
                    q[a * sl + sym_index(k, i, j)] = s * inv_h2;
                }
            }
        }
    });
    Ok(out)
}

pub fn gradient<T: Real>(flow: &GraphFlow<T>, time_index: usize) -> Result<FieldSample<T>> {
    flow.check_time_index(time_index)?;
    let grid = flow.grid();
    let data = gradient_of_slice(grid, flow.slice(time_index))?;
    FieldSample::new(grid.clone(), time_index, grid.k() * grid.codim(), data)
}

pub fn hessian<T: Real>(flow: &GraphFlow<T>, time_index: usize) -> Result<FieldSample<T>> {
    flow.check_time_index(time_index)?;
    let grid = flow.grid();
    let data = hessian_of_slice(grid, flow.slice(time_index))?;
    FieldSample::new(grid.clone(), time_index, grid.codim() * sym_len(grid.k()), data)
}

/// `∂_t f` at one stored level: central in the interior of the time range,
/// one-sided second order at the first and last level.
pub fn time_derivative<T: Real>(flow: &GraphFlow<T>, time_index: usize) -> Result<FieldSample<T>> {
    let levels = flow.time_levels();
    if levels < 3 {
        return Err(Error::TooFewTimeLevels(levels));
    }
    flow.check_time_index(time_index)?;
    let grid = flow.grid();
    let inv = T::one() / (T::lit(2.0) * grid.dt());
    let data: Vec<T> = if time_index == 0 {
        let (f0, f1, f2) = (flow.slice(0), flow.slice(1), flow.slice(2));
        (0..f0.len())
            .map(|j| (T::lit(-3.0) * f0[j] + T::lit(4.0) * f1[j] - f2[j]) * inv)
            .collect()
    } else if time_index + 1 == levels {
        let m = time_index;
        let (f0, f1, f2) = (flow.slice(m), flow.slice(m - 1), flow.slice(m - 2));
        (0..f0.len())
            .map(|j| (T::lit(3.0) * f0[j] - T::lit(4.0) * f1[j] + f2[j]) * inv)
            .collect()
    } else {
        let (fp, fm) = (flow.slice(time_index + 1), flow.slice(time_index - 1));
        fp.iter().zip(fm).map(|(&a, &b)| (a - b) * inv).collect()
    };
    FieldSample::new(grid.clone(), time_index, grid.codim(), data)
}
