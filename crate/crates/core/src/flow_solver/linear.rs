//! Matrix-free BiCGSTAB for the nonsymmetric systems of the semi-implicit
//! scheme. Inner products use the deterministic block reduction, so the
//! iterates do not depend on the thread count.

use rayon::prelude::*;

use crate::{par, Error, Real, Result};

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    par::sum(a.len(), |i| a[i] * b[i])
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves `A x = b` to relative residual `tol`, starting from `x`.
/// Returns the iteration count and the achieved relative residual.
pub fn bicgstab<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> Result<(usize, T)> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == T::zero() {
        x.fill(T::zero());
        return Ok((0, T::zero()));
    }
    let mut r = vec![T::zero(); n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return Ok((0, rel));
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    for iter in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut()
            .zip(r.par_iter().zip(&v))
            .for_each(|(pi, (&ri, &vi))| *pi = ri + beta * (*pi - omega * vi));
        apply(&p, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == T::zero() {
            break;
        }
        alpha = rho / denom;
        s.par_iter_mut()
            .zip(r.par_iter().zip(&v))
            .for_each(|(si, (&ri, &vi))| *si = ri - alpha * vi);
        let s_rel = norm(&s) / b_norm;
        if s_rel <= tol {
            x.par_iter_mut().zip(&p).for_each(|(xi, &pi)| *xi += alpha * pi);
            return Ok((iter, s_rel));
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt == T::zero() {
            break;
        }
        omega = dot(&t, &s) / tt;
        x.par_iter_mut()
            .zip(p.par_iter().zip(&s))
            .for_each(|(xi, (&pi, &si))| *xi += alpha * pi + omega * si);
        r.par_iter_mut()
            .zip(s.par_iter().zip(&t))
            .for_each(|(ri, (&si, &ti))| *ri = si - omega * ti);
        rel = norm(&r) / b_norm;
        if rel <= tol {
            return Ok((iter, rel));
        }
        if omega == T::zero() {
            break;
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: rel.to_f64_lossy(),
    })
}
