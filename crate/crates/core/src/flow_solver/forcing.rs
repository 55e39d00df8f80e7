//! Ambient forcing fields `u(x, t)` and the graph forcing term `U`.

use crate::expr::Expr;
use crate::geometry::{GradientMatrix, ProjectionPair};
use crate::{Error, Real, Result};

/// Samples of an ambient vector field on a box grid in `R^n`, optionally at
/// several time levels, interpolated multilinearly in space and linearly in
/// time. Queries outside the box are errors, never extrapolations.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedField<T> {
    lo: Vec<T>,
    hi: Vec<T>,
    nodes: Vec<usize>,
    t_start: T,
    dt: T,
    levels: usize,
    /// Time-major, then row-major over space, then the `n` components.
    values: Vec<T>,
}

impl<T: Real> GriddedField<T> {
    /// `levels == 1` makes the field time independent (and `dt` unused).
    pub fn new(
        lo: Vec<T>,
        hi: Vec<T>,
        nodes: Vec<usize>,
        (t_start, dt, levels): (T, T, usize),
        values: Vec<T>,
    ) -> Result<Self> {
        let n = lo.len();
        if n == 0 || hi.len() != n || nodes.len() != n {
            return Err(Error::ShapeMismatch("gridded forcing box has inconsistent axes".into()));
        }
        if nodes.iter().any(|&c| c < 2) || (0..n).any(|d| !(hi[d] > lo[d])) {
            return Err(Error::InvalidGrid(
                "gridded forcing needs ≥ 2 nodes and positive extent per axis".into(),
            ));
        }
        if levels == 0 || (levels > 1 && !(dt > T::zero())) {
            return Err(Error::InvalidGrid(
                "gridded forcing needs ≥ 1 level and positive dt".into(),
            ));
        }
        let expected = nodes.iter().product::<usize>() * n * levels;
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "gridded forcing has {} values, expected {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("gridded forcing has non-finite samples".into()));
        }
        Ok(Self {
            lo,
            hi,
            nodes,
            t_start,
            dt,
            levels,
            values,
        })
    }

    /// Samples `u` at every node and level.
    pub fn from_fn(
        lo: Vec<T>,
        hi: Vec<T>,
        nodes: Vec<usize>,
        time: (T, T, usize),
        u: impl Fn(&[T], T, &mut [T]),
    ) -> Result<Self> {
        let n = lo.len();
        let count: usize = nodes.iter().product();
        let mut values = vec![T::zero(); count * n * time.2];
        let mut x = vec![T::zero(); n];
        for l in 0..time.2 {
            let t = time.0 + T::from_usize_lossy(l) * time.1;
            for node in 0..count {
                let mut rem = node;
                for d in (0..n).rev() {
                    let i = rem % nodes[d];
                    rem /= nodes[d];
                    let step = (hi[d] - lo[d]) / T::from_usize_lossy(nodes[d] - 1);
                    x[d] = lo[d] + T::from_usize_lossy(i) * step;
                }
                let off = (l * count + node) * n;
                u(&x, t, &mut values[off..off + n]);
            }
        }
        Self::new(lo, hi, nodes, time, values)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn eval(&self, point: &[T], t: T, out: &mut [T]) -> Result<()> {
        let n = self.dim();
        let slack = T::lit(1e-12);
        let outside = || Error::ForcingDomain {
            point: point.iter().map(|x| x.to_f64_lossy()).collect(),
        };
        if point.len() != n {
            return Err(outside());
        }
        // Per-axis cell index and local coordinate.
        let mut base = 0usize;
        let mut stride = 1usize;
        let mut cell = vec![(0usize, T::zero(), 0usize); n];
        for d in (0..n).rev() {
            let len = self.hi[d] - self.lo[d];
            let s = (point[d] - self.lo[d]) / len;
            if !(s >= -slack && s <= T::one() + slack) {
                return Err(outside());
            }
            let cells = self.nodes[d] - 1;
            let pos = s.max(T::zero()).min(T::one()) * T::from_usize_lossy(cells);
            let i = pos.floor().to_usize().unwrap_or(0).min(cells - 1);
            cell[d] = (i, pos - T::from_usize_lossy(i), stride);
            base += i * stride;
            stride *= self.nodes[d];
        }
        let count = stride;
        let (l0, l1, wt) = if self.levels == 1 {
            (0, 0, T::zero())
        } else {
            let s = (t - self.t_start) / self.dt;
            let last = T::from_usize_lossy(self.levels - 1);
            if !(s >= -slack && s <= last + slack) {
                return Err(outside());
            }
            let s = s.max(T::zero()).min(last);
            let l = s.floor().to_usize().unwrap_or(0).min(self.levels - 2);
            (l, l + 1, s - T::from_usize_lossy(l))
        };
        out.fill(T::zero());
        for corner in 0..(1usize << n) {
            let mut w = T::one();
            let mut idx = base;
            for (d, &(_, frac, st)) in cell.iter().enumerate() {
                if corner >> d & 1 == 1 {
                    w *= frac;
                    idx += st;
                } else {
                    w *= T::one() - frac;
                }
            }
            if w == T::zero() {
                continue;
            }
            for (l, wl) in [(l0, T::one() - wt), (l1, wt)] {
                if wl == T::zero() {
                    continue;
                }
                let off = (l * count + idx) * n;
                for (c, o) in out.iter_mut().enumerate() {
                    *o += w * wl * self.values[off + c];
                }
            }
        }
        Ok(())
    }
}

/// The ambient forcing field `u: R^n × R → R^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum ForcingSpec<T> {
    /// `u ≡ 0` in `R^n`.
    Zero {
        n: usize,
    },
    /// A constant vector.
    Constant(Vec<T>),
    /// One expression per ambient component in the variables `x1..xk`
    /// (base-plane coordinates of the point), `y1..ym` (its normal
    /// coordinates) and `t`.
    Analytic {
        k: usize,
        components: Vec<Expr>,
    },
    Gridded(GriddedField<T>),
}

impl<T: Real> ForcingSpec<T> {
    pub fn analytic(k: usize, components: Vec<Expr>) -> Result<Self> {
        let n = components.len();
        if n <= k {
            return Err(Error::Invalid(format!(
                "forcing needs n > k components, got {n} with k = {k}"
            )));
        }
        for e in &components {
            e.check_dims(k, n - k)?;
        }
        Ok(ForcingSpec::Analytic { k, components })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            ForcingSpec::Zero { n } => *n,
            ForcingSpec::Constant(c) => c.len(),
            ForcingSpec::Analytic { components, .. } => components.len(),
            ForcingSpec::Gridded(g) => g.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingSpec::Zero { .. } => true,
            ForcingSpec::Constant(c) => c.iter().all(|&x| x == T::zero()),
            _ => false,
        }
    }

    /// `u(point, t)`; `point` is an ambient point `(x, y)`.
    pub fn eval(&self, point: &[T], t: T, out: &mut [T]) -> Result<()> {
        match self {
            ForcingSpec::Zero { .. } => out.fill(T::zero()),
            ForcingSpec::Constant(c) => out.copy_from_slice(c),
            ForcingSpec::Analytic { k, components } => {
                let (x, y) = point.split_at(*k);
                for (o, e) in out.iter_mut().zip(components) {
                    *o = e.eval(x, y, t);
                }
                if let Some(pos) = out.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        node: point.iter().map(|v| v.to_f64_lossy()).collect(),
                        time: t.to_f64_lossy(),
                        component: pos,
                        value: out[pos].to_f64_lossy(),
                    });
                }
            }
            ForcingSpec::Gridded(g) => g.eval(point, t, out)?,
        }
        Ok(())
    }

    /// Scales the field by `s`. Gridded and constant fields scale their
    /// samples; analytic fields are wrapped as `s * (expr)`.
    pub fn scaled(&self, s: T) -> Result<Self> {
        Ok(match self {
            ForcingSpec::Zero { n } => ForcingSpec::Zero { n: *n },
            ForcingSpec::Constant(c) => ForcingSpec::Constant(c.iter().map(|&v| v * s).collect()),
            ForcingSpec::Analytic { k, components } => ForcingSpec::Analytic {
                k: *k,
                components: components
                    .iter()
                    .map(|e| Expr::parse(&format!("({:e}) * ({})", s.to_f64_lossy(), e.source())))
                    .collect::<Result<_>>()?,
            },
            ForcingSpec::Gridded(g) => ForcingSpec::Gridded(GriddedField {
                values: g.values.iter().map(|&v| v * s).collect(),
                ..g.clone()
            }),
        })
    }
}

/// `U^a = (u^⊥)^{k+a} − Σ_j (u^⊥)^j P(a, j)` with `u^⊥ = (I − S) u`, in the
/// canonical frame.
pub fn forcing_term<T: Real>(p: &GradientMatrix<T>, pair: &ProjectionPair<T>, u: &[T]) -> Vec<T> {
    let (k, m) = (p.k(), p.codim());
    let un = pair.s_perp.mul_vec(u);
    (0..m)
        .map(|a| un[k + a] - (0..k).map(|j| un[j] * p.get(a, j)).sum::<T>())
        .collect()
}

/// Same value as [`forcing_term`] without forming `S`: the tangential part
/// `S u` cancels, leaving `U^a = u^{k+a} − Σ_j P(a, j) u^j`.
#[inline]
pub fn forcing_term_reduced<T: Real>(p: &[T], k: usize, u: &[T], out: &mut [T]) {
    for (a, o) in out.iter_mut().enumerate() {
        let mut s = u[k + a];
        for j in 0..k {
            s -= p[a * k + j] * u[j];
        }
        *o = s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{graph_tangent_plane, Frame};

    #[test]
    fn forcing_term_examples() {
        let frame = Frame::canonical(1, 2);
        let p = GradientMatrix::new(1, 1, vec![1.0f64]).unwrap();
        let pair = graph_tangent_plane(&frame, &p).unwrap();
        let u = forcing_term(&p, &pair, &[1.0, 0.0]);
        assert!((u[0] + 1.0).abs() < 1e-15);
        let zero = forcing_term(&p, &pair, &[0.0, 0.0]);
        assert_eq!(zero, vec![0.0]);
        let flat = GradientMatrix::<f64>::zeros(2, 2);
        let pair = graph_tangent_plane(&Frame::canonical(2, 4), &flat).unwrap();
        assert_eq!(forcing_term(&flat, &pair, &[1.0, 2.0, 3.0, 4.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn reduced_form_agrees() {
        let p = GradientMatrix::new(2, 2, vec![0.3f64, -1.2, 2.0, 0.7]).unwrap();
        let pair = graph_tangent_plane(&Frame::canonical(2, 4), &p).unwrap();
        let u = [0.4, -0.9, 1.3, 2.2];
        let full = forcing_term(&p, &pair, &u);
        let mut red = [0.0; 2];
        forcing_term_reduced(p.as_slice(), 2, &u, &mut red);
        for a in 0..2 {
            assert!((full[a] - red[a]).abs() < 1e-13);
        }
    }

    #[test]
    fn gridded_is_exact_on_affine_fields_and_rejects_outside() {
        let u = |x: &[f64], t: f64, out: &mut [f64]| {
            out[0] = 1.0 + 2.0 * x[0] - x[1] + 0.5 * t;
            out[1] = x[0] * 0.25 - 3.0 * x[1];
        };
        let g = GriddedField::from_fn(vec![-1.0, 0.0], vec![1.0, 2.0], vec![5, 9], (0.0, 0.5, 3), u).unwrap();
        let f = ForcingSpec::Gridded(g);
        let mut out = [0.0; 2];
        let mut want = [0.0; 2];
        for &(x, y, t) in &[(0.13, 1.77, 0.31), (-1.0, 0.0, 0.0), (1.0, 2.0, 1.0), (0.5, 0.5, 0.75)] {
            f.eval(&[x, y], t, &mut out).unwrap();
            u(&[x, y], t, &mut want);
            assert!((out[0] - want[0]).abs() < 1e-13 && (out[1] - want[1]).abs() < 1e-13);
        }
        assert!(matches!(
            f.eval(&[1.01, 0.5], 0.1, &mut out),
            Err(Error::ForcingDomain { .. })
        ));
        assert!(f.eval(&[0.0, 0.5], 1.5, &mut out).is_err());
    }

    #[test]
    fn analytic_components() {
        let f = ForcingSpec::<f64>::analytic(1, vec![Expr::parse("0").unwrap(), Expr::parse("2 + y1 * t").unwrap()])
            .unwrap();
        let mut out = [0.0; 2];
        f.eval(&[0.3, 1.5], 2.0, &mut out).unwrap();
        assert_eq!(out, [0.0, 5.0]);
        let s = f.scaled(2.0).unwrap();
        s.eval(&[0.3, 1.5], 2.0, &mut out).unwrap();
        assert_eq!(out, [0.0, 10.0]);
        assert!(ForcingSpec::<f64>::analytic(1, vec![Expr::parse("y2").unwrap(), Expr::parse("0").unwrap()]).is_err());
    }
}
