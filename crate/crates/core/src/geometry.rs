//! Pointwise differential geometry of a graph `x ↦ (x, f(x))` over a
//! `k`-plane `T ⊂ R^n`.
//!
//! Core routines work in the canonical frame `T = span(e_1, …, e_k)`; ambient
//! vectors are ordered `(tangential k components, normal n−k components)`.
//! A general plane is handled through [`Frame`], which conjugates inputs and
//! outputs by an orthogonal change of basis.
//!
//! Index conventions: `P(a, i) = ∂_i f^a` with `i < k` the base index and
//! `a < n − k` the codimension index; `Q(a, i, j) = ∂_{ij} f^a`.

use crate::linalg::{self, Mat};
use crate::{Error, Real, Result};

/// Spatial gradient `∇f` at a point, stored as a `codim × k` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix<T> {
    k: usize,
    codim: usize,
    data: Vec<T>,
}

impl<T: Real> GradientMatrix<T> {
    /// `data` is row-major `codim × k`: `data[a * k + i] = ∂_i f^a`.
    pub fn new(k: usize, codim: usize, data: Vec<T>) -> Result<Self> {
        if k == 0 || codim == 0 {
            return Err(Error::Invalid("gradient needs k ≥ 1 and codim ≥ 1".into()));
        }
        if data.len() != k * codim {
            return Err(Error::ShapeMismatch(format!(
                "gradient has {} entries, expected {}×{}",
                data.len(),
                codim,
                k
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("gradient has non-finite entries".into()));
        }
        Ok(Self { k, codim, data })
    }

    pub fn zeros(k: usize, codim: usize) -> Self {
        Self {
            k,
            codim,
            data: vec![T::zero(); k * codim],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    pub fn ambient_dim(&self) -> usize {
        self.k + self.codim
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize) -> T {
        self.data[a * self.k + i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    /// The `n×n` matrix of `∇f` viewed as a map `T → T^⊥ ⊂ R^n`.
    pub fn embedded(&self) -> Mat<T> {
        let (k, n) = (self.k, self.ambient_dim());
        Mat::from_fn(
            n,
            n,
            |r, c| {
                if r >= k && c < k {
                    self.get(r - k, c)
                } else {
                    T::zero()
                }
            },
        )
    }
}

/// Spatial Hessian `∇²f`, symmetric in the base indices. Only the upper
/// triangle `i ≤ j` is stored, so symmetry holds exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianTensor<T> {
    k: usize,
    codim: usize,
    data: Vec<T>,
}

/// Number of stored entries per component of a `k`-dimensional Hessian.
pub fn sym_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Position of `(i, j)` in the packed upper triangle, row by row.
#[inline]
pub fn sym_index(k: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * k - i * (i + 1) / 2 + j
}

impl<T: Real> HessianTensor<T> {
    /// `packed[a * sym_len(k) + sym_index(k, i, j)] = ∂_{ij} f^a`.
    pub fn from_packed(k: usize, codim: usize, packed: Vec<T>) -> Result<Self> {
        if packed.len() != codim * sym_len(k) {
            return Err(Error::ShapeMismatch(format!(
                "packed Hessian has {} entries, expected {}",
                packed.len(),
                codim * sym_len(k)
            )));
        }
        Ok(Self { k, codim, data: packed })
    }

    /// Builds from full `∂_{ij} f^a` entries, keeping the upper triangle.
    pub fn from_fn(k: usize, codim: usize, f: impl Fn(usize, usize, usize) -> T) -> Self {
        let mut data = vec![T::zero(); codim * sym_len(k)];
        for a in 0..codim {
            for i in 0..k {
                for j in i..k {
                    data[a * sym_len(k) + sym_index(k, i, j)] = f(a, i, j);
                }
            }
        }
        Self { k, codim, data }
    }

    pub fn zeros(k: usize, codim: usize) -> Self {
        Self {
            k,
            codim,
            data: vec![T::zero(); codim * sym_len(k)],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn codim(&self) -> usize {
        self.codim
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, j: usize) -> T {
        self.data[a * sym_len(self.k) + sym_index(self.k, i, j)]
    }

    pub fn as_packed(&self) -> &[T] {
        &self.data
    }
}

/// Induced metric of the graph at a point.
#[derive(Clone, Debug)]
pub struct MetricPack<T> {
    /// `g_ij = δ_ij + Σ_a P(a,i) P(a,j)`.
    pub g: Mat<T>,
    /// `g^{ij}`, the exact symmetric inverse of `g_ij`.
    pub g_inv: Mat<T>,
    /// Area element `√det g_ij ≥ 1`.
    pub sqrt_g: T,
    pub eig_min: T,
    pub eig_max: T,
}

/// Writes `g_ij = δ_ij + Σ_a P(a,i)P(a,j)` (row-major `k×k`) into `g`.
#[inline]
pub fn metric_into<T: Real>(p: &[T], k: usize, codim: usize, g: &mut [T]) {
    for i in 0..k {
        for j in i..k {
            let mut s = if i == j { T::one() } else { T::zero() };
            for a in 0..codim {
                s += p[a * k + i] * p[a * k + j];
            }
            g[i * k + j] = s;
            g[j * k + i] = s;
        }
    }
}

/// `g_ij` is formed directly; `g^{ij}`, `√g` and the spectrum come from the
/// singular values `σ_j` and right singular vectors `v_j` of `P`:
/// `g^{ij} = Σ_j v_j v_jᵀ / (1 + σ_j²)`, `√g = Π_j (1 + σ_j²)^{1/2}`. This
/// stays accurate when `g_ij` is badly conditioned (large `|P|`), where a
/// Cholesky inverse would lose `cond(g)` digits.
pub fn induced_metric<T: Real>(p: &GradientMatrix<T>) -> MetricPack<T> {
    let (k, m) = (p.k(), p.codim());
    let mut g = Mat::zeros(k, k);
    let mut data = vec![T::zero(); k * k];
    metric_into(p.as_slice(), k, m, &mut data);
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = data[i * k + j];
        }
    }
    let (sigma, _, v) = linalg::jacobi_svd(p.as_slice(), m, k);
    let d: Vec<T> = sigma.iter().map(|&s| T::one() / (T::one() + s * s)).collect();
    let mut g_inv = Mat::zeros(k, k);
    for i in 0..k {
        for l in i..k {
            let x: T = (0..k).map(|j| v[i * k + j] * d[j] * v[l * k + j]).sum();
            g_inv[(i, l)] = x;
            g_inv[(l, i)] = x;
        }
    }
    let sqrt_g = sigma.iter().fold(T::one(), |acc, &s| acc * (T::one() + s * s).sqrt());
    let eig_min = d.iter().fold(T::one(), |a, &x| a.min(x));
    let eig_max = d.iter().fold(T::zero(), |a, &x| a.max(x));
    MetricPack {
        g,
        g_inv,
        sqrt_g,
        eig_min,
        eig_max,
    }
}

/// Smallest and largest eigenvalue of a symmetric matrix; closed forms for
/// `k ≤ 2`, Jacobi sweeps otherwise.
pub fn symmetric_extremes<T: Real>(m: &Mat<T>) -> (T, T) {
    match m.rows() {
        1 => (m[(0, 0)], m[(0, 0)]),
        2 => {
            let half = T::lit(0.5);
            let mean = half * (m[(0, 0)] + m[(1, 1)]);
            let d = half * (m[(0, 0)] - m[(1, 1)]);
            let r = (d * d + m[(0, 1)] * m[(0, 1)]).sqrt();
            (mean - r, mean + r)
        }
        _ => {
            let e = m.symmetric_eigenvalues();
            (e[0], e[e.len() - 1])
        }
    }
}

/// Sharp lower bound `1/(1 + |P|²)` for the eigenvalues of `g^{ij}`.
pub fn sharp_ellipticity_bound<T: Real>(p: &GradientMatrix<T>) -> T {
    T::one() / (T::one() + p.frobenius_sq())
}

/// The bound `1/(1 + |P|)` without the square. It only holds for `|P| ≤ 1`;
/// for larger gradients it exceeds the true smallest eigenvalue.
pub fn unsquared_ellipticity_bound<T: Real>(p: &GradientMatrix<T>) -> T {
    T::one() / (T::one() + p.frobenius())
}

/// Orthonormal basis of `R^n` whose first `k` vectors span the base plane
/// `T` and whose remaining vectors span `T^⊥`.
#[derive(Clone, Debug)]
pub struct Frame<T> {
    k: usize,
    /// Columns are the basis vectors.
    basis: Mat<T>,
    canonical: bool,
}

impl<T: Real> Frame<T> {
    pub fn canonical(k: usize, n: usize) -> Self {
        assert!(k >= 1 && k < n, "need 1 ≤ k < n");
        Self {
            k,
            basis: Mat::identity(n),
            canonical: true,
        }
    }

    /// Frame from `n` orthonormal vectors; the first `k` span `T`.
    pub fn from_orthonormal(k: usize, vectors: &[Vec<T>]) -> Result<Self> {
        let n = vectors.len();
        if k == 0 || k >= n {
            return Err(Error::InvalidFrame(format!("need 1 ≤ k < n, got k={k}, n={n}")));
        }
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidFrame("basis vectors must have length n".into()));
        }
        let tol = T::lit(1e-10);
        for (i, u) in vectors.iter().enumerate() {
            for (j, v) in vectors.iter().enumerate() {
                let expected = if i == j { T::one() } else { T::zero() };
                if (linalg::dot(u, v) - expected).abs() > tol {
                    return Err(Error::InvalidFrame(format!(
                        "basis vectors {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        let basis = Mat::from_fn(n, n, |r, c| vectors[c][r]);
        Ok(Self {
            k,
            basis,
            canonical: false,
        })
    }

    /// Frame from any `k` spanning vectors of `T` in `R^n`. The vectors are
    /// orthonormalized in order and the normal block is completed from the
    /// standard basis. Rank-deficient input is rejected.
    pub fn from_tangent_basis(n: usize, tangents: &[Vec<T>]) -> Result<Self> {
        let k = tangents.len();
        if k == 0 || k >= n {
            return Err(Error::InvalidFrame(format!("need 1 ≤ k < n, got k={k}, n={n}")));
        }
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(n);
        let rank_tol = T::lit(1e-10);
        for t in tangents {
            if t.len() != n {
                return Err(Error::InvalidFrame("tangent vectors must have length n".into()));
            }
            let scale = linalg::norm(t);
            match orthogonalize(t, &basis) {
                Some(v) if scale > T::zero() && linalg::norm(&v) > rank_tol * scale => {
                    let nv = linalg::norm(&v);
                    basis.push(v.into_iter().map(|x| x / nv).collect());
                }
                _ => return Err(Error::InvalidFrame("tangent basis is rank deficient".into())),
            }
        }
        for e in 0..n {
            if basis.len() == n {
                break;
            }
            let unit: Vec<T> = (0..n).map(|r| if r == e { T::one() } else { T::zero() }).collect();
            if let Some(v) = orthogonalize(&unit, &basis) {
                let nv = linalg::norm(&v);
                if nv > T::lit(1e-6) {
                    basis.push(v.into_iter().map(|x| x / nv).collect());
                }
            }
        }
        Self::from_orthonormal(k, &basis)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.basis.rows()
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Orthogonal matrix whose columns are the frame vectors.
    pub fn rotation(&self) -> &Mat<T> {
        &self.basis
    }

    /// Canonical-frame coordinates → ambient vector.
    pub fn to_ambient(&self, v: &[T]) -> Vec<T> {
        if self.canonical {
            return v.to_vec();
        }
        self.basis.mul_vec(v)
    }

    /// Ambient vector → canonical-frame coordinates.
    pub fn to_frame(&self, v: &[T]) -> Vec<T> {
        if self.canonical {
            return v.to_vec();
        }
        let n = self.n();
        (0..n)
            .map(|c| (0..n).map(|r| self.basis[(r, c)] * v[r]).sum())
            .collect()
    }

    /// `R M Rᵀ` for a canonical-frame operator `M`.
    pub fn conjugate(&self, m: &Mat<T>) -> Mat<T> {
        if self.canonical {
            return m.clone();
        }
        self.basis.matmul(m).matmul(&self.basis.transpose())
    }

    /// Orthogonal projection onto `T`.
    pub fn tangent_projection(&self) -> Mat<T> {
        let n = self.n();
        let d = Mat::from_fn(n, n, |i, j| if i == j && i < self.k { T::one() } else { T::zero() });
        self.conjugate(&d)
    }
}

fn orthogonalize<T: Real>(v: &[T], basis: &[Vec<T>]) -> Option<Vec<T>> {
    let mut w = v.to_vec();
    // Two passes of modified Gram–Schmidt.
    for _ in 0..2 {
        for b in basis {
            let c = linalg::dot(&w, b);
            for (x, &y) in w.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
    if w.iter().all(|x| x.is_finite()) {
        Some(w)
    } else {
        None
    }
}

/// Projections onto the base plane `T` and the graph tangent plane `S`,
/// together with their complements.
#[derive(Clone, Debug)]
pub struct ProjectionPair<T> {
    pub t: Mat<T>,
    pub t_perp: Mat<T>,
    pub s: Mat<T>,
    pub s_perp: Mat<T>,
}

/// Canonical-frame projection onto `S = Im(T + ∇f)`.
///
/// With tangent vectors `τ_i = e_i + Σ_a P(a,i) e_{k+a}` one has
/// `S = Σ_{ij} τ_i g^{ij} τ_jᵀ`. Evaluated through the singular vectors of
/// `P`, `w_j = (v_j, P v_j) / (1 + σ_j²)^{1/2}` is an orthonormal basis of
/// `S`, so `S = Σ_j w_j w_jᵀ` is idempotent to rounding even for steep
/// graphs.
pub fn canonical_tangent_projection<T: Real>(p: &GradientMatrix<T>) -> Mat<T> {
    let (k, m, n) = (p.k(), p.codim(), p.ambient_dim());
    let (sigma, b, v) = linalg::jacobi_svd(p.as_slice(), m, k);
    let mut w = Mat::zeros(n, k);
    for j in 0..k {
        let nu = (T::one() + sigma[j] * sigma[j]).sqrt();
        for i in 0..k {
            w[(i, j)] = v[i * k + j] / nu;
        }
        for a in 0..m {
            w[(k + a, j)] = b[a * k + j] / nu;
        }
    }
    let mut s = Mat::zeros(n, n);
    for r in 0..n {
        for c in r..n {
            let x: T = (0..k).map(|j| w[(r, j)] * w[(c, j)]).sum();
            s[(r, c)] = x;
            s[(c, r)] = x;
        }
    }
    s
}

pub fn graph_tangent_plane<T: Real>(frame: &Frame<T>, p: &GradientMatrix<T>) -> Result<ProjectionPair<T>> {
    if p.k() != frame.k() || p.ambient_dim() != frame.n() {
        return Err(Error::ShapeMismatch(format!(
            "gradient is {}×{}, frame has k={}, n={}",
            p.codim(),
            p.k(),
            frame.k(),
            frame.n()
        )));
    }
    let n = frame.n();
    let s = frame.conjugate(&canonical_tangent_projection(p));
    let t = frame.tangent_projection();
    let id = Mat::identity(n);
    Ok(ProjectionPair {
        t_perp: id.sub(&t),
        s_perp: id.sub(&s),
        t,
        s,
    })
}

/// `u^⊥ = (I − S) u`.
pub fn project_normal<T: Real>(u: &[T], pair: &ProjectionPair<T>) -> Vec<T> {
    pair.s_perp.mul_vec(u)
}

/// Mean curvature vector of the graph from `P = ∇f` and `Q = ∇²f`, in the
/// canonical frame.
pub fn mean_curvature_of_graph<T: Real>(p: &GradientMatrix<T>, q: &HessianTensor<T>) -> Vec<T> {
    let metric = induced_metric(p);
    mean_curvature_with_metric(p, q, &metric.g_inv)
}

/// Same as [`mean_curvature_of_graph`] with a precomputed `g^{ij}`.
///
/// The divergence-form components
///
/// ```text
/// h^j     = (1/√g) ∂_i(√g g^{ij})
/// h^{k+a} = (1/√g) ∂_i(√g g^{ij} ∂_j f^a)
/// ```
///
/// are expanded with the chain rule so that only `P` and `Q` enter:
///
/// ```text
/// ∂_i g_{lm}  = Σ_a Q(a,i,l) P(a,m) + P(a,l) Q(a,i,m)
/// ∂_i g^{ij}  = −g^{il} (∂_i g_{lm}) g^{mj}
/// ∂_i √g / √g = ½ g^{lm} ∂_i g_{lm}
/// h^j         = Σ_i ½ (g^{lm} ∂_i g_{lm}) g^{ij} + ∂_i g^{ij}
/// h^{k+a}     = h^j P(a,j) + g^{ij} Q(a,i,j)
/// ```
pub fn mean_curvature_with_metric<T: Real>(p: &GradientMatrix<T>, q: &HessianTensor<T>, g_inv: &Mat<T>) -> Vec<T> {
    let (k, m) = (p.k(), p.codim());
    let mut h = vec![T::zero(); k + m];
    let half = T::lit(0.5);
    let mut dg = vec![T::zero(); k * k];
    for i in 0..k {
        for l in 0..k {
            for mm in l..k {
                let mut s = T::zero();
                for a in 0..m {
                    s += q.get(a, i, l) * p.get(a, mm) + p.get(a, l) * q.get(a, i, mm);
                }
                dg[l * k + mm] = s;
                dg[mm * k + l] = s;
            }
        }
        let mut log_sqrt_g = T::zero();
        for l in 0..k {
            for mm in 0..k {
                log_sqrt_g += g_inv[(l, mm)] * dg[l * k + mm];
            }
        }
        log_sqrt_g *= half;
        for j in 0..k {
            let mut d_ginv = T::zero();
            for l in 0..k {
                for mm in 0..k {
                    d_ginv -= g_inv[(i, l)] * dg[l * k + mm] * g_inv[(mm, j)];
                }
            }
            h[j] += log_sqrt_g * g_inv[(i, j)] + d_ginv;
        }
    }
    for a in 0..m {
        let mut s = T::zero();
        for (j, &hj) in h[..k].iter().enumerate() {
            s += hj * p.get(a, j);
        }
        for i in 0..k {
            for j in 0..k {
                s += g_inv[(i, j)] * q.get(a, i, j);
            }
        }
        h[k + a] = s;
    }
    h
}

/// Mean curvature in a general frame: `P`, `Q` are frame coordinates, the
/// result is an ambient vector.
pub fn mean_curvature_in_frame<T: Real>(frame: &Frame<T>, p: &GradientMatrix<T>, q: &HessianTensor<T>) -> Vec<T> {
    frame.to_ambient(&mean_curvature_of_graph(p, q))
}

/// Coefficients `C[i][a][j][b] = ∂_{P_j^b}(√g g^{il} P_l^a)` of the
/// linearized minimal-surface system, flattened as
/// `((i * codim + a) * k + j) * codim + b`.
///
/// Differentiating the closed forms of `g_{ij} = δ_ij + P_iᵀP_j`:
///
/// ```text
/// ∂g_{lm}/∂P_j^b = δ_lj P_m^b + P_l^b δ_mj
/// ∂√g/∂P_j^b     = √g W(b,j),           W(a,i) = g^{il} P_l^a
/// ∂g^{il}/∂P_j^b = −g^{ij} W(b,l) − W(b,i) g^{jl}
/// ```
///
/// so with `N(b,a) = W(b,l) P_l^a`,
///
/// ```text
/// C[i][a][j][b] = √g ( W(b,j) W(a,i) − g^{ij} N(b,a) − W(b,i) W(a,j) + g^{ij} δ_ab ).
/// ```
pub fn legendre_hadamard_tensor<T: Real>(p: &GradientMatrix<T>) -> Vec<T> {
    let (k, m) = (p.k(), p.codim());
    let metric = induced_metric(p);
    let gi = &metric.g_inv;
    let w = |a: usize, i: usize| -> T { (0..k).map(|l| gi[(i, l)] * p.get(a, l)).sum() };
    let wm: Vec<T> = (0..m)
        .flat_map(|a| (0..k).map(move |i| (a, i)))
        .map(|(a, i)| w(a, i))
        .collect();
    let wv = |a: usize, i: usize| wm[a * k + i];
    let nm = |b: usize, a: usize| -> T { (0..k).map(|l| wv(b, l) * p.get(a, l)).sum() };
    let mut c = vec![T::zero(); k * m * k * m];
    for i in 0..k {
        for a in 0..m {
            for j in 0..k {
                for b in 0..m {
                    let delta = if a == b { T::one() } else { T::zero() };
                    let v = wv(b, j) * wv(a, i) - gi[(i, j)] * nm(b, a) - wv(b, i) * wv(a, j) + gi[(i, j)] * delta;
                    c[((i * m + a) * k + j) * m + b] = metric.sqrt_g * v;
                }
            }
        }
    }
    c
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendreHadamard<T> {
    /// `Σ C[i][a][j][b] ξ_i ξ_j η^a η^b`.
    pub lhs: T,
    /// `√g |ξ|² |η|² / (1 + |P|²)²`.
    pub rhs: T,
}

impl<T: Real> LegendreHadamard<T> {
    /// `lhs ≥ rhs − 1e−12·max(1, |lhs|)`.
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs - T::lit(1e-12) * T::one().max(self.lhs.abs())
    }
}

pub fn legendre_hadamard<T: Real>(p: &GradientMatrix<T>, xi: &[T], eta: &[T]) -> Result<LegendreHadamard<T>> {
    let (k, m) = (p.k(), p.codim());
    if xi.len() != k || eta.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "xi has length {}, eta {}; expected {k} and {m}",
            xi.len(),
            eta.len()
        )));
    }
    let c = legendre_hadamard_tensor(p);
    let mut lhs = T::zero();
    for i in 0..k {
        for a in 0..m {
            for j in 0..k {
                for b in 0..m {
                    lhs += c[((i * m + a) * k + j) * m + b] * xi[i] * xi[j] * eta[a] * eta[b];
                }
            }
        }
    }
    let sqrt_g = induced_metric(p).sqrt_g;
    let denom = T::one() + p.frobenius_sq();
    let rhs = sqrt_g * linalg::dot(xi, xi) * linalg::dot(eta, eta) / (denom * denom);
    Ok(LegendreHadamard { lhs, rhs })
}
