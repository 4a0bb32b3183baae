//! Linear algebra over R^{2,n+1}.
//!
//! The form is diagonal, `q(x) = x1^2 + x2^2 - x3^2 - ... - x_{n+3}^2`, so the
//! ambient dimension fixes `n`. Vectors are plain `DVector<f64>`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// A vector of R^{2,n+1}.
pub type QVector = DVector<f64>;

/// Default tolerance for membership and signature tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// The quadratic form of signature (2, n+1) on R^{n+3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QForm {
    pub n: usize,
}

impl QForm {
    pub fn new(n: usize) -> Self {
        QForm { n }
    }

    /// Form for ambient dimension `d = n + 3`.
    pub fn for_dim(d: usize) -> Result<Self> {
        if d < 3 {
            return invalid(format!("ambient dimension {d} < 3"));
        }
        Ok(QForm { n: d - 3 })
    }

    pub fn dim(&self) -> usize {
        self.n + 3
    }

    /// The diagonal matrix Q.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_fn(self.dim(), |i, _| sign(i)))
    }

    /// Standard basis vector e_k, 1-based as in the usual notation.
    pub fn e(&self, k: usize) -> QVector {
        let mut v = DVector::zeros(self.dim());
        v[k - 1] = 1.0;
        v
    }
}

#[inline]
pub(crate) fn sign(i: usize) -> f64 {
    if i < 2 {
        1.0
    } else {
        -1.0
    }
}

/// Unchecked bilinear form on slices of equal length.
#[inline]
pub fn qdot(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut s = u[0] * v[0] + u[1] * v[1];
    for i in 2..u.len() {
        s -= u[i] * v[i];
    }
    s
}

/// q(u).
pub fn q_eval(u: &QVector) -> f64 {
    qdot(u.as_slice(), u.as_slice())
}

/// Polarized form q(u, v).
pub fn q_pair(u: &QVector, v: &QVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    Ok(qdot(u.as_slice(), v.as_slice()))
}

/// Gram matrix `G_ij = q(b_i, b_j)`.
pub fn gram(basis: &[QVector]) -> DMatrix<f64> {
    let k = basis.len();
    DMatrix::from_fn(k, k, |i, j| qdot(basis[i].as_slice(), basis[j].as_slice()))
}

/// Inverse through the q-adjoint, `M^{-1} = Q M^T Q`. Exact for q-orthogonal M.
pub fn q_adjoint(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    DMatrix::from_fn(d, d, |i, j| sign(i) * sign(j) * m[(j, i)])
}

/// Counts of positive, null and negative directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Signature {
    pub pos: usize,
    pub null: usize,
    pub neg: usize,
}

impl Signature {
    pub fn new(pos: usize, null: usize, neg: usize) -> Self {
        Signature { pos, null, neg }
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.pos, self.null, self.neg)
    }
}

/// Linear subspace given by an independent basis.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Subspace {
    pub basis: Vec<QVector>,
    pub dim: usize,
}

impl Subspace {
    /// Checks numerical independence at `tol` (relative to the largest singular value).
    pub fn new(basis: Vec<QVector>, tol: f64) -> Result<Self> {
        let dim = basis.len();
        if dim > 0 {
            let d = basis[0].len();
            if let Some(b) = basis.iter().find(|b| b.len() != d) {
                return Err(Error::DimensionMismatch(d, b.len()));
            }
            let rank = numerical_rank(&basis, tol);
            if rank < dim {
                return Err(Error::DegenerateBasis { rank, dim });
            }
        }
        Ok(Subspace { basis, dim })
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.first().map_or(0, |b| b.len())
    }

    /// Basis as the columns of a matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    /// Euclidean-orthonormal basis of the same span.
    pub fn orthonormal(&self) -> Vec<QVector> {
        euclid_orthonormal(&self.basis)
    }

    /// Euclidean distance from `v` to the span.
    pub fn euclid_residual(&self, v: &QVector) -> f64 {
        let mut r = v.clone();
        for b in self.orthonormal() {
            let c = b.dot(&r);
            r -= c * b;
        }
        r.norm()
    }

    /// Whether `v` lies in the span at relative tolerance `tol`.
    pub fn contains(&self, v: &QVector, tol: f64) -> bool {
        self.euclid_residual(v) <= tol * v.norm().max(1e-300)
    }
}

pub(crate) fn numerical_rank(basis: &[QVector], tol: f64) -> usize {
    if basis.is_empty() {
        return 0;
    }
    let m = DMatrix::from_columns(basis);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Modified Gram-Schmidt in the Euclidean inner product. Drops dependent vectors.
pub(crate) fn euclid_orthonormal(vs: &[QVector]) -> Vec<QVector> {
    let mut out: Vec<QVector> = Vec::with_capacity(vs.len());
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &out {
                let c = b.dot(&w);
                w -= c * b;
            }
        }
        let nrm = w.norm();
        if nrm > 1e-12 * v.norm().max(1e-300) {
            out.push(w / nrm);
        }
    }
    out
}

/// Signature of q restricted to `s`.
///
/// The basis is first made Euclidean-orthonormal so `tol` is scale free.
pub fn signature(s: &Subspace, tol: f64) -> Result<Signature> {
    let ob = s.orthonormal();
    if ob.len() < s.dim {
        return Err(Error::DegenerateBasis { rank: ob.len(), dim: s.dim });
    }
    Ok(gram_signature(&gram(&ob), tol))
}

/// Sign counts of the eigenvalues of a symmetric matrix.
pub fn gram_signature(g: &DMatrix<f64>, tol: f64) -> Signature {
    if g.nrows() == 0 {
        return Signature::new(0, 0, 0);
    }
    let ev = g.clone().symmetric_eigenvalues();
    let mut sig = Signature::new(0, 0, 0);
    for &l in ev.iter() {
        if l > tol {
            sig.pos += 1;
        } else if l < -tol {
            sig.neg += 1;
        } else {
            sig.null += 1;
        }
    }
    sig
}

/// q-orthogonal complement `{v : q(v, s) = 0 for all s in S}`.
pub fn orth_complement(s: &Subspace, tol: f64) -> Result<Subspace> {
    let d = s.ambient_dim();
    let ob = s.orthonormal();
    if ob.len() < s.dim {
        return Err(Error::DegenerateBasis { rank: ob.len(), dim: s.dim });
    }
    // Rows of B^T Q are orthonormal, so Q B B^T Q has eigenvalues exactly 0 or 1.
    let qb = DMatrix::from_columns(
        &ob.iter()
            .map(|b| DVector::from_fn(d, |i, _| sign(i) * b[i]))
            .collect::<Vec<_>>(),
    );
    let m = &qb * qb.transpose();
    let eig = m.symmetric_eigen();
    let basis: Vec<QVector> = (0..d)
        .filter(|&i| eig.eigenvalues[i] < 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    for c in &basis {
        for b in &ob {
            if qdot(c.as_slice(), b.as_slice()).abs() > tol.max(1e-12) {
                return Err(Error::Numerical("orthogonal complement lost orthogonality".into()));
            }
        }
    }
    Ok(Subspace { dim: basis.len(), basis })
}

/// Classification returned by [`is_in_so0`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Yes,
    InONotSO0,
    No,
}

/// Residual `||M^T Q M - Q||_inf`, scaled by `max(1, ||M||_inf^2)`.
pub fn q_orth_residual(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let qm = DMatrix::from_fn(d, d, |i, j| sign(i) * m[(i, j)]);
    let g = m.transpose() * qm;
    let mut r: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let t = if i == j { sign(i) } else { 0.0 };
            r = r.max((g[(i, j)] - t).abs());
        }
    }
    let scale = m.abs().row_sum().max().max(1.0);
    r / (scale * scale)
}

/// Membership in the identity component SO0(2, n+1).
///
/// Tests q-orthogonality and `det = 1` at `tol`, then the sign of the
/// determinant of the top-left 2x2 block, which is the projection of M(E)
/// onto E for E = span(e1, e2).
pub fn is_in_so0(m: &DMatrix<f64>, tol: f64) -> Membership {
    let d = m.nrows();
    if d != m.ncols() || d < 3 || m.iter().any(|x| !x.is_finite()) {
        return Membership::No;
    }
    if q_orth_residual(m) > tol {
        return Membership::No;
    }
    let det = m.determinant();
    let block = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if (det - 1.0).abs() <= tol.sqrt().max(tol) && block > 0.0 {
        Membership::Yes
    } else {
        Membership::InONotSO0
    }
}
