//! Developing maps of the photon and Einstein structures, membership in the
//! domains of discontinuity, and the binary-form model of R^{2,3}.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{q_eval, qdot, QForm, QVector, Subspace};
use crate::error::{invalid, Error, Result};
use crate::reps::{congruence4, poly_mul, qn_matrix};
use crate::spaces::{geodesic_endpoint, PointEin, PointH, Photon};
use crate::spectrum::eigenvalues;
use crate::surface::{gauss_maps, FundamentalMesh};
use crate::reps::Representation;

/// Coefficients of `X^4, X^3 Y, X^2 Y^2, X Y^3, Y^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartic {
    pub coeffs: [f64; 5],
}

/// Coefficients of `X^3, X^2 Y, X Y^2, Y^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cubic {
    pub coeffs: [f64; 4],
}

/// A linear form `a X + b Y`, stored as `[a, b]`.
pub type Linear = [f64; 2];

impl Quartic {
    pub fn new(coeffs: [f64; 5]) -> Self {
        Quartic { coeffs }
    }

    /// Coordinates in R^{2,3}: `T4^{-1} P`.
    pub fn to_vector(&self) -> QVector {
        crate::reps::congruence_inverse(congruence4(), 4) * DVector::from_column_slice(&self.coeffs)
    }

    /// The quartic with `-Q4(P, P) = q(v, v)`.
    pub fn from_vector(v: &QVector) -> Result<Self> {
        if v.len() != 5 {
            return Err(Error::DimensionMismatch(5, v.len()));
        }
        let p = congruence4() * v;
        Ok(Quartic { coeffs: [p[0], p[1], p[2], p[3], p[4]] })
    }

    fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Inside,
    OnExcludedSet,
    Uncertain,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Inside => "inside",
            Status::OnExcludedSet => "on_excluded_set",
            Status::Uncertain => "uncertain",
        })
    }
}

/// Outcome of a membership test: `residual` is the distance to the excluded
/// set, `witness` the index of the boundary sample attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainVerdict {
    pub status: Status,
    pub witness: Option<usize>,
    pub residual: f64,
}

impl DomainVerdict {
    fn banded(residual: f64, witness: Option<usize>, tol: f64) -> Self {
        let status = if residual < tol {
            Status::OnExcludedSet
        } else if residual > 10.0 * tol {
            Status::Inside
        } else {
            Status::Uncertain
        };
        DomainVerdict { status, witness, residual }
    }
}

/// `object id, status, residual, witness` rows.
pub fn verdicts_csv(rows: &[(String, DomainVerdict)]) -> String {
    let mut s = String::from("id,status,residual,witness\n");
    for (id, v) in rows {
        let w = v.witness.map(|w| w.to_string()).unwrap_or_default();
        s.push_str(&format!("{id},{},{:e},{w}\n", v.status, v.residual));
    }
    s
}

// q-orthogonal eigenframe of the q-Gram of `vs`: (eigenvalue, q-unit vector)
// sorted by decreasing eigenvalue, dropping directions below `tol`.
fn gram_frame(vs: &[QVector], tol: f64) -> Vec<(f64, QVector)> {
    let k = vs.len();
    let g = DMatrix::from_fn(k, k, |i, j| qdot(vs[i].as_slice(), vs[j].as_slice()));
    let scale = g.amax().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(g);
    let mut out: Vec<(f64, QVector)> = (0..k)
        .filter(|&i| eig.eigenvalues[i].abs() > tol * scale)
        .map(|i| {
            let c = eig.eigenvectors.column(i);
            let v = vs.iter().zip(c.iter()).fold(DVector::zeros(vs[0].len()), |acc, (b, ci)| acc + b * *ci);
            let l = eig.eigenvalues[i];
            (l, v / l.abs().sqrt())
        })
        .collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

fn project_off(v: &QVector, frame: &[(f64, QVector)]) -> QVector {
    let mut r = v.clone();
    for (l, b) in frame {
        // b is q-unit with sign of l
        let c = qdot(r.as_slice(), b.as_slice()) * l.signum();
        r -= b * c;
    }
    r
}

/// q-orthonormal splitting `x^perp = E (+) F` into a positive plane and a
/// negative n-space.
pub fn perp_split(x: &PointH) -> Result<(Vec<QVector>, Vec<QVector>)> {
    let d = x.dim();
    let xf = [(-1.0, x.rep.clone())];
    let proj: Vec<QVector> = (0..d).map(|k| project_off(&QForm::new(d - 3).e(k + 1), &xf)).collect();
    let fr = gram_frame(&proj, 1e-9);
    let e: Vec<QVector> = fr.iter().filter(|f| f.0 > 0.0).map(|f| f.1.clone()).collect();
    let f: Vec<QVector> = fr.iter().filter(|f| f.0 < 0.0).map(|f| f.1.clone()).collect();
    if e.len() != 2 || f.len() != d - 3 {
        return Err(Error::Numerical(format!("x^perp split as ({}, {})", e.len(), f.len())));
    }
    Ok((e, f))
}

const FIBER_SEED: u64 = 0x9b0f;

/// `k` photons inside `x^perp`, graphs of anti-isometries `E -> F`.
///
/// Orthonormal pairs in F come from Gram-Schmidt on seeded Gaussian vectors.
/// For n = 2 the orientation of the graph alternates so both components of
/// the fiber are sampled.
pub fn photon_fiber(x: &PointH, k: usize) -> Result<Vec<Photon>> {
    photon_fiber_seeded(x, k, FIBER_SEED)
}

pub fn photon_fiber_seeded(x: &PointH, k: usize, seed: u64) -> Result<Vec<Photon>> {
    let (e, f) = perp_split(x)?;
    let n = f.len();
    let es = Subspace { dim: 2, basis: e.clone() };
    let fs = Subspace { dim: n, basis: f.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b) = loop {
            let a: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let b: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            let a = a.normalize();
            let b = &b - &a * a.dot(&b);
            if b.norm() > 1e-3 {
                break (a, b.normalize());
            }
        };
        let b = if n == 2 && (a[0] * b[1] - a[1] * b[0] > 0.0) != (i % 2 == 0) { -b } else { b };
        let lift = |c: &DVector<f64>| f.iter().zip(c.iter()).fold(DVector::zeros(x.dim()), |acc, (fb, ci)| acc + fb * *ci);
        let phi = DMatrix::from_columns(&[lift(&a), lift(&b)]);
        out.push(crate::spaces::photon_from_graph(&es, &fs, &phi, 1e-9)?);
    }
    Ok(out)
}

/// Orientation sign of the anti-isometry whose graph is `v`, relative to the
/// frames of [`perp_split`]. Meaningful for n = 2.
pub fn fiber_orientation(x: &PointH, v: &Photon) -> Result<i8> {
    let (e, f) = perp_split(x)?;
    if f.len() != 2 {
        return invalid("orientation classes are defined for n = 2");
    }
    let b = &v.plane.basis;
    let a = Matrix2::from_fn(|i, j| qdot(b[j].as_slice(), e[i].as_slice()));
    let c = Matrix2::from_fn(|i, j| -qdot(b[j].as_slice(), f[i].as_slice()));
    let ai = a.try_inverse().ok_or_else(|| Error::Numerical("photon meets F".into()))?;
    Ok(if (c * ai).determinant() > 0.0 { 1 } else { -1 })
}

/// Whether `v` meets the boundary curve, sampled by `boundary_samples`.
pub fn gw2_membership(v: &Photon, boundary_samples: &[PointEin], tol: f64) -> Result<DomainVerdict> {
    if boundary_samples.is_empty() {
        return invalid("no boundary samples");
    }
    let (i, r) = boundary_samples
        .par_iter()
        .enumerate()
        .map(|(i, xi)| (i, v.incidence_residual(&xi.rep)))
        .reduce(|| (usize::MAX, f64::INFINITY), |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
    Ok(DomainVerdict::banded(r, Some(i), tol))
}

/// A photon through the isotropic line `xi`.
pub fn planted_photon(xi: &PointEin) -> Result<Photon> {
    let d = xi.rep.len();
    let x = &xi.rep;
    // isotropic partner with q(x, y) = 1
    let t = QForm::new(d - 3).matrix() * x;
    let c = qdot(t.as_slice(), x.as_slice());
    let y = (&t - x * (q_eval(&t) / (2.0 * c))) / c;
    let proj: Vec<QVector> = (0..d)
        .map(|k| {
            let e = QForm::new(d - 3).e(k + 1);
            let (ax, ay) = (qdot(e.as_slice(), y.as_slice()), qdot(e.as_slice(), x.as_slice()));
            e - x * ax - &y * ay
        })
        .collect();
    let fr = gram_frame(&proj, 1e-9);
    let (first, last) = (fr.first().expect("nonempty"), fr.last().expect("nonempty"));
    if !(first.0 > 0.0 && last.0 < 0.0) {
        return Err(Error::Numerical("xi^perp / xi is not of signature (1, n)".into()));
    }
    Photon::new(x.clone(), &first.1 + &last.1, 1e-9)
}

/// Developing map of the Einstein structure: the endpoint `[x + w]` of the
/// geodesic from a surface point `x` along its unit tangent `w`.
///
/// `plane` is the tangent plane at `x`, given by a q-orthonormal pair.
pub fn dev_einstein(x: &PointH, plane: &[QVector], w: &QVector, tol: f64) -> Result<PointEin> {
    let mut r = w.clone();
    for t in plane {
        r -= t * qdot(w.as_slice(), t.as_slice());
    }
    if r.amax() > tol.max(1e-12) * (1.0 + w.amax()) {
        return invalid(format!("direction is not tangent to the surface (residual {:e})", r.amax()));
    }
    geodesic_endpoint(x, w, tol)
}

/// `(vertex class, point, tangent)` followed by `dev_einstein`, for `count`
/// seeded unit tangents over the classes of the mesh.
pub fn dev_einstein_samples(mesh: &FundamentalMesh, rep: &Representation, count: usize, seed: u64) -> Result<Vec<(usize, PointEin)>> {
    let (frames, _) = gauss_maps(mesh, rep)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let a = i % frames.len();
            let fr = &frames[a];
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let w = &fr.F1.basis[0] * t.cos() + &fr.F1.basis[1] * t.sin();
            Ok((a, dev_einstein(&fr.F0, &fr.F1.basis, &w, 1e-8)?))
        })
        .collect()
}

/// Smallest projective distance among `pts`.
pub fn min_separation(pts: &[PointEin]) -> f64 {
    (0..pts.len())
        .into_par_iter()
        .map(|i| pts[i + 1..].iter().map(|p| crate::spaces::proj_dist(&pts[i].rep, &p.rep)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

/// The invariant pairing `P^T M4 R`.
pub fn q4_pair(p: &Quartic, r: &Quartic) -> f64 {
    let m = qn_matrix(4).expect("degree 4");
    let (a, b) = (DVector::from_column_slice(&p.coeffs), DVector::from_column_slice(&r.coeffs));
    a.dot(&(m * b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStructure {
    TripleOrQuadrupleRoot,
    PosDefQuadraticFactor,
    Other,
}

/// Classical invariants `I`, `J` of the quartic scaled to unit coefficient
/// norm. Both vanish exactly when some root has multiplicity at least 3;
/// near that set `J` is linear in the coefficients, so it is resolved down
/// to rounding. `I` is `Q4(P, P) / 2`.
pub fn quartic_invariants(p: &Quartic) -> (f64, f64) {
    let s = p.norm();
    let c = p.coeffs.map(|c| c / s);
    let (a, b, cc, d, e) = (c[0], c[1] / 4.0, c[2] / 6.0, c[3] / 4.0, c[4]);
    let i = a * e - 4.0 * b * d + 3.0 * cc * cc;
    let j = a * cc * e + 2.0 * b * cc * d - a * d * d - e * b * b - cc * cc * cc;
    (i, j)
}

// Roots of the quartic in a rotated chart `Y/X`, with the rotation chosen so
// that the leading coefficient is as large as possible and no root sits at
// infinity.
fn chart_roots(p: &Quartic) -> Result<Vec<nalgebra::Complex<f64>>> {
    let mut best: Option<(f64, [f64; 5])> = None;
    for j in 0..7 {
        let t = j as f64 * std::f64::consts::PI / 7.0;
        let r = Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos());
        let s = crate::reps::sym_power(&r, 4)? * DVector::from_column_slice(&p.coeffs);
        let lead = s[4].abs() / s.norm();
        if best.as_ref().is_none_or(|b| lead > b.0) {
            best = Some((lead, [s[0], s[1], s[2], s[3], s[4]]));
        }
    }
    let c = best.expect("seven charts").1;
    // monic companion matrix of sum c_k t^k
    let mut m = DMatrix::zeros(4, 4);
    for k in 1..4 {
        m[(k, k - 1)] = 1.0;
    }
    for k in 0..4 {
        m[(k, 3)] = -c[k] / c[4];
    }
    eigenvalues(&m).ok_or_else(|| Error::Numerical("companion eigenvalues did not converge".into()))
}

/// Root structure of a nonzero quartic.
///
/// Triple roots are detected by `I = J = 0` at `tol`. A non-real root pair at
/// relative size `1e-7` means a positive definite quadratic factor.
pub fn quartic_root_structure(p: &Quartic, tol: f64) -> Result<RootStructure> {
    if !(p.norm() > 0.0) {
        return invalid("zero polynomial");
    }
    let (i, j) = quartic_invariants(p);
    if i.abs() < tol && j.abs() < tol {
        return Ok(RootStructure::TripleOrQuadrupleRoot);
    }
    let roots = chart_roots(p)?;
    let complex = roots.iter().any(|z| z.im.abs() > 1e-7 * (1.0 + z.norm()));
    Ok(if complex { RootStructure::PosDefQuadraticFactor } else { RootStructure::Other })
}

/// Membership of a point of `Q4 = 0` in the domain of the Fuchsian-locus
/// Einstein structure.
///
/// The residual is `max(|I|, |J|)` at unit coefficient norm, of the order of
/// the coefficient distance to the triple-root set.
pub fn omega1_membership_fuchsian(p: &Quartic, tol: f64) -> Result<DomainVerdict> {
    let s = p.norm();
    if !(s > 0.0) {
        return invalid("zero polynomial");
    }
    let q = q4_pair(p, p) / (s * s);
    if q.abs() >= tol {
        return invalid(format!("Q4(P, P) = {q:e} is not zero"));
    }
    let (i, j) = quartic_invariants(p);
    let r = i.abs().max(j.abs());
    let v = DomainVerdict::banded(r, None, tol);
    if v.status == Status::Inside && quartic_root_structure(p, tol)? == RootStructure::Other {
        return Err(Error::Invariant("isotropic quartic with four simple real roots".into()));
    }
    Ok(v)
}

/// `[L1 L2 L3]`, the cubic-products developing map.
pub fn dev_cubic_products(l1: &Linear, l2: &Linear, l3: &Linear) -> Result<Cubic> {
    let ls = [l1, l2, l3];
    for a in 0..3 {
        for b in a + 1..3 {
            let (x, y) = (ls[a], ls[b]);
            let det = x[0] * y[1] - x[1] * y[0];
            if det.abs() <= 1e-12 * (x[0].hypot(x[1]) * y[0].hypot(y[1])) {
                return invalid(format!("linear forms {a} and {b} are proportional"));
            }
        }
    }
    let p = poly_mul(&poly_mul(l1, l2), l3);
    Ok(Cubic { coeffs: [p[0], p[1], p[2], p[3]] })
}
