//! H^{2,n}, its boundary Ein^{1,n}, photons and the warped product chart.

use nalgebra::{DMatrix, DVector};

use crate::bilinear::{self, orth_complement, q_eval, qdot, signature, QVector, Signature, Subspace};
use crate::error::{invalid, Error, Result};

/// A point of H^{2,n}, stored as a lift with q = -1.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointH {
    pub rep: QVector,
}

impl PointH {
    /// Accepts `rep` when `|q(rep) + 1| < tol`.
    pub fn new(rep: QVector, tol: f64) -> Result<Self> {
        let q = q_eval(&rep);
        if !q.is_finite() || (q + 1.0).abs() >= tol {
            return invalid(format!("q(rep) = {q}, expected -1"));
        }
        Ok(PointH { rep })
    }

    /// Rescales a timelike vector onto the quadric.
    pub fn normalize(v: QVector) -> Result<Self> {
        let q = q_eval(&v);
        if !(q < 0.0) {
            return invalid(format!("vector is not timelike (q = {q})"));
        }
        Ok(PointH { rep: v / (-q).sqrt() })
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }
}

/// An isotropic line, stored with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointEin {
    pub rep: QVector,
}

impl PointEin {
    /// Normalizes `v` and checks `|q| < tol` afterwards.
    pub fn new(v: QVector, tol: f64) -> Result<Self> {
        let nrm = v.norm();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return invalid("zero or non-finite isotropic vector");
        }
        let rep = v / nrm;
        let q = q_eval(&rep);
        if q.abs() >= tol {
            return invalid(format!("vector is not isotropic (q = {q})"));
        }
        Ok(PointEin { rep })
    }

    /// Representative with the largest-magnitude coordinate positive.
    pub fn canonical(&self) -> QVector {
        canonical_sign(&self.rep)
    }
}

pub(crate) fn canonical_sign(v: &QVector) -> QVector {
    let i = v.iamax();
    if v[i] < 0.0 {
        -v
    } else {
        v.clone()
    }
}

/// Distance between projective points: min over signs of the Euclidean distance
/// of unit representatives.
pub fn proj_dist(a: &QVector, b: &QVector) -> f64 {
    let a = a / a.norm();
    let b = b / b.norm();
    (&a - &b).norm().min((&a + &b).norm())
}

/// A totally isotropic 2-plane.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Photon {
    pub plane: Subspace,
}

impl Photon {
    /// Checks isotropy of the span at `tol` and stores the canonical basis.
    pub fn new(a: QVector, b: QVector, tol: f64) -> Result<Self> {
        let s = Subspace::new(vec![a, b], 1e-10)?;
        let ob = s.orthonormal();
        let g = bilinear::gram(&ob);
        if g.amax() >= tol {
            return invalid(format!("plane is not totally isotropic (|Gram| = {:e})", g.amax()));
        }
        Ok(Photon { plane: canonical_plane(&ob) })
    }

    /// Euclidean distance of the unit vector along `v` from the plane.
    pub fn incidence_residual(&self, v: &QVector) -> f64 {
        self.plane.euclid_residual(&(v / v.norm()))
    }
}

/// Reduced column echelon form of a 2-plane basis; pivots are 1.
fn canonical_plane(ob: &[QVector]) -> Subspace {
    let d = ob[0].len();
    let mut m = DMatrix::from_columns(ob);
    let mut row = 0;
    for col in 0..2 {
        // pivot row: largest magnitude entry among remaining rows is not stable
        // under perturbation, so take the first row that is clearly nonzero.
        let scale = m.column(col).amax();
        while row < d && m[(row, col)].abs() <= 1e-8 * scale.max(m.amax()) {
            row += 1;
        }
        if row == d {
            break;
        }
        let p = m[(row, col)];
        for r in 0..d {
            m[(r, col)] /= p;
        }
        let other = 1 - col;
        let f = m[(row, other)];
        for r in 0..d {
            m[(r, other)] -= f * m[(r, col)];
        }
        row += 1;
    }
    let basis: Vec<QVector> = (0..2).map(|c| m.column(c).into_owned()).collect();
    Subspace { basis, dim: 2 }
}

/// Relative position of two points of H^{2,n}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChordClass {
    Spacelike(f64),
    Lightlike,
    Timelike,
    Equal,
}

/// Classifies the chord between two points; spacelike carries `arccosh |q(u,v)|`.
pub fn chord_classify(x: &PointH, y: &PointH, tol: f64) -> ChordClass {
    if proj_dist(&x.rep, &y.rep) <= tol {
        return ChordClass::Equal;
    }
    let a = qdot(x.rep.as_slice(), y.rep.as_slice()).abs();
    if a > 1.0 + tol {
        ChordClass::Spacelike(a.acosh())
    } else if a >= 1.0 - tol {
        ChordClass::Lightlike
    } else {
        ChordClass::Timelike
    }
}

fn check_direction(p: &PointH, w: &QVector, tol: f64) -> Result<()> {
    if w.len() != p.dim() {
        return Err(Error::DimensionMismatch(p.dim(), w.len()));
    }
    let qw = q_eval(w);
    let qpw = qdot(p.rep.as_slice(), w.as_slice());
    if (qw - 1.0).abs() > tol || qpw.abs() > tol {
        return invalid(format!("direction must be unit spacelike and orthogonal: q(w) = {qw}, q(p,w) = {qpw}"));
    }
    Ok(())
}

/// `cosh(t) p + sinh(t) w` for a unit spacelike `w` orthogonal to `p`.
pub fn geodesic_point(p: &PointH, w: &QVector, t: f64, tol: f64) -> Result<PointH> {
    check_direction(p, w, tol)?;
    Ok(PointH { rep: &p.rep * t.cosh() + w * t.sinh() })
}

/// Endpoint `[p + w]` of the spacelike half-geodesic.
pub fn geodesic_endpoint(p: &PointH, w: &QVector, tol: f64) -> Result<PointEin> {
    check_direction(p, w, tol)?;
    let v = &p.rep + w;
    let nrm = v.norm();
    Ok(PointEin { rep: v / nrm })
}

/// Warped product chart `F(u, v) = (2u, (1+|u|^2) v) / (1 - |u|^2)`.
///
/// `u` lies in the open unit disc; `v` is a unit vector of R^{n+1}.
pub fn warped_chart(u: [f64; 2], v: &DVector<f64>) -> Result<QVector> {
    let r2 = u[0] * u[0] + u[1] * u[1];
    if !(r2 < 1.0) {
        return invalid(format!("|u| = {} is not < 1", r2.sqrt()));
    }
    let vn = v.norm();
    if (vn - 1.0).abs() > 1e-9 {
        return invalid(format!("|v| = {vn}, expected 1"));
    }
    let den = 1.0 - r2;
    let s = (1.0 + r2) / den;
    let mut x = DVector::zeros(v.len() + 2);
    x[0] = 2.0 * u[0] / den;
    x[1] = 2.0 * u[1] / den;
    for i in 0..v.len() {
        x[i + 2] = s * v[i];
    }
    Ok(x)
}

/// Inverse of [`warped_chart`] on lifts with q = -1.
pub fn warped_chart_inv(x: &QVector) -> ([f64; 2], DVector<f64>) {
    let rest = x.rows(2, x.len() - 2).into_owned();
    let r = rest.norm();
    let u = [x[0] / (1.0 + r), x[1] / (1.0 + r)];
    (u, rest / r)
}

/// The warped metric at `(u, v)` in the coordinates `(du1, du2, dv)` with `dv`
/// expressed in an orthonormal basis `sphere_basis` of `v^perp`.
pub fn warped_metric(u: [f64; 2], sphere_dim: usize) -> DMatrix<f64> {
    let r2 = u[0] * u[0] + u[1] * u[1];
    let a = 4.0 / ((1.0 - r2) * (1.0 - r2));
    let b = ((1.0 + r2) / (1.0 - r2)).powi(2);
    let k = 2 + sphere_dim;
    DMatrix::from_fn(k, k, |i, j| {
        if i != j {
            0.0
        } else if i < 2 {
            a
        } else {
            -b
        }
    })
}

/// Pullback of q by the chart, by central differences with step `h`.
///
/// Coordinates are `(u1, u2, s_1..s_n)` where the sphere is parametrized by
/// `exp_v(sum s_k b_k)` for an orthonormal basis `b_k` of `v^perp`.
pub fn warped_pullback_fd(u: [f64; 2], v: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let m = v.len();
    // orthonormal basis of v^perp in R^m
    let mut cols: Vec<DVector<f64>> = vec![v.clone()];
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = 1.0;
        cols.push(e);
    }
    let ob = bilinear::euclid_orthonormal(&cols);
    let tangent: Vec<DVector<f64>> = ob[1..m].to_vec();
    let k = 2 + tangent.len();
    let point = |c: &[f64]| -> Result<QVector> {
        let mut t = DVector::zeros(m);
        for (i, b) in tangent.iter().enumerate() {
            t += b * c[2 + i];
        }
        let tn = t.norm();
        let vv = if tn == 0.0 { v.clone() } else { v * tn.cos() + &t * (tn.sin() / tn) };
        warped_chart([u[0] + c[0], u[1] + c[1]], &vv)
    };
    let mut derivs = Vec::with_capacity(k);
    for i in 0..k {
        let mut cp = vec![0.0; k];
        let mut cm = vec![0.0; k];
        cp[i] = h;
        cm[i] = -h;
        derivs.push((point(&cp)? - point(&cm)?) / (2.0 * h));
    }
    Ok(bilinear::gram(&derivs))
}

/// Whether three isotropic lines span a subspace of signature (2,0,1).
pub fn spacelike_triple(a: &PointEin, b: &PointEin, c: &PointEin, tol: f64) -> Result<bool> {
    for (x, y) in [(a, b), (b, c), (a, c)] {
        if proj_dist(&x.rep, &y.rep) <= tol {
            return invalid("coincident points in triple");
        }
    }
    let s = match Subspace::new(vec![a.rep.clone(), b.rep.clone(), c.rep.clone()], tol) {
        Ok(s) => s,
        Err(Error::DegenerateBasis { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    Ok(signature(&s, tol)? == Signature::new(2, 0, 1))
}

/// The photon `{x + phi(x) : x in E}`.
///
/// `e` must carry a q-orthonormal basis of a positive plane; column `i` of `phi`
/// is the image of basis vector `i`, which must lie in `f` and be orthonormal
/// for `-q`.
pub fn photon_from_graph(e: &Subspace, f: &Subspace, phi: &DMatrix<f64>, tol: f64) -> Result<Photon> {
    if e.dim != 2 || phi.ncols() != 2 {
        return invalid("E must be 2-dimensional and phi must have 2 columns");
    }
    let d = e.ambient_dim();
    if phi.nrows() != d || f.ambient_dim() != d {
        return Err(Error::DimensionMismatch(d, phi.nrows()));
    }
    let ge = bilinear::gram(&e.basis);
    if (ge - DMatrix::<f64>::identity(2, 2)).amax() > tol {
        return invalid("basis of E is not q-orthonormal");
    }
    let im: Vec<QVector> = (0..2).map(|i| phi.column(i).into_owned()).collect();
    for v in &im {
        if !f.contains(v, tol.max(1e-12)) {
            return invalid("phi does not take values in F");
        }
    }
    let gf = bilinear::gram(&im);
    if (gf + DMatrix::<f64>::identity(2, 2)).amax() > tol {
        return invalid("phi is not an anti-isometry E -> F");
    }
    Photon::new(&e.basis[0] + &im[0], &e.basis[1] + &im[1], tol.max(1e-9))
}

/// Whether `(x + y)^perp` has signature (1,0,n), i.e. the photon fibers over
/// `x` and `y` are disjoint.
pub fn fibers_disjoint(x: &PointH, y: &PointH, tol: f64) -> Result<bool> {
    if proj_dist(&x.rep, &y.rep) <= tol {
        return invalid("equal points");
    }
    let n = x.dim() - 3;
    let s = Subspace::new(vec![x.rep.clone(), y.rep.clone()], tol)?;
    let c = orth_complement(&s, tol)?;
    Ok(signature(&c, tol)? == Signature::new(1, 0, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::QForm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-9;

    fn ph(v: QVector) -> PointH {
        PointH::new(v, 1e-9).unwrap()
    }

    #[test]
    fn chord_examples() {
        let f = QForm::new(2);
        let x = ph(f.e(3));
        assert_eq!(chord_classify(&x, &x, TOL), ChordClass::Equal);
        let y = ph(f.e(3) * 1f64.cosh() + f.e(1) * 1f64.sinh());
        match chord_classify(&x, &y, TOL) {
            ChordClass::Spacelike(d) => assert!((d - 1.0).abs() < 1e-12),
            c => panic!("{c:?}"),
        }
        let z = ph(f.e(3) * 0.5f64.cos() + f.e(4) * 0.5f64.sin());
        assert_eq!(chord_classify(&x, &z, TOL), ChordClass::Timelike);
    }

    #[test]
    fn geodesic_examples() {
        let f = QForm::new(2);
        let p = ph(f.e(3));
        let w = f.e(1);
        assert_eq!(geodesic_point(&p, &w, 0.0, TOL).unwrap(), p);
        let g = geodesic_point(&p, &w, 2.5, TOL).unwrap();
        assert!((q_eval(&g.rep) + 1.0).abs() < 1e-12);
        match chord_classify(&p, &g, TOL) {
            ChordClass::Spacelike(d) => assert!((d - 2.5).abs() < 1e-12),
            c => panic!("{c:?}"),
        }
        let end = geodesic_endpoint(&p, &w, TOL).unwrap();
        assert!(proj_dist(&end.rep, &(f.e(1) + f.e(3))) < 1e-15);
        assert!(q_eval(&end.rep).abs() < 1e-15);
        let far = geodesic_point(&p, &w, 20.0, TOL).unwrap();
        assert!(proj_dist(&far.rep, &end.rep) < 1e-8);
        assert!(geodesic_point(&p, &(f.e(1) * 2.0), 1.0, TOL).is_err());
        assert!(geodesic_point(&p, &f.e(4), 1.0, TOL).is_err());
    }

    #[test]
    fn geodesic_additivity() {
        let f = QForm::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (p, w) = random_point_dir(&mut rng, f.dim());
            let s: f64 = rng.random_range(0.01..3.0);
            let t: f64 = rng.random_range(0.01..3.0);
            let g = geodesic_point(&p, &w, s + t, 1e-8).unwrap();
            match chord_classify(&p, &g, TOL) {
                ChordClass::Spacelike(d) => assert!((d - s - t).abs() < 1e-9 * (s + t).cosh().max(1.0)),
                c => panic!("{c:?}"),
            }
        }
    }

    pub(crate) fn random_point(rng: &mut ChaCha8Rng, d: usize) -> PointH {
        let u = loop {
            let u = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
            if u[0] * u[0] + u[1] * u[1] < 0.8 {
                break u;
            }
        };
        let v = DVector::from_fn(d - 2, |_, _| rng.random_range(-1.0..1.0f64));
        let v = v.normalize();
        ph(warped_chart(u, &v).unwrap())
    }

    fn random_point_dir(rng: &mut ChaCha8Rng, d: usize) -> (PointH, QVector) {
        let p = random_point(rng, d);
        loop {
            let r = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0f64));
            let w = &r + &p.rep * qdot(r.as_slice(), p.rep.as_slice());
            let qw = q_eval(&w);
            if qw > 0.1 {
                return (p, w / qw.sqrt());
            }
        }
    }

    #[test]
    fn warped_examples() {
        let v = DVector::from_column_slice(&[0.0, 0.6, 0.8]);
        let x = warped_chart([0.0, 0.0], &v).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0, 0.0, 0.6, 0.8]);
        assert!((q_eval(&x) + 1.0).abs() < 1e-15);
        assert!(warped_chart([0.8, 0.6], &v).is_err());
        let g = warped_pullback_fd([0.0, 0.0], &v, 1e-5).unwrap();
        let want = warped_metric([0.0, 0.0], 2);
        assert!((g - want).amax() < 1e-6);
        // off-center
        let u = [0.3, -0.2];
        let g = warped_pullback_fd(u, &v, 1e-5).unwrap();
        assert!((g - warped_metric(u, 2)).amax() < 1e-6);
    }

    #[test]
    fn warped_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let r: f64 = rng.random_range(0.0..0.95);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let u = [r * a.cos(), r * a.sin()];
            let v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0f64)).normalize();
            let x = warped_chart(u, &v).unwrap();
            assert!((q_eval(&x) + 1.0).abs() < 1e-9 * x.norm_squared());
            let (u2, v2) = warped_chart_inv(&x);
            assert!((u2[0] - u[0]).abs() < 1e-10 && (u2[1] - u[1]).abs() < 1e-10);
            assert!((v2 - v).amax() < 1e-10);
        }
    }

    #[test]
    fn triple_examples() {
        let f = QForm::new(2);
        let p = |v: QVector| PointEin::new(v, 1e-12).unwrap();
        let s2 = 2f64.sqrt();
        // three points on the boundary circle of span(e1, e2, e3)
        let a = p(f.e(1) + f.e(3));
        let b = p(-f.e(1) + f.e(3));
        let c = p(f.e(2) + f.e(3));
        assert!(spacelike_triple(&a, &b, &c, TOL).unwrap());
        // Gram [[0,-1,1],[-1,0,1],[1,1,0]] has signature (2,0,1)
        let b2 = p(f.e(2) + f.e(3));
        let c2 = p(f.e(1) + f.e(2) + f.e(4) * s2);
        assert!(spacelike_triple(&a, &b2, &c2, TOL).unwrap());
        // span(e1, e3, e2+e4) is degenerate, signature (1,1,1)
        let d1 = p(f.e(1) - f.e(3));
        let d2 = p(f.e(2) + f.e(4));
        assert!(!spacelike_triple(&a, &d1, &d2, TOL).unwrap());
        // Gram [[0,2,1],[2,0,1],[1,1,0]] has signature (1,0,2)
        let e = p(f.e(1) + f.e(4));
        assert!(!spacelike_triple(&a, &d1, &e, TOL).unwrap());
        assert!(spacelike_triple(&a, &a, &c, TOL).is_err());
    }

    #[test]
    fn photon_graph_examples() {
        let f = QForm::new(2);
        let e = Subspace::new(vec![f.e(1), f.e(2)], 1e-12).unwrap();
        let fs = Subspace::new(vec![f.e(3), f.e(4), f.e(5)], 1e-12).unwrap();
        let phi = DMatrix::from_columns(&[f.e(3), f.e(4)]);
        let ph = photon_from_graph(&e, &fs, &phi, TOL).unwrap();
        assert!(ph.plane.contains(&(f.e(1) + f.e(3)), 1e-12));
        assert!(ph.plane.contains(&(f.e(2) + f.e(4)), 1e-12));
        assert!(bilinear::gram(&ph.plane.basis).amax() < 1e-15);
        let bad = DMatrix::from_columns(&[f.e(3), f.e(3)]);
        assert!(photon_from_graph(&e, &fs, &bad, TOL).is_err());
    }

    #[test]
    fn fibers_examples() {
        let f = QForm::new(2);
        let x = ph(f.e(3));
        let y = geodesic_point(&x, &f.e(1), 0.7, TOL).unwrap();
        assert!(fibers_disjoint(&x, &y, TOL).unwrap());
        let z = ph(f.e(3) * 0.4f64.cos() + f.e(4) * 0.4f64.sin());
        assert!(!fibers_disjoint(&x, &z, TOL).unwrap());
        let s = orth_complement(&Subspace::new(vec![x.rep.clone(), z.rep.clone()], TOL).unwrap(), TOL).unwrap();
        assert_eq!(signature(&s, TOL).unwrap(), Signature::new(2, 0, 1));
        assert!(fibers_disjoint(&x, &x, TOL).is_err());
    }

    #[test]
    fn chord_agrees_with_fibers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_point(&mut rng, 5);
            let y = random_point(&mut rng, 5);
            let c = chord_classify(&x, &y, 1e-6);
            if c == ChordClass::Lightlike {
                continue;
            }
            let sp = matches!(c, ChordClass::Spacelike(_));
            assert_eq!(sp, fibers_disjoint(&x, &y, 1e-9).unwrap());
        }
    }
}
