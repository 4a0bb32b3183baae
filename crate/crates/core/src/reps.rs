//! Explicit maximal representations of the genus-2 surface group.
//!
//! The base is the regular octagon with all interior angles pi/4. Everything
//! else is built from it through symmetric powers, block sums and bending.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3};

use crate::bilinear::{is_in_so0, q_adjoint, Membership, DEFAULT_TOL};
use crate::error::{invalid, Error, Result};
use crate::group::{evaluate, Presentation, Word};

/// Genus-2 representation into SL(2,R); the relator may evaluate to -I.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusRep {
    pub gens: [Matrix2<f64>; 4],
}

impl MoebiusRep {
    pub fn evaluate(&self, w: &Word) -> Matrix2<f64> {
        let mut m = Matrix2::identity();
        for &l in &w.letters {
            let g = self.gens[l.unsigned_abs() as usize - 1];
            m *= if l > 0 { g } else { sl2_inverse(&g) };
        }
        m
    }

    /// `min(|R - I|, |R + I|)` in the max norm.
    pub fn relator_residual(&self) -> f64 {
        let r = self.evaluate(&Presentation { genus: 2 }.relator());
        let id = Matrix2::identity();
        (r - id).amax().min((r + id).amax())
    }

    /// Translation length `2 arccosh(|tr|/2)`, zero for non-hyperbolic elements.
    pub fn length(&self, w: &Word) -> f64 {
        let t = self.evaluate(w).trace().abs();
        if t > 2.0 {
            2.0 * (t / 2.0).acosh()
        } else {
            0.0
        }
    }
}

pub(crate) fn sl2_inverse(g: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(g[(1, 1)], -g[(0, 1)], -g[(1, 0)], g[(0, 0)])
}

/// Elliptic element whose symmetric square rotates span(e1, e2) by `phi`.
pub fn rot2(phi: f64) -> Matrix2<f64> {
    let (s, c) = (phi / 2.0).sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Hyperbolic element translating the base point toward +e1 by `d`.
pub fn boost(d: f64) -> Matrix2<f64> {
    Matrix2::new((d / 2.0).exp(), 0.0, 0.0, (-d / 2.0).exp())
}

/// Distance from the center of the regular pi/4-octagon to its sides.
pub fn octagon_inradius() -> f64 {
    (1.0 / (PI / 8.0).tan()).acosh()
}

/// Distance from the center to the corners.
pub fn octagon_circumradius() -> f64 {
    (1.0 / (PI / 8.0).tan()).powi(2).acosh()
}

/// Isometry taking side `j` to side `k`, sides facing directions `k pi / 4`.
pub fn side_pairing(j: usize, k: usize) -> Matrix2<f64> {
    let th = |s: usize| s as f64 * PI / 4.0;
    rot2(th(k)) * boost(2.0 * octagon_inradius()) * rot2(PI - th(j))
}

/// Side maps of the generators a1, b1, a2, b2 as (from, to).
///
/// Sides are labelled a1 b1 A1 B1 a2 b2 A2 B2 counterclockwise from direction 0;
/// these orientations are the ones for which the relator closes.
pub const SIDE_MAPS: [(usize, usize); 4] = [(2, 0), (1, 3), (6, 4), (5, 7)];

/// Side-pairing generators of the regular octagon.
pub fn fuchsian_octagon() -> Result<MoebiusRep> {
    let gens: [Matrix2<f64>; 4] = std::array::from_fn(|i| side_pairing(SIDE_MAPS[i].0, SIDE_MAPS[i].1));
    let j = MoebiusRep { gens };
    let r = j.relator_residual();
    if r >= 1e-8 {
        return Err(Error::Invariant(format!("octagon relator residual {r:e}")));
    }
    if j.gens.iter().any(|g| g.trace().abs() <= 2.0) {
        return Err(Error::Invariant("octagon generator is not hyperbolic".into()));
    }
    Ok(j)
}

/// Induced action on binary forms of degree `m` in the basis X^m, X^{m-1}Y, ..., Y^m.
///
/// `X -> a11 X + a21 Y` and `Y -> a12 X + a22 Y`, which makes the map a homomorphism.
pub fn sym_power(a: &Matrix2<f64>, m: usize) -> Result<DMatrix<f64>> {
    if !(1..=4).contains(&m) {
        return invalid(format!("symmetric power {m} not supported"));
    }
    let det = a.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return invalid(format!("det = {det}, expected 1"));
    }
    Ok(sym_power_unchecked(a, m))
}

pub(crate) fn sym_power_unchecked(a: &Matrix2<f64>, m: usize) -> DMatrix<f64> {
    let x = [a[(0, 0)], a[(1, 0)]];
    let y = [a[(0, 1)], a[(1, 1)]];
    let mut s = DMatrix::zeros(m + 1, m + 1);
    for k in 0..=m {
        let mut p = vec![1.0];
        for _ in 0..(m - k) {
            p = poly_mul(&p, &x);
        }
        for _ in 0..k {
            p = poly_mul(&p, &y);
        }
        for (i, c) in p.iter().enumerate() {
            s[(i, k)] = *c;
        }
    }
    s
}

/// Product of binary forms given by coefficients indexed by the power of Y.
pub fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            r[i + j] += a * b;
        }
    }
    r
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Invariant pairing on degree-`m` forms: antidiagonal with entries
/// `(-1)^k k!(m-k)!/m!`. Symmetric for even `m`, antisymmetric for odd `m`.
pub fn qn_matrix(m: usize) -> Result<DMatrix<f64>> {
    if !(1..=4).contains(&m) {
        return invalid(format!("pairing of degree {m} not supported"));
    }
    let mut q = DMatrix::zeros(m + 1, m + 1);
    for k in 0..=m {
        let a = factorial(k) * factorial(m - k) / factorial(m);
        q[(k, m - k)] = if k % 2 == 0 { a } else { -a };
    }
    Ok(q)
}

/// `T2` with `T2^T (-Q2) T2 = diag(1, 1, -1)`. Column 3 is `(X^2 + Y^2)/sqrt 2`.
pub fn congruence2() -> &'static DMatrix<f64> {
    static T: OnceLock<DMatrix<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = 2f64.sqrt();
        DMatrix::from_row_slice(3, 3, &[r, 0.0, r, 0.0, s, 0.0, -r, 0.0, r])
    })
}

/// `T4` with `T4^T (-Q4) T4 = diag(1, 1, -1, -1, -1)`.
pub fn congruence4() -> &'static DMatrix<f64> {
    static T: OnceLock<DMatrix<f64>> = OnceLock::new();
    T.get_or_init(|| {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = 2f64.sqrt();
        let cols = [
            [r, 0.0, 0.0, 0.0, -r],
            [0.0, s, 0.0, s, 0.0],
            [r, 0.0, 0.0, 0.0, r],
            [0.0, s, 0.0, -s, 0.0],
            [0.0, 0.0, 6f64.sqrt(), 0.0, 0.0],
        ];
        DMatrix::from_fn(5, 5, |i, j| cols[j][i])
    })
}

/// `T^{-1} = J T^T (-Q)` for a congruence `T^T (-Q) T = J`.
pub(crate) fn congruence_inverse(t: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let q = qn_matrix(m).expect("supported degree");
    let d = m + 1;
    let j = DMatrix::from_fn(d, d, |i, k| if i != k { 0.0 } else if i < 2 { 1.0 } else { -1.0 });
    j * t.transpose() * (-q)
}

/// Image of `A` in SO0(2,1) through the symmetric square.
pub fn so21(a: &Matrix2<f64>) -> Matrix3<f64> {
    static TI: OnceLock<DMatrix<f64>> = OnceLock::new();
    let t = congruence2();
    let ti = TI.get_or_init(|| congruence_inverse(t, 2));
    let m = ti * sym_power_unchecked(a, 2) * t;
    Matrix3::from_fn(|i, j| m[(i, j)])
}

/// Equivariant map from H^2 in R^{2,1} to H^{2,2}: `y -> T4^{-1} (T2 y)^2`,
/// rescaled onto the quadric. Intertwines `so21` and `so23`.
pub fn veronese(y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != 3 {
        return Err(Error::DimensionMismatch(3, y.len()));
    }
    let p = congruence2() * y;
    let p2 = DVector::from_vec(poly_mul(p.as_slice(), p.as_slice()));
    let v = congruence_inverse(congruence4(), 4) * p2;
    let qv = crate::bilinear::q_eval(&v);
    if !(qv < 0.0) {
        return invalid("veronese image is not timelike; input must be a timelike vector");
    }
    Ok(v / (-qv).sqrt())
}

/// Image of `A` in SO0(2,3) through the fourth symmetric power.
pub fn so23(a: &Matrix2<f64>) -> DMatrix<f64> {
    static TI: OnceLock<DMatrix<f64>> = OnceLock::new();
    let t = congruence4();
    let ti = TI.get_or_init(|| congruence_inverse(t, 4));
    ti * sym_power_unchecked(a, 4) * t
}

/// Construction record of a representation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    /// `rho = rho_Fuch (x) det(alpha) (+) alpha` over the octagon group.
    FuchsianLocus { alpha: Vec<Vec<f64>> },
    /// Fourth symmetric power of the octagon group, n = 2.
    Irreducible,
    /// Handle a2, b2 conjugated by `element` (row-major), which commutes with [a1,b1].
    Bent { curve: Word, theta: Option<f64>, element: Vec<f64>, base: Box<Provenance> },
    Custom,
}

/// Generator images in SO0(2, n+1).
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub n: usize,
    pub genus: usize,
    pub gen_images: Vec<DMatrix<f64>>,
    pub relator_residual: f64,
    pub provenance: Provenance,
    /// Toledo invariant recorded from the construction, 2g - 2 for all constructors.
    pub toledo: i64,
}

impl Representation {
    /// Validates membership of every generator and computes the relator residual.
    pub fn new(n: usize, gen_images: Vec<DMatrix<f64>>, provenance: Provenance, tol: f64) -> Result<Self> {
        let genus = gen_images.len() / 2;
        Presentation::new(genus)?;
        if gen_images.len() != 2 * genus {
            return invalid("odd number of generator images");
        }
        for (i, g) in gen_images.iter().enumerate() {
            if g.nrows() != n + 3 || g.ncols() != n + 3 {
                return Err(Error::DimensionMismatch(n + 3, g.nrows()));
            }
            if is_in_so0(g, tol) != Membership::Yes {
                return Err(Error::Invariant(format!("generator {i} is not in SO0(2,{})", n + 1)));
            }
        }
        let mut rep = Representation { n, genus, gen_images, relator_residual: 0.0, provenance, toledo: 2 * genus as i64 - 2 };
        rep.relator_residual = rep.compute_relator_residual();
        if rep.relator_residual >= 1e-8 {
            return Err(Error::Invariant(format!("relator residual {:e}", rep.relator_residual)));
        }
        Ok(rep)
    }

    pub fn dim(&self) -> usize {
        self.n + 3
    }

    pub fn presentation(&self) -> Presentation {
        Presentation { genus: self.genus }
    }

    /// `||P1 - P2^{-1}||_inf / max(1, ||P1||_inf)` where the relator is `P1 P2`
    /// split in the middle. Equal to `||R - I||` up to conditioning, but free of
    /// the cancellation in long products of large matrices.
    pub fn compute_relator_residual(&self) -> f64 {
        let r = self.presentation().relator();
        let h = r.len() / 2;
        let p1 = evaluate(self, &Word { letters: r.letters[..h].to_vec() });
        let p2 = evaluate(self, &Word { letters: r.letters[h..].to_vec() });
        (&p1 - q_adjoint(&p2)).amax() / p1.amax().max(1.0)
    }

    /// Largest q-orthogonality residual over the generators.
    pub fn membership_residual(&self) -> f64 {
        self.gen_images.iter().map(crate::bilinear::q_orth_residual).fold(0.0, f64::max)
    }
}

/// Block sum `diag(det(alpha) rho_Fuch, alpha)`; `alpha` holds one n x n
/// orthogonal matrix per generator.
pub fn fuchsian_locus(j: &MoebiusRep, alpha: &[DMatrix<f64>]) -> Result<Representation> {
    if alpha.len() != 4 {
        return invalid(format!("expected 4 alpha images, got {}", alpha.len()));
    }
    let n = alpha[0].nrows();
    let mut imgs = Vec::with_capacity(4);
    for (g, a) in j.gens.iter().zip(alpha) {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch(n, a.nrows()));
        }
        if n > 0 && (a.transpose() * a - DMatrix::<f64>::identity(n, n)).amax() > 1e-9 {
            return invalid("alpha image is not orthogonal");
        }
        let det = if n == 0 { 1.0 } else { a.determinant().signum() };
        let f = so21(g) * det;
        let mut m = DMatrix::zeros(n + 3, n + 3);
        m.view_mut((0, 0), (3, 3)).copy_from(&f);
        if n > 0 {
            m.view_mut((3, 3), (n, n)).copy_from(a);
        }
        imgs.push(m);
    }
    let prov = Provenance::FuchsianLocus { alpha: alpha.iter().map(row_major).collect() };
    Representation::new(n, imgs, prov, DEFAULT_TOL)
}

/// Trivial alpha for `n`.
pub fn trivial_alpha(n: usize) -> Vec<DMatrix<f64>> {
    vec![DMatrix::identity(n, n); 4]
}

/// The irreducible representation into SO0(2,3).
pub fn irr_so23(j: &MoebiusRep) -> Result<Representation> {
    let imgs: Vec<DMatrix<f64>> = j.gens.iter().map(so23).collect();
    Representation::new(2, imgs, Provenance::Irreducible, DEFAULT_TOL)
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub(crate) fn from_row_major(d: usize, v: &[f64]) -> Result<DMatrix<f64>> {
    if v.len() != d * d {
        return invalid(format!("expected {} entries, got {}", d * d, v.len()));
    }
    Ok(DMatrix::from_row_slice(d, d, v))
}

/// The separating curve [a1, b1].
pub fn separating_curve() -> Word {
    Word::new(&[1, 2, -1, -2])
}

/// Conjugates a2, b2 by `c`, which must lie in SO0 and commute with rho([a1,b1]).
pub fn bend(rep: &Representation, c: &DMatrix<f64>, tol: f64) -> Result<Representation> {
    bend_with_theta(rep, c, None, tol)
}

pub(crate) fn bend_with_theta(rep: &Representation, c: &DMatrix<f64>, theta: Option<f64>, tol: f64) -> Result<Representation> {
    if rep.genus != 2 {
        return invalid("bending is implemented for genus 2");
    }
    let d = rep.dim();
    if c.nrows() != d || c.ncols() != d {
        return Err(Error::DimensionMismatch(d, c.nrows()));
    }
    if is_in_so0(c, tol) != Membership::Yes {
        return Err(Error::Invariant("bending element is not in SO0".into()));
    }
    let curve = separating_curve();
    let k = evaluate(rep, &curve);
    let comm = (c * &k - &k * c).amax() / k.amax().max(1.0);
    if comm >= tol {
        return Err(Error::Invariant(format!("bending element does not commute with rho([a1,b1]): residual {comm:e}")));
    }
    let ci = q_adjoint(c);
    let mut imgs = rep.gen_images.clone();
    for g in imgs.iter_mut().skip(2) {
        *g = c * &*g * &ci;
    }
    let prov = Provenance::Bent { curve, theta, element: row_major(c), base: Box::new(rep.provenance.clone()) };
    let mut out = Representation::new(rep.n, imgs, prov, tol.max(DEFAULT_TOL))?;
    out.toledo = rep.toledo;
    Ok(out)
}

/// Unit spacelike vector fixed by rho([a1,b1]) inside span(e1, e2, e3).
///
/// Requires a representation that preserves span(e1, e2, e3), as the
/// Fuchsian-locus constructor produces.
pub fn curve_normal(rep: &Representation) -> Result<DVector<f64>> {
    let k = evaluate(rep, &separating_curve());
    let b = k.view((0, 0), (3, 3)).into_owned() - DMatrix::<f64>::identity(3, 3);
    let svd = b.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("svd failed".into()))?;
    let i = svd.singular_values.imin();
    let v3 = vt.row(i).transpose();
    let mut v = DVector::zeros(rep.dim());
    v.rows_mut(0, 3).copy_from(&v3);
    let qv = crate::bilinear::q_eval(&v);
    if qv <= 0.0 {
        return Err(Error::Numerical("fixed vector of [a1,b1] is not spacelike".into()));
    }
    let v = v / qv.sqrt();
    // pin the sign so that the a1/b1 handle lies on the positive side
    let h1 = DVector::from_column_slice(&[(PI / 4.0).cos(), (PI / 4.0).sin(), 0.0]);
    let s = v[0] * h1[0] + v[1] * h1[1];
    Ok(if s < 0.0 { -v } else { v })
}

/// Boost by `theta` in the plane spanned by `nrm` (q = 1) and `e4` (q = -1).
pub fn boost_in_plane(nrm: &DVector<f64>, t: &DVector<f64>, theta: f64) -> DMatrix<f64> {
    let d = nrm.len();
    let (ch, sh) = (theta.cosh() - 1.0, theta.sinh());
    // v -> v + (a ch + b sh) n + (a sh + b ch) t with a = q(v,n), b = -q(v,t)
    let qn = DVector::from_fn(d, |i, _| crate::bilinear::sign(i) * nrm[i]);
    let qt = DVector::from_fn(d, |i, _| -crate::bilinear::sign(i) * t[i]);
    let mut m = DMatrix::<f64>::identity(d, d);
    m += (nrm * ch + t * sh) * qn.transpose();
    m += (nrm * sh + t * ch) * qt.transpose();
    m
}

/// Centralizer element of rho([a1,b1]) used for bending the Fuchsian locus.
pub fn bending_element(rep: &Representation, theta: f64) -> Result<DMatrix<f64>> {
    if rep.n < 1 {
        return invalid("bending needs n >= 1");
    }
    let nrm = curve_normal(rep)?;
    let mut e4 = DVector::zeros(rep.dim());
    e4[3] = 1.0;
    Ok(boost_in_plane(&nrm, &e4, theta))
}

/// Bends a Fuchsian-locus representation by a boost of size `theta`.
pub fn bend_fuchsian(rep: &Representation, theta: f64) -> Result<Representation> {
    let c = bending_element(rep, theta)?;
    bend_with_theta(rep, &c, Some(theta), 1e-9)
}

/// Rotation by `theta` in the coordinates (e_i, e_j), both negative.
pub fn negative_rotation(d: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::identity(d, d);
    let (s, c) = theta.sin_cos();
    m[(i, i)] = c;
    m[(j, j)] = c;
    m[(i, j)] = -s;
    m[(j, i)] = s;
    m
}

/// JSON form: generators as row-major arrays.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RepFile {
    pub n: usize,
    pub genus: usize,
    pub generators: Vec<Vec<f64>>,
    pub provenance: Provenance,
    pub toledo: i64,
    pub residuals: RepResiduals,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RepResiduals {
    pub relator: f64,
    pub membership: f64,
}

impl Representation {
    pub fn to_file(&self) -> RepFile {
        RepFile {
            n: self.n,
            genus: self.genus,
            generators: self.gen_images.iter().map(row_major).collect(),
            provenance: self.provenance.clone(),
            toledo: self.toledo,
            residuals: RepResiduals { relator: self.relator_residual, membership: self.membership_residual() },
        }
    }

    pub fn from_file(f: &RepFile) -> Result<Self> {
        let d = f.n + 3;
        let imgs = f.generators.iter().map(|g| from_row_major(d, g)).collect::<Result<Vec<_>>>()?;
        let mut r = Representation::new(f.n, imgs, f.provenance.clone(), DEFAULT_TOL)?;
        r.toledo = f.toledo;
        Ok(r)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: RepFile = serde_json::from_str(s)?;
        Representation::from_file(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::{gram_signature, Signature};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sl2(rng: &mut ChaCha8Rng) -> Matrix2<f64> {
        let a = rot2(rng.random_range(-3.0..3.0));
        let b = boost(rng.random_range(-2.0..2.0));
        let c = rot2(rng.random_range(-3.0..3.0));
        a * b * c
    }

    #[test]
    fn octagon_generators() {
        let j = fuchsian_octagon().unwrap();
        assert!(j.relator_residual() < 1e-8, "{}", j.relator_residual());
        for g in &j.gens {
            assert!(g.trace().abs() > 2.0);
            assert!((g.determinant() - 1.0).abs() < 1e-12);
        }
        let la1 = j.length(&Word::parse("a1").unwrap());
        let lb1 = j.length(&Word::parse("b1").unwrap());
        assert!((la1 - lb1).abs() < 1e-12);
        // cosh(L/2) = 1 + sqrt(2)/2
        assert!(((la1 / 2.0).cosh() - 1.0 - 0.5f64.sqrt()).abs() < 1e-12);
        // every other orientation choice fails to close
        let other = MoebiusRep { gens: [side_pairing(0, 2), j.gens[1], j.gens[2], j.gens[3]] };
        assert!(other.relator_residual() > 1.0);
    }

    #[test]
    fn sym_power_examples() {
        let id = Matrix2::identity();
        assert_eq!(sym_power(&id, 4).unwrap(), DMatrix::<f64>::identity(5, 5));
        let l: f64 = 1.7;
        let d = Matrix2::new(l, 0.0, 0.0, 1.0 / l);
        let s2 = sym_power(&d, 2).unwrap();
        let mut ev: Vec<f64> = s2.diagonal().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - l.powi(-2)).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12 && (ev[2] - l * l).abs() < 1e-12);
        let s4 = sym_power(&d, 4).unwrap();
        let want = [l.powi(4), l.powi(2), 1.0, l.powi(-2), l.powi(-4)];
        for k in 0..5 {
            assert!((s4[(k, k)] - want[k]).abs() < 1e-12);
        }
        assert!(sym_power(&d, 5).is_err());
        assert!(sym_power(&Matrix2::new(2.0, 0.0, 0.0, 1.0), 2).is_err());
    }

    #[test]
    fn sym_power_functorial_and_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let a = random_sl2(&mut rng);
            let b = random_sl2(&mut rng);
            for m in 1..=4 {
                let lhs = sym_power(&(a * b), m).unwrap();
                let rhs = sym_power(&a, m).unwrap() * sym_power(&b, m).unwrap();
                assert!((&lhs - &rhs).amax() < 1e-10 * lhs.amax().max(1.0));
                let q = qn_matrix(m).unwrap();
                let s = sym_power(&a, m).unwrap();
                assert!((s.transpose() * &q * &s - &q).amax() < 1e-9 * s.amax().powi(2).max(1.0));
            }
        }
    }

    #[test]
    fn pairing_matrices() {
        let q4 = qn_matrix(4).unwrap();
        let want = [1.0, -0.25, 1.0 / 6.0, -0.25, 1.0];
        for k in 0..5 {
            assert!((q4[(k, 4 - k)] - want[k]).abs() < 1e-15);
        }
        assert_eq!(q4.transpose(), q4);
        let q3 = qn_matrix(3).unwrap();
        assert_eq!(q3.transpose(), -q3);
        assert_eq!(gram_signature(&(-q4), 1e-12), Signature::new(2, 0, 3));
        assert_eq!(gram_signature(&(-qn_matrix(2).unwrap()), 1e-12), Signature::new(2, 0, 1));
    }

    #[test]
    fn congruences_golden() {
        let j3 = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.0, -1.0]));
        let t2 = congruence2();
        assert!((t2.transpose() * (-qn_matrix(2).unwrap()) * t2 - j3).amax() < 1e-15);
        let j5 = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1.0, -1.0, -1.0, -1.0]));
        let t4 = congruence4();
        assert!((t4.transpose() * (-qn_matrix(4).unwrap()) * t4 - j5).amax() < 1e-15);
        // X^2 + Y^2 sits on the e3 axis
        assert!((t2[(0, 2)] - t2[(2, 2)]).abs() < 1e-15 && t2[(1, 2)] == 0.0);
    }

    #[test]
    fn so21_conventions() {
        let r = so21(&rot2(0.4));
        let want = Matrix3::new(0.4f64.cos(), -0.4f64.sin(), 0.0, 0.4f64.sin(), 0.4f64.cos(), 0.0, 0.0, 0.0, 1.0);
        assert!((r - want).amax() < 1e-14);
        let b = so21(&boost(0.9));
        // e3 moves to cosh(d) e3 + sinh(d) e1
        assert!((b[(0, 2)] - 0.9f64.sinh()).abs() < 1e-14);
        assert!((b[(2, 2)] - 0.9f64.cosh()).abs() < 1e-14);
    }

    #[test]
    fn locus_and_irr_membership() {
        let j = fuchsian_octagon().unwrap();
        let fl = fuchsian_locus(&j, &trivial_alpha(2)).unwrap();
        assert!(fl.relator_residual < 1e-8);
        for g in &fl.gen_images {
            assert_eq!(is_in_so0(g, 1e-9), Membership::Yes);
        }
        let irr = irr_so23(&j).unwrap();
        for g in &irr.gen_images {
            assert_eq!(is_in_so0(g, 1e-9), Membership::Yes);
        }
        // functoriality up to the rounding floor of 5x5 products
        assert!(irr.relator_residual <= 5.0 * j.relator_residual() + 1e-11);
        let mut alpha = trivial_alpha(2);
        alpha[0] = -DMatrix::<f64>::identity(2, 2);
        let fl2 = fuchsian_locus(&j, &alpha).unwrap();
        assert!((fl2.relator_residual - fl.relator_residual).abs() < 1e-12);
        let mut bad = trivial_alpha(2);
        bad[1][(0, 0)] = 2.0;
        assert!(fuchsian_locus(&j, &bad).is_err());
    }

    #[test]
    fn bending() {
        let j = fuchsian_octagon().unwrap();
        let fl = fuchsian_locus(&j, &trivial_alpha(2)).unwrap();
        let same = bend(&fl, &DMatrix::identity(5, 5), 1e-9).unwrap();
        assert_eq!(same.gen_images, fl.gen_images);
        // a rotation of (e4, e5) commutes with the whole representation
        let r = negative_rotation(5, 3, 4, 0.3);
        let br = bend(&fl, &r, 1e-10).unwrap();
        assert!(br.relator_residual < 1e-8);
        for (a, b) in br.gen_images.iter().zip(&fl.gen_images) {
            assert!((a - b).amax() < 1e-12);
        }
        let b = bend_fuchsian(&fl, 0.3).unwrap();
        assert!(b.relator_residual < 1e-8);
        assert!((b.gen_images[2].clone() - &fl.gen_images[2]).amax() > 1e-3);
        // a boost in (e1, e4) does not commute with [a1,b1]
        let mut e1 = DVector::zeros(5);
        e1[0] = 1.0;
        let mut e4 = DVector::zeros(5);
        e4[3] = 1.0;
        assert!(bend(&fl, &boost_in_plane(&e1, &e4, 0.3), 1e-9).is_err());
        let z = bend_fuchsian(&fl, 0.0).unwrap();
        assert_eq!(z.gen_images, fl.gen_images);
    }

    #[test]
    fn curve_normal_is_the_diagonal() {
        let j = fuchsian_octagon().unwrap();
        let fl = fuchsian_locus(&j, &trivial_alpha(2)).unwrap();
        let n = curve_normal(&fl).unwrap();
        let a = 3.0 * PI / 8.0;
        assert!((n[0] - a.cos()).abs() < 1e-9 && (n[1] - a.sin()).abs() < 1e-9 && n[2].abs() < 1e-9);
    }

    #[test]
    fn json_roundtrip() {
        let j = fuchsian_octagon().unwrap();
        let fl = bend_fuchsian(&fuchsian_locus(&j, &trivial_alpha(2)).unwrap(), 0.3).unwrap();
        let s = fl.to_json().unwrap();
        let back = Representation::from_json(&s).unwrap();
        assert_eq!(back.gen_images, fl.gen_images);
        assert_eq!(back.provenance, fl.provenance);
    }

    #[test]
    fn veronese_equivariant() {
        let j = fuchsian_octagon().unwrap();
        let y = DVector::from_column_slice(&[0.3, -0.2, (1.0f64 + 0.09 + 0.04).sqrt()]);
        let vy = veronese(&y).unwrap();
        assert!((crate::bilinear::q_eval(&vy) + 1.0).abs() < 1e-12);
        let c = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        let base = veronese(&c).unwrap();
        assert!((base[2] - 0.75f64.sqrt()).abs() < 1e-12 && (base[4] - 0.5).abs() < 1e-12);
        for g in &j.gens {
            let lhs = so23(g) * &vy;
            let gy = so21(g) * nalgebra::Vector3::new(y[0], y[1], y[2]);
            let rhs = veronese(&DVector::from_column_slice(gy.as_slice())).unwrap();
            assert!((&lhs - &rhs).amax() < 1e-11 * lhs.amax());
        }
    }
}
