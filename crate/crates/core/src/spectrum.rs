//! Length spectrum, boundary maps, entropy and the length inequalities.

use nalgebra::{Complex, DMatrix, DVector, Matrix2};
use twofloat::TwoFloat;
use serde::{Deserialize, Serialize};

use crate::bilinear::{q_adjoint, q_eval, qdot, signature, Subspace};
use crate::error::{invalid, Error, Result};
use crate::hp::{self, HpMat};
use crate::group::{evaluate, for_each_class, letter_images, letter_rank, Word, MAX_ENUM_LEN};
use crate::reps::{congruence4, sl2_inverse, MoebiusRep, Provenance, Representation};
use crate::spaces::{proj_dist, PointEin, PointH};

/// Lengths below this, or a top gap below `1 + LOX_TOL`, are flagged.
pub const LOX_TOL: f64 = 1e-6;

/// Log spectral radius together with the loxodromic flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Length {
    pub value: f64,
    /// Ratio of the largest eigenvalue modulus to the second largest.
    pub gap: f64,
    pub loxodromic: bool,
}

/// Eigenvalues through a Schur decomposition with a bounded iteration count.
///
/// Returns `None` when the QR iteration does not converge, which happens for
/// matrices within rounding of the identity.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let s = nalgebra::Schur::try_new(m.clone(), f64::EPSILON, 10_000)?;
    let mut zs: Vec<Complex<f64>> = s.complex_eigenvalues().iter().copied().collect();
    zs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Some(zs)
}

// Spectral radius from repeated squaring, used when Schur fails.
fn radius_by_squaring(m: &DMatrix<f64>) -> f64 {
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let k = 40;
    for _ in 0..k {
        let nrm = a.amax();
        if !(nrm > 0.0) {
            return 0.0;
        }
        a /= nrm;
        log_scale = 2.0 * (log_scale + nrm.ln());
        a = &a * &a;
    }
    (log_scale + a.amax().ln()) / 2f64.powi(k)
}

/// Spectral data of a single matrix.
pub fn matrix_length(m: &DMatrix<f64>) -> Length {
    hp_length(&HpMat::from_f64(m))
}

/// Loxodromic elements get their top eigenvalue from a double-double power
/// iteration; Schur on the rounded matrix only supplies the gap and a start.
pub fn hp_length(m: &HpMat) -> Length {
    let f = m.to_f64();
    let Some(zs) = eigenvalues(&f) else {
        let value = radius_by_squaring(&f).max(0.0);
        return Length { value, gap: f64::NAN, loxodromic: false };
    };
    let top = zs[0].norm();
    let second = zs.get(1).map(|z| z.norm()).unwrap_or(0.0);
    let gap = if second > 0.0 { top / second } else { f64::INFINITY };
    let mut value = top.ln().max(0.0);
    if gap > 1.0 + LOX_TOL && zs[0].im.abs() <= 1e-12 * top {
        if let Ok((lam, _, _)) = hp_top(m, &f, zs[0].re) {
            let r = hp::ln_abs(lam);
            if (r - top.ln()).abs() < 1e-3 {
                value = r.max(0.0);
            }
        }
    }
    let loxodromic = value.is_finite() && value >= LOX_TOL && gap > 1.0 + LOX_TOL;
    Length { value, gap, loxodromic }
}

/// `L(w) = log |lambda_1(rho(w))|`.
pub fn length(rep: &Representation, w: &Word) -> Result<Length> {
    if w.is_empty() {
        return invalid("length of the empty word");
    }
    // conjugates only worsen the conditioning of the eigenvalue problem
    let (_, core) = w.core_split();
    Ok(hp_length(&hp_evaluate(rep, &core)))
}

/// Like [`length`] but non-loxodromic words are an error.
pub fn loxodromic_length(rep: &Representation, w: &Word) -> Result<f64> {
    let l = length(rep, w)?;
    if !l.loxodromic {
        return Err(Error::NonLoxodromic(format!("{w}: L = {:e}, gap = {}", l.value, l.gap)));
    }
    Ok(l.value)
}

/// Word product in double-double.
pub fn hp_evaluate(rep: &Representation, w: &Word) -> HpMat {
    let imgs = hp_letter_images(rep);
    let mut m = HpMat::identity(rep.dim());
    for &l in &w.letters {
        m = m.mul(&imgs[letter_rank(l) as usize]);
    }
    m
}

/// Letter images in double-double, indexed by `letter_rank`.
pub fn hp_letter_images(rep: &Representation) -> Vec<HpMat> {
    letter_images(rep).iter().map(HpMat::from_f64).collect()
}

/// Attracting and repelling fixed points of a loxodromic element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPair {
    pub xi_plus: PointEin,
    pub xi_minus: PointEin,
    pub gap: f64,
}

// Starting vector: null vector of M - lambda I.
fn svd_null(m: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    let d = m.nrows();
    let a = m - DMatrix::<f64>::identity(d, d) * lambda;
    let svd = a.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("svd failed".into()))?;
    let i = svd.singular_values.imin();
    Ok(vt.row(i).transpose())
}

// Top eigenvalue with right eigenvector v+ and the top eigenvector v- of
// M^{-1}; the left eigenvector of lambda_1 is Q v-.
fn hp_top(m: &HpMat, f: &DMatrix<f64>, lp: f64) -> Result<(TwoFloat, Vec<TwoFloat>, Vec<TwoFloat>)> {
    let mi = m.q_adjoint();
    let fi = q_adjoint(f);
    // M^{-1} has the same spectral radius
    let sp = svd_null(f, lp)?;
    let sm = svd_null(&fi, lp)?;
    let broke = || Error::Numerical("power iteration broke down".into());
    let vp = hp::power(m, &sp, 200).ok_or_else(broke)?;
    let vm = hp::power(&mi, &sm, 200).ok_or_else(broke)?;
    let lam = hp::rayleigh(m, &vp, &vm).ok_or_else(broke)?;
    Ok((lam, vp, vm))
}

fn top_real_eigenvalue(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let zs = eigenvalues(m).ok_or_else(|| Error::NonLoxodromic("eigenvalue iteration did not converge".into()))?;
    let top = zs[0];
    if top.im.abs() > 1e-8 * top.norm() {
        return Err(Error::NonLoxodromic("top eigenvalue is not real".into()));
    }
    let gap = top.norm() / zs.get(1).map(|z| z.norm()).unwrap_or(0.0);
    Ok((top.re, gap))
}

/// Eigen-directions of `m` for the eigenvalues of largest and smallest modulus.
pub fn boundary_pair_of(m: &DMatrix<f64>, tol: f64) -> Result<BoundaryPair> {
    hp_boundary_pair(&HpMat::from_f64(m), tol)
}

pub fn hp_boundary_pair(m: &HpMat, tol: f64) -> Result<BoundaryPair> {
    let f = m.to_f64();
    let (lp, gap) = top_real_eigenvalue(&f)?;
    if !(gap > 1.0 + LOX_TOL) {
        return Err(Error::NonLoxodromic(format!("spectral gap {gap}")));
    }
    let (_, vp, vm) = hp_top(m, &f, lp)?;
    let xp = PointEin::new(hp::to_dvector(&vp), tol)?;
    let xm = PointEin::new(hp::to_dvector(&vm), tol)?;
    // far axes put unit endpoints close together, so only rounding-level
    // values count as orthogonal
    if qdot(xp.rep.as_slice(), xm.rep.as_slice()).abs() < 1e3 * f64::EPSILON {
        return Err(Error::Invariant("boundary points are q-orthogonal".into()));
    }
    Ok(BoundaryPair { xi_plus: xp, xi_minus: xm, gap })
}

pub fn boundary_pair(rep: &Representation, w: &Word) -> Result<BoundaryPair> {
    if w.is_empty() {
        return invalid("boundary pair of the empty word");
    }
    let (u, core) = w.core_split();
    let bp = hp_boundary_pair(&hp_evaluate(rep, &core), 1e-9)?;
    if u.is_empty() {
        return Ok(bp);
    }
    let g = evaluate(rep, &u);
    Ok(BoundaryPair {
        xi_plus: PointEin::new(&g * &bp.xi_plus.rep, 1e-9)?,
        xi_minus: PointEin::new(&g * &bp.xi_minus.rep, 1e-9)?,
        gap: bp.gap,
    })
}

fn hp_mul(a: &HpMat, b: &HpMat) -> HpMat {
    a.mul(b)
}

/// Attracting fixed points of all conjugacy representatives up to `maxlen`,
/// deduplicated projectively.
pub fn limit_curve_samples(rep: &Representation, maxlen: usize) -> Result<Vec<PointEin>> {
    check_maxlen(maxlen)?;
    let imgs = hp_letter_images(rep);
    let res = for_each_class(&rep.presentation(), maxlen, false, &imgs, &hp_mul, &|_, m| Some(hp_boundary_pair(m, 1e-9)));
    let mut pts: Vec<PointEin> = Vec::with_capacity(res.len());
    for (w, r) in res {
        let bp = r.map_err(|e| match e {
            Error::NonLoxodromic(s) => Error::NonLoxodromic(format!("{w}: {s}")),
            other => other,
        })?;
        pts.push(bp.xi_plus);
    }
    Ok(dedup_projective(pts, 1e-7))
}

fn dedup_projective(mut pts: Vec<PointEin>, tol: f64) -> Vec<PointEin> {
    for p in pts.iter_mut() {
        p.rep = p.canonical();
    }
    // sort along the first coordinate so that duplicates are close in order
    pts.sort_by(|a, b| a.rep[0].total_cmp(&b.rep[0]));
    let mut out: Vec<PointEin> = Vec::with_capacity(pts.len());
    for p in pts {
        let dup = out.iter().rev().take_while(|o| p.rep[0] - o.rep[0] < tol).any(|o| proj_dist(&o.rep, &p.rep) < tol);
        if !dup {
            out.push(p);
        }
    }
    out
}

/// Default basepoint on the equivariant surface: the image of the octagon center.
pub fn default_basepoint(rep: &Representation) -> PointH {
    fn root(p: &Provenance) -> &Provenance {
        match p {
            Provenance::Bent { base, .. } => root(base),
            other => other,
        }
    }
    let d = rep.dim();
    match root(&rep.provenance) {
        Provenance::Irreducible => irr_basepoint(),
        _ => {
            let mut v = DVector::zeros(d);
            v[2] = 1.0;
            PointH { rep: v }
        }
    }
}

/// Point of the axis of `so21(j(w))` nearest to the octagon center e3, in R^{2,1}.
pub fn fuchsian_axis_point(j: &MoebiusRep, w: &Word) -> Result<DVector<f64>> {
    let m = crate::reps::so21(&j.evaluate(w));
    let bp = boundary_pair_of(&DMatrix::from_fn(3, 3, |a, b| m[(a, b)]), 1e-9)?;
    let (p, n) = (&bp.xi_plus.rep, &bp.xi_minus.rep);
    let c = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
    let pn = qdot(p.as_slice(), n.as_slice());
    let x = p * (qdot(c.as_slice(), n.as_slice()) / pn) + n * (qdot(c.as_slice(), p.as_slice()) / pn);
    let qx = q_eval(&x);
    if !(qx < 0.0) {
        return Err(Error::Numerical("axis projection is not timelike".into()));
    }
    let x = x / (-qx).sqrt();
    Ok(if x[2] < 0.0 { -x } else { x })
}

/// `(X^2 + Y^2)^2` in the orthonormal coordinates of R^{2,3}.
pub fn irr_basepoint() -> PointH {
    let p = DVector::from_column_slice(&[1.0, 0.0, 2.0, 0.0, 1.0]);
    let ti = crate::reps::congruence_inverse(congruence4(), 4);
    PointH::normalize(ti * p).expect("(X^2+Y^2)^2 is timelike")
}

/// `(1/N) arccosh |q(x, rho(w)^N x)|`.
pub fn length_via_distance(rep: &Representation, w: &Word, x: &PointH, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("N must be positive");
    }
    if w.is_empty() {
        return Err(Error::NonLoxodromic("empty word".into()));
    }
    let m = evaluate(rep, w);
    let mut y = x.rep.clone();
    for _ in 0..n {
        y = &m * y;
    }
    let c = qdot(x.rep.as_slice(), y.as_slice());
    if c > -1.0 + 1e-12 {
        return Err(Error::NonLoxodromic(format!("chord x, rho({w})^{n} x is not spacelike (q = {c})")));
    }
    Ok((-c).acosh() / n as f64)
}

/// Word and its length; non-loxodromic words are listed separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub entries: Vec<(Word, f64)>,
    pub excluded: Vec<Word>,
    pub maxlen: usize,
    pub provenance: Provenance,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("word,length\n");
        for (w, l) in &self.entries {
            s.push_str(&format!("{w},{l}\n"));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_maxlen(maxlen: usize) -> Result<()> {
    if maxlen == 0 || maxlen > MAX_ENUM_LEN {
        return invalid(format!("maxlen must be in 1..={MAX_ENUM_LEN}"));
    }
    Ok(())
}

/// Lengths of all cyclic classes up to `maxlen`, sorted shortlex.
pub fn spectrum(rep: &Representation, maxlen: usize, mod_inverse: bool) -> Result<SpectrumReport> {
    check_maxlen(maxlen)?;
    let imgs = hp_letter_images(rep);
    let res = for_each_class(&rep.presentation(), maxlen, mod_inverse, &imgs, &hp_mul, &|_, m| Some(hp_length(m)));
    Ok(collect_report(rep, maxlen, res))
}

/// Like [`spectrum`] but in plain f64: products and Schur only. Relative
/// accuracy degrades to about 1e-5 on strongly non-normal words.
pub fn spectrum_f64(rep: &Representation, maxlen: usize, mod_inverse: bool) -> Result<SpectrumReport> {
    check_maxlen(maxlen)?;
    let imgs = letter_images(rep);
    let mul = |a: &DMatrix<f64>, b: &DMatrix<f64>| a * b;
    let res = for_each_class(&rep.presentation(), maxlen, mod_inverse, &imgs, &mul, &|_, m| Some(schur_length(m)));
    Ok(collect_report(rep, maxlen, res))
}

fn schur_length(m: &DMatrix<f64>) -> Length {
    let Some(zs) = eigenvalues(m) else {
        return Length { value: radius_by_squaring(m).max(0.0), gap: f64::NAN, loxodromic: false };
    };
    let top = zs[0].norm();
    let second = zs.get(1).map(|z| z.norm()).unwrap_or(0.0);
    let gap = if second > 0.0 { top / second } else { f64::INFINITY };
    let value = top.ln().max(0.0);
    let loxodromic = value.is_finite() && value >= LOX_TOL && gap > 1.0 + LOX_TOL;
    Length { value, gap, loxodromic }
}

fn collect_report(rep: &Representation, maxlen: usize, res: Vec<(Word, Length)>) -> SpectrumReport {
    let mut entries = Vec::with_capacity(res.len());
    let mut excluded = Vec::new();
    for (w, l) in res {
        if l.loxodromic {
            entries.push((w, l.value));
        } else {
            excluded.push(w);
        }
    }
    SpectrumReport { entries, excluded, maxlen, provenance: rep.provenance.clone() }
}

/// Entropy estimate and the counting table behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub h_hat: f64,
    /// `(R, #{L <= R})` over the fitting window.
    pub counts: Vec<(f64, usize)>,
    pub r_max: f64,
    pub classes: usize,
}

/// Slope of `log #{L <= R}` against R on `[R_max/2, R_max]`.
///
/// Only Dehn-reduced classes are counted; the others are conjugate to shorter
/// words and would be counted twice. `R_max` is the shortest length among
/// counted classes of word length exactly `maxlen`, below which the
/// enumeration is taken to be complete.
pub fn entropy_estimate(rep: &Representation, maxlen: usize) -> Result<EntropyEstimate> {
    // counting does not need the double-double path
    let rep_s = spectrum_f64(rep, maxlen, false)?;
    entropy_from_spectrum(&rep_s)
}

pub fn entropy_from_spectrum(s: &SpectrumReport) -> Result<EntropyEstimate> {
    let p = crate::group::Presentation::new(2)?;
    let kept: Vec<&(Word, f64)> = s.entries.iter().filter(|(w, _)| p.is_dehn_reduced(w)).collect();
    if kept.len() < 50 {
        return invalid(format!("only {} classes, need at least 50", kept.len()));
    }
    let r_max = kept.iter().filter(|(w, _)| w.len() == s.maxlen).map(|(_, l)| *l).fold(f64::INFINITY, f64::min);
    if !r_max.is_finite() {
        return invalid("no classes of maximal word length");
    }
    let mut ls: Vec<f64> = kept.iter().map(|(_, l)| *l).collect();
    ls.sort_by(f64::total_cmp);
    let steps = 32;
    let mut counts = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let r = r_max * (0.5 + 0.5 * k as f64 / steps as f64);
        counts.push((r, ls.partition_point(|&l| l <= r)));
    }
    if counts[0].1 == 0 {
        return Err(Error::Numerical("no classes in the lower half of the window".into()));
    }
    let pts: Vec<(f64, f64)> = counts.iter().map(|&(r, c)| (r, (c as f64).ln())).collect();
    let h_hat = ls_slope(&pts);
    Ok(EntropyEstimate { h_hat, counts, r_max, classes: ls.len() })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Result of comparing the spectrum of `rho` to that of a Fuchsian `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub min_ratio: f64,
    pub argmin: Word,
    pub compared: usize,
    pub excluded: Vec<Word>,
}

/// `min L_rho(w) / L_j(w)` over conjugacy representatives up to `maxlen`.
pub fn domination_report(rho: &Representation, j: &MoebiusRep, maxlen: usize) -> Result<DominationReport> {
    check_maxlen(maxlen)?;
    if rho.genus != 2 {
        return invalid("domination is compared against a genus-2 Fuchsian group");
    }
    let imgs = hp_letter_images(rho);
    let gens: Vec<(HpMat, Matrix2<f64>)> = imgs
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let g = j.gens[k / 2];
            (m, if k % 2 == 0 { g } else { sl2_inverse(&g) })
        })
        .collect();
    debug_assert_eq!(letter_rank(-1), 1);
    let mul = |a: &(HpMat, Matrix2<f64>), b: &(HpMat, Matrix2<f64>)| (a.0.mul(&b.0), a.1 * b.1);
    let res = for_each_class(&rho.presentation(), maxlen, true, &gens, &mul, &|_, (m, s)| {
        let l = hp_length(m);
        let t = s.trace().abs();
        let lj = if t > 2.0 { 2.0 * (t / 2.0).acosh() } else { 0.0 };
        Some((l, lj))
    });
    let mut best = (f64::INFINITY, Word::empty());
    let mut excluded = Vec::new();
    let mut compared = 0;
    for (w, (l, lj)) in res {
        if !l.loxodromic || lj < LOX_TOL {
            excluded.push(w);
            continue;
        }
        compared += 1;
        let r = l.value / lj;
        if r < best.0 {
            best = (r, w);
        }
    }
    if compared == 0 {
        return Err(Error::NonLoxodromic("no loxodromic words to compare".into()));
    }
    Ok(DominationReport { min_ratio: best.0, argmin: best.1, compared, excluded })
}

/// `sinh(L(w1)/2) sinh(L(w2)/2)` for a registered intersecting pair.
pub fn collar_check(rep: &Representation, w1: &Word, w2: &Word) -> Result<(f64, bool)> {
    if !rep.presentation().is_registered_intersecting(w1, w2) {
        return invalid(format!("({w1}, {w2}) is not a registered intersecting pair"));
    }
    let l1 = loxodromic_length(rep, w1)?;
    let l2 = loxodromic_length(rep, w2)?;
    let lhs = (l1 / 2.0).sinh() * (l2 / 2.0).sinh();
    Ok((lhs, lhs > 1.0))
}

/// True when `span(xi_plus, xi_minus)` has signature (1,0,1).
pub fn pair_signature_ok(bp: &BoundaryPair) -> Result<bool> {
    let s = Subspace::new(vec![bp.xi_plus.rep.clone(), bp.xi_minus.rep.clone()], 1e-9)?;
    let sig = signature(&s, 1e-9)?;
    Ok(sig.pos == 1 && sig.neg == 1 && sig.null == 0 && q_eval(&bp.xi_plus.rep).abs() < 1e-9)
}
