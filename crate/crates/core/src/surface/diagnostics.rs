//! Residuals, curvature, Gauss maps and the graph/separation checks.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{triangle_angles, DeckCache, FundamentalMesh, Stars};
use crate::bilinear::{gram_signature, orth_complement, q_adjoint, q_eval, qdot, Signature, Subspace};
use crate::error::{Error, Result};
use crate::reps::{fuchsian_locus, fuchsian_octagon, trivial_alpha, Representation};
use crate::spaces::{warped_chart_inv, PointEin, PointH};

fn proj(x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    // q-orthogonal projection onto x^perp for q(x) = -1
    v + x * qdot(v.as_slice(), x.as_slice())
}

/// Tangent 2-plane at `x` from weighted neighbor lifts.
///
/// With `u_b` the neighbors projected to `x^perp`, the q-self-adjoint operator
/// `v -> sum w_b q(u_b, v) u_b` has its nonzero spectrum in the symmetric
/// matrix `sqrt(w_b w_c) q(u_b, u_c)`; the two largest eigenvalues give a
/// q-orthonormal spacelike pair. Invariant under SO0 and exact on a plane.
pub fn tangent_plane(x: &DVector<f64>, nbrs: &[(DVector<f64>, f64)]) -> Result<[DVector<f64>; 2]> {
    let k = nbrs.len();
    if k < 2 {
        return Err(Error::DegenerateBasis { rank: k, dim: 2 });
    }
    let us: Vec<DVector<f64>> = nbrs.iter().map(|(y, _)| proj(x, y)).collect();
    let sw: Vec<f64> = nbrs.iter().map(|(_, w)| w.abs().sqrt()).collect();
    let s = DMatrix::from_fn(k, k, |b, c| sw[b] * sw[c] * qdot(us[b].as_slice(), us[c].as_slice()));
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if !(l2 > 1e-10 * l1.abs().max(1e-300)) {
        return Err(Error::DegenerateBasis { rank: usize::from(l1 > 0.0), dim: 2 });
    }
    let vec_of = |i: usize, l: f64| {
        let z = eig.eigenvectors.column(order[i]);
        let mut v = DVector::zeros(x.len());
        for b in 0..k {
            v.axpy(sw[b] * z[b] / l.sqrt(), &us[b], 1.0);
        }
        v
    };
    // one Gram-Schmidt pass removes the rounding of the eigensolver
    let unit = |v: DVector<f64>| {
        let n = q_eval(&v).sqrt();
        v / n
    };
    let t0 = unit(proj(x, &vec_of(0, l1)));
    let t1 = proj(x, &vec_of(1, l2));
    let t1 = unit(&t1 - &t0 * qdot(t1.as_slice(), t0.as_slice()));
    Ok([t0, t1])
}

/// Positive-definite norm of `v` in `x^perp` for the split along the tangent plane `t`.
fn split_norm(v: &DVector<f64>, t: &[DVector<f64>; 2]) -> f64 {
    let a = qdot(v.as_slice(), t[0].as_slice());
    let b = qdot(v.as_slice(), t[1].as_slice());
    (2.0 * (a * a + b * b) - q_eval(v)).max(0.0).sqrt()
}

fn class_tensions(mesh: &FundamentalMesh, stars: &Stars, pos: &[DVector<f64>]) -> Result<Vec<f64>> {
    (0..pos.len())
        .into_par_iter()
        .map(|a| {
            let nbrs = stars.neighbors(a, pos);
            let mut y = DVector::zeros(pos[a].len());
            for (v, w) in &nbrs {
                y.axpy(*w, v, 1.0);
            }
            let tau = proj(&pos[a], &y) / mesh.ref_area[a];
            let t = tangent_plane(&pos[a], &nbrs)?;
            Ok(split_norm(&tau, &t))
        })
        .collect()
}

/// Area-weighted L2 norm and maximum of the tension.
pub(crate) fn tension_merit(mesh: &FundamentalMesh, stars: &Stars, pos: &[DVector<f64>]) -> Result<(f64, f64)> {
    let t = class_tensions(mesh, stars, pos)?;
    let l2 = t.iter().zip(&mesh.ref_area).map(|(x, a)| x * x * a).sum::<f64>().sqrt();
    Ok((l2, t.iter().copied().fold(0.0, f64::max)))
}

/// Per-class tension: the part of the weighted Laplacian orthogonal to the
/// position line, divided by the barycentric area.
pub fn tension_field(mesh: &FundamentalMesh, rep: &Representation) -> Result<Vec<f64>> {
    class_tensions(mesh, &Stars::new(mesh, rep), &mesh.class_positions())
}

pub fn tension_residual(mesh: &FundamentalMesh, rep: &Representation) -> Result<f64> {
    Ok(tension_field(mesh, rep)?.into_iter().fold(0.0, f64::max))
}

/// Index of a triangle whose edge Gram is not positive definite.
pub fn first_timelike_triangle(mesh: &FundamentalMesh) -> Option<usize> {
    mesh.triangles.iter().position(|t| {
        let x = &mesh.vertices[t[0]].rep;
        let e1 = &mesh.vertices[t[1]].rep - x;
        let e2 = &mesh.vertices[t[2]].rep - x;
        let (a, b, c) = (q_eval(&e1), qdot(e1.as_slice(), e2.as_slice()), q_eval(&e2));
        !(a > 0.0 && a * c - b * b > 0.0)
    })
}

fn ref_edge_gram(mesh: &FundamentalMesh, t: &[usize; 3]) -> Matrix2<f64> {
    let r = &mesh.reference;
    let e = |k: usize| [r[t[k]][0] - r[t[0]][0], r[t[k]][1] - r[t[0]][1], r[t[k]][2] - r[t[0]][2]];
    let (e1, e2) = (e(1), e(2));
    let q = super::q3;
    Matrix2::new(q(&e1, &e1), q(&e1, &e2), q(&e1, &e2), q(&e2, &e2))
}

/// `(mu1 - mu2) / (mu1 + mu2)` for the eigenvalues of `g_ref^{-1} g`.
fn anisotropy(g_ref: &Matrix2<f64>, g: &Matrix2<f64>) -> f64 {
    let Some(inv) = g_ref.try_inverse() else { return f64::INFINITY };
    let m = inv * g;
    // (mu1 - mu2)^2 without the cancellation in tr^2 - 4 det
    let gap2 = (m[(0, 0)] - m[(1, 1)]).powi(2) + 4.0 * m[(0, 1)] * m[(1, 0)];
    gap2.max(0.0).sqrt() / m.trace().abs()
}

/// Per-triangle `|q(u_z, u_z)| / (|u_x|^2 + |u_y|^2) / 2` in the conformal
/// coordinates of the reference triangle: `2|hopf| / energy density`.
pub fn hopf_field(mesh: &FundamentalMesh) -> Vec<f64> {
    mesh.triangles
        .iter()
        .map(|t| {
            let x = &mesh.vertices[t[0]].rep;
            let e1 = &mesh.vertices[t[1]].rep - x;
            let e2 = &mesh.vertices[t[2]].rep - x;
            let g = Matrix2::new(q_eval(&e1), qdot(e1.as_slice(), e2.as_slice()), qdot(e1.as_slice(), e2.as_slice()), q_eval(&e2));
            anisotropy(&ref_edge_gram(mesh, t), &g)
        })
        .collect()
}

pub fn hopf_residual(mesh: &FundamentalMesh) -> f64 {
    hopf_field(mesh).into_iter().fold(0.0, f64::max)
}

/// Angle defect over barycentric area, per class, for arbitrary edge lengths.
pub fn angle_defect_curvature(
    triangles: &[[usize; 3]],
    class_of: &[usize],
    num_classes: usize,
    length: impl Fn(usize, usize) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut angle = vec![0.0; num_classes];
    let mut area = vec![0.0; num_classes];
    for t in triangles {
        let mut l = [0.0; 3];
        for k in 0..3 {
            l[k] = length(t[(k + 1) % 3], t[(k + 2) % 3])?;
        }
        let (ang, a) = triangle_angles(l).ok_or_else(|| Error::Numerical("degenerate triangle".into()))?;
        for k in 0..3 {
            angle[class_of[t[k]]] += ang[k];
            area[class_of[t[k]]] += a / 3.0;
        }
    }
    Ok(angle.iter().zip(&area).map(|(s, a)| (2.0 * std::f64::consts::PI - s) / a).collect())
}

/// Space-like distance `arccosh(-q(x, y))` between lifts on one sheet.
pub fn spacelike_distance(x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let c = -qdot(x.as_slice(), y.as_slice());
    if !(c > 1.0) {
        return Err(Error::Numerical(format!("chord is not space-like (-q = {c})")));
    }
    Ok(c.acosh())
}

/// Discrete Gauss curvature per class.
pub fn gauss_curvature(mesh: &FundamentalMesh) -> Result<Vec<f64>> {
    let v = &mesh.vertices;
    angle_defect_curvature(&mesh.triangles, &mesh.class_of, mesh.num_classes(), |i, j| spacelike_distance(&v[i].rep, &v[j].rep))
}

/// `C` in `eps_mesh = C h`, from the exact Fuchsian solution at subdivisions 1 to 3.
pub fn mesh_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let rep = fuchsian_locus(&fuchsian_octagon().expect("octagon"), &trivial_alpha(0)).expect("Fuchsian locus");
        (1..=3)
            .map(|lvl| {
                let m = super::init_fuchsian_locus(&rep, lvl).expect("reference mesh");
                let k = gauss_curvature(&m).expect("curvature");
                k.iter().map(|x| (x + 1.0).abs()).fold(0.0, f64::max) / m.h
            })
            .fold(0.0, f64::max)
    })
}

pub fn eps_mesh(mesh: &FundamentalMesh) -> f64 {
    mesh_constant() * mesh.h
}

/// `(F0, F1, F2)`: the point, its tangent plane and the normal complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GaussFrame {
    pub F0: PointH,
    pub F1: Subspace,
    pub F2: Subspace,
}

/// Discrete pullback of the Grassmannian metric through the tangent-plane map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrassmannReport {
    pub min_eigenvalue: f64,
    pub all_positive: bool,
    pub conformality_defect: f64,
    pub orthogonality_residual: f64,
}

fn q_orthonormal_negative(s: &Subspace) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for b in &s.basis {
        let mut v = b.clone();
        for o in &out {
            // <v, o> with q(o) = -1
            let c = -qdot(v.as_slice(), o.as_slice());
            v -= o * c;
        }
        let qv = q_eval(&v);
        if !(qv < 0.0) {
            return Err(Error::Invariant(format!("normal space is not negative definite (q = {qv})")));
        }
        out.push(v / (-qv).sqrt());
    }
    Ok(out)
}

fn frame_at(x: &DVector<f64>, nbrs: &[(DVector<f64>, f64)]) -> Result<GaussFrame> {
    let t = tangent_plane(x, nbrs)?;
    let f1 = Subspace { dim: 2, basis: t.to_vec() };
    let span = Subspace { dim: 3, basis: vec![x.clone(), t[0].clone(), t[1].clone()] };
    let f2 = orth_complement(&span, 1e-8)?;
    let f2 = Subspace { dim: f2.dim, basis: q_orthonormal_negative(&f2)? };
    Ok(GaussFrame { F0: PointH { rep: x.clone() }, F1: f1, F2: f2 })
}

/// Gauss frames per class and the Grassmannian pullback diagnostics.
pub fn gauss_maps(mesh: &FundamentalMesh, rep: &Representation) -> Result<(Vec<GaussFrame>, GrassmannReport)> {
    let stars = Stars::new(mesh, rep);
    let pos = mesh.class_positions();
    let frames: Vec<GaussFrame> = (0..pos.len()).into_par_iter().map(|a| frame_at(&pos[a], &stars.neighbors(a, &pos))).collect::<Result<_>>()?;
    let n = mesh.n;
    let mut orth: f64 = 0.0;
    for f in &frames {
        let all: Vec<&DVector<f64>> = std::iter::once(&f.F0.rep).chain(&f.F1.basis).chain(&f.F2.basis).collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let want = if i == j { if (1..3).contains(&i) { 1.0 } else { -1.0 } } else { 0.0 };
                orth = orth.max((qdot(a.as_slice(), b.as_slice()) - want).abs());
            }
        }
        let g1 = crate::bilinear::gram(&f.F1.basis);
        let g2 = crate::bilinear::gram(&f.F2.basis);
        if gram_signature(&g1, 1e-8) != Signature::new(2, 0, 0) || (n > 0 && gram_signature(&g2, 1e-8) != Signature::new(0, 0, n)) {
            return Err(Error::Invariant("Gauss frame has the wrong signature".into()));
        }
    }
    // tangent frames of the disc lifts
    let decks = DeckCache::new(mesh, rep);
    let disc_t: Vec<[DVector<f64>; 2]> = (0..mesh.vertices.len())
        .map(|i| {
            let f = &frames[mesh.class_of[i]].F1.basis;
            [&decks.vertex[i] * &f[0], &decks.vertex[i] * &f[1]]
        })
        .collect();
    let d2 = |i: usize, j: usize| {
        let mut s = 0.0;
        for a in &disc_t[i] {
            for b in &disc_t[j] {
                s += qdot(a.as_slice(), b.as_slice()).powi(2);
            }
        }
        s - 2.0
    };
    let mut min_eig = f64::INFINITY;
    let mut defect: f64 = 0.0;
    for t in &mesh.triangles {
        let (a, b, c) = (d2(t[0], t[1]), d2(t[0], t[2]), d2(t[1], t[2]));
        let off = 0.5 * (a + b - c);
        let g = Matrix2::new(a, off, off, b);
        let tr = g.trace();
        let disc = ((a - b) * (a - b) + 4.0 * off * off).sqrt();
        min_eig = min_eig.min(0.5 * (tr - disc));
        defect = defect.max(anisotropy(&ref_edge_gram(mesh, t), &g));
    }
    Ok((
        frames,
        GrassmannReport { min_eigenvalue: min_eig, all_positive: min_eig > 0.0, conformality_defect: defect, orthogonality_residual: orth },
    ))
}

/// Outcome of the three graph and separation checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub lipschitz: bool,
    /// Largest `d_S (1 + |u|^2) / (2 |du|)` over mesh edges in the probe charts.
    pub lipschitz_ratio: f64,
    pub separation: bool,
    pub separation_checked: usize,
    pub injective: bool,
    pub min_signed_area: f64,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.lipschitz && self.separation && self.injective
    }
}

/// Isometry taking `x` to e3 and its tangent plane to span(e1, e2).
fn centering(frame: &GaussFrame) -> DMatrix<f64> {
    let mut cols = vec![frame.F1.basis[0].clone(), frame.F1.basis[1].clone(), frame.F0.rep.clone()];
    cols.extend(frame.F2.basis.iter().cloned());
    q_adjoint(&DMatrix::from_columns(&cols))
}

// strict bound up to rounding; the ratio tends to 1 towards the ideal boundary
const LIPSCHITZ_MARGIN: f64 = 1e-9;

/// Largest slope ratio of the mesh edges in the warped chart centered by `a`.
pub fn chart_slope_ratio(mesh: &FundamentalMesh, a: &DMatrix<f64>) -> f64 {
    let charts: Vec<([f64; 2], DVector<f64>)> = mesh.vertices.iter().map(|v| warped_chart_inv(&(a * &v.rep))).collect();
    let mut worst: f64 = 0.0;
    for t in &mesh.triangles {
        for k in 0..3 {
            let (i, j) = (t[k], t[(k + 1) % 3]);
            let ((ui, vi), (uj, vj)) = (&charts[i], &charts[j]);
            let du = ((ui[0] - uj[0]).powi(2) + (ui[1] - uj[1]).powi(2)).sqrt();
            let ds = vi.dot(vj).clamp(-1.0, 1.0).acos();
            let r2 = (ui[0] * ui[0] + ui[1] * ui[1]).max(uj[0] * uj[0] + uj[1] * uj[1]);
            let ratio = if du > 0.0 { ds * (1.0 + r2) / (2.0 * du) } else if ds > 0.0 { f64::INFINITY } else { 0.0 };
            worst = worst.max(ratio);
        }
    }
    worst
}

/// Boundary polygon of the disc mesh: edges used by one triangle.
fn boundary_edges(tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut count: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out: Vec<(usize, usize)> = count.into_iter().filter(|(_, c)| *c == 1).map(|(e, _)| e).collect();
    out.sort_unstable();
    out
}

fn segments_cross(p: [f64; 2], q: [f64; 2], r: [f64; 2], s: [f64; 2]) -> bool {
    let o = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let (d1, d2, d3, d4) = (o(p, q, r), o(p, q, s), o(r, s, p), o(r, s, q));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Slope, separation and injectivity checks on a relaxed mesh.
pub fn surface_validation(mesh: &FundamentalMesh, rep: &Representation, boundary_samples: &[PointEin]) -> Result<ValidationReport> {
    let (frames, _) = gauss_maps(mesh, rep)?;
    let nc = mesh.num_classes();
    let probes: Vec<usize> = (0..5).map(|k| k * nc / 5).collect();
    let lipschitz_ratio = probes.iter().map(|&p| chart_slope_ratio(mesh, &centering(&frames[p]))).fold(0.0, f64::max);

    let base = &mesh.vertices[mesh.class_rep[0]].rep;
    let lifts: Vec<DVector<f64>> = boundary_samples
        .iter()
        .map(|xi| if qdot(base.as_slice(), xi.rep.as_slice()) > 0.0 { -xi.rep.clone() } else { xi.rep.clone() })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9a);
    let mut separation = !lifts.is_empty();
    for _ in 0..20 {
        let x = &mesh.vertices[rng.random_range(0..mesh.vertices.len())].rep;
        let s: Vec<f64> = lifts.iter().map(|xi| qdot(x.as_slice(), xi.as_slice())).collect();
        if !(s.iter().all(|&v| v < 0.0) || s.iter().all(|&v| v > 0.0)) {
            separation = false;
        }
    }

    let a = centering(&frames[0]);
    let u: Vec<[f64; 2]> = mesh.vertices.iter().map(|v| warped_chart_inv(&(&a * &v.rep)).0).collect();
    let signed: Vec<f64> = mesh
        .triangles
        .iter()
        .map(|t| {
            let (p, q, r) = (u[t[0]], u[t[1]], u[t[2]]);
            0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
        })
        .collect();
    let orient = signed.iter().sum::<f64>().signum();
    let min_signed_area = signed.iter().map(|s| s * orient).fold(f64::INFINITY, f64::min);
    let bnd = boundary_edges(&mesh.triangles);
    let mut simple = true;
    'outer: for (x, &(a0, a1)) in bnd.iter().enumerate() {
        for &(b0, b1) in &bnd[x + 1..] {
            if a0 == b0 || a0 == b1 || a1 == b0 || a1 == b1 {
                continue;
            }
            if segments_cross(u[a0], u[a1], u[b0], u[b1]) {
                simple = false;
                break 'outer;
            }
        }
    }
    Ok(ValidationReport {
        lipschitz: lipschitz_ratio < 1.0 - LIPSCHITZ_MARGIN,
        lipschitz_ratio,
        separation,
        separation_checked: lifts.len(),
        injective: simple && min_signed_area > 0.0,
        min_signed_area,
    })
}

/// Disc vertex pushed along a unit normal by the angle `s`, for constructing
/// violations of the slope bound.
pub fn push_vertex(mesh: &FundamentalMesh, rep: &Representation, class: usize, s: f64) -> Result<FundamentalMesh> {
    let stars = Stars::new(mesh, rep);
    let mut pos = mesh.class_positions();
    let f = frame_at(&pos[class], &stars.neighbors(class, &pos))?;
    let nrm = f.F2.basis.first().ok_or_else(|| Error::InvalidInput("n = 0 has no normal direction".into()))?;
    pos[class] = &pos[class] * s.cos() + nrm * s.sin();
    Ok(mesh.with_class_positions(rep, &pos))
}

/// Random distinct vertex pairs of the disc mesh.
pub fn random_vertex_pairs(mesh: &FundamentalMesh, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = mesh.vertices.len();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b) = (rng.random_range(0..nv), rng.random_range(0..nv));
        if mesh.class_of[a] != mesh.class_of[b] {
            out.push((a, b));
        }
    }
    out
}

/// Residuals recorded with an exported mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResiduals {
    pub tension: f64,
    pub hopf: f64,
    pub pairing: f64,
    pub quadric: f64,
    pub eps_mesh: f64,
    pub curvature_min: f64,
    pub curvature_max: f64,
}

pub fn surface_residuals(mesh: &FundamentalMesh, rep: &Representation) -> Result<SurfaceResiduals> {
    let k = gauss_curvature(mesh)?;
    Ok(SurfaceResiduals {
        tension: tension_residual(mesh, rep)?,
        hopf: hopf_residual(mesh),
        pairing: mesh.pairing_residual(rep),
        quadric: mesh.quadric_residual(),
        eps_mesh: eps_mesh(mesh),
        curvature_min: k.iter().copied().fold(f64::INFINITY, f64::min),
        curvature_max: k.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Serialize, Deserialize)]
struct SurfaceFile {
    #[serde(flatten)]
    mesh: FundamentalMesh,
    residuals: SurfaceResiduals,
}

impl FundamentalMesh {
    pub fn to_json(&self, residuals: &SurfaceResiduals) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SurfaceFile { mesh: self.clone(), residuals: residuals.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<(Self, SurfaceResiduals)> {
        let f: SurfaceFile = serde_json::from_str(s)?;
        Ok((f.mesh, f.residuals))
    }
}

/// `class,x,y,kappa` with the reference disc position of each class.
pub fn curvature_csv(mesh: &FundamentalMesh, kappa: &[f64]) -> String {
    let mut s = String::from("class,x,y,kappa\n");
    for (c, k) in kappa.iter().enumerate() {
        let p = mesh.reference_domain[mesh.class_rep[c]];
        s.push_str(&format!("{c},{},{},{k}\n", p[0], p[1]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::evaluate;
    use crate::reps::{bend_fuchsian, Provenance};
    use crate::surface::{init_bent, init_fuchsian_locus, relax};

    fn fl(n: usize) -> Representation {
        fuchsian_locus(&fuchsian_octagon().unwrap(), &trivial_alpha(n)).unwrap()
    }

    fn translated(m: &FundamentalMesh, rep: &Representation, g: &DMatrix<f64>) -> (FundamentalMesh, Representation) {
        let mut out = m.clone();
        for v in &mut out.vertices {
            v.rep = g * &v.rep;
        }
        let gi = q_adjoint(g);
        let imgs = rep.gen_images.iter().map(|x| g * x * &gi).collect();
        (out, Representation::new(rep.n, imgs, Provenance::Custom, 1e-8).unwrap())
    }

    #[test]
    fn perturbation_is_detected() {
        let rep = fl(2);
        let m = init_fuchsian_locus(&rep, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pos: Vec<DVector<f64>> = m
            .class_positions()
            .into_iter()
            .map(|x| {
                let v = &x + DVector::from_fn(x.len(), |_, _| 1e-3 * (rng.random::<f64>() - 0.5));
                PointH::normalize(v).unwrap().rep
            })
            .collect();
        let p = m.with_class_positions(&rep, &pos);
        assert!(tension_residual(&p, &rep).unwrap() > 1e-4);
    }

    fn assert_invariant(m: &FundamentalMesh, rep: &Representation, g: &DMatrix<f64>, tol: f64) {
        let (m2, rep2) = translated(m, rep, g);
        let (t1, t2) = (tension_field(m, rep).unwrap(), tension_field(&m2, &rep2).unwrap());
        for (a, b) in t1.iter().zip(&t2) {
            assert!((a - b).abs() < tol * a.max(1e-3), "{a} {b}");
        }
        for (a, b) in hopf_field(m).iter().zip(hopf_field(&m2)) {
            assert!((a - b).abs() < tol, "{a} {b}");
        }
        for (a, b) in gauss_curvature(m).unwrap().iter().zip(gauss_curvature(&m2).unwrap()) {
            assert!((a - b).abs() < tol, "{a} {b}");
        }
    }

    #[test]
    fn residuals_are_invariant() {
        let bent = bend_fuchsian(&fl(2), 0.3).unwrap();
        let m = relax(&init_bent(&bent, 2).unwrap(), &bent, 30, 1.0).unwrap();
        // quarter turns in (e1, e2) and (e4, e5) are exact in floating point
        let mut g = DMatrix::<f64>::zeros(5, 5);
        g[(0, 1)] = -1.0;
        g[(1, 0)] = 1.0;
        g[(2, 2)] = 1.0;
        g[(3, 4)] = -1.0;
        g[(4, 3)] = 1.0;
        assert_invariant(&m, &bent, &g, 1e-12);
        // rho(a1) itself: the conjugated generators carry rounding of order
        // |rho(a1)|^2 eps, which the tension amplifies by its cancellation
        let g = evaluate(&bent, &crate::group::Word::parse("a1").unwrap());
        assert_invariant(&m, &bent, &g, 1e-6);
    }

    #[test]
    fn shear_shows_up_in_hopf() {
        let rep = fl(1);
        let mut m = init_fuchsian_locus(&rep, 3).unwrap();
        let s = 0.05;
        for (v, z) in m.vertices.iter_mut().zip(&m.reference_domain) {
            let (x, y) = (z[0] + s * z[1], z[1]);
            let r2 = x * x + y * y;
            let mut p = DVector::zeros(4);
            p[0] = 2.0 * x / (1.0 - r2);
            p[1] = 2.0 * y / (1.0 - r2);
            p[2] = (1.0 + r2) / (1.0 - r2);
            v.rep = p;
        }
        let h = hopf_field(&m);
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        assert!((mean - s).abs() < 0.1 * s, "mean {mean}");
    }

    #[test]
    fn flat_fan_has_no_curvature() {
        // hexagonal fan in span(e1, e2)
        let mut pts = vec![DVector::zeros(4)];
        for k in 0..6 {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            pts.push(DVector::from_column_slice(&[a.cos(), a.sin(), 0.0, 0.0]));
        }
        let tris: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        let class_of: Vec<usize> = (0..7).collect();
        let k = angle_defect_curvature(&tris, &class_of, 7, |i, j| Ok(q_eval(&(&pts[i] - &pts[j])).sqrt())).unwrap();
        assert!(k[0].abs() < 1e-12);
    }

    #[test]
    fn fuchsian_curvature_and_frames() {
        let rep = fl(2);
        let m = init_fuchsian_locus(&rep, 3).unwrap();
        let eps = eps_mesh(&m);
        assert!(gauss_curvature(&m).unwrap().iter().all(|k| (k + 1.0).abs() <= eps));
        let (frames, g) = gauss_maps(&m, &rep).unwrap();
        assert!(g.orthogonality_residual < 1e-8 && g.all_positive);
        for f in &frames {
            assert!(f.F1.basis.iter().all(|t| t.rows(3, 2).amax() < 1e-12));
            assert_eq!(f.F2.dim, 2);
        }
    }

    #[test]
    fn validation_and_violation() {
        let rep = fl(2);
        let m = init_fuchsian_locus(&rep, 2).unwrap();
        let samples = crate::spectrum::limit_curve_samples(&rep, 3).unwrap();
        let r = surface_validation(&m, &rep, &samples).unwrap();
        assert!(r.all_pass(), "{r:?}");
        let pushed = push_vertex(&m, &rep, 10, 0.8).unwrap();
        let r = surface_validation(&pushed, &rep, &samples).unwrap();
        assert!(!r.lipschitz, "{r:?}");
    }

    #[test]
    fn induced_length_on_the_fuchsian_surface() {
        let rep = fl(0);
        let m = init_fuchsian_locus(&rep, 3).unwrap();
        let j = fuchsian_octagon().unwrap();
        for w in ["a1", "a1b1", "a1B2"] {
            let w = crate::group::Word::parse(w).unwrap();
            let l = crate::surface::induced_length(&m, &rep, &w).unwrap();
            let lj = j.length(&w);
            assert!(l >= lj * (1.0 - 1e-9) && l < lj * 1.02, "{w}: {l} vs {lj}");
        }
        let pairs = random_vertex_pairs(&m, 20, 1);
        for (c, g) in crate::surface::chord_and_graph(&m, &pairs, 2.5).unwrap() {
            assert!(c <= g + 1e-9);
        }
    }
}
