//! Discrete equivariant maximal surfaces over the subdivided octagon.
//!
//! The fundamental domain is the regular octagon of the base Fuchsian group,
//! cut into eight fan triangles around its center and refined by midpoint
//! subdivision. Boundary vertices are glued through the side pairings, so the
//! unknowns are one position per vertex of the quotient mesh; every disc
//! vertex is `rho(deck) X` for its class representative `X`.

mod diagnostics;
mod induced;

pub use diagnostics::*;
pub use induced::*;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{q_eval, qdot};
use crate::error::{invalid, Error, Result};
use crate::group::Word;
use crate::reps::{fuchsian_octagon, from_row_major, octagon_circumradius, so21, veronese, MoebiusRep, Provenance, Representation, SIDE_MAPS};
use crate::spaces::PointH;

/// Gluing of side `from` onto side `to` by the generator `word`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub from: usize,
    pub to: usize,
    pub word: Word,
}

/// Edge of the quotient mesh from class `a` to the lift `rho(deck) X_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientEdge {
    pub a: usize,
    pub b: usize,
    pub deck: Word,
    pub weight: f64,
}

/// Subdivided octagon with its gluing data and current positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalMesh {
    pub n: usize,
    pub subdivision: usize,
    /// Lifts of all disc vertices; boundary vertices appear once per side.
    pub vertices: Vec<PointH>,
    pub triangles: Vec<[usize; 3]>,
    #[serde(rename = "pairings")]
    pub boundary_pairings: Vec<Pairing>,
    /// Poincare disc coordinates of the reference octagon.
    pub reference_domain: Vec<[f64; 2]>,
    /// The same vertices on the hyperboloid in R^{2,1}.
    pub reference: Vec<[f64; 3]>,
    /// `(v, v', generator)` with `X_{v'} = rho(generator) X_v`.
    pub vertex_pairs: Vec<(usize, usize, usize)>,
    pub class_of: Vec<usize>,
    pub class_rep: Vec<usize>,
    /// `X_i = rho(deck_i) X_{class_rep[class_of[i]]}`.
    pub deck: Vec<Word>,
    pub edges: Vec<QuotientEdge>,
    /// Barycentric reference area per class.
    pub ref_area: Vec<f64>,
    /// Largest reference edge length.
    pub h: f64,
}

pub(crate) fn q3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] - a[2] * b[2]
}

pub(crate) fn hdist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (-q3(a, b)).max(1.0).acosh()
}

/// Coordinate-wise equality up to 1e-9 relative to the point's size.
pub(crate) fn close3(a: &[f64; 3], b: &[f64; 3]) -> bool {
    let scale = a[2].abs().max(1.0);
    (0..3).all(|k| (a[k] - b[k]).abs() < 1e-9 * scale)
}

fn hyperboloid(r: f64, phi: f64) -> [f64; 3] {
    [r.sinh() * phi.cos(), r.sinh() * phi.sin(), r.cosh()]
}

fn midpoint3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let k = (-q3(&s, &s)).sqrt();
    [s[0] / k, s[1] / k, s[2] / k]
}

fn apply3(m: &Matrix3<f64>, y: &[f64; 3]) -> [f64; 3] {
    let v = m * Vector3::new(y[0], y[1], y[2]);
    [v[0], v[1], v[2]]
}

fn inverse3(m: &Matrix3<f64>) -> Matrix3<f64> {
    // q-adjoint Q m^T Q for q = diag(1, 1, -1)
    Matrix3::from_fn(|r, c| if (r == 2) == (c == 2) { m[(c, r)] } else { -m[(c, r)] })
}

pub(crate) fn so21_of(j: &MoebiusRep, w: &Word) -> Matrix3<f64> {
    so21(&j.evaluate(w))
}

/// Euclidean angles and Heron area of a triangle with side lengths `l`
/// (`l[k]` opposite corner `k`).
pub(crate) fn triangle_angles(l: [f64; 3]) -> Option<([f64; 3], f64)> {
    let s = 0.5 * (l[0] + l[1] + l[2]);
    let a2 = s * (s - l[0]) * (s - l[1]) * (s - l[2]);
    if !(a2 > 0.0) {
        return None;
    }
    let area = a2.sqrt();
    let ang = std::array::from_fn(|k| {
        let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
        ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0).acos()
    });
    Some((ang, area))
}

struct Combinatorics {
    reference: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    sides: Vec<u8>,
}

fn subdivided_octagon(level: usize) -> Combinatorics {
    let rr = octagon_circumradius();
    let mut reference = vec![[0.0, 0.0, 1.0]];
    let mut sides = vec![0u8];
    for k in 0..8 {
        reference.push(hyperboloid(rr, (2 * k + 1) as f64 * std::f64::consts::PI / 8.0));
        // corner k closes side k and opens side k+1
        sides.push((1u8 << k) | (1u8 << ((k + 1) % 8)));
    }
    let mut triangles: Vec<[usize; 3]> = (0..8).map(|k| [0, 1 + (k + 7) % 8, 1 + k]).collect();
    for _ in 0..level {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, reference: &mut Vec<[f64; 3]>, sides: &mut Vec<u8>| {
            let key = (a.min(b), a.max(b));
            *mids.entry(key).or_insert_with(|| {
                reference.push(midpoint3(&reference[a], &reference[b]));
                sides.push(sides[a] & sides[b]);
                reference.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * triangles.len());
        for t in &triangles {
            let [a, b, c] = *t;
            let ab = mid(a, b, &mut reference, &mut sides);
            let bc = mid(b, c, &mut reference, &mut sides);
            let ca = mid(c, a, &mut reference, &mut sides);
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        triangles = next;
    }
    Combinatorics { reference, triangles, sides }
}

/// Lawson flips of interior disc edges until every opposite angle pair, with
/// the Euclidean law on hyperbolic lengths, sums to at most pi. Side edges of
/// the octagon are never flipped, so the gluing is untouched.
fn delaunay_flips(reference: &[[f64; 3]], mut tris: Vec<[usize; 3]>) -> Vec<[usize; 3]> {
    let klein = |v: usize| [reference[v][0] / reference[v][2], reference[v][1] / reference[v][2]];
    let ccw = |a: usize, b: usize, c: usize| {
        let (p, q, r) = (klein(a), klein(b), klein(c));
        (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]) > 0.0
    };
    let opposite_angle = |a: usize, b: usize, c: usize| {
        let (x, y, z) = (hdist3(&reference[b], &reference[c]), hdist3(&reference[a], &reference[c]), hdist3(&reference[a], &reference[b]));
        ((x * x + y * y - z * z) / (2.0 * x * y)).clamp(-1.0, 1.0).acos()
    };
    let mut owner: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (k, t) in tris.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            owner.entry((a.min(b), a.max(b))).or_default().push(k);
        }
    }
    let mut queue: Vec<(usize, usize)> = owner.iter().filter(|(_, v)| v.len() == 2).map(|(e, _)| *e).collect();
    queue.sort_unstable();
    let third = |t: &[usize; 3], a: usize, b: usize| t.iter().copied().find(|&v| v != a && v != b).expect("triangle has three vertices");
    let mut budget = 100 * tris.len();
    while let Some((a, b)) = queue.pop() {
        if budget == 0 {
            break;
        }
        budget -= 1;
        let Some(ts) = owner.get(&(a, b)).filter(|v| v.len() == 2).cloned() else { continue };
        let (t1, t2) = (ts[0], ts[1]);
        let (c, d) = (third(&tris[t1], a, b), third(&tris[t2], a, b));
        if opposite_angle(a, b, c) + opposite_angle(a, b, d) <= std::f64::consts::PI + 1e-12 {
            continue;
        }
        // orient so that a, d, b, c runs counterclockwise
        let (a, b) = if ccw(a, b, c) { (a, b) } else { (b, a) };
        if !(ccw(a, d, c) && ccw(d, b, c)) {
            continue;
        }
        tris[t1] = [a, d, c];
        tris[t2] = [d, b, c];
        owner.remove(&(a.min(b), a.max(b)));
        owner.insert((c.min(d), c.max(d)), vec![t1, t2]);
        for (x, y, old, new) in [(a, d, t2, t1), (d, b, t2, t2), (b, c, t1, t2), (c, a, t1, t1)] {
            let key = (x.min(y), x.max(y));
            if let Some(v) = owner.get_mut(&key) {
                for k in v.iter_mut() {
                    if *k == old {
                        *k = new;
                    }
                }
                if v.len() == 2 {
                    queue.push(key);
                }
            }
        }
    }
    tris
}

/// Orthonormal tangent basis of H^2 at `y`.
fn tangent_basis3(y: &[f64; 3]) -> [[f64; 3]; 2] {
    let proj = |e: [f64; 3]| {
        let c = q3(&e, y);
        [e[0] + c * y[0], e[1] + c * y[1], e[2] + c * y[2]]
    };
    let u = proj([1.0, 0.0, 0.0]);
    let nu = q3(&u, &u).sqrt();
    let t1 = [u[0] / nu, u[1] / nu, u[2] / nu];
    let v = proj([0.0, 1.0, 0.0]);
    let c = q3(&v, &t1);
    let v = [v[0] - c * t1[0], v[1] - c * t1[1], v[2] - c * t1[2]];
    let nv = q3(&v, &v).sqrt();
    [t1, [v[0] / nv, v[1] / nv, v[2] / nv]]
}

impl FundamentalMesh {
    /// Reference mesh with the positions of the totally geodesic Fuchsian
    /// surface in H^{2,n}.
    pub fn reference_mesh(n: usize, subdivision: usize) -> Result<Self> {
        if !(1..=6).contains(&subdivision) {
            return invalid(format!("subdivision {subdivision} outside 1..=6"));
        }
        let j = fuchsian_octagon()?;
        let Combinatorics { reference, triangles, sides } = subdivided_octagon(subdivision);
        let triangles = delaunay_flips(&reference, triangles);
        let nv = reference.len();

        let mut vertex_pairs = Vec::new();
        let mut boundary_pairings = Vec::new();
        for (g, &(from, to)) in SIDE_MAPS.iter().enumerate() {
            let m = so21(&j.gens[g]);
            boundary_pairings.push(Pairing { from, to, word: Word::new(&[g as i8 + 1]) });
            let targets: Vec<usize> = (0..nv).filter(|&v| sides[v] >> to & 1 == 1).collect();
            for v in (0..nv).filter(|&v| sides[v] >> from & 1 == 1) {
                let y = apply3(&m, &reference[v]);
                let hit = targets.iter().copied().find(|&t| close3(&y, &reference[t]));
                match hit {
                    Some(t) => vertex_pairs.push((v, t, g)),
                    None => return Err(Error::Invariant(format!("side pairing {g} misses vertex {v}"))),
                }
            }
        }

        // classes and deck words by breadth-first search over the gluing
        let mut adj: Vec<Vec<(usize, i8)>> = vec![Vec::new(); nv];
        for &(v, t, g) in &vertex_pairs {
            adj[v].push((t, g as i8 + 1));
            adj[t].push((v, -(g as i8 + 1)));
        }
        let mut class_of = vec![usize::MAX; nv];
        let mut deck = vec![Word::empty(); nv];
        let mut class_rep = Vec::new();
        for s in 0..nv {
            if class_of[s] != usize::MAX {
                continue;
            }
            let c = class_rep.len();
            class_rep.push(s);
            class_of[s] = c;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &(t, l) in &adj[v] {
                    if class_of[t] == usize::MAX {
                        class_of[t] = c;
                        deck[t] = Word::new(&[l]).concat(&deck[v]);
                        queue.push_back(t);
                    }
                }
            }
        }
        let nc = class_rep.len();
        let deck_m: Vec<Matrix3<f64>> = deck.iter().map(|w| so21_of(&j, w)).collect();

        // cotangent weights of the reference metric, merged over the gluing
        let mut edges: Vec<QuotientEdge> = Vec::new();
        let mut edge_pos: Vec<[[f64; 3]; 2]> = Vec::new();
        let mut by_pair: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut ref_area = vec![0.0; nc];
        let mut h: f64 = 0.0;
        for t in &triangles {
            let l: [f64; 3] = std::array::from_fn(|k| hdist3(&reference[t[(k + 1) % 3]], &reference[t[(k + 2) % 3]]));
            h = h.max(l[0]).max(l[1]).max(l[2]);
            let (ang, area) = triangle_angles(l).ok_or_else(|| Error::Invariant("degenerate reference triangle".into()))?;
            for k in 0..3 {
                ref_area[class_of[t[k]]] += area / 3.0;
                let (mut i, mut k2) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                if class_of[i] > class_of[k2] {
                    std::mem::swap(&mut i, &mut k2);
                }
                let (a, b) = (class_of[i], class_of[k2]);
                if a == b {
                    return Err(Error::Invariant("quotient edge is a loop".into()));
                }
                let dw = deck[i].inverse().concat(&deck[k2]);
                let pos = apply3(&inverse3(&deck_m[i]), &reference[k2]);
                let back = apply3(&inverse3(&deck_m[k2]), &reference[i]);
                let w = 0.5 / ang[k].tan();
                let list = by_pair.entry((a, b)).or_default();
                match list.iter().copied().find(|&e| close3(&edge_pos[e][0], &pos)) {
                    Some(e) => edges[e].weight += w,
                    None => {
                        list.push(edges.len());
                        edges.push(QuotientEdge { a, b, deck: dw, weight: w });
                        edge_pos.push([pos, back]);
                    }
                }
            }
        }
        balance_weights(&mut edges, &edge_pos, &reference, &class_rep)?;
        // side edges keep some negative weights; the averages must stay positive
        let mut total = vec![0.0; nc];
        for e in &edges {
            total[e.a] += e.weight;
            total[e.b] += e.weight;
        }
        if let Some(c) = total.iter().position(|t| !(*t > 0.0)) {
            return Err(Error::Invariant(format!("class {c} has non-positive total weight")));
        }
        let d = n + 3;
        let vertices = reference
            .iter()
            .map(|y| {
                let mut v = DVector::zeros(d);
                v.rows_mut(0, 3).copy_from_slice(y);
                PointH { rep: v }
            })
            .collect();
        let reference_domain = reference.iter().map(|y| [y[0] / (1.0 + y[2]), y[1] / (1.0 + y[2])]).collect();
        Ok(FundamentalMesh {
            n,
            subdivision,
            vertices,
            triangles,
            boundary_pairings,
            reference_domain,
            reference,
            vertex_pairs,
            class_of,
            class_rep,
            deck,
            edges,
            ref_area,
            h,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_rep.len()
    }

    pub fn dim(&self) -> usize {
        self.n + 3
    }

    /// Positions of the class representatives.
    pub fn class_positions(&self) -> Vec<DVector<f64>> {
        self.class_rep.iter().map(|&r| self.vertices[r].rep.clone()).collect()
    }

    /// Rebuilds every disc vertex from class positions through the deck words.
    pub fn with_class_positions(&self, rep: &Representation, pos: &[DVector<f64>]) -> FundamentalMesh {
        let mut out = self.clone();
        let decks = DeckCache::new(self, rep);
        for (i, v) in out.vertices.iter_mut().enumerate() {
            v.rep = &decks.vertex[i] * &pos[self.class_of[i]];
        }
        out
    }

    /// `max |X_{v'} - rho(g) X_v| / max(1, |X_v|)` over glued vertex pairs, up to sign.
    pub fn pairing_residual(&self, rep: &Representation) -> f64 {
        let gens = &rep.gen_images;
        self.vertex_pairs
            .iter()
            .map(|&(v, t, g)| {
                let x = &self.vertices[v].rep;
                let y = &gens[g] * x;
                let z = &self.vertices[t].rep;
                (&y - z).amax().min((&y + z).amax()) / x.amax().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|q(X) + 1|` over the vertices.
    pub fn quadric_residual(&self) -> f64 {
        self.vertices.iter().map(|v| (q_eval(&v.rep) + 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Minimal relative change of the cotangent weights that makes the reference
/// mesh an exact critical point: at every class the weighted sum of
/// neighbors must be parallel to the vertex.
fn balance_weights(edges: &mut [QuotientEdge], edge_pos: &[[[f64; 3]; 2]], reference: &[[f64; 3]], class_rep: &[usize]) -> Result<()> {
    let nc = class_rep.len();
    let frames: Vec<[[f64; 3]; 2]> = class_rep.iter().map(|&r| tangent_basis3(&reference[r])).collect();
    // column e of the constraint matrix: two entries at class a, two at class b
    let cols: Vec<[(usize, f64); 4]> = edges
        .iter()
        .zip(edge_pos)
        .map(|(e, [pb, pa_from_b])| {
            let fa = &frames[e.a];
            let fb = &frames[e.b];
            [
                (2 * e.a, q3(pb, &fa[0])),
                (2 * e.a + 1, q3(pb, &fa[1])),
                (2 * e.b, q3(pa_from_b, &fb[0])),
                (2 * e.b + 1, q3(pa_from_b, &fb[1])),
            ]
        })
        .collect();
    let w0: Vec<f64> = edges.iter().map(|e| e.weight).collect();
    let apply_a = |w: &[f64]| {
        let mut r = vec![0.0; 2 * nc];
        for (c, &x) in cols.iter().zip(w) {
            for &(i, v) in c {
                r[i] += v * x;
            }
        }
        r
    };
    let apply_at = |l: &[f64]| -> Vec<f64> { cols.iter().map(|c| c.iter().map(|&(i, v)| v * l[i]).sum()).collect() };
    let op = |l: &[f64]| {
        let t: Vec<f64> = apply_at(l).iter().zip(&w0).map(|(x, w)| x * w * w).collect();
        apply_a(&t)
    };
    // a few rounds of refinement: each solve removes the remaining imbalance
    let mut w = w0.clone();
    for _ in 0..4 {
        let b = apply_a(&w);
        let bn = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if bn < 1e-16 {
            break;
        }
        let (lam, _) = conjugate_gradient(&op, &b, 1e-3 * bn, 20 * nc);
        let dl = apply_at(&lam);
        for ((x, d), w0) in w.iter_mut().zip(dl).zip(&w0) {
            *x -= w0 * w0 * d;
        }
    }
    let res = apply_a(&w).iter().map(|x| x * x).sum::<f64>().sqrt();
    if res > 1e-13 {
        return Err(Error::Numerical(format!("weight balancing stalled at residual {res:e}")));
    }
    for (e, x) in edges.iter_mut().zip(w) {
        e.weight = x;
    }
    Ok(())
}

fn conjugate_gradient(op: &dyn Fn(&[f64]) -> Vec<f64>, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol {
            break;
        }
        let ap = op(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr2 = dot(&r, &r);
        for i in 0..n {
            p[i] = r[i] + rr2 / rr * p[i];
        }
        rr = rr2;
    }
    (x, rr.sqrt())
}

/// `rho(w)` rounded from a double-double product; deck words reach the corner
/// class through four generators, which costs three digits in f64.
pub(crate) fn deck_matrix(rep: &Representation, w: &Word) -> DMatrix<f64> {
    crate::spectrum::hp_evaluate(rep, w).to_f64()
}

/// Deck matrices of the disc vertices, for rebuilding them from class positions.
pub(crate) struct DeckCache {
    pub(crate) vertex: Vec<DMatrix<f64>>,
}

impl DeckCache {
    pub(crate) fn new(mesh: &FundamentalMesh, rep: &Representation) -> Self {
        DeckCache { vertex: mesh.deck.iter().map(|w| deck_matrix(rep, w)).collect() }
    }

    /// Disc positions, each lift on the sheet of the previous one.
    pub(crate) fn disc_positions(&self, mesh: &FundamentalMesh, pos: &[DVector<f64>]) -> Vec<DVector<f64>> {
        self.vertex
            .iter()
            .zip(&mesh.vertices)
            .zip(&mesh.class_of)
            .map(|((m, old), &c)| {
                let x = m * &pos[c];
                if qdot(x.as_slice(), old.rep.as_slice()) > 0.0 {
                    -x
                } else {
                    x
                }
            })
            .collect()
    }
}

/// Half-edges of the quotient mesh with their deck matrices.
pub(crate) struct Stars {
    /// Per class: (neighbor class, matrix index, weight).
    pub(crate) half: Vec<Vec<(usize, usize, f64)>>,
    pub(crate) mats: Vec<DMatrix<f64>>,
}

impl Stars {
    pub(crate) fn new(mesh: &FundamentalMesh, rep: &Representation) -> Self {
        let mut half = vec![Vec::new(); mesh.num_classes()];
        let mut mats = Vec::with_capacity(2 * mesh.edges.len());
        for e in &mesh.edges {
            let m = deck_matrix(rep, &e.deck);
            half[e.a].push((e.b, mats.len(), e.weight));
            half[e.b].push((e.a, mats.len() + 1, e.weight));
            let inv = crate::bilinear::q_adjoint(&m);
            mats.push(m);
            mats.push(inv);
        }
        Stars { half, mats }
    }

    /// Lifts of the neighbors of class `a` adjacent to `pos[a]`, with weights.
    pub(crate) fn neighbors(&self, a: usize, pos: &[DVector<f64>]) -> Vec<(DVector<f64>, f64)> {
        self.half[a]
            .iter()
            .map(|&(b, k, w)| {
                let y = &self.mats[k] * &pos[b];
                let y = if qdot(y.as_slice(), pos[a].as_slice()) > 0.0 { -y } else { y };
                (y, w)
            })
            .collect()
    }
}

fn weighted_sum(nbrs: &[(DVector<f64>, f64)]) -> DVector<f64> {
    let mut y = DVector::zeros(nbrs[0].0.len());
    for (v, w) in nbrs {
        y.axpy(*w, v, 1.0);
    }
    y
}

/// Exact maximal surface of a Fuchsian-locus representation: the subdivided
/// octagon in the totally geodesic H^2 of span(e1, e2, e3).
pub fn init_fuchsian_locus(rep: &Representation, subdivision: usize) -> Result<FundamentalMesh> {
    if !matches!(rep.provenance, Provenance::FuchsianLocus { .. }) {
        return invalid("init_fuchsian_locus needs a Fuchsian-locus representation");
    }
    FundamentalMesh::reference_mesh(rep.n, subdivision)
}

/// Piecewise start for a bent representation: the handle-2 half of the
/// octagon is moved by the bending element, which fixes the separating axis.
pub fn init_bent(rep: &Representation, subdivision: usize) -> Result<FundamentalMesh> {
    let Provenance::Bent { element, base, .. } = &rep.provenance else {
        return invalid("init_bent needs a bent representation");
    };
    if !matches!(**base, Provenance::FuchsianLocus { .. }) {
        return invalid("init_bent needs a bend of a Fuchsian-locus representation");
    }
    let d = rep.dim();
    let c = from_row_major(d, element)?;
    let mut mesh = FundamentalMesh::reference_mesh(rep.n, subdivision)?;
    let nrm = crate::reps::curve_normal(rep)?;
    let n3 = [nrm[0], nrm[1], nrm[2]];
    // orient the normal toward handle 2, which owns side 6
    let probe = hyperboloid(crate::reps::octagon_inradius(), 1.5 * std::f64::consts::PI);
    let side = q3(&probe, &n3).signum();
    for (v, y) in mesh.vertices.iter_mut().zip(&mesh.reference) {
        if q3(y, &n3) * side > 1e-12 {
            v.rep = &c * &v.rep;
        }
    }
    Ok(mesh)
}

/// Veronese image of the reference octagon for the irreducible representation.
pub fn init_irreducible(rep: &Representation) -> Result<FundamentalMesh> {
    init_irreducible_at(rep, 4)
}

pub fn init_irreducible_at(rep: &Representation, subdivision: usize) -> Result<FundamentalMesh> {
    if rep.provenance != Provenance::Irreducible {
        return invalid("init_irreducible needs the irreducible representation");
    }
    let mut mesh = FundamentalMesh::reference_mesh(rep.n, subdivision)?;
    for (v, y) in mesh.vertices.iter_mut().zip(&mesh.reference) {
        v.rep = veronese(&DVector::from_column_slice(y))?;
    }
    Ok(mesh)
}

/// Initial mesh chosen from the provenance of `rep`.
pub fn init_mesh(rep: &Representation, subdivision: usize) -> Result<FundamentalMesh> {
    match &rep.provenance {
        Provenance::FuchsianLocus { .. } => init_fuchsian_locus(rep, subdivision),
        Provenance::Bent { .. } => init_bent(rep, subdivision),
        Provenance::Irreducible => init_irreducible_at(rep, subdivision),
        Provenance::Custom => invalid("no surface initialization for custom representations"),
    }
}

/// Per-iteration record of a relaxation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelaxLog {
    pub energy: Vec<f64>,
    /// Area-weighted L2 norm of the tension, used for the line search.
    pub merit: Vec<f64>,
    pub tension: Vec<f64>,
    pub steps: Vec<f64>,
    pub max_motion: f64,
    pub iterations: usize,
}

/// Dirichlet energy `1/2 sum w_e q(X_a - rho(g) X_b)`.
pub(crate) fn energy(stars: &Stars, pos: &[DVector<f64>]) -> f64 {
    let mut e = 0.0;
    for a in 0..pos.len() {
        for (y, w) in stars.neighbors(a, pos) {
            e += 0.25 * w * q_eval(&(&pos[a] - y));
        }
    }
    e
}

/// Jacobi relaxation of the discrete harmonic map flow.
pub fn relax(mesh: &FundamentalMesh, rep: &Representation, iters: usize, step: f64) -> Result<FundamentalMesh> {
    relax_logged(mesh, rep, iters, step).map(|(m, _)| m)
}

pub fn relax_logged(mesh: &FundamentalMesh, rep: &Representation, iters: usize, step: f64) -> Result<(FundamentalMesh, RelaxLog)> {
    if !(step > 0.0 && step.is_finite()) {
        return invalid(format!("step {step} must be positive and finite"));
    }
    if rep.dim() != mesh.dim() {
        return Err(Error::DimensionMismatch(mesh.dim(), rep.dim()));
    }
    let stars = Stars::new(mesh, rep);
    let decks = DeckCache::new(mesh, rep);
    let mut cur = mesh.clone();
    let mut pos = mesh.class_positions();
    cur.vertices.iter_mut().zip(decks.disc_positions(mesh, &pos)).for_each(|(v, x)| v.rep = x);
    if let Some(t) = first_timelike_triangle(&cur) {
        return Err(Error::Invariant(format!("initial triangle {t} is not space-like")));
    }
    let mut log = RelaxLog::default();
    let (mut merit, tmax) = tension_merit(&cur, &stars, &pos)?;
    log.merit.push(merit);
    log.tension.push(tmax);
    log.energy.push(energy(&stars, &pos));
    let nc = pos.len();
    let mut s = step;
    let min_step = step / 1024.0;
    for _ in 0..iters {
        let targets: Vec<DVector<f64>> = (0..nc)
            .into_par_iter()
            .map(|a| {
                let y = weighted_sum(&stars.neighbors(a, &pos));
                let y = y.clone() / (-q_eval(&y)).sqrt();
                if qdot(y.as_slice(), pos[a].as_slice()) > 0.0 {
                    -y
                } else {
                    y
                }
            })
            .collect();
        let mut accepted = false;
        loop {
            // steps above 1 extrapolate and can leave the quadric
            let cand: Vec<DVector<f64>> = pos.iter().zip(&targets).map(|(p, t)| p * (1.0 - s) + t * s).collect();
            let off = cand.iter().position(|v| !(q_eval(v) < 0.0));
            let cand: Vec<DVector<f64>> = cand.into_iter().map(|v| v.clone() / (-q_eval(&v)).abs().sqrt()).collect();
            let mut trial = cur.clone();
            let bad = match off {
                Some(c) => Some(trial.triangles.iter().position(|t| t.iter().any(|&v| trial.class_of[v] == c)).unwrap_or(0)),
                None => {
                    trial.vertices.iter_mut().zip(decks.disc_positions(&cur, &cand)).for_each(|(v, x)| v.rep = x);
                    first_timelike_triangle(&trial)
                }
            };
            let spacelike = bad.is_none();
            let m = if spacelike { tension_merit(&trial, &stars, &cand).ok() } else { None };
            if let Some((mv, tm)) = m {
                if mv <= merit {
                    let motion = pos.iter().zip(&cand).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
                    log.max_motion = log.max_motion.max(motion);
                    merit = mv;
                    pos = cand;
                    cur = trial;
                    log.merit.push(mv);
                    log.tension.push(tm);
                    log.energy.push(energy(&stars, &pos));
                    log.steps.push(s);
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
            if s < min_step {
                if let Some(t) = bad {
                    let [a, b, c] = trial.triangles[t];
                    return Err(Error::Numerical(format!(
                        "relaxation step makes triangle {t} (vertices {a}, {b}, {c}) time-like even at the smallest step"
                    )));
                }
                break;
            }
        }
        if !accepted {
            // the merit no longer decreases at any step: converged to rounding
            break;
        }
        log.iterations += 1;
        s = (2.0 * s).min(step);
    }
    Ok((cur, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::{bend_fuchsian, fuchsian_locus, irr_so23, trivial_alpha};

    fn fl(n: usize) -> Representation {
        fuchsian_locus(&fuchsian_octagon().unwrap(), &trivial_alpha(n)).unwrap()
    }

    #[test]
    fn octagon_mesh_is_a_genus_two_surface() {
        for lvl in 1..=3 {
            let m = init_fuchsian_locus(&fl(2), lvl).unwrap();
            let (v, e, f) = (m.num_classes() as i64, m.edges.len() as i64, m.triangles.len() as i64);
            assert_eq!(v - e + f, -2, "level {lvl}");
            assert_eq!(f, 8 * 4i64.pow(lvl as u32));
            let corner = m.class_of[1];
            assert_eq!(m.class_of.iter().filter(|&&c| c == corner).count(), 8);
        }
    }

    #[test]
    fn deck_words_reproduce_the_disc() {
        let rep = fl(2);
        let m = init_fuchsian_locus(&rep, 3).unwrap();
        assert!(m.pairing_residual(&rep) < 1e-12);
        let rebuilt = m.with_class_positions(&rep, &m.class_positions());
        for (a, b) in rebuilt.vertices.iter().zip(&m.vertices) {
            assert!((&a.rep - &b.rep).amax() < 1e-12);
        }
        assert!(m.vertices.iter().all(|v| v.rep.rows(3, 2).amax() == 0.0));
    }

    #[test]
    fn fuchsian_locus_is_a_fixed_point() {
        let rep = fl(2);
        let m = init_fuchsian_locus(&rep, 3).unwrap();
        assert!(tension_residual(&m, &rep).unwrap() < 1e-10);
        let (r, log) = relax_logged(&m, &rep, 20, 1.0).unwrap();
        assert!(log.max_motion < 1e-9, "{}", log.max_motion);
        assert!(r.quadric_residual() < 1e-10);
        assert!(hopf_residual(&m) < 1e-8);
    }

    #[test]
    fn bent_relaxation_reduces_tension() {
        let bent = bend_fuchsian(&fl(2), 0.3).unwrap();
        let m = init_bent(&bent, 2).unwrap();
        assert!(m.pairing_residual(&bent) < 1e-10);
        let t0 = tension_residual(&m, &bent).unwrap();
        let (r, log) = relax_logged(&m, &bent, 300, 1.0).unwrap();
        let t1 = tension_residual(&r, &bent).unwrap();
        assert!(t1 < t0 / 10.0, "{t0} -> {t1}");
        assert!(log.merit.windows(2).all(|p| p[1] <= p[0]));
        assert!(r.quadric_residual() < 1e-10);
        assert!(r.pairing_residual(&bent) < 1e-9);
        assert!(first_timelike_triangle(&r).is_none());
    }

    #[test]
    fn veronese_start_is_equivariant() {
        let rep = irr_so23(&fuchsian_octagon().unwrap()).unwrap();
        let m = init_irreducible_at(&rep, 2).unwrap();
        assert!(m.pairing_residual(&rep) < 1e-9);
        assert!(first_timelike_triangle(&m).is_none());
        // the Veronese surface is not maximal; relaxation still makes progress
        let t0 = tension_residual(&m, &rep).unwrap();
        let r = relax(&m, &rep, 50, 1.0).unwrap();
        assert!(tension_residual(&r, &rep).unwrap() < t0);
    }

    #[test]
    fn provenance_and_step_are_checked() {
        let rep = irr_so23(&fuchsian_octagon().unwrap()).unwrap();
        assert!(init_fuchsian_locus(&rep, 2).is_err());
        assert!(init_bent(&fl(2), 2).is_err());
        let m = init_fuchsian_locus(&fl(2), 1).unwrap();
        assert!(relax(&m, &fl(2), 1, 0.0).is_err());
        assert!(relax(&m, &fl(2), 1, f64::NAN).is_err());
        let bent = crate::reps::bend_fuchsian(&fl(2), 0.3).unwrap();
        let b = init_bent(&bent, 1).unwrap();
        let e = relax(&b, &bent, 1, 1e6).err().expect("absurd step must abort").to_string();
        assert!(e.contains("triangle"), "{e}");
        assert!(FundamentalMesh::reference_mesh(2, 0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let rep = fl(1);
        let m = init_fuchsian_locus(&rep, 1).unwrap();
        let res = surface_residuals(&m, &rep).unwrap();
        let s = m.to_json(&res).unwrap();
        assert!(s.contains("\"pairings\"") && s.contains("\"residuals\""));
        let (back, r2) = FundamentalMesh::from_json(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(r2, res);
    }
}
