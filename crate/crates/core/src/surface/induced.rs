//! Graph lengths on the universal cover of the meshed surface.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{DMatrix, DVector, Matrix3};

use super::{close3, q3, so21_of, FundamentalMesh};
use crate::bilinear::qdot;
use crate::error::{Error, Result};
use crate::group::{evaluate, Word};
use crate::reps::{fuchsian_octagon, octagon_circumradius, Representation};
use crate::spectrum::boundary_pair_of;

/// Corridor and graph parameters of [`induced_length_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct InducedOptions {
    /// Largest reference distance of a node from the axis.
    pub corridor: f64,
    /// Extra axial room beyond one period on each side.
    pub margin: f64,
    /// Vertices closer than this multiple of `h` in the reference are joined.
    pub shortcut: f64,
    pub max_nodes: usize,
}

impl Default for InducedOptions {
    fn default() -> Self {
        InducedOptions { corridor: 1.5, margin: 1.0, shortcut: 2.5, max_nodes: 400_000 }
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Dist(f64);
impl Eq for Dist {}
impl Ord for Dist {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Fermi coordinates `(s, r)` about an oriented geodesic of H^2.
struct Fermi {
    p: [f64; 3],
    t: [f64; 3],
    n: [f64; 3],
}

impl Fermi {
    fn of_axis(m: &Matrix3<f64>, p: [f64; 3]) -> Result<Fermi> {
        let bp = boundary_pair_of(&DMatrix::from_fn(3, 3, |a, b| m[(a, b)]), 1e-9)?;
        let xp = [bp.xi_plus.rep[0], bp.xi_plus.rep[1], bp.xi_plus.rep[2]];
        let c = q3(&xp, &p);
        let t = [xp[0] + c * p[0], xp[1] + c * p[1], xp[2] + c * p[2]];
        let nt = q3(&t, &t).sqrt();
        let mut t = [t[0] / nt, t[1] / nt, t[2] / nt];
        let mp = m * nalgebra::Vector3::new(p[0], p[1], p[2]);
        if q3(&[mp[0], mp[1], mp[2]], &t) < 0.0 {
            t = [-t[0], -t[1], -t[2]];
        }
        // the third vector of a q-orthonormal frame (p, t, n)
        let cross = [p[1] * t[2] - p[2] * t[1], p[2] * t[0] - p[0] * t[2], -(p[0] * t[1] - p[1] * t[0])];
        let nn = q3(&cross, &cross).sqrt();
        let n = [cross[0] / nn, cross[1] / nn, cross[2] / nn];
        Ok(Fermi { p, t, n })
    }

    fn coords(&self, y: &[f64; 3]) -> (f64, f64) {
        let a = -q3(y, &self.p);
        let b = q3(y, &self.t);
        ((b / a).atanh(), q3(y, &self.n).asinh())
    }
}

struct Hash {
    cell: f64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl Hash {
    fn key(&self, s: f64, r: f64) -> (i64, i64) {
        ((s / self.cell).floor() as i64, (r / self.cell).floor() as i64)
    }

    fn near(&self, s: f64, r: f64) -> impl Iterator<Item = usize> + '_ {
        let (a, b) = self.key(s, r);
        (-1..=1).flat_map(move |da| (-1..=1).filter_map(move |db| self.map.get(&(a + da, b + db)))).flatten().copied()
    }
}

struct Node {
    y: [f64; 3],
    x: DVector<f64>,
    s: f64,
    r: f64,
}

fn chord(a: &DVector<f64>, b: &DVector<f64>) -> Option<f64> {
    let c = qdot(a.as_slice(), b.as_slice()).abs();
    (c > 1.0).then(|| c.acosh())
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize, dst: usize, bound: f64) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((Dist(0.0), src)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if u == dst {
            return Some(d);
        }
        if d > dist[u] || d >= bound {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    None
}

/// Length of the shortest edge-graph loop in the free homotopy class of `w`.
pub fn induced_length(mesh: &FundamentalMesh, rep: &Representation, w: &Word) -> Result<f64> {
    induced_length_with(mesh, rep, w, &InducedOptions::default())
}

pub fn induced_length_with(mesh: &FundamentalMesh, rep: &Representation, w: &Word, opt: &InducedOptions) -> Result<f64> {
    let (_, core) = w.core_split();
    if core.is_empty() {
        return Err(Error::NonLoxodromic("empty word".into()));
    }
    let j = fuchsian_octagon()?;
    let lref = j.length(&core);
    if !(lref > 0.0) {
        return Err(Error::NonLoxodromic(format!("{w} is not hyperbolic in the reference")));
    }
    let mw = so21_of(&j, &core);
    let p0 = crate::spectrum::fuchsian_axis_point(&j, &core)?;
    let fermi = Fermi::of_axis(&mw, [p0[0], p0[1], p0[2]])?;
    let rc = octagon_circumradius();
    let (s_lo, s_hi) = (-opt.margin, lref + opt.margin);
    let keep_tile = |s: f64, r: f64| r.abs() <= opt.corridor + rc && s >= s_lo - rc && s <= s_hi + rc;

    // tiles g(O) near the axis, breadth first through the side pairings
    let gens: Vec<(Matrix3<f64>, DMatrix<f64>)> = (1..=4i8)
        .flat_map(|g| [g, -g])
        .map(|l| {
            let wl = Word::new(&[l]);
            (so21_of(&j, &wl), evaluate(rep, &wl))
        })
        .collect();
    let mut tiles: Vec<(Matrix3<f64>, DMatrix<f64>)> = vec![(Matrix3::identity(), DMatrix::identity(rep.dim(), rep.dim()))];
    let mut centers = Hash { cell: 1.0, map: HashMap::new() };
    let mut center_pos = vec![[0.0, 0.0, 1.0]];
    let (s0, r0) = fermi.coords(&center_pos[0]);
    centers.map.entry(centers.key(s0, r0)).or_default().push(0);
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        for (jm, rm) in &gens {
            let nj = tiles[k].0 * jm;
            let c = [nj[(0, 2)], nj[(1, 2)], nj[(2, 2)]];
            let (s, r) = fermi.coords(&c);
            if !keep_tile(s, r) || centers.near(s, r).any(|t| close3(&center_pos[t], &c)) {
                continue;
            }
            if tiles.len() * mesh.vertices.len() > opt.max_nodes {
                return Err(Error::Numerical(format!("path search budget exceeded for {w}")));
            }
            let id = tiles.len();
            tiles.push((nj, &tiles[k].1 * rm));
            center_pos.push(c);
            centers.map.entry(centers.key(s, r)).or_default().push(id);
            queue.push_back(id);
        }
    }

    let rs = opt.shortcut * mesh.h;
    let mut hash = Hash { cell: rs, map: HashMap::new() };
    let mut nodes: Vec<Node> = Vec::new();
    for (jm, rm) in &tiles {
        for (i, yr) in mesh.reference.iter().enumerate() {
            let v = jm * nalgebra::Vector3::new(yr[0], yr[1], yr[2]);
            let y = [v[0], v[1], v[2]];
            let (s, r) = fermi.coords(&y);
            if r.abs() > opt.corridor || s < s_lo || s > s_hi || hash.near(s, r).any(|k| close3(&nodes[k].y, &y)) {
                continue;
            }
            let id = nodes.len();
            hash.map.entry(hash.key(s, r)).or_default().push(id);
            nodes.push(Node { y, x: rm * &mesh.vertices[i].rep, s, r });
        }
    }
    let adj: Vec<Vec<(usize, f64)>> = (0..nodes.len())
        .map(|a| {
            hash.near(nodes[a].s, nodes[a].r)
                .filter(|&b| b != a && super::hdist3(&nodes[a].y, &nodes[b].y) <= rs)
                .filter_map(|b| chord(&nodes[a].x, &nodes[b].x).map(|d| (b, d)))
                .collect()
        })
        .collect();

    let mut best = f64::INFINITY;
    let starts: Vec<usize> = (0..nodes.len()).filter(|&k| nodes[k].s >= 0.0 && nodes[k].s < rs).collect();
    for z in starts {
        let v = mw * nalgebra::Vector3::new(nodes[z].y[0], nodes[z].y[1], nodes[z].y[2]);
        let ty = [v[0], v[1], v[2]];
        let (s, r) = fermi.coords(&ty);
        let Some(t) = hash.near(s, r).find(|&k| close3(&nodes[k].y, &ty)) else { continue };
        if let Some(d) = dijkstra(&adj, z, t, best) {
            best = best.min(d);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Numerical(format!("no closed path found for {w} inside the corridor")))
    }
}

/// `(chord distance, graph distance)` for pairs of disc vertices, the graph
/// joining vertices within the shortcut radius by their chords.
pub fn chord_and_graph(mesh: &FundamentalMesh, pairs: &[(usize, usize)], shortcut: f64) -> Result<Vec<(f64, f64)>> {
    let nv = mesh.vertices.len();
    let rs = shortcut * mesh.h;
    let adj: Vec<Vec<(usize, f64)>> = (0..nv)
        .map(|a| {
            (0..nv)
                .filter(|&b| b != a && super::hdist3(&mesh.reference[a], &mesh.reference[b]) <= rs)
                .filter_map(|b| chord(&mesh.vertices[a].rep, &mesh.vertices[b].rep).map(|d| (b, d)))
                .collect()
        })
        .collect();
    pairs
        .iter()
        .map(|&(a, b)| {
            let c = chord(&mesh.vertices[a].rep, &mesh.vertices[b].rep)
                .ok_or_else(|| Error::Numerical(format!("vertices {a} and {b} are not joined by a space-like chord")))?;
            let g = dijkstra(&adj, a, b, f64::INFINITY).ok_or_else(|| Error::Numerical("disc graph is disconnected".into()))?;
            Ok((c, g))
        })
        .collect()
}
