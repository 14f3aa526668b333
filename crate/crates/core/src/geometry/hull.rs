//! Lower convex hull of lifted points, built as an incremental regular
//! triangulation of their projections.
//!
//! The triangulation is closed with an infinite vertex so every triangle has
//! three neighbors. A new point removes the connected set of triangles whose
//! lifted plane passes above it and is joined to the boundary of that cavity.
//! Points above the current hull are hidden and never appear in the output.

use std::collections::{HashMap, HashSet};

use super::{GeometryError, PREDICATE_EPS};
use crate::Point3;

const INF: usize = usize::MAX;

/// Faces of the lower hull (counter-clockwise in projection) and the
/// undirected edges between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerHull {
    pub faces: Vec<[usize; 3]>,
    /// Sorted `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// `false` for points strictly above the hull.
    pub on_hull: Vec<bool>,
}

impl LowerHull {
    /// Hull neighbors of every point.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.on_hull.len()];
        for &(i, j) in &self.edges {
            nb[i].push(j);
            nb[j].push(i);
        }
        nb
    }
}

#[derive(Debug, Clone)]
struct Tri {
    v: [usize; 3],
    /// `n[k]` is across the edge opposite `v[k]`.
    n: [usize; 3],
    alive: bool,
}

impl Tri {
    fn is_infinite(&self) -> bool {
        self.v.contains(&INF)
    }
}

#[inline]
fn orient(a: Point3, b: Point3, c: Point3) -> i8 {
    let l = (b[0] - a[0]) * (c[1] - a[1]);
    let r = (b[1] - a[1]) * (c[0] - a[0]);
    let det = l - r;
    let bound = PREDICATE_EPS * (l.abs() + r.abs());
    if det > bound {
        1
    } else if det < -bound {
        -1
    } else {
        0
    }
}

/// `+1` when `q` lies strictly below the plane through `a, b, c` (CCW).
#[inline]
fn below(a: Point3, b: Point3, c: Point3, q: Point3) -> i8 {
    let (ax, ay, az) = (a[0] - q[0], a[1] - q[1], a[2] - q[2]);
    let (bx, by, bz) = (b[0] - q[0], b[1] - q[1], b[2] - q[2]);
    let (cx, cy, cz) = (c[0] - q[0], c[1] - q[1], c[2] - q[2]);
    let m_a = bx * cy - by * cx;
    let m_b = cx * ay - cy * ax;
    let m_c = ax * by - ay * bx;
    let det = az * m_a + bz * m_b + cz * m_c;
    let perm = az.abs() * ((bx * cy).abs() + (by * cx).abs())
        + bz.abs() * ((cx * ay).abs() + (cy * ax).abs())
        + cz.abs() * ((ax * by).abs() + (ay * bx).abs());
    let bound = PREDICATE_EPS * perm;
    if det > bound {
        1
    } else if det < -bound {
        -1
    } else {
        0
    }
}

struct Triangulation<'a> {
    pts: &'a [Point3],
    tris: Vec<Tri>,
    last: usize,
}

impl<'a> Triangulation<'a> {
    fn p(&self, i: usize) -> Point3 {
        self.pts[i]
    }

    /// Finite edge `(u, w)` of an infinite triangle, ordered so the triangle
    /// reads `(u, w, INF)`.
    fn hull_edge(t: &Tri) -> (usize, usize) {
        let k = t.v.iter().position(|&v| v == INF).unwrap();
        (t.v[(k + 1) % 3], t.v[(k + 2) % 3])
    }

    fn conflict(&self, t: usize, q: usize) -> bool {
        let tri = &self.tris[t];
        let qp = self.p(q);
        if !tri.is_infinite() {
            let [a, b, c] = tri.v;
            return below(self.p(a), self.p(b), self.p(c), qp) > 0;
        }
        let (u, w) = Self::hull_edge(tri);
        let (up, wp) = (self.p(u), self.p(w));
        match orient(up, wp, qp) {
            1 => true,
            -1 => false,
            _ => {
                let d = [wp[0] - up[0], wp[1] - up[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = ((qp[0] - up[0]) * d[0] + (qp[1] - up[1]) * d[1]) / len2;
                if t <= 0.0 || t >= 1.0 {
                    return false;
                }
                let z = up[2] + t * (wp[2] - up[2]);
                let tol = PREDICATE_EPS * (up[2].abs().max(wp[2].abs()).max(qp[2].abs()) + 1.0);
                qp[2] < z - tol
            }
        }
    }

    fn contains(&self, t: usize, q: Point3) -> bool {
        let tri = &self.tris[t];
        if tri.is_infinite() {
            let (u, w) = Self::hull_edge(tri);
            return orient(self.p(u), self.p(w), q) > 0;
        }
        let [a, b, c] = tri.v;
        orient(self.p(b), self.p(c), q) >= 0 && orient(self.p(c), self.p(a), q) >= 0 && orient(self.p(a), self.p(b), q) >= 0
    }

    fn locate(&self, q: Point3) -> usize {
        let mut t = self.last;
        let limit = 4 * self.tris.len() + 64;
        for step in 0..limit {
            let tri = &self.tris[t];
            if tri.is_infinite() {
                let (u, w) = Self::hull_edge(tri);
                if orient(self.p(u), self.p(w), q) > 0 {
                    return t;
                }
                let k = tri.v.iter().position(|&v| v == INF).unwrap();
                t = tri.n[k];
                continue;
            }
            let mut moved = false;
            for kk in 0..3 {
                let k = (step + kk) % 3;
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if orient(self.p(a), self.p(b), q) < 0 {
                    t = tri.n[k];
                    moved = true;
                    break;
                }
            }
            if !moved {
                return t;
            }
        }
        // Walk failed to terminate; scan.
        let alive = || self.tris.iter().enumerate().filter(|(_, t)| t.alive);
        alive()
            .find(|(i, t)| !t.is_infinite() && self.contains(*i, q))
            .or_else(|| alive().find(|(i, _)| self.contains(*i, q)))
            .map(|(i, _)| i)
            .unwrap_or(self.last)
    }

    /// Wires neighbor slots among `new` triangles by matching reversed
    /// directed edges. Slots already pointing outside are left alone.
    fn link(&mut self, new: &[usize]) {
        let mut by_edge: HashMap<(usize, usize), (usize, usize)> = HashMap::with_capacity(new.len() * 3);
        for &t in new {
            let v = self.tris[t].v;
            for k in 0..3 {
                by_edge.insert((v[(k + 1) % 3], v[(k + 2) % 3]), (t, k));
            }
        }
        for &t in new {
            let v = self.tris[t].v;
            for k in 0..3 {
                if let Some(&(o, _)) = by_edge.get(&(v[(k + 2) % 3], v[(k + 1) % 3])) {
                    self.tris[t].n[k] = o;
                }
            }
        }
    }

    fn init(pts: &'a [Point3], a: usize, b: usize, c: usize) -> Self {
        let mut tr = Triangulation { pts, tris: Vec::new(), last: 0 };
        let none = [usize::MAX; 3];
        tr.tris.push(Tri { v: [a, b, c], n: none, alive: true });
        tr.tris.push(Tri { v: [b, a, INF], n: none, alive: true });
        tr.tris.push(Tri { v: [c, b, INF], n: none, alive: true });
        tr.tris.push(Tri { v: [a, c, INF], n: none, alive: true });
        tr.link(&[0, 1, 2, 3]);
        tr
    }

    /// Inserts point `q`. `Ok(false)` when it is hidden above the hull.
    fn insert(&mut self, q: usize) -> Result<bool, GeometryError> {
        let qp = self.p(q);
        let t0 = self.locate(qp);
        if !self.conflict(t0, q) {
            return Ok(false);
        }
        let mut seeds = vec![t0];
        if !self.tris[t0].is_infinite() {
            let tri = &self.tris[t0];
            for k in 0..3 {
                let (a, b) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                if orient(self.p(a), self.p(b), qp) == 0 {
                    seeds.push(tri.n[k]);
                }
            }
        }

        let mut allowed: Option<HashSet<usize>> = None;
        let (cavity, boundary) = loop {
            let cavity = self.grow(&seeds, q, allowed.as_ref());
            let in_cav: HashSet<usize> = cavity.iter().copied().collect();
            let mut boundary = Vec::new();
            let mut bad = Vec::new();
            for &t in &cavity {
                let tri = &self.tris[t];
                for k in 0..3 {
                    if in_cav.contains(&tri.n[k]) {
                        continue;
                    }
                    let (u, w) = (tri.v[(k + 1) % 3], tri.v[(k + 2) % 3]);
                    if u != INF && w != INF && orient(self.p(u), self.p(w), qp) <= 0 {
                        bad.push(t);
                    }
                    boundary.push((u, w, tri.n[k], t));
                }
            }
            if bad.is_empty() {
                break (cavity, boundary);
            }
            if bad.iter().any(|t| seeds.contains(t)) {
                return Err(GeometryError::Degenerate);
            }
            let mut keep = in_cav;
            for t in bad {
                keep.remove(&t);
            }
            allowed = Some(keep);
        };

        // A star-shaped cavity has each boundary vertex starting exactly one edge.
        let mut starts = HashSet::with_capacity(boundary.len());
        for &(u, _, _, _) in &boundary {
            if !starts.insert(u) {
                return Err(GeometryError::Degenerate);
            }
        }

        for &t in &cavity {
            self.tris[t].alive = false;
        }
        let mut new = Vec::with_capacity(boundary.len());
        for &(u, w, out, old) in &boundary {
            let id = self.tris.len();
            self.tris.push(Tri { v: [u, w, q], n: [usize::MAX, usize::MAX, out], alive: true });
            let slot = self.tris[out].n.iter().position(|&x| x == old).ok_or(GeometryError::Degenerate)?;
            self.tris[out].n[slot] = id;
            new.push(id);
        }
        self.link(&new);
        self.last = new.iter().copied().find(|&t| !self.tris[t].is_infinite()).unwrap_or(new[0]);
        Ok(true)
    }

    /// Triangles in conflict with `q`, connected to the seeds.
    fn grow(&self, seeds: &[usize], q: usize, allowed: Option<&HashSet<usize>>) -> Vec<usize> {
        let mut seen: HashSet<usize> = seeds.iter().copied().collect();
        let mut out = seeds.to_vec();
        let mut k = 0;
        while k < out.len() {
            let t = out[k];
            k += 1;
            for &nb in &self.tris[t].n {
                if seen.contains(&nb) {
                    continue;
                }
                seen.insert(nb);
                if allowed.is_none_or(|a| a.contains(&nb)) && self.conflict(nb, q) {
                    out.push(nb);
                }
            }
        }
        out
    }
}

/// Lower convex hull of `points` (with `z` the lifted coordinate).
///
/// Coplanar configurations are triangulated arbitrarily. Points strictly
/// above the hull are reported through [`LowerHull::on_hull`].
pub fn lower_convex_hull(points: &[Point3]) -> Result<LowerHull, GeometryError> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::Degenerate);
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| points[i][0].total_cmp(&points[j][0]).then(points[i][1].total_cmp(&points[j][1])));
    for w in order.windows(2) {
        let (a, b) = (points[w[0]], points[w[1]]);
        if a[0] == b[0] && a[1] == b[1] {
            return Err(GeometryError::DuplicateSites(w[0].min(w[1]), w[0].max(w[1])));
        }
    }

    let a = 0;
    let d2 = |i: usize, j: usize| (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2);
    let b = (1..n).max_by(|&i, &j| d2(a, i).total_cmp(&d2(a, j))).unwrap();
    let area = |c: usize| {
        let (pa, pb, pc) = (points[a], points[b], points[c]);
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
    };
    let c = (0..n).filter(|&c| c != a && c != b).max_by(|&i, &j| area(i).abs().total_cmp(&area(j).abs())).unwrap();
    if orient(points[a], points[b], points[c]) == 0 {
        return Err(GeometryError::Degenerate);
    }
    let (b, c) = if area(c) > 0.0 { (b, c) } else { (c, b) };

    let mut tr = Triangulation::init(points, a, b, c);
    for q in 0..n {
        if q == a || q == b || q == c {
            continue;
        }
        tr.insert(q)?;
    }

    let mut faces: Vec<[usize; 3]> = tr
        .tris
        .iter()
        .filter(|t| t.alive && !t.is_infinite())
        .map(|t| {
            // Rotate so the smallest index leads; keeps output deterministic.
            let k = (0..3).min_by_key(|&k| t.v[k]).unwrap();
            [t.v[k], t.v[(k + 1) % 3], t.v[(k + 2) % 3]]
        })
        .collect();
    faces.sort_unstable();
    let mut on_hull = vec![false; n];
    let mut edges = Vec::with_capacity(faces.len() * 3);
    for f in &faces {
        for k in 0..3 {
            on_hull[f[k]] = true;
            let (u, w) = (f[k], f[(k + 1) % 3]);
            edges.push((u.min(w), u.max(w)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(LowerHull { faces, edges, on_hull })
}
