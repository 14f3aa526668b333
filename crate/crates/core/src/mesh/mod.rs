//! Indexed triangle meshes and the local differential quantities built on them.

mod image;
mod io;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::{Point2, Point3};

pub use image::{image_to_mesh, GrayImage};
pub use io::{load_mesh, save_mesh, MeshFormat};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    InvalidIndex { face: usize, index: usize, count: usize },
    #[error("face {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("edge ({0}, {1}) has more than two incident faces")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) is traversed twice in the same direction; faces are not consistently oriented")]
    InconsistentOrientation(usize, usize),
    #[error("vertex {0} is non-manifold")]
    NonManifoldVertex(usize),
    #[error("mesh has {0} boundary loops; a topological disk has exactly one")]
    MultipleBoundaryLoops(usize),
    #[error("mesh has no boundary")]
    NoBoundary,
    #[error("mesh is not a single connected component")]
    Disconnected,
    #[error("mesh has no faces")]
    Empty,
    #[error("face {0} is degenerate under the supplied edge lengths")]
    DegenerateFace(usize),
    #[error("image is empty")]
    EmptyImage,
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("gray channel has {got} values for {expected} vertices")]
    GrayLength { expected: usize, got: usize },
}

/// Whether vertex coordinates are planar (z ignored) or spatial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Two,
    Three,
}

/// Symmetric map from an undirected vertex pair to a real value.
///
/// Keys are stored as `(min, max)`; iteration order is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeMap(BTreeMap<(usize, usize), f64>);

/// Edge weights, e.g. cotangent weights.
pub type EdgeWeightMap = EdgeMap;

#[inline]
fn edge_key(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl EdgeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.0.get(&edge_key(i, j)).copied()
    }

    pub fn insert(&mut self, i: usize, j: usize, w: f64) {
        self.0.insert(edge_key(i, j), w);
    }

    pub fn add(&mut self, i: usize, j: usize, w: f64) {
        *self.0.entry(edge_key(i, j)).or_insert(0.0) += w;
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Iterates `((i, j), w)` with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.0.iter().map(|(&k, &w)| (k, w))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.0.values_mut()
    }
}

impl FromIterator<((usize, usize), f64)> for EdgeMap {
    fn from_iter<T: IntoIterator<Item = ((usize, usize), f64)>>(iter: T) -> Self {
        let mut m = EdgeMap::new();
        for ((i, j), w) in iter {
            m.insert(i, j, w);
        }
        m
    }
}

/// Indexed triangle mesh of a topological disk.
///
/// Faces are counter-clockwise. The boundary flags are derived at
/// construction. Values are immutable; [`TriMesh::with_positions`] produces a
/// new mesh over the same connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    positions: Vec<Point3>,
    dim: Dim,
    faces: Vec<[usize; 3]>,
    gray: Option<Vec<f64>>,
    boundary: Vec<bool>,
}

impl TriMesh {
    /// Builds and validates a mesh.
    ///
    /// Accepts a disk (one boundary loop) or a closed surface; rejects
    /// non-manifold, inconsistently oriented, disconnected and multi-loop
    /// inputs. Orientation flips in 2D are not rejected, see [`flipped_faces`].
    pub fn new(positions: Vec<Point3>, faces: Vec<[usize; 3]>, dim: Dim) -> Result<Self, MeshError> {
        let boundary = validate(positions.len(), &faces)?;
        Ok(Self { positions, dim, faces, gray: None, boundary })
    }

    pub fn from_2d(points: &[Point2], faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let positions = points.iter().map(|p| [p[0], p[1], 0.0]).collect();
        Self::new(positions, faces, Dim::Two)
    }

    /// Attaches a per-vertex gray channel; values are clamped into `[0, 1]`.
    pub fn with_gray(mut self, gray: Vec<f64>) -> Result<Self, MeshError> {
        if gray.len() != self.positions.len() {
            return Err(MeshError::GrayLength { expected: self.positions.len(), got: gray.len() });
        }
        self.gray = Some(gray.into_iter().map(|g| g.clamp(0.0, 1.0)).collect());
        Ok(self)
    }

    pub fn without_gray(mut self) -> Self {
        self.gray = None;
        self
    }

    /// Same connectivity and gray channel, new planar positions.
    ///
    /// # Panics
    /// If `points.len()` differs from the vertex count.
    pub fn with_positions(&self, points: &[Point2]) -> TriMesh {
        assert_eq!(points.len(), self.positions.len(), "vertex count mismatch");
        TriMesh {
            positions: points.iter().map(|p| [p[0], p[1], 0.0]).collect(),
            dim: Dim::Two,
            faces: self.faces.clone(),
            gray: self.gray.clone(),
            boundary: self.boundary.clone(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Point3 {
        self.positions[i]
    }

    pub fn pos2(&self, i: usize) -> Point2 {
        [self.positions[i][0], self.positions[i][1]]
    }

    pub fn points2(&self) -> Vec<Point2> {
        self.positions.iter().map(|p| [p[0], p[1]]).collect()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn gray(&self) -> Option<&[f64]> {
        self.gray.as_deref()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Area of face `f` (unsigned; 3D cross product).
    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.faces[f];
        tri_area3(self.positions[a], self.positions[b], self.positions[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Sorted neighbor lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.positions.len()];
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                nb[u].push(v);
                nb[v].push(u);
            }
        }
        for l in &mut nb {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }

    /// Incident face lists.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.positions.len()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                vf[v].push(f);
            }
        }
        vf
    }

    /// Sorted unique undirected edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self.faces.iter().flat_map(|&[a, b, c]| [edge_key(a, b), edge_key(b, c), edge_key(c, a)]).collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        dist3(self.positions[i], self.positions[j])
    }
}

fn validate(n: usize, faces: &[[usize; 3]]) -> Result<Vec<bool>, MeshError> {
    if faces.is_empty() {
        return Err(MeshError::Empty);
    }
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            if v >= n {
                return Err(MeshError::InvalidIndex { face: fi, index: v, count: n });
            }
        }
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            return Err(MeshError::RepeatedVertex(fi));
        }
        for k in 0..3 {
            let (u, v) = (f[k], f[(k + 1) % 3]);
            let c = undirected.entry(edge_key(u, v)).or_insert(0);
            *c += 1;
            if *c > 2 {
                return Err(MeshError::NonManifoldEdge(u.min(v), u.max(v)));
            }
            if directed.insert((u, v), fi).is_some() {
                return Err(MeshError::InconsistentOrientation(u, v));
            }
        }
    }

    // Boundary edges are directed edges without a twin.
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(u, v) in directed.keys() {
        if !directed.contains_key(&(v, u)) && next.insert(u, v).is_some() {
            return Err(MeshError::NonManifoldVertex(u));
        }
    }
    let mut boundary = vec![false; n];
    for &u in next.keys() {
        boundary[u] = true;
    }
    let mut seen = vec![false; n];
    let mut loops = 0;
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        if seen[s] {
            continue;
        }
        loops += 1;
        let mut v = s;
        while !seen[v] {
            seen[v] = true;
            v = match next.get(&v) {
                Some(&w) => w,
                None => return Err(MeshError::NonManifoldVertex(v)),
            };
        }
        if v != s {
            return Err(MeshError::NonManifoldVertex(v));
        }
    }
    if loops > 1 {
        return Err(MeshError::MultipleBoundaryLoops(loops));
    }

    // Single component, no unreferenced vertices.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut used = vec![false; n];
    for f in faces {
        for &v in f {
            used[v] = true;
        }
        for k in 1..3 {
            let (a, b) = (find(&mut parent, f[0]), find(&mut parent, f[k]));
            parent[a] = b;
        }
    }
    if used.iter().any(|u| !u) {
        return Err(MeshError::Disconnected);
    }
    let root = find(&mut parent, 0);
    if (1..n).any(|v| find(&mut parent, v) != root) {
        return Err(MeshError::Disconnected);
    }
    Ok(boundary)
}

#[inline]
pub(crate) fn sub3(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn dist3(a: Point3, b: Point3) -> f64 {
    let d = sub3(a, b);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

#[inline]
pub(crate) fn tri_area3(a: Point3, b: Point3, c: Point3) -> f64 {
    let u = sub3(b, a);
    let v = sub3(c, a);
    let x = u[1] * v[2] - u[2] * v[1];
    let y = u[2] * v[0] - u[0] * v[2];
    let z = u[0] * v[1] - u[1] * v[0];
    0.5 * (x * x + y * y + z * z).sqrt()
}

/// Signed area of a planar triangle, positive when counter-clockwise.
#[inline]
pub fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// One third of the area of the faces incident to `i`.
pub fn vertex_area(mesh: &TriMesh, i: usize) -> f64 {
    let mut a = 0.0;
    for (f, face) in mesh.faces.iter().enumerate() {
        if face.contains(&i) {
            a += mesh.face_area(f);
        }
    }
    a / 3.0
}

/// [`vertex_area`] for every vertex in one pass.
pub fn vertex_areas(mesh: &TriMesh) -> Vec<f64> {
    let mut areas = vec![0.0; mesh.num_vertices()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let a = mesh.face_area(f) / 3.0;
        for &v in face {
            areas[v] += a;
        }
    }
    areas
}

/// Cotangent weights from the mesh metric, or from `edge_lengths` when given.
///
/// Interior edges receive the sum of the two opposite-angle cotangents,
/// boundary edges the single one. Angles come from the law of cosines, so the
/// result depends only on edge lengths.
pub fn cotangent_weights(mesh: &TriMesh, edge_lengths: Option<&EdgeMap>) -> Result<EdgeWeightMap, MeshError> {
    match edge_lengths {
        Some(l) => cotangent_weights_for_faces(&mesh.faces, |i, j| l.get(i, j).unwrap_or(f64::NAN)),
        None => cotangent_weights_for_faces(&mesh.faces, |i, j| mesh.edge_length(i, j)),
    }
}

/// Cotangent weights for an arbitrary face list (e.g. a sub-patch).
pub fn cotangent_weights_for_faces<L>(faces: &[[usize; 3]], len: L) -> Result<EdgeWeightMap, MeshError>
where
    L: Fn(usize, usize) -> f64,
{
    let mut w = EdgeMap::new();
    for (fi, &[a, b, c]) in faces.iter().enumerate() {
        // la opposite a, etc.
        let la = len(b, c);
        let lb = len(c, a);
        let lc = len(a, b);
        let cots = triangle_cotangents(la, lb, lc).ok_or(MeshError::DegenerateFace(fi))?;
        w.add(b, c, cots[0]);
        w.add(c, a, cots[1]);
        w.add(a, b, cots[2]);
    }
    Ok(w)
}

/// Cotangents of the angles opposite sides `a`, `b`, `c`.
///
/// `None` when the lengths violate the triangle inequality or the triangle is
/// degenerate (area below `1e-14 * longest^2`).
pub fn triangle_cotangents(a: f64, b: f64, c: f64) -> Option<[f64; 3]> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) || a <= 0.0 || b <= 0.0 || c <= 0.0 {
        return None;
    }
    let area = heron_area(a, b, c)?;
    let longest = a.max(b).max(c);
    if area < 1e-14 * longest * longest {
        return None;
    }
    let (a2, b2, c2) = (a * a, b * b, c * c);
    let k = 1.0 / (4.0 * area);
    Some([(b2 + c2 - a2) * k, (c2 + a2 - b2) * k, (a2 + b2 - c2) * k])
}

/// Numerically stable Heron formula; `None` on triangle-inequality violation.
pub fn heron_area(a: f64, b: f64, c: f64) -> Option<f64> {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if !(p > 0.0) {
        return None;
    }
    Some(0.25 * p.sqrt())
}

/// The single boundary loop, counter-clockwise with respect to face
/// orientation, starting at the lowest-index boundary vertex.
pub fn boundary_loop(mesh: &TriMesh) -> Result<Vec<usize>, MeshError> {
    let loops = boundary_loops_of_faces(&mesh.faces);
    match loops.len() {
        0 => Err(MeshError::NoBoundary),
        1 => Ok(loops.into_iter().next().unwrap()),
        k => Err(MeshError::MultipleBoundaryLoops(k)),
    }
}

/// All boundary loops of a face set, each oriented with the faces on its
/// left and starting at its lowest index; loops sorted by start vertex.
pub fn boundary_loops_of_faces(faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut directed = std::collections::HashSet::with_capacity(faces.len() * 3);
    for &[a, b, c] in faces {
        directed.insert((a, b));
        directed.insert((b, c));
        directed.insert((c, a));
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for &(u, v) in &directed {
        if !directed.contains(&(v, u)) {
            next.insert(u, v);
        }
    }
    let mut loops = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &s in next.keys() {
        if seen.contains(&s) {
            continue;
        }
        let mut lp = Vec::new();
        let mut v = s;
        while seen.insert(v) {
            lp.push(v);
            match next.get(&v) {
                Some(&w) => v = w,
                None => break,
            }
        }
        loops.push(lp);
    }
    loops
}

/// Indices of faces whose signed area is `<= 0`.
pub fn flipped_faces(mesh: &TriMesh) -> Vec<usize> {
    mesh.faces
        .iter()
        .enumerate()
        .filter(|(_, &[a, b, c])| signed_area(mesh.pos2(a), mesh.pos2(b), mesh.pos2(c)) <= 0.0)
        .map(|(f, _)| f)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square() -> TriMesh {
        TriMesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn equilateral_pair() -> TriMesh {
        let h = 3f64.sqrt() / 2.0;
        TriMesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [0.5, h], [0.5, -h]], vec![[0, 1, 2], [1, 0, 3]]).unwrap()
    }

    #[test]
    fn vertex_area_examples() {
        let t = TriMesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(vertex_area(&t, i), 1.0 / 6.0, epsilon = 1e-15);
        }
        let s = square();
        let total: f64 = vertex_areas(&s).iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vertex_area(&s, 0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn cotangent_examples() {
        let h = 3f64.sqrt() / 2.0;
        let t = TriMesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]], vec![[0, 1, 2]]).unwrap();
        let w = cotangent_weights(&t, None).unwrap();
        // Direct angle computation: the opposite angle is 60 degrees.
        let expected = 1.0 / (60f64.to_radians().tan());
        assert_abs_diff_eq!(w.get(0, 1).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.57735, epsilon = 1e-5);

        let r = TriMesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let w = cotangent_weights(&r, None).unwrap();
        assert_abs_diff_eq!(w.get(1, 2).unwrap(), 0.0, epsilon = 1e-15);

        let w = cotangent_weights(&equilateral_pair(), None).unwrap();
        assert_abs_diff_eq!(w.get(0, 1).unwrap(), 2.0 / 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(w.len(), 5);
    }

    #[test]
    fn cotangent_override_and_degenerate() {
        let s = square();
        let mut l = EdgeMap::new();
        for (i, j) in s.edges() {
            l.insert(i, j, 1.0);
        }
        // All-unit lengths make both triangles equilateral.
        let w = cotangent_weights(&s, Some(&l)).unwrap();
        assert_abs_diff_eq!(w.get(0, 2).unwrap(), 2.0 / 3f64.sqrt(), epsilon = 1e-12);
        l.insert(0, 2, 2.5);
        assert!(matches!(cotangent_weights(&s, Some(&l)), Err(MeshError::DegenerateFace(_))));
    }

    #[test]
    fn cotangent_rigid_invariance() {
        let m = equilateral_pair();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let moved: Vec<Point2> = m.points2().iter().map(|p| [c * p[0] - s * p[1] + 5.0, s * p[0] + c * p[1] - 2.0]).collect();
        let a = cotangent_weights(&m, None).unwrap();
        let b = cotangent_weights(&m.with_positions(&moved), None).unwrap();
        for ((k, wa), (_, wb)) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(wa, wb, epsilon = 1e-12);
            let _ = k;
        }
    }

    #[test]
    fn boundary_loop_examples() {
        let t = TriMesh::from_2d(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        assert_eq!(boundary_loop(&t).unwrap(), vec![0, 1, 2]);
        assert_eq!(boundary_loop(&square()).unwrap(), vec![0, 1, 2, 3]);
        assert!(square().boundary_flags().iter().all(|&b| b));

        let tet = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [2, 0, 3]],
            Dim::Three,
        )
        .unwrap();
        assert!(matches!(boundary_loop(&tet), Err(MeshError::NoBoundary)));
    }

    #[test]
    fn validation_errors() {
        let p = vec![[0.0, 0.0, 0.0]; 5];
        let r = TriMesh::new(p.clone(), vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]], Dim::Three);
        assert!(matches!(r, Err(MeshError::NonManifoldEdge(0, 1)) | Err(MeshError::InconsistentOrientation(..))));
        let r = TriMesh::new(p.clone(), vec![[0, 1, 7]], Dim::Three);
        assert!(matches!(r, Err(MeshError::InvalidIndex { .. })));
        let r = TriMesh::new(p.clone(), vec![[0, 1, 1]], Dim::Three);
        assert!(matches!(r, Err(MeshError::RepeatedVertex(0))));
        let r = TriMesh::new(p, vec![[0, 1, 2]], Dim::Three);
        assert!(matches!(r, Err(MeshError::Disconnected)));
    }

    fn grid(n: usize) -> TriMesh {
        let mut pts = Vec::new();
        for j in 0..n {
            for i in 0..n {
                pts.push([i as f64, j as f64]);
            }
        }
        let mut faces = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let v00 = j * n + i;
                let (v10, v01, v11) = (v00 + 1, v00 + n, v00 + n + 1);
                faces.push([v00, v10, v11]);
                faces.push([v00, v11, v01]);
            }
        }
        TriMesh::from_2d(&pts, faces).unwrap()
    }

    #[test]
    fn flipped_faces_examples() {
        let g = grid(4);
        assert!(flipped_faces(&g).is_empty());

        // Push vertex 5 = (1,1) across the opposite edge y = 0 of face [0, 1, 5].
        let mut pts = g.points2();
        pts[5] = [1.0, -1.0];
        let m = g.with_positions(&pts);
        let flipped = flipped_faces(&m);
        // Brute-force count by signed area.
        let expected: Vec<usize> = (0..m.num_faces())
            .filter(|&f| {
                let [a, b, c] = m.faces()[f];
                signed_area(m.pos2(a), m.pos2(b), m.pos2(c)) <= 0.0
            })
            .collect();
        assert_eq!(flipped, expected);
        assert!(!flipped.is_empty());
        for &f in &flipped {
            assert!(m.faces()[f].contains(&5));
        }

        let mut pts = g.points2();
        pts[5] = [0.0, 0.0]; // face 0 = [0, 1, 5] collapses to zero area
        let d = g.with_positions(&pts);
        assert!(flipped_faces(&d).contains(&0));
    }

    #[test]
    fn area_partition_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = grid(6);
        let pts: Vec<Point2> = g.points2().iter().map(|p| [p[0] + rng.gen_range(-0.2..0.2), p[1] + rng.gen_range(-0.2..0.2)]).collect();
        let m = g.with_positions(&pts);
        let s: f64 = vertex_areas(&m).iter().sum();
        assert!(((s - m.total_area()) / m.total_area()).abs() < 1e-12);
    }
}
