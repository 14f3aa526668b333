use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::mesh::TriMesh;
use crate::Point2;

/// Cached adjacency used to build patches repeatedly.
#[derive(Debug, Clone)]
pub struct PatchTopology {
    neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
    faces: Vec<[usize; 3]>,
    mesh_boundary: Vec<bool>,
}

impl PatchTopology {
    pub fn new(mesh: &TriMesh) -> Self {
        Self {
            neighbors: mesh.vertex_neighbors(),
            vertex_faces: mesh.vertex_faces(),
            faces: mesh.faces().to_vec(),
            mesh_boundary: mesh.boundary_flags().to_vec(),
        }
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.neighbors.len()
    }

    /// Graph distances from `center`, truncated at `gamma`.
    fn distances(&self, center: usize, gamma: usize) -> BTreeMap<usize, usize> {
        let mut dist = BTreeMap::from([(center, 0)]);
        let mut queue = VecDeque::from([center]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == gamma {
                continue;
            }
            for &u in &self.neighbors[v] {
                dist.entry(u).or_insert_with(|| {
                    queue.push_back(u);
                    d + 1
                });
            }
        }
        dist
    }

    /// The `gamma`-ring patch around `center`.
    pub fn patch(&self, center: usize, gamma: usize) -> Patch {
        let dist = self.distances(center, gamma);
        let mut faces = BTreeSet::new();
        for &v in dist.keys() {
            for &f in &self.vertex_faces[v] {
                if self.faces[f].iter().all(|u| dist.contains_key(u)) {
                    faces.insert(f);
                }
            }
        }
        let faces: Vec<usize> = faces.into_iter().collect();

        let mut directed = BTreeSet::new();
        for &f in &faces {
            let [a, b, c] = self.faces[f];
            directed.extend([(a, b), (b, c), (c, a)]);
        }
        let border: Vec<(usize, usize)> = directed.iter().copied().filter(|&(u, v)| !directed.contains(&(v, u))).collect();
        let mut fixed = BTreeSet::new();
        let mut vertices = BTreeSet::new();
        for &f in &faces {
            vertices.extend(self.faces[f]);
        }
        for &(u, v) in &border {
            fixed.insert(u);
            fixed.insert(v);
        }
        fixed.extend(vertices.iter().copied().filter(|&v| self.mesh_boundary[v]));
        let interior = vertices.iter().copied().filter(|v| !fixed.contains(v)).collect();
        Patch {
            center,
            gamma,
            vertices: vertices.into_iter().collect(),
            faces,
            boundary_loop: single_loop(&border),
            fixed: fixed.into_iter().collect(),
            interior,
        }
    }
}

/// The border as one simple closed loop, if it is one.
fn single_loop(border: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut next = BTreeMap::new();
    for &(u, v) in border {
        if next.insert(u, v).is_some() {
            return None;
        }
    }
    let &start = next.keys().next()?;
    let mut lp = vec![start];
    let mut v = next[&start];
    while v != start {
        if lp.len() > next.len() {
            return None;
        }
        lp.push(v);
        v = *next.get(&v)?;
    }
    (lp.len() == next.len()).then_some(lp)
}

/// Ring neighborhood of a vertex: the faces whose vertices all lie within
/// graph distance `gamma` of `center`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub center: usize,
    pub gamma: usize,
    /// Sorted vertex indices of the patch faces.
    pub vertices: Vec<usize>,
    /// Sorted face indices.
    pub faces: Vec<usize>,
    /// Border of the patch as a loop (faces on its left, starting at its
    /// lowest index) when the border is a single simple loop.
    pub boundary_loop: Option<Vec<usize>>,
    /// Vertices held in place: the patch border plus mesh-boundary vertices.
    pub fixed: Vec<usize>,
    /// Free vertices.
    pub interior: Vec<usize>,
}

impl Patch {
    /// Whether the image of the border loop under `pos` is a convex CCW
    /// polygon: every turn has cross product `>= -1e-10 scale^2`, the area is
    /// positive and the boundary winds once.
    pub fn is_image_convex(&self, pos: &[Point2]) -> bool {
        let Some(lp) = &self.boundary_loop else { return false };
        let pts: Vec<Point2> = lp.iter().map(|&v| pos[v]).collect();
        is_convex_polygon(&pts)
    }
}

pub(crate) fn is_convex_polygon(pts: &[Point2]) -> bool {
    let k = pts.len();
    if k < 3 {
        return false;
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let tol = 1e-10 * scale * scale;
    let mut area = 0.0;
    let mut turning = 0.0;
    for i in 0..k {
        let (a, b, c) = (pts[i], pts[(i + 1) % k], pts[(i + 2) % k]);
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        if cross < -tol {
            return false;
        }
        turning += cross.atan2(e1[0] * e2[0] + e1[1] * e2[1]);
        area += a[0] * b[1] - a[1] * b[0];
    }
    area > 0.0 && (turning - 2.0 * std::f64::consts::PI).abs() < 1e-6
}

/// [`PatchTopology::patch`] for a one-off query.
pub fn gamma_ring(mesh: &TriMesh, center: usize, gamma: usize) -> Patch {
    PatchTopology::new(mesh).patch(center, gamma)
}
