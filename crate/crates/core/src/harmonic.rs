//! Dirichlet problems for the weighted graph Laplacian and harmonic maps of
//! disk-topology meshes onto the unit disk and the square `[-1, 1]^2`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::linalg::{conjugate_gradient, CgOptions, CsrMatrix, SolveError};
use crate::mesh::{boundary_loop, cotangent_weights, flipped_faces, EdgeMap, MeshError, TriMesh};
use crate::Point2;

const CG_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("no boundary values given")]
    NoBoundary,
    #[error("vertex {0} is not connected to the boundary")]
    Disconnected(usize),
    #[error("invalid corners: {0}")]
    InvalidCorners(String),
    #[error("harmonic map has {} flipped faces", faces.len())]
    FlippedOutput { faces: Vec<usize>, mesh: Box<TriMesh> },
}

/// Edge weights used to build a harmonic map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Cotangent weights of the input metric, negative values kept.
    #[default]
    Cotangent,
    /// Cotangent weights floored at 0.
    ClampedCotangent,
    /// All weights 1 (Tutte embedding).
    Uniform,
}

impl WeightScheme {
    /// Weights of `mesh` under this scheme.
    pub fn weights(self, mesh: &TriMesh) -> Result<EdgeMap, MeshError> {
        match self {
            WeightScheme::Uniform => Ok(mesh.edges().into_iter().map(|(i, j)| ((i, j), 1.0)).collect()),
            WeightScheme::Cotangent => cotangent_weights(mesh, None),
            WeightScheme::ClampedCotangent => {
                let mut w = cotangent_weights(mesh, None)?;
                w.values_mut().for_each(|v| *v = v.max(0.0));
                Ok(w)
            }
        }
    }
}

/// Dirichlet problem `sum_j w_ij (f_i - f_j) = 0` at every free vertex,
/// with `D`-dimensional values prescribed on `boundary`.
#[derive(Debug, Clone)]
pub struct LaplaceProblem<'a, const D: usize> {
    pub num_vertices: usize,
    pub weights: &'a EdgeMap,
    pub boundary: Vec<(usize, [f64; D])>,
}

impl<const D: usize> LaplaceProblem<'_, D> {
    /// Solves the problem; boundary values are copied bit-exactly.
    pub fn solve(&self) -> Result<Vec<[f64; D]>, HarmonicError> {
        solve_laplace(self)
    }
}

/// Solves a [`LaplaceProblem`] with Jacobi-preconditioned conjugate gradient.
pub fn solve_laplace<const D: usize>(problem: &LaplaceProblem<'_, D>) -> Result<Vec<[f64; D]>, HarmonicError> {
    let n = problem.num_vertices;
    if problem.boundary.is_empty() {
        return Err(HarmonicError::NoBoundary);
    }
    let mut values = vec![[0.0; D]; n];
    let mut fixed = vec![false; n];
    for &(v, val) in &problem.boundary {
        values[v] = val;
        fixed[v] = true;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for ((i, j), w) in problem.weights.iter() {
        if w != 0.0 {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
    }
    check_reachable(&adj, &fixed)?;

    // Unknowns are numbered in vertex order.
    let mut slot = vec![usize::MAX; n];
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    for (k, &v) in free.iter().enumerate() {
        slot[v] = k;
    }
    if free.is_empty() {
        return Ok(values);
    }
    let m = free.len();
    let mut trip = Vec::new();
    let mut rhs = vec![[0.0; D]; m];
    for (k, &v) in free.iter().enumerate() {
        let mut diag = 0.0;
        for &(u, w) in &adj[v] {
            diag += w;
            if fixed[u] {
                for d in 0..D {
                    rhs[k][d] += w * values[u][d];
                }
            } else {
                trip.push((k, slot[u], -w));
            }
        }
        trip.push((k, k, diag));
    }
    let a = CsrMatrix::from_triplets(m, trip);
    let opts = CgOptions { tol: CG_TOL, max_iter: (10 * n).max(50), shift: 0.0, zero_mean: false };
    for d in 0..D {
        let b: Vec<f64> = rhs.iter().map(|r| r[d]).collect();
        let (x, _) = conjugate_gradient(&a, &b, opts)?;
        for (k, &v) in free.iter().enumerate() {
            values[v][d] = x[k];
        }
    }
    Ok(values)
}

fn check_reachable(adj: &[Vec<(usize, f64)>], fixed: &[bool]) -> Result<(), HarmonicError> {
    let mut seen = fixed.to_vec();
    let mut stack: Vec<usize> = (0..adj.len()).filter(|&v| fixed[v]).collect();
    while let Some(v) = stack.pop() {
        for &(u, _) in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(v) => Err(HarmonicError::Disconnected(v)),
        None => Ok(()),
    }
}

/// Largest `|sum_j w_ij (f_i - f_j)|` over free vertices, divided by
/// `max_i sum_j |w_ij| * max |f|`.
pub fn laplace_residual<const D: usize>(weights: &EdgeMap, fixed: &[bool], values: &[[f64; D]]) -> f64 {
    let n = values.len();
    let mut res = vec![[0.0; D]; n];
    let mut wsum = vec![0.0; n];
    for ((i, j), w) in weights.iter() {
        for d in 0..D {
            let diff = values[i][d] - values[j][d];
            res[i][d] += w * diff;
            res[j][d] -= w * diff;
        }
        wsum[i] += w.abs();
        wsum[j] += w.abs();
    }
    let scale = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let wmax = wsum.iter().cloned().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    (0..n).filter(|&v| !fixed[v]).flat_map(|v| res[v]).fold(0.0f64, |m, r| m.max(r.abs())) / (wmax * scale)
}

/// Cumulative chord-length parameters in `[0, 1)` along a closed loop.
fn loop_parameters(mesh: &TriMesh, lp: &[usize]) -> Vec<f64> {
    let k = lp.len();
    let mut s = Vec::with_capacity(k);
    let mut acc = 0.0;
    for i in 0..k {
        s.push(acc);
        acc += mesh.edge_length(lp[i], lp[(i + 1) % k]);
    }
    s.iter().map(|x| x / acc).collect()
}

fn finish_map(mesh: &TriMesh, scheme: WeightScheme, boundary: Vec<(usize, [f64; 2])>) -> Result<TriMesh, HarmonicError> {
    let weights = scheme.weights(mesh)?;
    let problem = LaplaceProblem { num_vertices: mesh.num_vertices(), weights: &weights, boundary };
    let pos = solve_laplace(&problem)?;
    let out = mesh.with_positions(&pos);
    let flips = flipped_faces(&out);
    if flips.is_empty() {
        Ok(out)
    } else {
        Err(HarmonicError::FlippedOutput { faces: flips, mesh: Box::new(out) })
    }
}

/// Harmonic map onto the unit disk.
///
/// The boundary loop goes to the unit circle with chord-length spacing,
/// starting at angle 0 with its lowest-index vertex. A result with flipped
/// faces is reported as [`HarmonicError::FlippedOutput`]; retrying with
/// [`WeightScheme::Uniform`] always gives an embedding.
pub fn harmonic_map_disk(mesh: &TriMesh, scheme: WeightScheme) -> Result<TriMesh, HarmonicError> {
    let lp = boundary_loop(mesh)?;
    let s = loop_parameters(mesh, &lp);
    let boundary = lp
        .iter()
        .zip(&s)
        .map(|(&v, &t)| {
            let a = 2.0 * PI * t;
            (v, [a.cos(), a.sin()])
        })
        .collect();
    finish_map(mesh, scheme, boundary)
}

/// Boundary vertices at chord-length quarters of the loop, starting from the
/// lowest-index boundary vertex.
pub fn default_corners(mesh: &TriMesh) -> Result<[usize; 4], HarmonicError> {
    let lp = boundary_loop(mesh)?;
    if lp.len() < 4 {
        return Err(HarmonicError::InvalidCorners(format!("boundary has only {} vertices", lp.len())));
    }
    let s = loop_parameters(mesh, &lp);
    let mut corners = [lp[0]; 4];
    let mut last = 0;
    for (q, c) in corners.iter_mut().enumerate().skip(1) {
        let target = q as f64 / 4.0;
        // Nearest loop position after the previous corner, leaving room for the rest.
        let hi = lp.len() - (4 - q);
        let k = ((last + 1)..=hi).min_by(|&a, &b| (s[a] - target).abs().total_cmp(&(s[b] - target).abs())).unwrap();
        *c = lp[k];
        last = k;
    }
    Ok(corners)
}

/// Harmonic map onto `[-1, 1]^2` with `corners` sent to `(-1,-1)`, `(1,-1)`,
/// `(1,1)`, `(-1,1)`.
///
/// The corners must be distinct boundary vertices in loop order; each boundary
/// arc is spread over its side by chord length.
pub fn harmonic_map_rect(mesh: &TriMesh, corners: [usize; 4], scheme: WeightScheme) -> Result<TriMesh, HarmonicError> {
    let lp = boundary_loop(mesh)?;
    let pos_of = |v: usize| lp.iter().position(|&u| u == v);
    let mut idx = [0usize; 4];
    for (k, &c) in corners.iter().enumerate() {
        idx[k] = pos_of(c).ok_or_else(|| HarmonicError::InvalidCorners(format!("vertex {c} is not on the boundary")))?;
    }
    let rel: Vec<usize> = idx.iter().map(|&p| (p + lp.len() - idx[0]) % lp.len()).collect();
    if !(rel[0] < rel[1] && rel[1] < rel[2] && rel[2] < rel[3]) {
        return Err(HarmonicError::InvalidCorners(format!("{corners:?} are not distinct and in boundary order")));
    }
    let rot: Vec<usize> = (0..lp.len()).map(|k| lp[(k + idx[0]) % lp.len()]).collect();
    const SQUARE: [Point2; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let mut boundary = Vec::with_capacity(rot.len());
    for side in 0..4 {
        let start = rel[side];
        let end = if side == 3 { rot.len() } else { rel[side + 1] };
        let mut cum = vec![0.0];
        for k in start..end {
            let l = cum.last().unwrap() + mesh.edge_length(rot[k], rot[(k + 1) % rot.len()]);
            cum.push(l);
        }
        let total = *cum.last().unwrap();
        let (a, b) = (SQUARE[side], SQUARE[(side + 1) % 4]);
        for k in start..end {
            let t = cum[k - start] / total;
            boundary.push((rot[k], [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
        }
    }
    finish_map(mesh, scheme, boundary)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mesh::Dim;
    use approx::assert_abs_diff_eq;

    /// Regular `n x n` grid on `[-1,1]^2`, same layout as image meshes.
    pub(crate) fn grid(n: usize) -> TriMesh {
        let mut pts = Vec::new();
        for j in 0..n {
            for i in 0..n {
                pts.push([-1.0 + 2.0 * i as f64 / (n - 1) as f64, -1.0 + 2.0 * j as f64 / (n - 1) as f64]);
            }
        }
        let mut faces = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let v = j * n + i;
                faces.push([v, v + 1, v + n + 1]);
                faces.push([v, v + n + 1, v + n]);
            }
        }
        TriMesh::from_2d(&pts, faces).unwrap()
    }

    fn star() -> (EdgeMap, usize) {
        let w: EdgeMap = (0..4).map(|k| ((k, 4), 1.0)).collect();
        (w, 5)
    }

    #[test]
    fn star_center_is_average() {
        let (w, n) = star();
        let p = LaplaceProblem { num_vertices: n, weights: &w, boundary: vec![(0, [1.0]), (1, [2.0]), (2, [3.0]), (3, [4.0])] };
        let v = p.solve().unwrap();
        assert_abs_diff_eq!(v[4][0], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn constants_are_harmonic() {
        let m = grid(6);
        let w = cotangent_weights(&m, None).unwrap();
        let b = (0..m.num_vertices()).filter(|&v| m.is_boundary(v)).map(|v| (v, [0.7, -2.0])).collect();
        let v = solve_laplace(&LaplaceProblem { num_vertices: m.num_vertices(), weights: &w, boundary: b }).unwrap();
        for x in v {
            assert_abs_diff_eq!(x[0], 0.7, epsilon = 1e-12);
            assert_abs_diff_eq!(x[1], -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn disconnected_vertex_is_an_error() {
        let w: EdgeMap = [((0, 1), 1.0)].into_iter().collect();
        let p = LaplaceProblem { num_vertices: 3, weights: &w, boundary: vec![(0, [1.0])] };
        assert!(matches!(p.solve(), Err(HarmonicError::Disconnected(2))));
        let p = LaplaceProblem::<1> { num_vertices: 3, weights: &w, boundary: vec![] };
        assert!(matches!(p.solve(), Err(HarmonicError::NoBoundary)));
    }

    #[test]
    fn disk_boundary_on_circle() {
        let m = grid(5);
        let d = harmonic_map_disk(&m, WeightScheme::Cotangent).unwrap();
        for v in boundary_loop(&m).unwrap() {
            let p = d.pos2(v);
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
        }
        assert!(flipped_faces(&d).is_empty());
        assert_eq!(d.dim(), Dim::Two);
        assert_eq!(d.faces(), m.faces());
    }

    #[test]
    fn square_identity() {
        let m = grid(7);
        let corners = [0, 6, 48, 42];
        let out = harmonic_map_rect(&m, corners, WeightScheme::Cotangent).unwrap();
        for v in 0..m.num_vertices() {
            assert!((out.pos2(v)[0] - m.pos2(v)[0]).abs() < 1e-9);
            assert!((out.pos2(v)[1] - m.pos2(v)[1]).abs() < 1e-9);
        }
        assert_eq!(default_corners(&m).unwrap(), corners);
    }

    #[test]
    fn square_rotated_corners_and_errors() {
        let m = grid(5);
        // Vertex 4 becomes a side midpoint, so face [3, 4, 9] degenerates; only harmonicity is checked.
        let out = match harmonic_map_rect(&m, [1, 9, 23, 15], WeightScheme::Cotangent) {
            Ok(out) => out,
            Err(HarmonicError::FlippedOutput { mesh, .. }) => *mesh,
            Err(e) => panic!("{e}"),
        };
        let w = cotangent_weights(&m, None).unwrap();
        let pos: Vec<[f64; 2]> = out.points2();
        assert!(laplace_residual(&w, m.boundary_flags(), &pos) <= 1e-10);
        assert!(matches!(harmonic_map_rect(&m, [0, 0, 24, 20], WeightScheme::Cotangent), Err(HarmonicError::InvalidCorners(_))));
        assert!(matches!(harmonic_map_rect(&m, [0, 20, 24, 4], WeightScheme::Cotangent), Err(HarmonicError::InvalidCorners(_))));
        assert!(matches!(harmonic_map_rect(&m, [0, 12, 24, 20], WeightScheme::Cotangent), Err(HarmonicError::InvalidCorners(_))));
    }

    #[test]
    fn schemes() {
        let m = grid(3);
        let u = WeightScheme::Uniform.weights(&m).unwrap();
        assert_eq!(u.len(), m.edges().len());
        assert!(u.iter().all(|(_, w)| w == 1.0));
        let c = WeightScheme::ClampedCotangent.weights(&m).unwrap();
        assert!(c.iter().all(|(_, w)| w >= 0.0));
    }
}
