//! Beltrami coefficients of piecewise-linear maps, the auxiliary metric, and
//! the patch-wise correction that removes flips and excess distortion.

mod correct;
mod patch;

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::harmonic::HarmonicError;
use crate::mesh::{signed_area, MeshError, TriMesh};
use crate::par::{map_indices, Parallelism};
use crate::Point2;

pub use correct::{correct_patch, qc_correct, PatchOutcome, PatchRecord, QcOptions, QcReport};
pub use patch::{gamma_ring, Patch, PatchTopology};

#[derive(Debug, Error)]
pub enum QcError {
    #[error("degenerate source triangle")]
    DegenerateSource,
    #[error("meshes differ in connectivity")]
    ConnectivityMismatch,
    #[error("auxiliary metric violates the triangle inequality on patch face {0}")]
    InvalidMetric(usize),
    #[error("vertex {0} out of range")]
    InvalidVertex(usize),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Marker for a face whose map reverses orientation or collapses it.
pub const FLIP: Complex64 = Complex64::new(f64::INFINITY, 0.0);

/// Whether `mu` is the flip marker (or any non-finite value).
pub fn is_flip(mu: Complex64) -> bool {
    !mu.is_finite()
}

/// Beltrami coefficient of the affine map sending triangle `src` to `dst`.
///
/// With Jacobian `A`, `f_z = ((A00 + A11) + i (A10 - A01)) / 2` and
/// `f_zbar = ((A00 - A11) + i (A10 + A01)) / 2`. Returns [`FLIP`] when
/// `|f_z| < 1e-14 |A|` or `|mu| >= 1`.
pub fn face_beltrami(src: [Point2; 3], dst: [Point2; 3]) -> Result<Complex64, QcError> {
    let s = [[src[1][0] - src[0][0], src[2][0] - src[0][0]], [src[1][1] - src[0][1], src[2][1] - src[0][1]]];
    let d = [[dst[1][0] - dst[0][0], dst[2][0] - dst[0][0]], [dst[1][1] - dst[0][1], dst[2][1] - dst[0][1]]];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let longest = (0..3)
        .map(|k| {
            let (a, b) = (src[k], src[(k + 1) % 3]);
            (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
        })
        .fold(0.0f64, f64::max);
    if !(det.abs() >= 1e-14 * longest) || longest == 0.0 {
        return Err(QcError::DegenerateSource);
    }
    let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
    let mut a = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            a[r][c] = d[r][0] * inv[0][c] + d[r][1] * inv[1][c];
        }
    }
    let fz = Complex64::new(0.5 * (a[0][0] + a[1][1]), 0.5 * (a[1][0] - a[0][1]));
    let fzb = Complex64::new(0.5 * (a[0][0] - a[1][1]), 0.5 * (a[1][0] + a[0][1]));
    let anorm = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if fz.norm() < 1e-14 * anorm || anorm == 0.0 {
        return Ok(FLIP);
    }
    let mu = fzb / fz;
    Ok(if mu.norm() >= 1.0 { FLIP } else { mu })
}

/// Area-weighted average of `per_face` around each vertex of `mesh`.
///
/// A flip marker on any incident face makes the vertex value [`FLIP`].
pub fn vertex_beltrami(mesh: &TriMesh, per_face: &[Complex64]) -> Vec<Complex64> {
    let n = mesh.num_vertices();
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut wsum = vec![0.0; n];
    let mut flip = vec![false; n];
    for (f, face) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(f);
        for &v in face {
            if is_flip(per_face[f]) {
                flip[v] = true;
            } else {
                acc[v] += per_face[f] * a;
                wsum[v] += a;
            }
        }
    }
    (0..n)
        .map(|v| {
            if flip[v] {
                FLIP
            } else if wsum[v] > 0.0 {
                acc[v] / wsum[v]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// `|dz + mu conj(dz)|`.
pub fn auxiliary_metric(dz: Complex64, mu_edge: Complex64) -> f64 {
    (dz + mu_edge * dz.conj()).norm()
}

/// Beltrami coefficients of the piecewise-linear map between two planar
/// meshes with one connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiField {
    pub per_face: Vec<Complex64>,
    pub per_vertex: Vec<Complex64>,
}

impl BeltramiField {
    /// Field of the map `src -> dst`; vertex values are weighted by `src` face areas.
    pub fn compute(src: &TriMesh, dst: &TriMesh) -> Result<Self, QcError> {
        Self::compute_with(src, dst, Parallelism::default())
    }

    pub fn compute_with(src: &TriMesh, dst: &TriMesh, mode: Parallelism) -> Result<Self, QcError> {
        if src.faces() != dst.faces() {
            return Err(QcError::ConnectivityMismatch);
        }
        let faces = src.faces();
        let per_face: Vec<Result<Complex64, QcError>> = map_indices(faces.len(), mode, |f| {
            let [a, b, c] = faces[f];
            face_beltrami([src.pos2(a), src.pos2(b), src.pos2(c)], [dst.pos2(a), dst.pos2(b), dst.pos2(c)])
        });
        let per_face = per_face.into_iter().collect::<Result<Vec<_>, _>>()?;
        let per_vertex = vertex_beltrami(src, &per_face);
        Ok(Self { per_face, per_vertex })
    }

    /// `max_i |mu(p_i)|`; infinite when any face is flipped.
    pub fn sup_norm(&self) -> f64 {
        self.per_vertex.iter().fold(0.0f64, |m, z| m.max(if is_flip(*z) { f64::INFINITY } else { z.norm() }))
    }

    pub fn flipped_face_count(&self) -> usize {
        self.per_face.iter().filter(|z| is_flip(**z)).count()
    }
}

/// Writes `vertex,abs_mu,arg_mu` rows; flip markers are written as `inf,nan`.
pub fn write_beltrami_csv<W: Write>(per_vertex: &[Complex64], mut w: W) -> io::Result<()> {
    writeln!(w, "vertex,abs_mu,arg_mu")?;
    for (i, z) in per_vertex.iter().enumerate() {
        if is_flip(*z) {
            writeln!(w, "{i},inf,nan")?;
        } else {
            writeln!(w, "{i},{:.9e},{:.9e}", z.norm(), z.arg())?;
        }
    }
    Ok(())
}

pub(crate) fn face_signed_area(pos: &[Point2], f: [usize; 3]) -> f64 {
    signed_area(pos[f[0]], pos[f[1]], pos[f[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::tests::grid;
    use crate::mesh::flipped_faces;
    use rand::{Rng, SeedableRng};

    const TRI: [Point2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]];

    fn apply(a: [[f64; 2]; 2], t: [f64; 2], p: Point2) -> Point2 {
        [a[0][0] * p[0] + a[0][1] * p[1] + t[0], a[1][0] * p[0] + a[1][1] * p[1] + t[1]]
    }

    #[test]
    fn unit_cases() {
        assert!(face_beltrami(TRI, TRI).unwrap().norm() < 1e-15);
        let stretch = TRI.map(|p| [2.0 * p[0], p[1]]);
        let mu = face_beltrami(TRI, stretch).unwrap();
        assert!((mu - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let mirror = TRI.map(|p| [p[0], -p[1]]);
        assert!(is_flip(face_beltrami(TRI, mirror).unwrap()));
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(face_beltrami(flat, TRI), Err(QcError::DegenerateSource)));
    }

    #[test]
    fn random_affine_maps_match_wirtinger() {
        // z -> a z + b conj(z) + c has mu = b / a.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = Complex64::from_polar(rng.gen_range(0.2..3.0), rng.gen_range(-3.1..3.1));
            let b = a * Complex64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(-3.1..3.1));
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let src: [Point2; 3] = std::array::from_fn(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            if signed_area(src[0], src[1], src[2]).abs() < 1e-3 {
                continue;
            }
            let f = |p: Point2| {
                let z = Complex64::new(p[0], p[1]);
                let w = a * z + b * z.conj() + c;
                [w.re, w.im]
            };
            let mu = face_beltrami(src, src.map(f)).unwrap();
            assert!((mu - b / a).norm() < 1e-12, "{mu} vs {}", b / a);
        }
    }

    #[test]
    fn metric_cases() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let half = Complex64::new(0.5, 0.0);
        assert_eq!(auxiliary_metric(Complex64::new(0.3, 0.4), Complex64::new(0.0, 0.0)), 0.5);
        assert!((auxiliary_metric(one, half) - 1.5).abs() < 1e-15);
        assert!((auxiliary_metric(i, half) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn metric_reproduces_affine_lengths() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let mu = Complex64::from_polar(rng.gen_range(0.0..0.95), rng.gen_range(-3.1..3.1));
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let w = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let f = |z: Complex64| z + mu * z.conj();
            let dz = w - z;
            assert!((auxiliary_metric(dz, mu) - (f(w) - f(z)).norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_average_and_flags() {
        let m = grid(3);
        let c = Complex64::new(0.2, -0.1);
        let v = vertex_beltrami(&m, &vec![c; m.num_faces()]);
        assert!(v.iter().all(|z| (z - c).norm() < 1e-15));

        // Vertex 0 touches faces 0 and 1 of the lower-left quad, equal area.
        let mut pf = vec![Complex64::new(0.0, 0.0); m.num_faces()];
        pf[0] = Complex64::new(0.4, 0.0);
        pf[1] = Complex64::new(-0.4, 0.0);
        assert!(vertex_beltrami(&m, &pf)[0].norm() < 1e-15);
        pf[1] = FLIP;
        let v = vertex_beltrami(&m, &pf);
        assert!(is_flip(v[0]) && is_flip(v[4]) && is_flip(v[3]));
        assert!(!is_flip(v[8]));
    }

    #[test]
    fn flip_marker_matches_flipped_faces() {
        let m = grid(5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let pts: Vec<Point2> = m
                .points2()
                .iter()
                .map(|p| apply([[1.0, 0.2], [-0.1, 0.9]], [0.1, 0.0], *p))
                .map(|p| [p[0] + rng.gen_range(-0.4..0.4), p[1] + rng.gen_range(-0.4..0.4)])
                .collect();
            let dst = m.with_positions(&pts);
            let field = BeltramiField::compute(&m, &dst).unwrap();
            let marked: Vec<usize> = (0..m.num_faces()).filter(|&f| is_flip(field.per_face[f])).collect();
            assert_eq!(marked, flipped_faces(&dst));
        }
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_beltrami_csv(&[Complex64::new(0.0, 0.5), FLIP], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().nth(2), Some("1,inf,nan"));
        assert!(s.lines().nth(1).unwrap().starts_with("0,5.000000000e-1,"));
    }
}
