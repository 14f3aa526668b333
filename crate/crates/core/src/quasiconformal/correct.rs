use std::collections::BTreeMap;

use log::{debug, warn};
use num_complex::Complex64;

use super::patch::{Patch, PatchTopology};
use super::{auxiliary_metric, face_beltrami, face_signed_area, is_flip, QcError, FLIP};
use crate::harmonic::{solve_laplace, LaplaceProblem};
use crate::mesh::{cotangent_weights, cotangent_weights_for_faces, flipped_faces, triangle_cotangents, EdgeMap, MeshError, TriMesh};
use crate::Point2;

/// Largest Beltrami magnitude fed into the auxiliary metric.
const MU_CLAMP: f64 = 0.99;

/// Settings of [`qc_correct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcOptions {
    /// Vertices with `|mu| > eps` are corrected.
    pub eps: f64,
    /// Initial ring size.
    pub gamma: usize,
    /// Ring size at which the search for a convex image stops.
    pub gamma_max: usize,
    /// Extra passes over vertices of still-flipped faces.
    pub repair_passes: usize,
}

impl Default for QcOptions {
    fn default() -> Self {
        Self { eps: 0.7, gamma: 2, gamma_max: 5, repair_passes: 2 }
    }
}

/// Result of remapping one patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchOutcome {
    /// Patch faces with nonpositive area after the remap.
    pub flips: usize,
    /// 0: auxiliary cotangent weights, 1: weights floored, 2: uniform weights.
    pub fallback: u8,
}

/// Log entry of one processed vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchRecord {
    pub center: usize,
    pub gamma: usize,
    pub convex: bool,
    pub outcome: Option<PatchOutcome>,
    /// Reason the patch was skipped, if it was.
    pub skipped: Option<String>,
}

/// Summary of a [`qc_correct`] run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QcReport {
    pub patches: Vec<PatchRecord>,
    pub flips_before: usize,
    pub flips_after: usize,
    pub passes: usize,
}

impl QcReport {
    pub fn skipped(&self) -> usize {
        self.patches.iter().filter(|p| p.skipped.is_some()).count()
    }

    pub fn non_convex(&self) -> usize {
        self.patches.iter().filter(|p| !p.convex).count()
    }

    /// No patch was skipped and no face is flipped.
    pub fn is_clean(&self) -> bool {
        self.skipped() == 0 && self.flips_after == 0
    }
}

fn clamp_mu(z: Complex64) -> Complex64 {
    if is_flip(z) || !z.is_finite() {
        return Complex64::new(0.0, 0.0);
    }
    let r = z.norm();
    if r > MU_CLAMP {
        z * (MU_CLAMP / r)
    } else {
        z
    }
}

/// Remaps the interior of `patch`, writing new positions into `pos`.
///
/// Fills the Beltrami coefficient over the patch by harmonic diffusion from
/// its fixed vertices (weights `m0_weights`), measures `m0` edges in the
/// auxiliary metric, and solves the cotangent Laplace problem of that metric
/// with the fixed vertices held at `pos`. If the result flips a face the
/// solve is repeated with floored weights, then uniform weights; the
/// attempt with the fewest flips is kept.
pub fn correct_patch(
    m0: &TriMesh,
    pos: &mut [Point2],
    patch: &Patch,
    mu_vertex: &[Complex64],
    m0_weights: &EdgeMap,
) -> Result<PatchOutcome, QcError> {
    if patch.interior.is_empty() {
        return Ok(PatchOutcome { flips: count_flips(m0, pos, patch), fallback: 0 });
    }
    let local: BTreeMap<usize, usize> = patch.vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let faces: Vec<[usize; 3]> = patch.faces.iter().map(|&f| m0.faces()[f].map(|v| local[&v])).collect();
    let n = patch.vertices.len();
    let mut edges = EdgeMap::new();
    for &[a, b, c] in &faces {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let (gu, gv) = (patch.vertices[u], patch.vertices[v]);
            edges.insert(u, v, m0_weights.get(gu, gv).unwrap_or(0.0));
        }
    }
    let fixed_local: Vec<usize> = patch.fixed.iter().map(|v| local[v]).collect();

    let mu_bc = fixed_local
        .iter()
        .map(|&k| {
            let z = clamp_mu(mu_vertex[patch.vertices[k]]);
            (k, [z.re, z.im])
        })
        .collect();
    let filled = solve_laplace(&LaplaceProblem { num_vertices: n, weights: &edges, boundary: mu_bc })?;
    let mu_hat: Vec<Complex64> = filled.iter().map(|z| clamp_mu(Complex64::new(z[0], z[1]))).collect();

    let z0: Vec<Complex64> = patch.vertices.iter().map(|&v| Complex64::new(m0.pos2(v)[0], m0.pos2(v)[1])).collect();
    let aux = |u: usize, v: usize| auxiliary_metric(z0[v] - z0[u], 0.5 * (mu_hat[u] + mu_hat[v]));
    let weights = match cotangent_weights_for_faces(&faces, aux) {
        Ok(w) => w,
        Err(MeshError::DegenerateFace(f)) => {
            debug!("patch {}: edge metric degenerate on face {}, using per-face metric", patch.center, patch.faces[f]);
            face_metric_weights(&faces, &z0, &mu_hat).ok_or(QcError::InvalidMetric(patch.faces[f]))?
        }
        Err(other) => return Err(QcError::Mesh(other)),
    };

    let bc: Vec<(usize, [f64; 2])> = fixed_local.iter().map(|&k| (k, pos[patch.vertices[k]])).collect();
    let original: Vec<Point2> = patch.vertices.iter().map(|&v| pos[v]).collect();
    let mut best: Option<(usize, u8, Vec<[f64; 2]>)> = None;
    for (fallback, w) in weight_chain(&weights).into_iter().enumerate() {
        let sol = match solve_laplace(&LaplaceProblem { num_vertices: n, weights: &w, boundary: bc.clone() }) {
            Ok(s) => s,
            Err(e) => {
                debug!("patch {} fallback {fallback}: {e}", patch.center);
                continue;
            }
        };
        let flips = faces.iter().filter(|&&f| face_signed_area(&sol, f) <= 0.0).count();
        if best.as_ref().is_none_or(|b| flips < b.0) {
            best = Some((flips, fallback as u8, sol));
        }
        if flips == 0 {
            break;
        }
    }
    let Some((flips, fallback, sol)) = best else {
        return Err(QcError::InvalidMetric(patch.faces[0]));
    };
    let before = faces.iter().filter(|&&f| face_signed_area(&original, f) <= 0.0).count();
    if flips > before {
        // Never make a patch worse than it was.
        return Ok(PatchOutcome { flips: before, fallback });
    }
    for &v in &patch.interior {
        pos[v] = sol[local[&v]];
    }
    Ok(PatchOutcome { flips, fallback })
}

/// Cotangent weights where each face is measured with its own coefficient,
/// the mean of its vertex values. Each face is then the image of its source
/// triangle under `z -> z + mu conj(z)`, which never degenerates for `|mu| < 1`.
fn face_metric_weights(faces: &[[usize; 3]], z0: &[Complex64], mu: &[Complex64]) -> Option<EdgeMap> {
    let mut w = EdgeMap::new();
    for &[a, b, c] in faces {
        let m = (mu[a] + mu[b] + mu[c]) / 3.0;
        let len = |u: usize, v: usize| auxiliary_metric(z0[v] - z0[u], m);
        let cots = triangle_cotangents(len(b, c), len(c, a), len(a, b))?;
        w.add(b, c, cots[0]);
        w.add(c, a, cots[1]);
        w.add(a, b, cots[2]);
    }
    Some(w)
}

fn weight_chain(w: &EdgeMap) -> Vec<EdgeMap> {
    let mean = w.iter().map(|(_, v)| v.abs()).sum::<f64>() / w.len().max(1) as f64;
    let floor = 1e-3 * mean;
    let mut clamped = w.clone();
    clamped.values_mut().for_each(|v| *v = v.max(floor));
    let mut uniform = w.clone();
    uniform.values_mut().for_each(|v| *v = 1.0);
    vec![w.clone(), clamped, uniform]
}

fn count_flips(m0: &TriMesh, pos: &[Point2], patch: &Patch) -> usize {
    patch.faces.iter().filter(|&&f| face_signed_area(pos, m0.faces()[f]) <= 0.0).count()
}

/// Per-face Beltrami coefficients of `m0 -> pos`, updated incrementally.
struct FaceField<'a> {
    m0: &'a TriMesh,
    per_face: Vec<Complex64>,
    areas: Vec<f64>,
}

impl<'a> FaceField<'a> {
    fn new(m0: &'a TriMesh, pos: &[Point2]) -> Result<Self, QcError> {
        let mut s = Self { m0, per_face: vec![FLIP; m0.num_faces()], areas: (0..m0.num_faces()).map(|f| m0.face_area(f)).collect() };
        for f in 0..m0.num_faces() {
            s.update(f, pos)?;
        }
        Ok(s)
    }

    fn update(&mut self, f: usize, pos: &[Point2]) -> Result<(), QcError> {
        let face = self.m0.faces()[f];
        self.per_face[f] = face_beltrami(face.map(|v| self.m0.pos2(v)), face.map(|v| pos[v]))?;
        Ok(())
    }

    fn vertex(&self, topo: &PatchTopology, v: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut w = 0.0;
        for &f in topo.vertex_faces(v) {
            if is_flip(self.per_face[f]) {
                return FLIP;
            }
            acc += self.per_face[f] * self.areas[f];
            w += self.areas[f];
        }
        if w > 0.0 {
            acc / w
        } else {
            acc
        }
    }

    fn vertex_norm(&self, topo: &PatchTopology, v: usize) -> f64 {
        let z = self.vertex(topo, v);
        if is_flip(z) {
            f64::INFINITY
        } else {
            z.norm()
        }
    }
}

/// Removes flips and distortion above `opts.eps` from the map `m0 -> mhat`.
///
/// Vertices with `|mu| > eps` are visited in descending `|mu|` order; each is
/// skipped if earlier patches already brought it under the threshold.
/// Otherwise its ring patch is grown from `gamma` until the image of the
/// patch border is convex (at most `gamma_max`, then the last patch is used
/// with a warning) and remapped by [`correct_patch`]. Afterwards up to
/// `repair_passes` further passes treat every vertex of a flipped face as
/// bad, starting one ring larger. Connectivity is never changed.
pub fn qc_correct(m0: &TriMesh, mhat: &TriMesh, opts: &QcOptions) -> Result<(TriMesh, QcReport), QcError> {
    if m0.faces() != mhat.faces() {
        return Err(QcError::ConnectivityMismatch);
    }
    let topo = PatchTopology::new(m0);
    let weights = cotangent_weights(m0, None)?;
    let mut pos = mhat.points2();
    let mut field = FaceField::new(m0, &pos)?;
    let mut report = QcReport { flips_before: flipped_faces(mhat).len(), ..Default::default() };

    let mut order: Vec<(usize, f64)> =
        (0..m0.num_vertices()).map(|v| (v, field.vertex_norm(&topo, v))).filter(|&(_, r)| r > opts.eps).collect();
    let mut pass = 0;
    let mut gamma = opts.gamma.max(1);
    let mut threshold = opts.eps;
    loop {
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(v, _) in &order {
            if field.vertex_norm(&topo, v) <= threshold {
                continue;
            }
            let record = process_vertex(m0, &topo, &weights, &mut pos, &mut field, v, gamma, opts.gamma_max.max(gamma))?;
            report.patches.push(record);
        }
        pass += 1;
        let flipped: Vec<usize> = (0..m0.num_faces()).filter(|&f| face_signed_area(&pos, m0.faces()[f]) <= 0.0).collect();
        if flipped.is_empty() || pass > opts.repair_passes {
            break;
        }
        debug!("pass {pass}: {} flipped faces remain", flipped.len());
        let mut bad: Vec<usize> = flipped.iter().flat_map(|&f| m0.faces()[f]).collect();
        bad.sort_unstable();
        bad.dedup();
        order = bad.into_iter().map(|v| (v, field.vertex_norm(&topo, v))).collect();
        gamma += 1;
        threshold = 0.0;
    }
    let out = mhat.with_positions(&pos);
    report.flips_after = flipped_faces(&out).len();
    report.passes = pass;
    if report.flips_after > 0 {
        warn!("{} flipped faces remain after correction", report.flips_after);
    }
    Ok((out, report))
}

#[allow(clippy::too_many_arguments)]
fn process_vertex(
    m0: &TriMesh,
    topo: &PatchTopology,
    weights: &EdgeMap,
    pos: &mut [Point2],
    field: &mut FaceField<'_>,
    v: usize,
    gamma: usize,
    gamma_max: usize,
) -> Result<PatchRecord, QcError> {
    let mut g = gamma;
    let mut patch = topo.patch(v, g);
    let mut convex = patch.is_image_convex(pos);
    while !convex && g < gamma_max {
        g += 1;
        patch = topo.patch(v, g);
        convex = patch.is_image_convex(pos);
    }
    if !convex {
        warn!("patch around vertex {v} is not convex at ring size {g}; remapping anyway");
    }
    let mu: Vec<Complex64> = {
        // Only patch vertices are read.
        let mut mu = vec![Complex64::new(0.0, 0.0); topo.num_vertices()];
        for &u in &patch.vertices {
            mu[u] = field.vertex(topo, u);
        }
        mu
    };
    match correct_patch(m0, pos, &patch, &mu, weights) {
        Ok(outcome) => {
            for &u in &patch.interior {
                for &f in topo.vertex_faces(u) {
                    field.update(f, pos)?;
                }
            }
            Ok(PatchRecord { center: v, gamma: g, convex, outcome: Some(outcome), skipped: None })
        }
        Err(QcError::InvalidMetric(f)) => {
            warn!("skipping patch around vertex {v}: auxiliary metric degenerate on face {f}");
            Ok(PatchRecord {
                center: v,
                gamma: g,
                convex,
                outcome: None,
                skipped: Some(format!("degenerate auxiliary metric on face {f}")),
            })
        }
        Err(QcError::Harmonic(e)) => {
            warn!("skipping patch around vertex {v}: {e}");
            Ok(PatchRecord { center: v, gamma: g, convex, outcome: None, skipped: Some(e.to_string()) })
        }
        Err(e) => Err(e),
    }
}
