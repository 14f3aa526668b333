use tot_core::mesh::{GrayImage, TriMesh};
use tot_core::Point2;

/// Uniform bucket grid over the faces of a planar mesh for point location.
struct FaceLocator<'a> {
    mesh: &'a TriMesh,
    lo: Point2,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> FaceLocator<'a> {
    fn new(mesh: &'a TriMesh) -> Self {
        let pts = mesh.points2();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &pts {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let side = ((mesh.num_faces() as f64).sqrt().ceil() as usize).max(1);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / side as f64).max(f64::MIN_POSITIVE);
        let cols = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let rows = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); cols * rows];
        for (f, face) in mesh.faces().iter().enumerate() {
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &v in face {
                for d in 0..2 {
                    a[d] = a[d].min(pts[v][d]);
                    b[d] = b[d].max(pts[v][d]);
                }
            }
            let (c0, r0) = (((a[0] - lo[0]) / cell) as usize, ((a[1] - lo[1]) / cell) as usize);
            let (c1, r1) = ((((b[0] - lo[0]) / cell) as usize).min(cols - 1), (((b[1] - lo[1]) / cell) as usize).min(rows - 1));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    buckets[r * cols + c].push(f);
                }
            }
        }
        Self { mesh, lo, cell, cols, rows, buckets }
    }

    /// Face containing `p` and its barycentric coordinates.
    fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        let c = (p[0] - self.lo[0]) / self.cell;
        let r = (p[1] - self.lo[1]) / self.cell;
        if c < 0.0 || r < 0.0 || c as usize >= self.cols || r as usize >= self.rows {
            return None;
        }
        let tol = -1e-12;
        for &f in &self.buckets[r as usize * self.cols + c as usize] {
            let [a, b, cc] = self.mesh.faces()[f].map(|v| self.mesh.pos2(v));
            let det = (b[0] - a[0]) * (cc[1] - a[1]) - (b[1] - a[1]) * (cc[0] - a[0]);
            if det.abs() < f64::MIN_POSITIVE {
                continue;
            }
            let l1 = ((p[0] - a[0]) * (cc[1] - a[1]) - (p[1] - a[1]) * (cc[0] - a[0])) / det;
            let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= tol && l1 >= tol && l2 >= tol {
                return Some((f, [l0, l1, l2]));
            }
        }
        None
    }
}

/// Resamples `src` through the map `m0 -> mhat`: every output pixel is
/// located in `mhat`, carried back to `m0` with the same barycentric
/// coordinates and sampled bilinearly. Pixels outside `mhat` get `background`.
pub fn warp_image(src: &GrayImage, m0: &TriMesh, mhat: &TriMesh, background: f64) -> GrayImage {
    let locator = FaceLocator::new(mhat);
    let (hx, hy) = src.domain();
    let (w, h) = (src.width(), src.height());
    GrayImage::from_fn(w, h, |x, y| {
        let p = [-hx + 2.0 * hx * x as f64 / (w.max(2) - 1) as f64, hy - 2.0 * hy * y as f64 / (h.max(2) - 1) as f64];
        match locator.locate(p) {
            Some((f, l)) => {
                let face = m0.faces()[f];
                let mut q = [0.0; 2];
                for k in 0..3 {
                    let s = m0.pos2(face[k]);
                    q[0] += l[k] * s[0];
                    q[1] += l[k] * s[1];
                }
                src.sample_at(q)
            }
            None => background,
        }
    })
}
