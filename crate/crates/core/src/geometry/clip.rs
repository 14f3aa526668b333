use crate::Point2;

/// Closed half-plane `{x : normal . x >= offset}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Point2,
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: Point2, offset: f64) -> Self {
        Self { normal, offset }
    }

    #[inline]
    fn eval(&self, p: Point2) -> f64 {
        self.normal[0] * p[0] + self.normal[1] * p[1] - self.offset
    }
}

pub(crate) const NO_LABEL: usize = usize::MAX;

/// Convex CCW polygon whose edge `k` (from vertex `k` to `k + 1`) carries a
/// label naming the constraint that produced it.
#[derive(Debug, Clone, Default)]
pub(crate) struct LabeledPolygon {
    pub pts: Vec<Point2>,
    pub labels: Vec<usize>,
}

impl LabeledPolygon {
    pub fn from_points(pts: Vec<Point2>, label: usize) -> Self {
        let labels = vec![label; pts.len()];
        Self { pts, labels }
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() < 3
    }

    /// Sutherland-Hodgman step; the new edge along the clip line gets `label`.
    pub fn clip(&mut self, hp: &HalfPlane, label: usize) {
        let n = self.pts.len();
        if n < 3 {
            return;
        }
        let scale = self.pts.iter().fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
        let tol = 1e-14 * ((hp.normal[0].abs() + hp.normal[1].abs()) * scale + hp.offset.abs());
        let s: Vec<f64> = self
            .pts
            .iter()
            .map(|&p| {
                let v = hp.eval(p);
                if v.abs() <= tol {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        if s.iter().all(|&v| v >= 0.0) {
            return;
        }
        if s.iter().all(|&v| v <= 0.0) {
            // At most a segment survives on the line.
            self.pts.clear();
            self.labels.clear();
            return;
        }
        let mut pts = Vec::with_capacity(n + 1);
        let mut labels = Vec::with_capacity(n + 1);
        for k in 0..n {
            let kn = (k + 1) % n;
            let (a, b) = (self.pts[k], self.pts[kn]);
            let (sa, sb) = (s[k], s[kn]);
            let lab = self.labels[k];
            if sa >= 0.0 {
                pts.push(a);
                labels.push(lab);
                if sb < 0.0 && sa > 0.0 {
                    let t = sa / (sa - sb);
                    pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    labels.push(label);
                } else if sb < 0.0 {
                    // Leaving exactly at `a`.
                    *labels.last_mut().unwrap() = label;
                }
            } else if sb > 0.0 {
                let t = sa / (sa - sb);
                pts.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                labels.push(lab);
            }
        }
        self.pts = pts;
        self.labels = labels;
        self.dedup(scale);
    }

    fn dedup(&mut self, scale: f64) {
        let eps = 1e-15 * scale.max(1e-300);
        let mut k = 0;
        while self.pts.len() >= 2 && k < self.pts.len() {
            let kn = (k + 1) % self.pts.len();
            let (a, b) = (self.pts[k], self.pts[kn]);
            if (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps {
                // Drop the zero-length edge starting at `k`.
                self.pts.remove(k);
                self.labels.remove(k);
            } else {
                k += 1;
            }
        }
        if self.pts.len() < 3 || polygon_area(&self.pts) <= 0.0 {
            self.pts.clear();
            self.labels.clear();
        }
    }
}

fn polygon_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for k in 0..n {
        let (p, q) = (pts[k], pts[(k + 1) % n]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Intersection of a convex CCW polygon with a half-plane; points on the line
/// are kept. Returns an empty vector when nothing of positive area remains.
pub fn clip_polygon(poly: &[Point2], half_plane: &HalfPlane) -> Vec<Point2> {
    let mut p = LabeledPolygon::from_points(poly.to_vec(), NO_LABEL);
    p.clip(half_plane, NO_LABEL);
    p.pts
}

/// Shoelace area and uniform-density centroid; `(0, None)` for empty or
/// zero-area input.
pub fn cell_area_centroid(poly: &[Point2]) -> (f64, Option<Point2>) {
    let n = poly.len();
    if n < 3 {
        return (0.0, None);
    }
    // Shift to the first vertex for accuracy.
    let o = poly[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 1..n - 1 {
        let p = [poly[k][0] - o[0], poly[k][1] - o[1]];
        let q = [poly[k + 1][0] - o[0], poly[k + 1][1] - o[1]];
        let cr = p[0] * q[1] - q[0] * p[1];
        a2 += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    if a2 == 0.0 {
        return (0.0, None);
    }
    let area = 0.5 * a2;
    (area.abs(), Some([o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]))
}
