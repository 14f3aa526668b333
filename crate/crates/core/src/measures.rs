//! Target measure constructors. Every constructor returns a normalized
//! [`MeasureSpec`].

use crate::mesh::{vertex_areas, TriMesh};
use crate::sdot::{MeasureError, MeasureSpec};
use crate::Point2;

/// Which construction produced a measure, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureStrategy {
    /// Proportional to surface vertex area.
    Area,
    /// Equal mass per vertex.
    Uniform,
    /// Vertex area scaled by `k` inside regions of interest.
    Roi { regions: Vec<Region> },
    /// `k (delta + gray) a_i`.
    Image { k: f64, delta: f64 },
    /// Caller-supplied weights.
    Custom,
}

impl MeasureStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureStrategy::Area => "area",
            MeasureStrategy::Uniform => "uniform",
            MeasureStrategy::Roi { .. } => "roi",
            MeasureStrategy::Image { .. } => "image",
            MeasureStrategy::Custom => "custom",
        }
    }
}

/// Region of interest with its density scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Circle { cx: f64, cy: f64, r: f64, k: f64 },
    Rect { xmin: f64, xmax: f64, ymin: f64, ymax: f64, k: f64 },
}

impl Region {
    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Region::Circle { cx, cy, r, .. } => (p[0] - cx).hypot(p[1] - cy) <= r,
            Region::Rect { xmin, xmax, ymin, ymax, .. } => p[0] >= xmin && p[0] <= xmax && p[1] >= ymin && p[1] <= ymax,
        }
    }

    pub fn k(&self) -> f64 {
        match *self {
            Region::Circle { k, .. } | Region::Rect { k, .. } => k,
        }
    }
}

/// `nu_i` proportional to the vertex area of `mesh` (3D area for surfaces).
pub fn measure_area_preserving(mesh: &TriMesh) -> Result<MeasureSpec, MeasureError> {
    MeasureSpec::new(vertex_areas(mesh), MeasureStrategy::Area)
}

/// `nu_i = 1/n`.
pub fn measure_uniform(n: usize) -> Result<MeasureSpec, MeasureError> {
    MeasureSpec::new(vec![1.0; n], MeasureStrategy::Uniform)
}

/// `nu_i` proportional to `k_i a_i` on the planar mesh, where `k_i` is the
/// largest `k` of the regions containing vertex `i` and 1 outside all regions.
pub fn measure_roi(mesh2d: &TriMesh, regions: &[Region]) -> Result<MeasureSpec, MeasureError> {
    let k = |_: usize, p: Point2| regions.iter().filter(|r| r.contains(p)).map(Region::k).reduce(f64::max);
    let mut spec = measure_roi_with(mesh2d, |i, p| k(i, p).unwrap_or(1.0))?;
    spec.set_strategy(MeasureStrategy::Roi { regions: regions.to_vec() });
    Ok(spec)
}

/// `nu_i` proportional to `k(i, p_i) a_i` for an arbitrary per-vertex scalar.
pub fn measure_roi_with(mesh2d: &TriMesh, k: impl Fn(usize, Point2) -> f64) -> Result<MeasureSpec, MeasureError> {
    let raw = vertex_areas(mesh2d).into_iter().enumerate().map(|(i, a)| k(i, mesh2d.pos2(i)) * a).collect();
    MeasureSpec::new(raw, MeasureStrategy::Custom)
}

/// `nu_i` proportional to `k (delta + gray_i) a_i`.
pub fn measure_image(mesh2d: &TriMesh, k: f64, delta: f64) -> Result<MeasureSpec, MeasureError> {
    let gray = mesh2d.gray().ok_or(MeasureError::MissingGray)?;
    if !(delta > 0.0) || !(k > 0.0) {
        return Err(MeasureError::InvalidParameter(format!("need k > 0 and delta > 0, got k = {k}, delta = {delta}")));
    }
    let raw = vertex_areas(mesh2d).into_iter().zip(gray).map(|(a, g)| k * (delta + g) * a).collect();
    MeasureSpec::new(raw, MeasureStrategy::Image { k, delta })
}
