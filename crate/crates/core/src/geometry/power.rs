use log::debug;

use super::clip::{cell_area_centroid, HalfPlane, LabeledPolygon, NO_LABEL};
use super::hull::lower_convex_hull;
use super::{GeometryError, Rect};
use crate::par::{map_indices, Parallelism};
use crate::{Point2, Point3};

/// Relative tolerance on `sum(cell areas) == area(omega)`.
const PARTITION_TOL: f64 = 1e-9;

const HIDDEN: usize = usize::MAX;

/// Power diagram of weighted sites clipped to a rectangle.
///
/// Empty cells are legal: such a site has area 0 and no centroid.
#[derive(Debug, Clone)]
pub struct PowerDiagram {
    sites: Vec<Point2>,
    heights: Vec<f64>,
    omega: Rect,
    cells: Vec<Vec<Point2>>,
    areas: Vec<f64>,
    centroids: Vec<Option<Point2>>,
    adjacency: Vec<(usize, usize, f64)>,
    brute_force: bool,
}

impl PowerDiagram {
    pub fn sites(&self) -> &[Point2] {
        &self.sites
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn omega(&self) -> Rect {
        self.omega
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// CCW polygon of cell `i`; empty when the cell is empty.
    pub fn cell(&self, i: usize) -> &[Point2] {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[Vec<Point2>] {
        &self.cells
    }

    pub fn area(&self, i: usize) -> f64 {
        self.areas[i]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroid(&self, i: usize) -> Option<Point2> {
        self.centroids[i]
    }

    pub fn centroids(&self) -> &[Option<Point2>] {
        &self.centroids
    }

    pub fn is_cell_empty(&self, i: usize) -> bool {
        self.cells[i].is_empty()
    }

    pub fn empty_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_empty()).count()
    }

    /// Adjacent pairs `(i, j, L_ij)` with `i < j` and shared edge length `L_ij > 0`.
    pub fn adjacency(&self) -> &[(usize, usize, f64)] {
        &self.adjacency
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Whether the hull-based construction was abandoned for all-pairs clipping.
    pub fn used_brute_force(&self) -> bool {
        self.brute_force
    }

    /// Largest violation of `<x, p_i> + h_i >= <x, p_j> + h_j` over all cell
    /// vertices `x` of cell `i` and all sites `j` (0 when consistent).
    pub fn max_dominance_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, cell) in self.cells.iter().enumerate() {
            for x in cell {
                let own = x[0] * self.sites[i][0] + x[1] * self.sites[i][1] + self.heights[i];
                for (j, p) in self.sites.iter().enumerate() {
                    if j != i {
                        worst = worst.max(x[0] * p[0] + x[1] * p[1] + self.heights[j] - own);
                    }
                }
            }
        }
        worst
    }
}

/// [`power_diagram_with`] using the default (parallel when available) policy.
pub fn power_diagram(sites: &[Point2], h: &[f64], omega: Rect) -> Result<PowerDiagram, GeometryError> {
    power_diagram_with(sites, h, omega, Parallelism::default())
}

/// Builds the power diagram of `(sites, h)` restricted to `omega`.
///
/// Cell `i` is `omega` intersected with the half-planes
/// `<x, p_i - p_j> >= h_j - h_i` over its lower-hull neighbors `j`. When the
/// hull fails (degenerate input) or the cells do not tile `omega`, every other
/// site is used as a candidate instead.
pub fn power_diagram_with(sites: &[Point2], h: &[f64], omega: Rect, mode: Parallelism) -> Result<PowerDiagram, GeometryError> {
    let n = sites.len();
    if h.len() != n {
        return Err(GeometryError::LengthMismatch { sites: n, heights: h.len() });
    }
    if sites.iter().flatten().chain(h).any(|v| !v.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    check_duplicates(sites)?;

    let candidates: Option<Vec<Vec<usize>>> = match n {
        0 => Some(Vec::new()),
        1 => Some(vec![Vec::new()]),
        2 => Some(vec![vec![1], vec![0]]),
        _ => {
            let lifted: Vec<Point3> = sites.iter().zip(h).map(|(p, &hi)| [p[0], p[1], -hi]).collect();
            match lower_convex_hull(&lifted) {
                Ok(hull) => Some(hull_candidates(hull.neighbors(), &hull.on_hull)),
                Err(e) => {
                    debug!("lower hull failed ({e}); clipping against all sites");
                    None
                }
            }
        }
    };

    if let Some(cands) = candidates {
        let pd = assemble(sites, h, omega, mode, |i| cands[i].clone(), false);
        let expected = omega.area();
        if ((pd.total_area() - expected) / expected).abs() <= PARTITION_TOL {
            return Ok(pd);
        }
        debug!("hull-based cells cover {} of {}; clipping against all sites", pd.total_area(), expected);
    }
    let pd = assemble(sites, h, omega, mode, |i| (0..n).filter(|&j| j != i).collect(), true);
    let expected = omega.area();
    if n > 0 && ((pd.total_area() - expected) / expected).abs() > PARTITION_TOL {
        return Err(GeometryError::Partition { got: pd.total_area(), expected });
    }
    Ok(pd)
}

/// Clipping candidates per site. A site above the lower hull gets the
/// marker list `[HIDDEN]` and an empty cell.
fn hull_candidates(nb: Vec<Vec<usize>>, on_hull: &[bool]) -> Vec<Vec<usize>> {
    nb.into_iter().enumerate().map(|(i, l)| if on_hull[i] { l } else { vec![HIDDEN] }).collect()
}

fn check_duplicates(sites: &[Point2]) -> Result<(), GeometryError> {
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&i, &j| sites[i][0].total_cmp(&sites[j][0]).then(sites[i][1].total_cmp(&sites[j][1])));
    for w in order.windows(2) {
        if sites[w[0]] == sites[w[1]] {
            return Err(GeometryError::DuplicateSites(w[0].min(w[1]), w[0].max(w[1])));
        }
    }
    Ok(())
}

fn assemble<F>(sites: &[Point2], h: &[f64], omega: Rect, mode: Parallelism, candidates: F, brute_force: bool) -> PowerDiagram
where
    F: Fn(usize) -> Vec<usize> + Send + Sync,
{
    let n = sites.len();
    let polys: Vec<LabeledPolygon> = map_indices(n, mode, |i| {
        let cands = candidates(i);
        if cands.first() == Some(&HIDDEN) {
            return LabeledPolygon::default();
        }
        let mut poly = LabeledPolygon::from_points(omega.corners().to_vec(), NO_LABEL);
        for j in cands {
            let hp = HalfPlane::new([sites[i][0] - sites[j][0], sites[i][1] - sites[j][1]], h[j] - h[i]);
            poly.clip(&hp, j);
            if poly.is_empty() {
                break;
            }
        }
        poly
    });

    let mut shared: std::collections::BTreeMap<(usize, usize), (f64, f64)> = Default::default();
    let mut cells = Vec::with_capacity(n);
    let mut areas = Vec::with_capacity(n);
    let mut centroids = Vec::with_capacity(n);
    for (i, poly) in polys.into_iter().enumerate() {
        let m = poly.pts.len();
        for k in 0..m {
            let j = poly.labels[k];
            if j == NO_LABEL {
                continue;
            }
            let (a, b) = (poly.pts[k], poly.pts[(k + 1) % m]);
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let e = shared.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                e.0 += len;
            } else {
                e.1 += len;
            }
        }
        let (area, c) = cell_area_centroid(&poly.pts);
        cells.push(poly.pts);
        areas.push(area);
        centroids.push(c);
    }
    let scale = omega.width().max(omega.height());
    let adjacency = shared
        .into_iter()
        .filter_map(|((i, j), (a, b))| {
            let l = 0.5 * (a + b);
            (l > 1e-12 * scale).then_some((i, j, l))
        })
        .collect();
    PowerDiagram { sites: sites.to_vec(), heights: h.to_vec(), omega, cells, areas, centroids, adjacency, brute_force }
}
