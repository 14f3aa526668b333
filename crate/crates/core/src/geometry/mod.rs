//! Power diagrams of weighted sites, clipped to a rectangle.
//!
//! Site `i` with height `h_i` owns the region where the affine function
//! `<x, p_i> + h_i` is the largest. Adjacency comes from the lower convex hull
//! of the dual points `(p_i, -h_i)`; each cell is then cut out of the
//! rectangle by half-plane clipping against its hull neighbors.

mod clip;
mod hull;
mod power;
mod svg;

use thiserror::Error;

use crate::Point2;

pub use clip::{cell_area_centroid, clip_polygon, HalfPlane};
pub use hull::{lower_convex_hull, LowerHull};
pub use power::{power_diagram, power_diagram_with, PowerDiagram};
pub use svg::diagram_to_svg;

/// Relative tolerance of the floating-point predicates.
pub const PREDICATE_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 3 affinely independent points, got a degenerate configuration")]
    Degenerate,
    #[error("sites {0} and {1} coincide")]
    DuplicateSites(usize, usize),
    #[error("{sites} sites but {heights} heights")]
    LengthMismatch { sites: usize, heights: usize },
    #[error("invalid rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]")]
    InvalidRect { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    #[error("cell areas sum to {got}, expected {expected}")]
    Partition { got: f64, expected: f64 },
    #[error("non-finite site or height")]
    NonFinite,
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self, GeometryError> {
        if !(xmin < xmax && ymin < ymax) || ![xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidRect { xmin, xmax, ymin, ymax });
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// `[-r, r]^2`.
    pub fn square(r: f64) -> Self {
        Self { xmin: -r, xmax: r, ymin: -r, ymax: r }
    }

    /// The bounding square of `points` (side = larger extent), scaled by
    /// `scale` about its center.
    pub fn bounding_square(points: &[Point2], scale: f64) -> Result<Self, GeometryError> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]) * scale;
        Self::new(c[0] - half, c[0] + half, c[1] - half, c[1] + half)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    /// Counter-clockwise corners starting at `(xmin, ymin)`.
    pub fn corners(&self) -> [Point2; 4] {
        [[self.xmin, self.ymin], [self.xmax, self.ymin], [self.xmax, self.ymax], [self.xmin, self.ymax]]
    }

    /// Largest coordinate magnitude, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        self.xmin.abs().max(self.xmax.abs()).max(self.ymin.abs()).max(self.ymax.abs()).max(1e-300)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_basics() {
        assert!(Rect::new(1.0, 0.0, 0.0, 1.0).is_err());
        let r = Rect::bounding_square(&[[-1.0, -0.5], [1.0, 0.5]], 1.2).unwrap();
        assert!((r.xmin + 1.2).abs() < 1e-15 && (r.ymax - 1.2).abs() < 1e-15);
        assert_eq!(Rect::square(1.0).area(), 4.0);
    }
}
