use super::{MeshError, TriMesh};
use crate::Point2;

/// Row-major grayscale raster, row 0 at the top, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// # Panics
    /// If `data.len() != width * height`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "raster size mismatch");
        Self { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear sample at fractional pixel coordinates, clamped to the raster.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let x0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (fx, fy) = (u - x0 as f64, v - y0 as f64);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }

    /// The rectangle the raster occupies in mesh coordinates: the longer side
    /// spans `[-1, 1]`, the shorter one is scaled by the aspect ratio.
    pub fn domain(&self) -> (f64, f64) {
        let (w, h) = (self.width as f64, self.height as f64);
        if w >= h {
            (1.0, h / w)
        } else {
            (w / h, 1.0)
        }
    }

    /// Maps a point in mesh coordinates to fractional pixel coordinates
    /// (pixel centers at the domain corners, y axis pointing up).
    pub fn to_pixel(&self, p: Point2) -> (f64, f64) {
        let (hx, hy) = self.domain();
        let u = (p[0] + hx) / (2.0 * hx) * (self.width - 1) as f64;
        let v = (hy - p[1]) / (2.0 * hy) * (self.height - 1) as f64;
        (u, v)
    }

    /// Bilinear sample at a point in mesh coordinates.
    pub fn sample_at(&self, p: Point2) -> f64 {
        let (u, v) = self.to_pixel(p);
        self.sample(u, v)
    }
}

/// Regular `n x n` grid over the image domain, each quad split along its
/// lower-left to upper-right diagonal, gray sampled bilinearly.
///
/// Vertex `(i, j)` (column `i`, row `j` counted from the bottom) has index
/// `j * n + i`; quad `(i, j)` owns faces `2 * (j * (n - 1) + i)` and the next.
pub fn image_to_mesh(image: &GrayImage, n: usize) -> Result<TriMesh, MeshError> {
    if image.width == 0 || image.height == 0 {
        return Err(MeshError::EmptyImage);
    }
    if n < 2 {
        return Err(MeshError::Resolution(n));
    }
    let (hx, hy) = image.domain();
    let mut pts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = -hx + 2.0 * hx * i as f64 / (n - 1) as f64;
            let y = -hy + 2.0 * hy * j as f64 / (n - 1) as f64;
            pts.push([x, y]);
        }
    }
    let mut faces = Vec::with_capacity(2 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let v00 = j * n + i;
            let (v10, v01, v11) = (v00 + 1, v00 + n, v00 + n + 1);
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    let gray = pts.iter().map(|&p| image.sample_at(p)).collect();
    TriMesh::from_2d(&pts, faces)?.with_gray(gray)
}
