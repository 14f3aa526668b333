#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tot_core::mesh::{Dim, TriMesh};
use tot_core::Point2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// n x n grid on [-1, 1]^2, two triangles per cell.
pub fn grid(n: usize) -> TriMesh {
    jittered_grid(n, 0.0, 0)
}

/// Grid with interior vertices moved by up to `amount` cell widths.
pub fn jittered_grid(n: usize, amount: f64, seed: u64) -> TriMesh {
    let mut r = rng(seed);
    let h = 2.0 / (n - 1) as f64;
    let mut pts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let mut p = [-1.0 + h * i as f64, -1.0 + h * j as f64];
            if amount > 0.0 && i > 0 && j > 0 && i < n - 1 && j < n - 1 {
                p[0] += amount * h * r.gen_range(-1.0..1.0);
                p[1] += amount * h * r.gen_range(-1.0..1.0);
            }
            pts.push(p);
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

/// Grid carrying a gray image with two dark Gaussian blobs on white.
pub fn two_blobs(n: usize) -> TriMesh {
    let m = grid(n);
    let gray = m
        .points2()
        .iter()
        .map(|p| {
            let b1 = (-((p[0] + 0.4).powi(2) + (p[1] + 0.3).powi(2)) / 0.08).exp();
            let b2 = (-((p[0] - 0.45).powi(2) + (p[1] - 0.35).powi(2)) / 0.05).exp();
            1.0 - (b1 + b2).min(1.0)
        })
        .collect();
    m.with_gray(gray).unwrap()
}

/// Paraboloid cap over the grid.
pub fn cap(n: usize) -> TriMesh {
    let g = grid(n);
    let pos = g.positions().iter().map(|p| [p[0], p[1], 0.3 * (p[0] * p[0] + p[1] * p[1])]).collect();
    TriMesh::new(pos, g.faces().to_vec(), Dim::Three).unwrap()
}

pub fn random_sites(r: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point2> {
    (0..n).map(|_| [r.gen_range(-extent..extent), r.gen_range(-extent..extent)]).collect()
}
