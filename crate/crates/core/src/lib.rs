//! Topology-preserving semi-discrete optimal transport for triangle meshes.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: indexed triangle meshes, OBJ/OFF I/O, vertex areas, cotangent
//!   weights, boundary loops and orientation checks.
//! - [`geometry`]: power diagrams of weighted sites built from the lifted lower
//!   convex hull and clipped to a rectangle.
//! - [`harmonic`]: Dirichlet Laplace solves and harmonic parameterizations.
//! - [`quasiconformal`]: Beltrami coefficients, auxiliary metrics and the
//!   patch-wise correction that removes flips without touching connectivity.
//! - [`sdot`]: the relaxed Newton solver for the semi-discrete transport problem.
//! - [`measures`]: target measure constructors.
//! - [`pipeline`]: the end-to-end transport (single shot and temporal).
//!
//! With the default `parallel` feature, per-cell and per-face loops run on
//! rayon. Disabling the feature gives a purely sequential build with identical
//! results.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod geometry;
pub mod harmonic;
pub mod linalg;
pub mod measures;
pub mod mesh;
pub mod par;
pub mod pipeline;
pub mod quasiconformal;
pub mod sdot;

pub use geometry::{PowerDiagram, Rect};
pub use mesh::{Dim, EdgeWeightMap, TriMesh};
pub use num_complex::Complex64;
pub use par::Parallelism;
pub use pipeline::{t_ot, tt_ot, TemporalSequence, TotConfig, TotResult};
pub use quasiconformal::BeltramiField;
pub use sdot::{BrenierState, MeasureSpec, TransportResult};

/// 2D point.
pub type Point2 = [f64; 2];
/// 3D point.
pub type Point3 = [f64; 3];
