//! End-to-end transport: parameterize, solve the relaxed transport, correct
//! the centroid mesh. [`t_ot`] returns the final mesh, [`tt_ot`] every
//! intermediate one.

mod diagnostics;
mod export;

use log::{info, warn};
use thiserror::Error;

use crate::geometry::{power_diagram_with, GeometryError, Rect};
use crate::harmonic::{default_corners, harmonic_map_disk, harmonic_map_rect, HarmonicError, WeightScheme};
use crate::measures::{measure_area_preserving, measure_image, measure_roi, measure_uniform, Region};
use crate::mesh::{flipped_faces, Dim, TriMesh};
use crate::par::Parallelism;
use crate::quasiconformal::{qc_correct, BeltramiField, QcError, QcOptions, QcReport};
use crate::sdot::{
    init_heights, measures_from_diagram, solve_relaxed_ot, IterationView, MeasureError, MeasureSpec, SdotError, SolveOptions,
    TransportResult,
};

pub use diagnostics::{histogram, write_diagnostics_csv, Diagnostics};
pub use export::{trajectories_svg, write_frame_summary_csv, write_frames, write_psi_csv};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parameterization failed: {0}")]
    Harmonic(#[from] HarmonicError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Transport(#[from] SdotError),
    #[error(transparent)]
    Qc(#[from] QcError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("planar input has {0} flipped faces")]
    FlippedInput(usize),
}

/// Canonical parameter domain of a surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Domain {
    #[default]
    Disk,
    Square,
}

/// Target measure and its parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MeasureConfig {
    #[default]
    Area,
    Uniform,
    Roi {
        regions: Vec<Region>,
    },
    Image {
        k: f64,
        delta: f64,
    },
}

/// Pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TotConfig {
    /// Stop when `|grad E| <= eps_tol`.
    pub eps_tol: f64,
    /// Correct when `max |mu| > eps_distortion`.
    pub eps_distortion: f64,
    pub gamma: usize,
    pub gamma_max: usize,
    pub lambda0: f64,
    /// Side of the transport domain relative to the bounding square of the parameter mesh.
    pub omega_scale: f64,
    pub max_iter: usize,
    pub domain: Domain,
    pub measure: MeasureConfig,
    /// Weights of the parameterization.
    pub weights: WeightScheme,
    pub parallelism: Parallelism,
}

impl Default for TotConfig {
    fn default() -> Self {
        Self {
            eps_tol: 1e-5,
            eps_distortion: 0.7,
            gamma: 2,
            gamma_max: 5,
            lambda0: 1.0,
            omega_scale: 1.2,
            max_iter: 1000,
            domain: Domain::Disk,
            measure: MeasureConfig::Area,
            weights: WeightScheme::Cotangent,
            parallelism: Parallelism::default(),
        }
    }
}

impl TotConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(self.eps_distortion > 0.0 && self.eps_distortion <= 1.0) {
            return bad(format!("eps_distortion must be in (0, 1], got {}", self.eps_distortion));
        }
        if !(self.eps_tol > 0.0) {
            return bad(format!("eps_tol must be positive, got {}", self.eps_tol));
        }
        if !(self.omega_scale > 1.0) || !self.omega_scale.is_finite() {
            return bad(format!("omega_scale must exceed 1, got {}", self.omega_scale));
        }
        if !(self.lambda0 > 0.0) {
            return bad(format!("lambda0 must be positive, got {}", self.lambda0));
        }
        if self.gamma == 0 || self.gamma_max < self.gamma {
            return bad(format!("need 1 <= gamma <= gamma_max, got {} and {}", self.gamma, self.gamma_max));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        match &self.measure {
            MeasureConfig::Image { k, delta } if !(*k > 0.0 && *delta > 0.0) => {
                bad(format!("image measure needs k > 0 and delta > 0, got {k}, {delta}"))
            }
            MeasureConfig::Roi { regions } if regions.iter().any(|r| !(r.k() >= 0.0)) => bad("region k must be nonnegative".into()),
            _ => Ok(()),
        }
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions { eps_tol: self.eps_tol, lambda0: self.lambda0, max_iter: self.max_iter, parallelism: self.parallelism }
    }

    fn qc_options(&self) -> QcOptions {
        QcOptions { eps: self.eps_distortion, gamma: self.gamma, gamma_max: self.gamma_max, ..QcOptions::default() }
    }
}

/// Planar parameter mesh of `input`: the input itself when already planar,
/// otherwise its harmonic map onto the configured domain. A cotangent map
/// with flips is replaced by the uniform-weight map.
pub fn parameterize(input: &TriMesh, cfg: &TotConfig) -> Result<TriMesh, PipelineError> {
    if input.dim() == Dim::Two {
        let flips = flipped_faces(input).len();
        if flips > 0 {
            return Err(PipelineError::FlippedInput(flips));
        }
        return Ok(input.clone());
    }
    let run = |scheme| match cfg.domain {
        Domain::Disk => harmonic_map_disk(input, scheme),
        Domain::Square => harmonic_map_rect(input, default_corners(input)?, scheme),
    };
    match run(cfg.weights) {
        Err(HarmonicError::FlippedOutput { faces, .. }) if cfg.weights != WeightScheme::Uniform => {
            warn!("parameterization flipped {} faces; retrying with uniform weights", faces.len());
            Ok(run(WeightScheme::Uniform)?)
        }
        r => Ok(r?),
    }
}

/// Target measure on the vertices. Surface area uses `input`; the other
/// strategies use the planar parameter mesh.
pub fn build_measure(input: &TriMesh, param: &TriMesh, cfg: &MeasureConfig) -> Result<MeasureSpec, PipelineError> {
    Ok(match cfg {
        MeasureConfig::Area => measure_area_preserving(input)?,
        MeasureConfig::Uniform => measure_uniform(param.num_vertices())?,
        MeasureConfig::Roi { regions } => measure_roi(param, regions)?,
        MeasureConfig::Image { k, delta } => measure_image(param, *k, *delta)?,
    })
}

/// Beltrami field of `m0 -> centroid` and, when its sup norm exceeds
/// `eps_distortion`, the corrected mesh.
pub fn correct_frame(
    m0: &TriMesh,
    centroid: &TriMesh,
    cfg: &TotConfig,
) -> Result<(TriMesh, BeltramiField, Option<QcReport>), PipelineError> {
    let field = BeltramiField::compute_with(m0, centroid, cfg.parallelism)?;
    if field.sup_norm() <= cfg.eps_distortion {
        return Ok((centroid.clone(), field, None));
    }
    let (out, report) = qc_correct(m0, centroid, &cfg.qc_options())?;
    Ok((out, field, Some(report)))
}

/// Output of [`t_ot`]. The map is the composition of `param` (input vertex
/// `i` to `param[i]`) with the planar map `param[i] -> mhat[i]`.
#[derive(Debug, Clone)]
pub struct TotResult {
    /// Planar parameter mesh.
    pub param: TriMesh,
    pub nu: MeasureSpec,
    pub omega_rect: Rect,
    /// Solver output; `transport.mhat` is the uncorrected centroid mesh.
    pub transport: TransportResult,
    /// Beltrami field of the uncorrected map.
    pub beltrami: BeltramiField,
    /// Present when correction ran.
    pub qc: Option<QcReport>,
    /// Final mesh.
    pub mhat: TriMesh,
    pub diagnostics: Diagnostics,
}

impl TotResult {
    pub fn converged(&self) -> bool {
        self.transport.converged
    }

    pub fn flipped_faces(&self) -> usize {
        flipped_faces(&self.mhat).len()
    }
}

struct Prepared {
    param: TriMesh,
    nu: MeasureSpec,
    omega_rect: Rect,
}

fn prepare(input: &TriMesh, cfg: &TotConfig) -> Result<Prepared, PipelineError> {
    cfg.validate()?;
    let param = parameterize(input, cfg)?;
    let nu = build_measure(input, &param, &cfg.measure)?;
    let omega_rect = Rect::bounding_square(&param.points2(), cfg.omega_scale)?;
    Ok(Prepared { param, nu, omega_rect })
}

/// Topology-preserving transport of `input`.
pub fn t_ot(input: &TriMesh, cfg: &TotConfig) -> Result<TotResult, PipelineError> {
    let Prepared { param, nu, omega_rect } = prepare(input, cfg)?;
    let transport = solve_relaxed_ot(&param, &nu, omega_rect, &cfg.solve_options(), None)?;
    let (mhat, beltrami, qc) = correct_frame(&param, &transport.mhat, cfg)?;
    let diagnostics = Diagnostics::new(nu.nu(), &transport.omega());
    info!(
        "transport: {} iterations, |grad| = {:e}, max |mu| = {:.3}, {} flips after correction",
        transport.iterations(),
        transport.state.grad_norm(),
        beltrami.sup_norm(),
        flipped_faces(&mhat).len()
    );
    Ok(TotResult { param, nu, omega_rect, transport, beltrami, qc, mhat, diagnostics })
}

/// One mesh of a [`TemporalSequence`].
#[derive(Debug, Clone)]
pub struct Frame {
    /// `iter / total iterations`.
    pub t: f64,
    pub iter: usize,
    pub mesh: TriMesh,
    pub grad_norm: f64,
    /// `max_i |nu_i - omega_i|`.
    pub rho_max: f64,
    pub flips: usize,
    /// `nu_i / omega_i`, `None` for empty cells.
    pub psi: Vec<Option<f64>>,
    /// Present when correction ran on this frame.
    pub qc: Option<QcReport>,
}

/// Output of [`tt_ot`]: frame 0 is the parameter mesh, frame `k` the
/// corrected centroid mesh after iteration `k`.
#[derive(Debug, Clone)]
pub struct TemporalSequence {
    pub frames: Vec<Frame>,
    pub nu: MeasureSpec,
    pub omega_rect: Rect,
    pub transport: TransportResult,
}

impl TemporalSequence {
    pub fn faces(&self) -> &[[usize; 3]] {
        self.frames[0].mesh.faces()
    }

    pub fn last(&self) -> &Frame {
        self.frames.last().expect("sequence has frame 0")
    }

    /// Position of every vertex through the frames.
    pub fn trajectories(&self) -> Vec<Vec<[f64; 2]>> {
        let n = self.frames[0].mesh.num_vertices();
        (0..n).map(|v| self.frames.iter().map(|f| f.mesh.pos2(v)).collect()).collect()
    }
}

/// Temporal transport: like [`t_ot`] but every Newton iterate is corrected
/// and kept. The last frame equals the [`t_ot`] result for the same input.
///
/// When the initial state already meets the tolerance, the sequence has
/// frame 0 and one final frame at `t = 1`.
pub fn tt_ot(input: &TriMesh, cfg: &TotConfig) -> Result<TemporalSequence, PipelineError> {
    let Prepared { param, nu, omega_rect } = prepare(input, cfg)?;
    let mut frames = Vec::new();
    let mut failure: Option<PipelineError> = None;
    let nu_ref = nu.nu();
    let param_ref = &param;
    let mut observer = |view: &IterationView<'_>| {
        if failure.is_some() {
            return;
        }
        match correct_frame(param_ref, view.mesh, cfg) {
            Ok((mesh, _, qc)) => {
                let omega = measures_from_diagram(view.diagram);
                frames.push(make_frame(view.state.iter, mesh, nu_ref, &omega, view.state.grad_norm(), qc));
            }
            Err(e) => failure = Some(e),
        }
    };
    let transport = solve_relaxed_ot(&param, &nu, omega_rect, &cfg.solve_options(), Some(&mut observer))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let sites = param.points2();
    let pd0 = power_diagram_with(&sites, &init_heights(&sites), omega_rect, cfg.parallelism)?;
    let frame0 = make_frame(0, param.clone(), nu.nu(), &measures_from_diagram(&pd0), transport.log[0].grad_norm, None);
    let mut all = vec![frame0];
    if frames.is_empty() {
        let (mesh, _, qc) = correct_frame(&param, &transport.mhat, cfg)?;
        all.push(make_frame(0, mesh, nu.nu(), &transport.omega(), transport.state.grad_norm(), qc));
    }
    all.extend(frames);
    let total = transport.iterations().max(1) as f64;
    let last = all.len() - 1;
    for (k, f) in all.iter_mut().enumerate() {
        f.t = if k == last { 1.0 } else { f.iter as f64 / total };
    }
    Ok(TemporalSequence { frames: all, nu, omega_rect, transport })
}

fn make_frame(iter: usize, mesh: TriMesh, nu: &[f64], omega: &[f64], grad_norm: f64, qc: Option<QcReport>) -> Frame {
    let d = Diagnostics::new(nu, omega);
    Frame { t: 0.0, iter, flips: flipped_faces(&mesh).len(), mesh, grad_norm, rho_max: d.rho_max(), psi: d.psi, qc }
}
