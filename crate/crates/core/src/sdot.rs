//! Relaxed semi-discrete optimal transport by damped Newton iteration on the
//! height vector.
//!
//! The source is the uniform density on a rectangle `omega`, the target the
//! point masses `nu_i` at the mesh vertices `p_i`. Cells may become empty;
//! no retriangulation or convexity constraint is ever applied.

use std::io::{self, Write};

use log::{debug, warn};
use thiserror::Error;

use crate::geometry::{power_diagram_with, GeometryError, PowerDiagram, Rect};
use crate::linalg::{conjugate_gradient, CgOptions, CsrMatrix, SolveError};
use crate::measures::MeasureStrategy;
use crate::mesh::TriMesh;
use crate::par::Parallelism;
use crate::Point2;

/// Smallest damping factor tried before a step is declared stalled.
pub const LAMBDA_MIN: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no entries")]
    Empty,
    #[error("measure entry {0} is negative or not finite")]
    InvalidEntry(usize),
    #[error("measure has zero total mass")]
    ZeroMass,
    #[error("mesh has no gray channel")]
    MissingGray,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum SdotError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("Newton system: {0}")]
    Solve(#[from] SolveError),
    #[error("{sites} sites but measure has {measure} entries")]
    LengthMismatch { sites: usize, measure: usize },
}

/// Normalized target measure with the strategy that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    nu: Vec<f64>,
    strategy: MeasureStrategy,
}

impl MeasureSpec {
    /// Normalizes nonnegative `raw` weights to unit mass.
    pub fn new(raw: Vec<f64>, strategy: MeasureStrategy) -> Result<Self, MeasureError> {
        if raw.is_empty() {
            return Err(MeasureError::Empty);
        }
        if let Some(i) = raw.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MeasureError::InvalidEntry(i));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(MeasureError::ZeroMass);
        }
        Ok(Self { nu: raw.into_iter().map(|v| v / total).collect(), strategy })
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    pub fn strategy(&self) -> &MeasureStrategy {
        &self.strategy
    }

    pub(crate) fn set_strategy(&mut self, s: MeasureStrategy) {
        self.strategy = s;
    }
}

/// Heights whose power diagram is the Voronoi diagram of `sites`:
/// `h_i = (1 - |p_i|^2) / 2`, shifted to zero mean.
pub fn init_heights(sites: &[Point2]) -> Vec<f64> {
    let mut h: Vec<f64> = sites.iter().map(|p| 0.5 * (1.0 - (p[0] * p[0] + p[1] * p[1]))).collect();
    zero_mean(&mut h);
    h
}

fn zero_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cell masses `omega_i = area_i / sum_j area_j`.
///
/// The denominator is the summed cell area, which equals `area(omega)` up to
/// the partition tolerance and makes `sum omega = 1` hold to rounding.
pub fn measures_from_diagram(pd: &PowerDiagram) -> Vec<f64> {
    let total = pd.total_area();
    pd.areas().iter().map(|a| a / total).collect()
}

/// Hessian of the transport energy, `d omega / d h`.
///
/// Off-diagonal `(i, j)` for adjacent cells is `-(L_ij / area(omega)) / |p_i - p_j|`;
/// the diagonal is the negated row sum.
pub fn hessian(pd: &PowerDiagram) -> CsrMatrix {
    let n = pd.len();
    let area = pd.omega().area();
    let sites = pd.sites();
    let mut diag = vec![0.0; n];
    let mut t = Vec::with_capacity(2 * pd.adjacency().len() + n);
    for &(i, j, l) in pd.adjacency() {
        let d = (sites[i][0] - sites[j][0]).hypot(sites[i][1] - sites[j][1]);
        let w = l / area / d;
        t.push((i, j, -w));
        t.push((j, i, -w));
        diag[i] += w;
        diag[j] += w;
    }
    t.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    CsrMatrix::from_triplets(n, t)
}

/// Iterate of the Newton solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BrenierState {
    /// Heights, zero mean.
    pub h: Vec<f64>,
    /// `nu - omega(h)`.
    pub grad: Vec<f64>,
    /// Last Newton direction.
    pub d: Vec<f64>,
    /// Last accepted damping factor (0 before the first step).
    pub lambda: f64,
    pub iter: usize,
    /// `|grad|` after each iteration, starting with the initial state.
    pub history: Vec<f64>,
    pub stalled: bool,
}

impl BrenierState {
    /// State at heights `h` (made zero mean) with `grad = nu - omega(pd)`.
    pub fn new(mut h: Vec<f64>, pd: &PowerDiagram, nu: &[f64]) -> Self {
        zero_mean(&mut h);
        let grad = gradient(pd, nu);
        let n = h.len();
        Self { history: vec![norm(&grad)], h, grad, d: vec![0.0; n], lambda: 0.0, iter: 0, stalled: false }
    }

    pub fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }
}

fn gradient(pd: &PowerDiagram, nu: &[f64]) -> Vec<f64> {
    measures_from_diagram(pd).iter().zip(nu).map(|(w, v)| v - w).collect()
}

/// Newton direction: `(H + eps I) d = grad` on the zero-mean subspace with
/// `eps = 1e-12 trace(H) / n`.
///
/// Rows of empty cells are zero in `H`. The system is then solved on the
/// nonempty cells alone (right-hand side projected to zero mean, which makes
/// it consistent), and each empty cell takes the scaled gradient step
/// `grad_i / mean(diag H)` relative to them.
pub fn newton_direction(pd: &PowerDiagram, grad: &[f64]) -> Result<Vec<f64>, SolveError> {
    let hess = hessian(pd);
    let n = hess.dim();
    let diag = hess.diagonal();
    let active: Vec<usize> = (0..n).filter(|&i| diag[i] > 0.0).collect();
    if active.len() == n {
        return solve_direction(&hess, grad);
    }
    let mut d = vec![0.0; n];
    if active.len() >= 2 {
        let mut slot = vec![usize::MAX; n];
        for (k, &i) in active.iter().enumerate() {
            slot[i] = k;
        }
        let t = active.iter().flat_map(|&i| hess.row(i).map(move |(j, v)| (i, j, v))).map(|(i, j, v)| (slot[i], slot[j], v)).collect();
        let sub = CsrMatrix::from_triplets(active.len(), t);
        let g: Vec<f64> = active.iter().map(|&i| grad[i]).collect();
        let ds = solve_direction(&sub, &g)?;
        for (k, &i) in active.iter().enumerate() {
            d[i] = ds[k];
        }
    }
    let mean_diag = if active.is_empty() { 1.0 } else { active.iter().map(|&i| diag[i]).sum::<f64>() / active.len() as f64 };
    let mean_active = if active.is_empty() { 0.0 } else { active.iter().map(|&i| d[i]).sum::<f64>() / active.len() as f64 };
    for i in (0..n).filter(|&i| diag[i] <= 0.0) {
        let lift = (reappearance_height(pd, i) - pd.heights()[i]).max(0.0);
        d[i] = mean_active + lift + grad[i] / mean_diag;
    }
    zero_mean(&mut d);
    Ok(d)
}

/// Smallest height at which site `i` owns a point of the domain, given the
/// other heights: `min_x max_j (<x, p_j> + h_j) - <x, p_i>`, attained at a
/// vertex of the current cells.
fn reappearance_height(pd: &PowerDiagram, i: usize) -> f64 {
    let p = pd.sites()[i];
    let mut best = f64::INFINITY;
    for (j, cell) in pd.cells().iter().enumerate() {
        if j == i {
            continue;
        }
        let q = pd.sites()[j];
        for x in cell {
            best = best.min(x[0] * (q[0] - p[0]) + x[1] * (q[1] - p[1]) + pd.heights()[j]);
        }
    }
    best
}

fn solve_direction(hess: &CsrMatrix, grad: &[f64]) -> Result<Vec<f64>, SolveError> {
    let n = hess.dim();
    let shift = (1e-12 * hess.trace() / n as f64).max(f64::MIN_POSITIVE);
    let opts = CgOptions { tol: 1e-12, max_iter: 10 * n.max(10), shift, zero_mean: true };
    conjugate_gradient(hess, grad, opts).map(|(d, _)| d)
}

/// One damped Newton step from `state` (whose diagram is `pd`).
///
/// Tries `h + lambda d` with `lambda = lambda0, lambda0/2, ...` until the
/// gradient norm decreases. Below [`LAMBDA_MIN`] the trial with the smallest
/// gradient norm is accepted and `state.stalled` is set. Returns the diagram
/// of the accepted heights.
pub fn newton_step(
    state: &mut BrenierState,
    pd: &PowerDiagram,
    nu: &[f64],
    lambda0: f64,
    mode: Parallelism,
) -> Result<PowerDiagram, SdotError> {
    let g0 = state.grad_norm();
    let d = newton_direction(pd, &state.grad)?;
    let mut lambda = lambda0;
    // (|grad|, lambda, h, diagram, grad) of the best rejected trial.
    let mut best: Option<(f64, f64, Vec<f64>, PowerDiagram, Vec<f64>)> = None;
    let accepted = loop {
        let mut h: Vec<f64> = state.h.iter().zip(&d).map(|(h, d)| h + lambda * d).collect();
        zero_mean(&mut h);
        match power_diagram_with(pd.sites(), &h, pd.omega(), mode) {
            Ok(trial) => {
                let g = gradient(&trial, nu);
                let gn = norm(&g);
                if gn < g0 {
                    break (lambda, h, trial, g);
                }
                if best.as_ref().is_none_or(|b| gn < b.0) {
                    best = Some((gn, lambda, h, trial, g));
                }
            }
            Err(e) => debug!("trial lambda {lambda:e} rejected: {e}"),
        }
        lambda *= 0.5;
        if lambda < LAMBDA_MIN {
            state.stalled = true;
            match best.take() {
                Some((gn, l, h, trial, g)) => {
                    warn!("damping stalled at |grad| = {g0:e}; accepting best trial |grad| = {gn:e}");
                    break (l, h, trial, g);
                }
                None => {
                    warn!("damping stalled and no trial diagram was valid; keeping heights");
                    break (0.0, state.h.clone(), pd.clone(), state.grad.clone());
                }
            }
        }
    };
    let (lambda, h, trial, g) = accepted;
    state.h = h;
    state.grad = g;
    state.d = d;
    state.lambda = lambda;
    state.iter += 1;
    state.history.push(state.grad_norm());
    Ok(trial)
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub eps_tol: f64,
    pub lambda0: f64,
    pub max_iter: usize,
    pub parallelism: Parallelism,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps_tol: 1e-5, lambda0: 1.0, max_iter: 1000, parallelism: Parallelism::default() }
    }
}

/// One row of the convergence log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub grad_norm: f64,
    pub lambda: f64,
    pub empty_cells: usize,
    pub max_abs_diff: f64,
}

impl IterationRecord {
    fn new(state: &BrenierState, pd: &PowerDiagram) -> Self {
        Self {
            iter: state.iter,
            grad_norm: state.grad_norm(),
            lambda: state.lambda,
            empty_cells: pd.empty_cell_count(),
            max_abs_diff: state.grad.iter().fold(0.0f64, |m, g| m.max(g.abs())),
        }
    }
}

/// Writes `iter,grad_norm,lambda,empty_cells,max_abs_diff` rows.
pub fn write_convergence_csv<W: Write>(records: &[IterationRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "iter,grad_norm,lambda,empty_cells,max_abs_diff")?;
    for r in records {
        writeln!(w, "{},{:e},{:e},{},{:e}", r.iter, r.grad_norm, r.lambda, r.empty_cells, r.max_abs_diff)?;
    }
    Ok(())
}

/// What the observer sees after every accepted step.
#[derive(Debug)]
pub struct IterationView<'a> {
    pub state: &'a BrenierState,
    pub diagram: &'a PowerDiagram,
    /// Centroid mesh of the current diagram.
    pub mesh: &'a TriMesh,
}

/// Output of [`solve_relaxed_ot`].
#[derive(Debug, Clone)]
pub struct TransportResult {
    /// Centroid mesh: vertex `i` sits at the mass center of cell `i`, so the
    /// discrete map sends `mhat[i]` to the site `p_i`. Faces are those of the input.
    pub mhat: TriMesh,
    /// Sites `p_i` (input vertex positions).
    pub sites: Vec<Point2>,
    pub diagram: PowerDiagram,
    pub state: BrenierState,
    pub log: Vec<IterationRecord>,
    pub converged: bool,
}

impl TransportResult {
    pub fn iterations(&self) -> usize {
        self.state.iter
    }

    pub fn stalled(&self) -> bool {
        self.state.stalled
    }

    /// Cell masses of the final diagram.
    pub fn omega(&self) -> Vec<f64> {
        measures_from_diagram(&self.diagram)
    }
}

/// Centroids of `pd`; vertices with empty cells keep their `previous` position.
pub fn centroid_positions(pd: &PowerDiagram, previous: &[Point2]) -> Vec<Point2> {
    pd.centroids().iter().zip(previous).map(|(c, p)| c.unwrap_or(*p)).collect()
}

/// Solves the relaxed transport from the uniform density on `omega` to `nu`
/// placed at the vertices of the planar mesh `m0`.
///
/// Iterates [`newton_step`] until `|grad| <= eps_tol`, a stall, or
/// `max_iter`. The observer runs after every step with the current centroid
/// mesh.
pub fn solve_relaxed_ot(
    m0: &TriMesh,
    nu: &MeasureSpec,
    omega: Rect,
    opts: &SolveOptions,
    mut observer: Option<&mut dyn FnMut(&IterationView<'_>)>,
) -> Result<TransportResult, SdotError> {
    let sites = m0.points2();
    if sites.len() != nu.len() {
        return Err(SdotError::LengthMismatch { sites: sites.len(), measure: nu.len() });
    }
    let h = init_heights(&sites);
    let mut pd = power_diagram_with(&sites, &h, omega, opts.parallelism)?;
    let mut state = BrenierState::new(h, &pd, nu.nu());
    let mut positions = centroid_positions(&pd, &sites);
    let mut log = vec![IterationRecord::new(&state, &pd)];
    while state.grad_norm() > opts.eps_tol && state.iter < opts.max_iter && !state.stalled {
        pd = newton_step(&mut state, &pd, nu.nu(), opts.lambda0, opts.parallelism)?;
        positions = centroid_positions(&pd, &positions);
        log.push(IterationRecord::new(&state, &pd));
        debug!("iter {} |grad| {:e} lambda {:e}", state.iter, state.grad_norm(), state.lambda);
        if let Some(obs) = observer.as_mut() {
            let mesh = m0.with_positions(&positions);
            obs(&IterationView { state: &state, diagram: &pd, mesh: &mesh });
        }
    }
    let converged = state.grad_norm() <= opts.eps_tol;
    if !converged {
        warn!("transport stopped after {} iterations at |grad| = {:e}", state.iter, state.grad_norm());
    }
    Ok(TransportResult { mhat: m0.with_positions(&positions), sites, diagram: pd, state, log, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::power_diagram;
    use crate::harmonic::tests::grid;
    use crate::measures::measure_uniform;

    const TWO: [Point2; 2] = [[-0.5, 0.0], [0.5, 0.0]];

    #[test]
    fn init_heights_values() {
        // Before the gauge shift: (1,0) -> 0, (0,0) -> 0.5.
        let h = init_heights(&[[1.0, 0.0], [0.0, 0.0]]);
        assert!((h[1] - h[0] - 0.5).abs() < 1e-15);
        assert!(h.iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn two_site_measures() {
        let pd = power_diagram(&TWO, &[0.0, 0.0], Rect::square(1.0)).unwrap();
        assert_eq!(measures_from_diagram(&pd), vec![0.5, 0.5]);
        let pd = power_diagram(&TWO, &[0.2, 0.0], Rect::square(1.0)).unwrap();
        let w = measures_from_diagram(&pd);
        assert!((w[0] - 0.6).abs() < 1e-15 && (w[1] - 0.4).abs() < 1e-15);
        let pd = power_diagram(&[[0.1, 0.1]], &[0.0], Rect::square(1.0)).unwrap();
        assert_eq!(measures_from_diagram(&pd), vec![1.0]);
    }

    #[test]
    fn two_site_hessian() {
        let pd = power_diagram(&TWO, &[0.0, 0.0], Rect::square(1.0)).unwrap();
        let h = hessian(&pd);
        assert!((h.get(0, 1) + 0.5).abs() < 1e-15);
        assert!((h.get(0, 0) - 0.5).abs() < 1e-15);
        assert!(h.is_symmetric(0.0));
    }

    #[test]
    fn empty_cell_row_is_zero() {
        let sites = [[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5], [0.0, -0.1]];
        let pd = power_diagram(&sites, &[0.0, 0.0, 0.0, -5.0], Rect::square(1.0)).unwrap();
        let h = hessian(&pd);
        assert_eq!(h.row(3).count(), 1);
        assert_eq!(h.get(3, 3), 0.0);
        for i in 0..4 {
            let s: f64 = h.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn two_site_newton() {
        let nu = [0.6, 0.4];
        let h = init_heights(&TWO);
        let mut pd = power_diagram(&TWO, &h, Rect::square(1.0)).unwrap();
        let mut st = BrenierState::new(h, &pd, &nu);
        while st.grad_norm() > 1e-12 && st.iter < 5 {
            pd = newton_step(&mut st, &pd, &nu, 1.0, Parallelism::Sequential).unwrap();
        }
        assert!(st.iter <= 5);
        assert!((st.h[0] - st.h[1] - 0.2).abs() < 1e-6);
        assert!(!st.stalled);
    }

    #[test]
    fn fixed_point_takes_no_steps() {
        let m = grid(3);
        let sites = m.points2();
        let omega = Rect::bounding_square(&sites, 1.2).unwrap();
        let pd = power_diagram(&sites, &init_heights(&sites), omega).unwrap();
        let nu = MeasureSpec::new(pd.areas().to_vec(), MeasureStrategy::Custom).unwrap();
        let r = solve_relaxed_ot(&m, &nu, omega, &SolveOptions::default(), None).unwrap();
        assert_eq!(r.iterations(), 0);
        assert!(r.converged);
    }

    #[test]
    fn uniform_grid_is_symmetric() {
        let m = grid(7);
        let sites = m.points2();
        let omega = Rect::bounding_square(&sites, 1.2).unwrap();
        let nu = measure_uniform(m.num_vertices()).unwrap();
        let r = solve_relaxed_ot(&m, &nu, omega, &SolveOptions::default(), None).unwrap();
        assert!(r.converged);
        assert_eq!(r.mhat.faces(), m.faces());
        // Rotation by 90 degrees maps vertex (i, j) to (n-1-j, i).
        let n = 7;
        for j in 0..n {
            for i in 0..n {
                let a = r.mhat.pos2(j * n + i);
                let b = r.mhat.pos2(i * n + (n - 1 - j));
                assert!((b[0] + a[1]).abs() < 1e-6 && (b[1] - a[0]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn heavy_vertex() {
        let m = grid(4);
        let mut raw = vec![0.1 / 15.0; 16];
        raw[5] = 0.9;
        let nu = MeasureSpec::new(raw, MeasureStrategy::Custom).unwrap();
        let sites = m.points2();
        let omega = Rect::bounding_square(&sites, 1.2).unwrap();
        let r = solve_relaxed_ot(&m, &nu, omega, &SolveOptions::default(), None).unwrap();
        assert!(r.converged);
        let w = r.omega();
        assert!((w[5] - 0.9).abs() <= r.state.grad_norm());
    }

    #[test]
    fn csv_rows() {
        let rec = IterationRecord { iter: 1, grad_norm: 0.5, lambda: 1.0, empty_cells: 0, max_abs_diff: 0.25 };
        let mut buf = Vec::new();
        write_convergence_csv(&[rec], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 2);
        assert!(s.lines().nth(1).unwrap().starts_with("1,5e-1,1e0,0,"));
    }
}
