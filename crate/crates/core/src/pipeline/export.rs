use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::mesh::{save_mesh, MeshError, MeshFormat};

use super::TemporalSequence;

/// Writes every frame as `frame_NNNN.obj` (or `.off`) under `dir` and returns the paths.
pub fn write_frames(seq: &TemporalSequence, dir: &Path, format: MeshFormat) -> Result<Vec<PathBuf>, MeshError> {
    std::fs::create_dir_all(dir)?;
    let ext = match format {
        MeshFormat::Obj => "obj",
        MeshFormat::Off => "off",
    };
    let mut paths = Vec::with_capacity(seq.frames.len());
    for (k, f) in seq.frames.iter().enumerate() {
        let path = dir.join(format!("frame_{k:04}.{ext}"));
        save_mesh(&f.mesh, &path, format)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `frame,t,iter,grad_norm,rho_max,flips,corrected` rows.
pub fn write_frame_summary_csv<W: Write>(seq: &TemporalSequence, mut w: W) -> io::Result<()> {
    writeln!(w, "frame,t,iter,grad_norm,rho_max,flips,corrected")?;
    for (k, f) in seq.frames.iter().enumerate() {
        writeln!(w, "{k},{},{},{:e},{:e},{},{}", f.t, f.iter, f.grad_norm, f.rho_max, f.flips, f.qc.is_some())?;
    }
    Ok(())
}

/// Writes `frame,vertex,psi` rows; empty cells give `nan`.
pub fn write_psi_csv<W: Write>(seq: &TemporalSequence, mut w: W) -> io::Result<()> {
    writeln!(w, "frame,vertex,psi")?;
    for (k, f) in seq.frames.iter().enumerate() {
        for (v, p) in f.psi.iter().enumerate() {
            match p {
                Some(p) => writeln!(w, "{k},{v},{p:e}")?,
                None => writeln!(w, "{k},{v},nan")?,
            }
        }
    }
    Ok(())
}

/// SVG of vertex paths through the frames, every `stride`-th vertex,
/// over the transport domain. The first frame's mesh is drawn faintly.
pub fn trajectories_svg(seq: &TemporalSequence, size_px: f64, stride: usize) -> String {
    let r = seq.omega_rect;
    let s = size_px / r.width().max(r.height());
    let (w, h) = (r.width() * s, r.height() * s);
    let map = |p: [f64; 2]| ((p[0] - r.xmin) * s, (r.ymax - p[1]) * s);
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.6}" height="{h:.6}" viewBox="0 0 {w:.6} {h:.6}">"#);
    let m0 = &seq.frames[0].mesh;
    for f in m0.faces() {
        let pts: Vec<String> = f
            .iter()
            .map(|&v| {
                let (x, y) = map(m0.pos2(v));
                format!("{x:.6},{y:.6}")
            })
            .collect();
        let _ = writeln!(out, r##"<polygon points="{}" fill="none" stroke="#ccc" stroke-width="0.5"/>"##, pts.join(" "));
    }
    for (v, path) in seq.trajectories().iter().enumerate().step_by(stride.max(1)) {
        let pts: Vec<String> = path
            .iter()
            .map(|&p| {
                let (x, y) = map(p);
                format!("{x:.6},{y:.6}")
            })
            .collect();
        let _ = writeln!(out, r##"<polyline data-vertex="{v}" points="{}" fill="none" stroke="#c33" stroke-width="1"/>"##, pts.join(" "));
    }
    out.push_str("</svg>\n");
    out
}
