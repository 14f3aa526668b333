//! Command-line front end for `tot-core`.

pub mod config;
mod quad;
mod warp;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use serde_json::json;
use tot_core::geometry::{diagram_to_svg, power_diagram, Rect};
use tot_core::mesh::{image_to_mesh, load_mesh, save_mesh, GrayImage, MeshFormat};
use tot_core::pipeline::{
    t_ot, trajectories_svg, tt_ot, write_diagnostics_csv, write_frame_summary_csv, write_frames, write_psi_csv, TemporalSequence, TotResult,
};
use tot_core::quasiconformal::{write_beltrami_csv, BeltramiField};
use tot_core::sdot::write_convergence_csv;
use tot_core::TriMesh;

use config::{resolve, CommandDefaults, MeasureKind, MeshFormatKind, Resolved};
pub use config::{RunArgs, RunConfig};
pub use quad::quad_obj;
pub use warp::warp_image;

#[derive(Debug, Parser)]
#[command(name = "tot", version, about = "Topology-preserving optimal transport on triangle meshes")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parameterize a surface mesh (OBJ/OFF) onto the disk or square.
    Param {
        input: Option<PathBuf>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Deform the grid mesh of a grayscale PNG.
    Image {
        input: Option<PathBuf>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Emit the mesh after every solver iteration (mesh or PNG input).
    Temporal {
        input: Option<PathBuf>,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Draw the power diagram of given sites and heights as SVG.
    Powerdiagram {
        /// Text file with one `x y` pair per line.
        #[arg(long)]
        sites: PathBuf,
        /// Text file with one height per line (default: all zero).
        #[arg(long)]
        heights: Option<PathBuf>,
        /// `xmin,xmax,ymin,ymax` (default: bounding square of the sites scaled by 1.2).
        #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
        rect: Option<Rect>,
        #[arg(long, default_value_t = 512.0)]
        size: f64,
        /// Output file (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// How a run ended; maps to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
    Stalled,
    QcIncomplete,
}

impl Status {
    /// 0 success, 2 tolerance not reached, 3 damping stalled, 4 correction
    /// skipped patches or left flipped faces. Errors exit with 1.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
            Status::Stalled => 3,
            Status::QcIncomplete => 4,
        }
    }

    fn of(converged: bool, stalled: bool, qc_incomplete: bool) -> Self {
        if stalled {
            Status::Stalled
        } else if !converged {
            Status::NotConverged
        } else if qc_incomplete {
            Status::QcIncomplete
        } else {
            Status::Ok
        }
    }
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    let [xmin, xmax, ymin, ymax] = v[..] else { return Err("expected xmin,xmax,ymin,ymax".into()) };
    Rect::new(xmin, xmax, ymin, ymax).map_err(|e| e.to_string())
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Param { input, args } => {
            let d = CommandDefaults { measure: MeasureKind::Area, k: 4.0, delta: 0.02, frames: false };
            cmd_param(&resolve(input, &args, d)?)
        }
        Command::Image { input, args } => {
            let d = CommandDefaults { measure: MeasureKind::Image, k: 4.0, delta: 0.02, frames: false };
            cmd_image(&resolve(input, &args, d)?)
        }
        Command::Temporal { input, args } => {
            let d = CommandDefaults { measure: MeasureKind::Image, k: 1.0, delta: 0.1, frames: true };
            cmd_temporal(&resolve(input, &args, d)?)
        }
        Command::Powerdiagram { sites, heights, rect, size, output } => {
            let svg = cmd_powerdiagram(&sites, heights.as_deref(), rect, size)?;
            match output {
                Some(p) => fs::write(&p, svg).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{svg}"),
            }
            Ok(Status::Ok)
        }
    }
}

fn mesh_format(kind: MeshFormatKind) -> (MeshFormat, &'static str) {
    match kind {
        MeshFormatKind::Obj => (MeshFormat::Obj, "obj"),
        MeshFormatKind::Off => (MeshFormat::Off, "off"),
    }
}

fn load_input_mesh(path: &Path) -> Result<TriMesh> {
    let format = MeshFormat::from_path(path).with_context(|| format!("unknown mesh extension: {}", path.display()))?;
    load_mesh(path, format).with_context(|| format!("loading {}", path.display()))
}

/// Reads a PNG as Rec.601 luma in `[0, 1]`.
pub fn load_gray_png(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).with_context(|| format!("loading {}", path.display()))?.to_rgb32f();
    let (w, h) = img.dimensions();
    Ok(GrayImage::from_fn(w as usize, h as usize, |x, y| {
        let p = img.get_pixel(x as u32, y as u32).0;
        (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).clamp(0.0, 1.0)
    }))
}

pub fn save_gray_png(img: &GrayImage, path: &Path) -> Result<()> {
    let out = image::GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        image::Luma([(img.get(x as usize, y as usize).clamp(0.0, 1.0) * 255.0).round() as u8])
    });
    out.save(path).with_context(|| format!("writing {}", path.display()))
}

fn is_png(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn save(mesh: &TriMesh, cfg: &Resolved, stem: &str) -> Result<PathBuf> {
    let (format, ext) = mesh_format(cfg.mesh_format);
    let path = cfg.output.join(format!("{stem}.{ext}"));
    save_mesh(mesh, &path, format).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Files common to the single-shot commands.
fn write_result(r: &TotResult, cfg: &Resolved) -> Result<Status> {
    save(&r.param, cfg, "param")?;
    save(&r.mhat, cfg, "output")?;
    if cfg.csv {
        let field = BeltramiField::compute(&r.param, &r.mhat)?;
        write_beltrami_csv(&field.per_vertex, create(&cfg.output.join("beltrami.csv"))?)?;
        write_diagnostics_csv(&r.diagnostics, create(&cfg.output.join("diagnostics.csv"))?)?;
        write_convergence_csv(&r.transport.log, create(&cfg.output.join("convergence.csv"))?)?;
    }
    if cfg.svg {
        fs::write(cfg.output.join("diagram.svg"), diagram_to_svg(&r.transport.diagram, 800.0))?;
    }
    let qc_incomplete = r.qc.as_ref().is_some_and(|q| !q.is_clean()) || r.flipped_faces() > 0;
    let summary = json!({
        "vertices": r.mhat.num_vertices(),
        "iterations": r.transport.iterations(),
        "grad_norm": r.transport.state.grad_norm(),
        "converged": r.converged(),
        "stalled": r.transport.stalled(),
        "max_beltrami": finite_or_null(r.beltrami.sup_norm()),
        "corrected": r.qc.is_some(),
        "skipped_patches": r.qc.as_ref().map_or(0, |q| q.skipped()),
        "flipped_faces": r.flipped_faces(),
        "rho_max": r.diagnostics.rho_max(),
    });
    fs::write(cfg.output.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    info!("{summary}");
    Ok(Status::of(r.converged(), r.transport.stalled(), qc_incomplete))
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

pub fn cmd_param(cfg: &Resolved) -> Result<Status> {
    let mesh = load_input_mesh(&cfg.input)?;
    fs::create_dir_all(&cfg.output)?;
    let r = t_ot(&mesh, &cfg.tot)?;
    write_result(&r, cfg)
}

pub fn cmd_image(cfg: &Resolved) -> Result<Status> {
    let img = load_gray_png(&cfg.input)?;
    let mesh = image_to_mesh(&img, cfg.n)?;
    fs::create_dir_all(&cfg.output)?;
    let r = t_ot(&mesh, &cfg.tot)?;
    let status = write_result(&r, cfg)?;
    save_gray_png(&warp_image(&img, &r.param, &r.mhat, 0.0), &cfg.output.join("warped.png"))?;
    if cfg.quad {
        fs::write(cfg.output.join("quad.obj"), quad_obj(&r.mhat, cfg.n)?)?;
    }
    Ok(status)
}

pub fn cmd_temporal(cfg: &Resolved) -> Result<Status> {
    let mesh = if is_png(&cfg.input) { image_to_mesh(&load_gray_png(&cfg.input)?, cfg.n)? } else { load_input_mesh(&cfg.input)? };
    fs::create_dir_all(&cfg.output)?;
    let seq: TemporalSequence = tt_ot(&mesh, &cfg.tot)?;
    let (format, _) = mesh_format(cfg.mesh_format);
    if cfg.frames {
        write_frames(&seq, &cfg.output.join("frames"), format)?;
    }
    save(&seq.last().mesh, cfg, "output")?;
    fs::write(cfg.output.join("trajectories.svg"), trajectories_svg(&seq, 800.0, 1))?;
    write_psi_csv(&seq, create(&cfg.output.join("psi.csv"))?)?;
    if cfg.csv {
        write_frame_summary_csv(&seq, create(&cfg.output.join("frames.csv"))?)?;
        write_convergence_csv(&seq.transport.log, create(&cfg.output.join("convergence.csv"))?)?;
    }
    if cfg.svg {
        fs::write(cfg.output.join("diagram.svg"), diagram_to_svg(&seq.transport.diagram, 800.0))?;
    }
    let qc_incomplete = seq.frames.iter().any(|f| f.flips > 0 || f.qc.as_ref().is_some_and(|q| !q.is_clean()));
    info!("{} frames, final |grad E| = {:e}", seq.frames.len(), seq.transport.state.grad_norm());
    Ok(Status::of(seq.transport.converged, seq.transport.stalled(), qc_incomplete))
}

fn read_numbers(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().with_context(|| format!("{}:{}: bad number {t:?}", path.display(), i + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn cmd_powerdiagram(sites: &Path, heights: Option<&Path>, rect: Option<Rect>, size: f64) -> Result<String> {
    let pts: Vec<[f64; 2]> = read_numbers(sites)?
        .into_iter()
        .map(|r| match r[..] {
            [x, y] => Ok([x, y]),
            _ => bail!("sites need two numbers per line"),
        })
        .collect::<Result<_>>()?;
    if pts.is_empty() {
        bail!("no sites in {}", sites.display());
    }
    let h: Vec<f64> = match heights {
        Some(p) => read_numbers(p)?.into_iter().flatten().collect(),
        None => vec![0.0; pts.len()],
    };
    let omega = match rect {
        Some(r) => r,
        None => Rect::bounding_square(&pts, 1.2)?,
    };
    let pd = power_diagram(&pts, &h, omega)?;
    Ok(diagram_to_svg(&pd, size))
}
