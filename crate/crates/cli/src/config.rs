use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use tot_core::harmonic::WeightScheme;
use tot_core::measures::Region;
use tot_core::pipeline::{Domain, MeasureConfig, TotConfig};
use tot_core::Parallelism;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Area,
    Uniform,
    Roi,
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormatKind {
    Obj,
    Off,
}

/// Region of interest as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase", tag = "shape")]
pub enum RoiEntry {
    Circle { cx: f64, cy: f64, r: f64, k: f64 },
    Rect { xmin: f64, xmax: f64, ymin: f64, ymax: f64, k: f64 },
}

impl From<RoiEntry> for Region {
    fn from(e: RoiEntry) -> Self {
        match e {
            RoiEntry::Circle { cx, cy, r, k } => Region::Circle { cx, cy, r, k },
            RoiEntry::Rect { xmin, xmax, ymin, ymax, k } => Region::Rect { xmin, xmax, ymin, ymax, k },
        }
    }
}

/// Parses `circle:cx,cy,r,k` or `rect:xmin,xmax,ymin,ymax,k`.
pub fn parse_roi(s: &str) -> Result<Region, String> {
    let (shape, rest) = s.split_once(':').ok_or("expected shape:values")?;
    let v: Vec<f64> = rest.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<Result<_, _>>()?;
    match (shape, v.as_slice()) {
        ("circle", &[cx, cy, r, k]) => Ok(Region::Circle { cx, cy, r, k }),
        ("rect", &[xmin, xmax, ymin, ymax, k]) => Ok(Region::Rect { xmin, xmax, ymin, ymax, k }),
        _ => Err(format!("bad region {s:?}; use circle:cx,cy,r,k or rect:xmin,xmax,ymin,ymax,k")),
    }
}

/// JSON run configuration. Every field is optional; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Grid resolution for image input.
    pub n: Option<usize>,
    pub measure: Option<MeasureKind>,
    pub k: Option<f64>,
    pub delta: Option<f64>,
    pub roi: Option<Vec<RoiEntry>>,
    pub eps_tol: Option<f64>,
    pub eps_distortion: Option<f64>,
    pub gamma: Option<usize>,
    pub gamma_max: Option<usize>,
    pub lambda0: Option<f64>,
    pub omega_scale: Option<f64>,
    pub max_iter: Option<usize>,
    pub domain: Option<DomainKind>,
    pub clamp_weights: Option<bool>,
    pub sequential: Option<bool>,
    pub mesh_format: Option<MeshFormatKind>,
    pub svg: Option<bool>,
    pub csv: Option<bool>,
    pub frames: Option<bool>,
    pub quad: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flags shared by the pipeline subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub measure: Option<MeasureKind>,
    /// Density scalar of the image measure.
    #[arg(long)]
    pub k: Option<f64>,
    /// Additive term of the image measure.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Region of interest, `circle:cx,cy,r,k` or `rect:xmin,xmax,ymin,ymax,k` (repeatable).
    #[arg(long, value_parser = parse_roi)]
    pub roi: Vec<Region>,
    #[arg(long)]
    pub eps_tol: Option<f64>,
    #[arg(long)]
    pub eps_distortion: Option<f64>,
    #[arg(long)]
    pub gamma: Option<usize>,
    #[arg(long)]
    pub gamma_max: Option<usize>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub omega_scale: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainKind>,
    /// Clamp negative cotangent weights in the parameterization.
    #[arg(long)]
    pub clamp_weights: bool,
    /// Run single-threaded.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, value_enum)]
    pub mesh_format: Option<MeshFormatKind>,
    /// Write SVG output.
    #[arg(long)]
    pub svg: bool,
    /// Skip CSV output.
    #[arg(long)]
    pub no_csv: bool,
    /// Write every frame as a mesh.
    #[arg(long)]
    pub frames: bool,
    /// Write the quad mesh of an image grid.
    #[arg(long)]
    pub quad: bool,
    /// Grid resolution for image input.
    #[arg(long)]
    pub n: Option<usize>,
}

/// Defaults a subcommand applies before the file and the flags.
#[derive(Debug, Clone, Copy)]
pub struct CommandDefaults {
    pub measure: MeasureKind,
    pub k: f64,
    pub delta: f64,
    pub frames: bool,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub input: PathBuf,
    pub output: PathBuf,
    pub n: usize,
    pub tot: TotConfig,
    pub mesh_format: MeshFormatKind,
    pub svg: bool,
    pub csv: bool,
    pub frames: bool,
    pub quad: bool,
}

/// Merges flag > file > default.
pub fn resolve(input: Option<PathBuf>, args: &RunArgs, defaults: CommandDefaults) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let Some(input) = input.or(file.input.clone()) else { bail!("no input given on the command line or in the config") };
    let base = TotConfig::default();
    let measure = args.measure.or(file.measure).unwrap_or(defaults.measure);
    let k = args.k.or(file.k).unwrap_or(defaults.k);
    let delta = args.delta.or(file.delta).unwrap_or(defaults.delta);
    let roi: Vec<Region> = if !args.roi.is_empty() { args.roi.clone() } else { file.roi.iter().flatten().map(|&r| r.into()).collect() };
    let measure = match measure {
        MeasureKind::Area => MeasureConfig::Area,
        MeasureKind::Uniform => MeasureConfig::Uniform,
        MeasureKind::Image => MeasureConfig::Image { k, delta },
        MeasureKind::Roi if roi.is_empty() => bail!("roi measure needs at least one region"),
        MeasureKind::Roi => MeasureConfig::Roi { regions: roi },
    };
    let clamp = args.clamp_weights || file.clamp_weights.unwrap_or(false);
    let sequential = args.sequential || file.sequential.unwrap_or(false);
    let tot = TotConfig {
        eps_tol: args.eps_tol.or(file.eps_tol).unwrap_or(base.eps_tol),
        eps_distortion: args.eps_distortion.or(file.eps_distortion).unwrap_or(base.eps_distortion),
        gamma: args.gamma.or(file.gamma).unwrap_or(base.gamma),
        gamma_max: args.gamma_max.or(file.gamma_max).unwrap_or(base.gamma_max),
        lambda0: args.lambda0.or(file.lambda0).unwrap_or(base.lambda0),
        omega_scale: args.omega_scale.or(file.omega_scale).unwrap_or(base.omega_scale),
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(base.max_iter),
        domain: match args.domain.or(file.domain) {
            Some(DomainKind::Square) => Domain::Square,
            _ => Domain::Disk,
        },
        measure,
        weights: if clamp { WeightScheme::ClampedCotangent } else { WeightScheme::Cotangent },
        parallelism: if sequential { Parallelism::Sequential } else { Parallelism::Parallel },
    };
    tot.validate()?;
    Ok(Resolved {
        input,
        output: args.output.clone().or(file.output).unwrap_or_else(|| PathBuf::from("out")),
        n: args.n.or(file.n).unwrap_or(128),
        tot,
        mesh_format: args.mesh_format.or(file.mesh_format).unwrap_or(MeshFormatKind::Obj),
        svg: args.svg || file.svg.unwrap_or(false),
        csv: !args.no_csv && file.csv.unwrap_or(true),
        frames: args.frames || file.frames.unwrap_or(defaults.frames),
        quad: args.quad || file.quad.unwrap_or(false),
    })
}
