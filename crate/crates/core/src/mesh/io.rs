//! Plain-text OBJ and OFF reading and writing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Dim, MeshError, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Off,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "off" => Some(MeshFormat::Off),
            _ => None,
        }
    }
}

/// Rec.601 luma.
pub(crate) fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh, MeshError> {
    let text = fs::read_to_string(path)?;
    match format {
        MeshFormat::Obj => parse_obj(&text),
        MeshFormat::Off => parse_off(&text),
    }
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<(), MeshError> {
    let text = match format {
        MeshFormat::Obj => write_obj(mesh),
        MeshFormat::Off => write_off(mesh),
    };
    fs::write(path, text)?;
    Ok(())
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, MeshError> {
    tok.parse::<f64>().map_err(|e| MeshError::Parse { line, msg: format!("bad number {tok:?}: {e}") })
}

fn finish(positions: Vec<[f64; 3]>, colors: Vec<Option<[f64; 3]>>, faces: Vec<[usize; 3]>) -> Result<TriMesh, MeshError> {
    let dim = if positions.iter().all(|p| p[2] == 0.0) { Dim::Two } else { Dim::Three };
    let mesh = TriMesh::new(positions, faces, dim)?;
    if !colors.is_empty() && colors.iter().all(Option::is_some) {
        let cols: Vec<[f64; 3]> = colors.into_iter().flatten().collect();
        let scale = if cols.iter().flatten().any(|&c| c > 1.0) { 1.0 / 255.0 } else { 1.0 };
        let gray = cols.iter().map(|c| luminance(c[0], c[1], c[2]) * scale).collect();
        return mesh.with_gray(gray);
    }
    Ok(mesh)
}

fn parse_obj(text: &str) -> Result<TriMesh, MeshError> {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    let mut faces = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                let vals = toks.map(|t| parse_f64(t, line)).collect::<Result<Vec<_>, _>>()?;
                match vals.len() {
                    3 => colors.push(None),
                    6 => colors.push(Some([vals[3], vals[4], vals[5]])),
                    4 => colors.push(None), // x y z w
                    k => return Err(MeshError::Parse { line, msg: format!("vertex with {k} components") }),
                }
                positions.push([vals[0], vals[1], vals[2]]);
            }
            Some("f") => {
                let idx = toks
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| MeshError::Parse { line, msg: format!("bad index {t:?}") })?;
                        let n = positions.len() as i64;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 {
                            return Err(MeshError::Parse { line, msg: format!("index {t} out of range") });
                        }
                        Ok(i as usize)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if idx.len() != 3 {
                    return Err(MeshError::Parse { line, msg: format!("face with {} vertices; only triangles are supported", idx.len()) });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    finish(positions, colors, faces)
}

fn parse_off(text: &str) -> Result<TriMesh, MeshError> {
    // Comments and blank lines are skipped; tokens are consumed line by line.
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim())).filter(|(_, l)| !l.is_empty());
    let (ln, header) = lines.next().ok_or(MeshError::Parse { line: 1, msg: "empty file".into() })?;
    let mut head_toks = header.split_whitespace();
    let magic = head_toks.next().unwrap_or("");
    if !magic.ends_with("OFF") {
        return Err(MeshError::Parse { line: ln, msg: format!("expected OFF header, got {magic:?}") });
    }
    let mut rest: Vec<&str> = head_toks.collect();
    let mut count_line = ln;
    if rest.is_empty() {
        let (l, c) = lines.next().ok_or(MeshError::Parse { line: ln, msg: "missing counts".into() })?;
        rest = c.split_whitespace().collect();
        count_line = l;
    }
    if rest.len() < 2 {
        return Err(MeshError::Parse { line: count_line, msg: "missing counts".into() });
    }
    let nv: usize = rest[0].parse().map_err(|_| MeshError::Parse { line: count_line, msg: "bad vertex count".into() })?;
    let nf: usize = rest[1].parse().map_err(|_| MeshError::Parse { line: count_line, msg: "bad face count".into() })?;

    let mut positions = Vec::with_capacity(nv);
    let mut colors = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or(MeshError::Parse { line: count_line, msg: "truncated vertex list".into() })?;
        let vals = l.split_whitespace().map(|t| parse_f64(t, line)).collect::<Result<Vec<_>, _>>()?;
        if vals.len() < 3 {
            return Err(MeshError::Parse { line, msg: "vertex needs 3 coordinates".into() });
        }
        positions.push([vals[0], vals[1], vals[2]]);
        colors.push(if vals.len() >= 6 { Some([vals[3], vals[4], vals[5]]) } else { None });
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines.next().ok_or(MeshError::Parse { line: count_line, msg: "truncated face list".into() })?;
        let idx = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| MeshError::Parse { line, msg: format!("bad index {t:?}") }))
            .collect::<Result<Vec<_>, _>>()?;
        if idx.first() != Some(&3) || idx.len() < 4 {
            return Err(MeshError::Parse { line, msg: "only triangular faces are supported".into() });
        }
        faces.push([idx[1], idx[2], idx[3]]);
    }
    finish(positions, colors, faces)
}

fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for (i, p) in mesh.positions().iter().enumerate() {
        match mesh.gray() {
            Some(g) => writeln!(s, "v {} {} {} {} {} {}", p[0], p[1], p[2], g[i], g[i], g[i]),
            None => writeln!(s, "v {} {} {}", p[0], p[1], p[2]),
        }
        .unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

fn write_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    s.push_str(if mesh.gray().is_some() { "COFF\n" } else { "OFF\n" });
    writeln!(s, "{} {} 0", mesh.num_vertices(), mesh.num_faces()).unwrap();
    for (i, p) in mesh.positions().iter().enumerate() {
        match mesh.gray() {
            Some(g) => writeln!(s, "{} {} {} {} {} {} 1", p[0], p[1], p[2], g[i], g[i], g[i]),
            None => writeln!(s, "{} {} {}", p[0], p[1], p[2]),
        }
        .unwrap();
    }
    for f in mesh.faces() {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}
