use std::fmt::Write;

use super::PowerDiagram;

/// Renders the cells, sites and domain of `pd` as an SVG document.
///
/// Output is deterministic; coordinates use 6 decimals and y points up.
pub fn diagram_to_svg(pd: &PowerDiagram, size_px: f64) -> String {
    let r = pd.omega();
    let scale = size_px / r.width().max(r.height());
    let w = r.width() * scale;
    let h = r.height() * scale;
    let tx = |p: [f64; 2]| ((p[0] - r.xmin) * scale, (r.ymax - p[1]) * scale);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.6}" height="{h:.6}" viewBox="0 0 {w:.6} {h:.6}">"#);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w:.6}" height="{h:.6}" fill="white" stroke="black"/>"#);
    for (i, cell) in pd.cells().iter().enumerate() {
        if cell.is_empty() {
            continue;
        }
        let pts: Vec<String> = cell
            .iter()
            .map(|&p| {
                let (x, y) = tx(p);
                format!("{x:.6},{y:.6}")
            })
            .collect();
        let _ = writeln!(s, r##"<polygon data-site="{i}" points="{}" fill="none" stroke="#1f4e79" stroke-width="0.5"/>"##, pts.join(" "));
    }
    for &p in pd.sites() {
        let (x, y) = tx(p);
        let _ = writeln!(s, r##"<circle cx="{x:.6}" cy="{y:.6}" r="1.5" fill="#c0392b"/>"##);
    }
    s.push_str("</svg>\n");
    s
}
