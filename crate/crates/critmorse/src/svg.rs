//! SVG rasters of index and determinant fields.
//!
//! Each interior node is drawn as one square cell. In 3D the slice through
//! the middle node layer of the last axis is drawn.

use std::fmt::Write;

use critmorse_core::verify::IndexField;
use critmorse_core::{GridDomain, IndexValue, SymMatrixField};

const CELL: usize = 6;
const LEGEND_WIDTH: usize = 150;
const INDEX_COLORS: [&str; 4] = ["#2166ac", "#1a9850", "#f46d43", "#b2182b"];
const SINGULAR_COLOR: &str = "#bdbdbd";

fn slice_nodes(d: &GridDomain) -> Vec<(usize, usize, usize)> {
    let shape = d.shape();
    let mut idx = [0usize; 3];
    if d.dim() == 3 {
        idx[2] = shape[2] / 2;
    }
    let mut out = Vec::new();
    for j in 0..shape[1] {
        for i in 0..shape[0] {
            idx[0] = i;
            idx[1] = j;
            if d.is_interior(&idx) {
                out.push((i, j, d.flat(&idx)));
            }
        }
    }
    out
}

fn open(d: &GridDomain, title: &str) -> (String, usize) {
    let (w, h) = (d.shape()[0] * CELL, d.shape()[1] * CELL);
    let height = h.max(120);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" viewBox="0 0 {} {height}">"#,
        w + LEGEND_WIDTH,
        w + LEGEND_WIDTH
    );
    let _ = writeln!(s, "<title>{title}</title>");
    let _ = writeln!(s, r#"<g id="cells" shape-rendering="crispEdges">"#);
    (s, h)
}

fn cell(s: &mut String, i: usize, j: usize, h: usize, color: &str) {
    // The second axis points up.
    let _ = writeln!(s, r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{color}"/>"#, i * CELL, h - (j + 1) * CELL);
}

fn legend_entry(s: &mut String, x: usize, row: usize, color: &str, label: &str) {
    let y = 10 + row * 20;
    let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="14" height="14" fill="{color}"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{label}</text>"#, x + 20, y + 12);
}

pub fn index_color(v: IndexValue) -> &'static str {
    match v {
        IndexValue::Index(k) => INDEX_COLORS[k.min(3)],
        IndexValue::NearSingular => SINGULAR_COLOR,
    }
}

/// Index classes `0..=dim` and near-singular nodes.
pub fn index_svg(field: &IndexField, title: &str) -> String {
    let d = field.domain();
    let (mut s, h) = open(d, title);
    for (i, j, flat) in slice_nodes(d) {
        if let Some(v) = field.at(flat) {
            cell(&mut s, i, j, h, index_color(v));
        }
    }
    s.push_str("</g>\n<g id=\"legend\">\n");
    let x = d.shape()[0] * CELL + 10;
    for (k, color) in INDEX_COLORS.iter().enumerate().take(d.dim() + 1) {
        legend_entry(&mut s, x, k, color, &format!("index {k}"));
    }
    legend_entry(&mut s, x, d.dim() + 1, SINGULAR_COLOR, "near-singular");
    s.push_str("</g>\n</svg>\n");
    s
}

fn diverging(t: f64) -> String {
    // t in [-1, 1]: blue through white to red.
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let a = -t;
        (255.0 * (1.0 - a), 255.0 * (1.0 - a), 255.0)
    } else {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// `det D^2 u` on a symmetric color scale.
pub fn det_svg(h: &SymMatrixField, title: &str) -> String {
    let d = h.domain();
    let nodes = slice_nodes(d);
    let dets: Vec<f64> = nodes.iter().map(|&(_, _, f)| critmorse_core::symlinalg::det(&h.matrix_at(f))).collect();
    let scale = dets.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let (mut s, height) = open(d, title);
    for (&(i, j, _), &v) in nodes.iter().zip(&dets) {
        let t = if scale > 0.0 { v / scale } else { 0.0 };
        cell(&mut s, i, j, height, &diverging(t));
    }
    s.push_str("</g>\n<g id=\"legend\">\n");
    let x = d.shape()[0] * CELL + 10;
    legend_entry(&mut s, x, 0, &diverging(1.0), &format!("det {scale:.3e}"));
    legend_entry(&mut s, x, 1, &diverging(0.0), "det 0");
    legend_entry(&mut s, x, 2, &diverging(-1.0), &format!("det {:.3e}", -scale));
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use critmorse_core::symfield::{gallery_entry, hessian, sample};
    use critmorse_core::verify::index_field;
    use std::collections::BTreeSet;

    fn cell_fills(svg: &str) -> Vec<String> {
        let cells = &svg[svg.find("<g id=\"cells\"").unwrap()..svg.find("<g id=\"legend\"").unwrap()];
        cells.lines().filter_map(|l| l.split("fill=\"").nth(1)).map(|r| r[..7].to_string()).collect()
    }

    #[test]
    fn constant_index_field_is_one_color() {
        let e = gallery_entry("quad-saddle").unwrap();
        let d = GridDomain::cube(2, -1.0, 1.0, 17).unwrap();
        let f = index_field(&hessian(&sample(&e, &d).unwrap()), 1e-8);
        let svg = index_svg(&f, "quad-saddle");
        let fills = cell_fills(&svg);
        assert_eq!(fills.len(), 15 * 15);
        assert_eq!(fills.iter().collect::<BTreeSet<_>>().len(), 1);
        assert_eq!(fills[0], INDEX_COLORS[1]);
        assert!(svg.contains("near-singular"));
    }

    #[test]
    fn three_dimensional_fields_draw_the_middle_slice() {
        let e = gallery_entry("quad3-index2").unwrap();
        let d = GridDomain::cube(3, -1.0, 1.0, 9).unwrap();
        let h = hessian(&sample(&e, &d).unwrap());
        assert_eq!(cell_fills(&index_svg(&index_field(&h, 1e-8), "q")).len(), 49);
        assert_eq!(cell_fills(&det_svg(&h, "q")).len(), 49);
    }
}
