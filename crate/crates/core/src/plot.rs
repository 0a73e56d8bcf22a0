//! Static SVG rendering of two-dimensional partitions.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::SymmetricEigen;

use crate::classifier::Classifier;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::partition::Label;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 24.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Outline {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    degrees: f64,
    color: &'static str,
}

/// Points coloured by class, one ellipse outline per partition. Partitions
/// of one-vs-rest models take their class colour; negative partitions of a
/// binary model take class 0's.
pub fn render_svg(classifier: &Classifier, data: &LabeledDataset) -> Result<String> {
    if classifier.dim() != 2 {
        return Err(Error::PlotDimension(classifier.dim()));
    }
    if data.n != 2 {
        return Err(Error::PlotDimension(data.n));
    }
    let color = |class: usize| PALETTE[class % PALETTE.len()];
    let binary = classifier.models.len() == 1;
    let mut outlines = Vec::new();
    for (m, model) in classifier.models.iter().enumerate() {
        for part in model.partitions() {
            let class = match (binary, part.label) {
                (true, Label::Positive) => 1,
                (true, Label::Negative) => 0,
                (false, Label::Positive) => m,
                (false, Label::Negative) => continue,
            };
            let e = &part.ellipsoid;
            let eig = SymmetricEigen::new(e.shape().clone());
            let (v, s) = (eig.eigenvectors, eig.eigenvalues);
            outlines.push(Outline {
                cx: e.center()[0],
                cy: e.center()[1],
                rx: 1.0 / s[0],
                ry: 1.0 / s[1],
                degrees: v[(1, 0)].atan2(v[(0, 0)]).to_degrees(),
                color: color(class),
            });
        }
    }

    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let mut grow = |x: f64, y: f64, r: f64| {
        lo_x = lo_x.min(x - r);
        hi_x = hi_x.max(x + r);
        lo_y = lo_y.min(y - r);
        hi_y = hi_y.max(y + r);
    };
    for p in &data.points {
        grow(p[0], p[1], 0.0);
    }
    for o in &outlines {
        grow(o.cx, o.cy, o.rx.max(o.ry));
    }
    if !lo_x.is_finite() {
        (lo_x, hi_x, lo_y, hi_y) = (-1.0, 1.0, -1.0, 1.0);
    }
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(1e-12);
    let k = (SIZE - 2.0 * MARGIN) / span;
    let sx = |x: f64| MARGIN + (x - lo_x) * k;
    let sy = |y: f64| SIZE - MARGIN - (y - lo_y) * k;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for o in &outlines {
        let (cx, cy) = (sx(o.cx), sy(o.cy));
        let _ = writeln!(
            svg,
            r#"<ellipse cx="{cx:.3}" cy="{cy:.3}" rx="{:.3}" ry="{:.3}" transform="rotate({:.3} {cx:.3} {cy:.3})" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            o.rx * k,
            o.ry * k,
            -o.degrees,
            o.color
        );
    }
    for (p, &l) in data.points.iter().zip(&data.labels) {
        let _ = writeln!(svg, r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="{}"/>"#, sx(p[0]), sy(p[1]), color(l));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_svg(classifier: &Classifier, data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_svg(classifier, data)?)?;
    Ok(())
}
