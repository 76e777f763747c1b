//! Standalone SVG scatter plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 720.0;
const MARGIN: f64 = 0.05;
const BASE_RADIUS: f64 = 3.0;
const MAX_RADIUS: f64 = 14.0;

/// 20-color categorical palette.
pub const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7",
    "#dbdb8d", "#9edae5",
];

/// Pixel position of every point: each axis is mapped affinely onto the
/// drawing area inside a 5% margin (y grows upward). A zero-extent axis maps
/// to the center.
pub fn fit_to_viewbox(coords: &[f64]) -> Vec<(f64, f64)> {
    let n = coords.len() / 2;
    let axis = |c: usize| {
        let vals = (0..n).map(move |i| coords[2 * i + c]);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let map = |v: f64, (lo, hi): (f64, f64), extent: f64| {
        let (a, b) = (MARGIN * extent, (1.0 - MARGIN) * extent);
        if hi > lo {
            a + (v - lo) / (hi - lo) * (b - a)
        } else {
            0.5 * extent
        }
    };
    let (ax, ay) = (axis(0), axis(1));
    (0..n)
        .map(|i| {
            let x = map(coords[2 * i], ax, WIDTH);
            let y = HEIGHT - map(coords[2 * i + 1], ay, HEIGHT);
            (x, y)
        })
        .collect()
}

/// Render the scatter plot as an SVG document.
pub fn scatter_svg(coords: &[f64], labels: Option<&[usize]>, sizes: Option<&[usize]>) -> Result<String> {
    if coords.len() % 2 != 0 {
        return Err(Error::DimensionMismatch("coordinates must be n x 2".into()));
    }
    let n = coords.len() / 2;
    if coords.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("scatter coordinates must be finite".into()));
    }
    for (what, len) in [("labels", labels.map(<[usize]>::len)), ("sizes", sizes.map(<[usize]>::len))] {
        if let Some(len) = len {
            if len != n {
                return Err(Error::DimensionMismatch(format!("{len} {what} for {n} points")));
            }
        }
    }
    let max_size = sizes.and_then(|s| s.iter().copied().max()).unwrap_or(0).max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<g fill-opacity="0.75" stroke="none">"#
    );
    for (i, (x, y)) in fit_to_viewbox(coords).into_iter().enumerate() {
        let color = labels.map_or(PALETTE[0], |l| PALETTE[l[i] % PALETTE.len()]);
        let r = sizes.map_or(BASE_RADIUS, |s| (MAX_RADIUS * (s[i] as f64 / max_size).sqrt()).max(1.5));
        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{color}"/>"#);
    }
    out.push_str("</g>\n");
    if let Some(labels) = labels {
        let mut distinct: Vec<usize> = labels.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        out.push_str(r#"<g font-family="sans-serif" font-size="12">"#);
        out.push('\n');
        for (row, label) in distinct.iter().enumerate() {
            let y = 12.0 + 16.0 * row as f64;
            let _ = writeln!(
                out,
                r#"<rect x="{:.0}" y="{y:.0}" width="10" height="10" fill="{}"/><text x="{:.0}" y="{:.0}">{label}</text>"#,
                WIDTH - 60.0,
                PALETTE[label % PALETTE.len()],
                WIDTH - 45.0,
                y + 9.0
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_scatter_svg(
    coords: &[f64],
    labels: Option<&[usize]>,
    sizes: Option<&[usize]>,
    path: &Path,
) -> Result<()> {
    let doc = scatter_svg(coords, labels, sizes)?;
    std::fs::write(path, doc).map_err(|e| Error::io(path, e))
}
