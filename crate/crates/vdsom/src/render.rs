//! Deterministic file emitters: CSV time series, SVG map snapshots and
//! binary PGM tile sheets. Identical inputs produce byte-identical files,
//! so outputs are directly diffable in tests and across runs.

use std::path::Path;

use crate::error::{Result, VdsomError};
use crate::grid::Grid;
use crate::metrics::TrainLog;

/// 9 significant digits, scientific notation; round-trips through
/// `f64::parse` to within 5e-9 relative error.
pub(crate) fn fmt_g9(v: f64) -> String {
    format!("{v:.8e}")
}

/// CSV serialization of a training log: `step,sigma,distortion,objective`
/// header, one row per record, LF endings.
pub fn csv_string(log: &TrainLog) -> String {
    let mut out = String::from("step,sigma,distortion,objective\n");
    for r in &log.records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.step,
            fmt_g9(r.sigma),
            fmt_g9(r.distortion),
            fmt_g9(r.objective)
        ));
    }
    out
}

pub fn write_csv(log: &TrainLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, csv_string(log)).map_err(|e| VdsomError::io(path, e))
}

/// SVG snapshot of a 2D map: gray sample dots, black weight dots, and one
/// line per lattice edge (toroidal wrap edges omitted for legibility).
/// The viewport fits the drawn points with a 5% margin.
pub fn map_svg_string(grid: &Grid, weights: &[Vec<f64>], samples: Option<&[Vec<f64>]>) -> Result<String> {
    if weights.len() != grid.n() {
        return Err(VdsomError::DimensionMismatch {
            expected: grid.n(),
            got: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| w.len() != 2) {
        return Err(VdsomError::InvalidArgument(format!(
            "svg rendering needs 2-dimensional weights, got dimension {}",
            w.len()
        )));
    }
    let samples = samples.unwrap_or(&[]);
    if let Some(s) = samples.iter().find(|s| s.len() != 2) {
        return Err(VdsomError::InvalidArgument(format!(
            "svg rendering needs 2-dimensional samples, got dimension {}",
            s.len()
        )));
    }

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in weights.iter().chain(samples) {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let margin = 0.05 * span;
    let min_x = lo[0] - margin;
    let width = hi[0] - lo[0] + 2.0 * margin;
    let min_y = lo[1] - margin;
    let height = hi[1] - lo[1] + 2.0 * margin;
    // mirror the y axis so larger y renders upward
    let flip = |y: f64| min_y + height - (y - min_y);

    let c = |v: f64| format!("{v:.6}");
    let mut svg = String::new();
    svg.push_str(r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    svg.push('\n');
    svg.push_str(&format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="640" height="640" viewBox="{} {} {} {}">"#,
        c(min_x),
        c(min_y),
        c(width),
        c(height)
    ));
    svg.push('\n');

    let edge_width = 0.002 * span;
    for (i, j) in grid.edges_without_wrap() {
        svg.push_str(&format!(
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="{}"/>"#,
            c(weights[i][0]),
            c(flip(weights[i][1])),
            c(weights[j][0]),
            c(flip(weights[j][1])),
            c(edge_width)
        ));
        svg.push('\n');
    }
    for s in samples {
        svg.push_str(&format!(
            r##"<circle cx="{}" cy="{}" r="{}" fill="#9e9e9e"/>"##,
            c(s[0]),
            c(flip(s[1])),
            c(0.004 * span)
        ));
        svg.push('\n');
    }
    for w in weights {
        svg.push_str(&format!(
            r#"<circle cx="{}" cy="{}" r="{}" fill="black"/>"#,
            c(w[0]),
            c(flip(w[1])),
            c(0.008 * span)
        ));
        svg.push('\n');
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_map_svg(
    grid: &Grid,
    weights: &[Vec<f64>],
    samples: Option<&[Vec<f64>]>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let svg = map_svg_string(grid, weights, samples)?;
    std::fs::write(path, svg).map_err(|e| VdsomError::io(path, e))
}

/// Binary PGM (P5, maxval 255) tiling every weight vector as an r x c
/// image, tiles placed row-major to match node linearization. Each weight
/// is min-max normalized independently; a constant weight renders mid-gray.
pub fn weight_tiles_pgm_bytes(
    weights: &[Vec<f64>],
    tile_rows: usize,
    tile_cols: usize,
    grid_rows: usize,
    grid_cols: usize,
) -> Result<Vec<u8>> {
    if weights.len() != grid_rows * grid_cols {
        return Err(VdsomError::DimensionMismatch {
            expected: grid_rows * grid_cols,
            got: weights.len(),
        });
    }
    let dim = tile_rows * tile_cols;
    if let Some(w) = weights.iter().find(|w| w.len() != dim) {
        return Err(VdsomError::DimensionMismatch {
            expected: dim,
            got: w.len(),
        });
    }
    if dim == 0 {
        return Err(VdsomError::InvalidArgument("empty tile shape".into()));
    }

    let width = grid_cols * tile_cols;
    let height = grid_rows * tile_rows;
    let mut pixels = vec![0u8; width * height];
    for (node, w) in weights.iter().enumerate() {
        let (gr, gc) = (node / grid_cols, node % grid_cols);
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (k, v) in w.iter().enumerate() {
            let byte = if max > min {
                ((v - min) / (max - min) * 255.0).round() as u8
            } else {
                128
            };
            let row = gr * tile_rows + k / tile_cols;
            let col = gc * tile_cols + k % tile_cols;
            pixels[row * width + col] = byte;
        }
    }

    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

pub fn write_weight_tiles_pgm(
    weights: &[Vec<f64>],
    tile_rows: usize,
    tile_cols: usize,
    grid_rows: usize,
    grid_cols: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = weight_tiles_pgm_bytes(weights, tile_rows, tile_cols, grid_rows, grid_cols)?;
    std::fs::write(path, bytes).map_err(|e| VdsomError::io(path, e))
}
