//! Marching-squares contour extraction and a dependency-free SVG renderer
//! for landscape grids and projected trajectories.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::landscape::{LandscapeGrid, Trajectory2D};

#[derive(Debug, Clone)]
pub enum Levels {
    /// Evenly spaced levels strictly between grid min and max.
    Count(usize),
    /// Log-spaced levels (cross-entropy landscapes span decades near minima).
    LogCount(usize),
    Explicit(Vec<f64>),
}

impl Default for Levels {
    fn default() -> Self {
        Levels::Count(10)
    }
}

/// One contour segment in data coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSegment {
    pub from: (f64, f64),
    pub to: (f64, f64),
}

fn interp(a: f64, b: f64, va: f64, vb: f64, t: f64) -> f64 {
    if (vb - va).abs() < 1e-300 {
        return 0.5 * (a + b);
    }
    a + (b - a) * (t - va) / (vb - va)
}

/// Extract iso-lines at `level` with the marching-squares cell cases;
/// ambiguous saddles are resolved by the cell-center average.
pub fn marching_squares(grid: &LandscapeGrid, level: f64) -> Vec<ContourSegment> {
    let r = grid.resolution;
    let mut segments = Vec::new();
    for iy in 0..r - 1 {
        for ix in 0..r - 1 {
            let x0 = grid.x_at(ix);
            let x1 = grid.x_at(ix + 1);
            let y0 = grid.y_at(iy);
            let y1 = grid.y_at(iy + 1);
            let v00 = grid.value(ix, iy);
            let v10 = grid.value(ix + 1, iy);
            let v01 = grid.value(ix, iy + 1);
            let v11 = grid.value(ix + 1, iy + 1);
            let mut case = 0u8;
            if v00 >= level {
                case |= 1;
            }
            if v10 >= level {
                case |= 2;
            }
            if v11 >= level {
                case |= 4;
            }
            if v01 >= level {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            // edge midpoints by linear interpolation
            let bottom = (interp(x0, x1, v00, v10, level), y0);
            let top = (interp(x0, x1, v01, v11, level), y1);
            let left = (x0, interp(y0, y1, v00, v01, level));
            let right = (x1, interp(y0, y1, v10, v11, level));
            let mut push = |a: (f64, f64), b: (f64, f64)| {
                segments.push(ContourSegment { from: a, to: b });
            };
            match case {
                1 | 14 => push(left, bottom),
                2 | 13 => push(bottom, right),
                3 | 12 => push(left, right),
                4 | 11 => push(right, top),
                6 | 9 => push(bottom, top),
                7 | 8 => push(left, top),
                5 | 10 => {
                    let center = 0.25 * (v00 + v10 + v01 + v11);
                    let flip = (center >= level) == (case == 5);
                    if flip {
                        push(left, bottom);
                        push(right, top);
                    } else {
                        push(left, top);
                        push(bottom, right);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segments
}

fn resolve_levels(grid: &LandscapeGrid, levels: &Levels) -> Vec<f64> {
    let min = grid.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = grid.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    match levels {
        Levels::Explicit(v) => v.clone(),
        Levels::Count(k) => (1..=*k)
            .map(|i| min + (max - min) * i as f64 / (*k as f64 + 1.0))
            .filter(|t| *t > min && *t < max)
            .collect(),
        Levels::LogCount(k) => {
            if min <= 0.0 || max <= min {
                return resolve_levels(grid, &Levels::Count(*k));
            }
            let (lmin, lmax) = (min.ln(), max.ln());
            (1..=*k)
                .map(|i| (lmin + (lmax - lmin) * i as f64 / (*k as f64 + 1.0)).exp())
                .filter(|t| *t > min && *t < max)
                .collect()
        }
    }
}

const VIEW: f64 = 640.0;
const MARGIN: f64 = 40.0;

struct Mapper {
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Mapper {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let w = VIEW - 2.0 * MARGIN;
        let fx = (x - self.x_range.0) / (self.x_range.1 - self.x_range.0);
        let fy = (y - self.y_range.0) / (self.y_range.1 - self.y_range.0);
        // SVG y grows downward
        (MARGIN + fx * w, VIEW - MARGIN - fy * w)
    }
}

fn fmt(v: f64) -> String {
    debug_assert!(v.is_finite());
    format!("{v:.3}")
}

fn level_color(i: usize, total: usize) -> String {
    // blue (low) to orange (high)
    let f = if total <= 1 {
        0.0
    } else {
        i as f64 / (total - 1) as f64
    };
    let r = (40.0 + 200.0 * f) as u8;
    let g = (70.0 + 80.0 * f) as u8;
    let b = (200.0 - 160.0 * f) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Render the grid's iso-lines (and optionally a trajectory polyline with
/// per-epoch markers plus a distinct Θ* marker at the origin) to an SVG file.
pub fn render_contour_svg(
    grid: &LandscapeGrid,
    trajectory: Option<&Trajectory2D>,
    levels: &Levels,
    path: &Path,
) -> Result<()> {
    if grid.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("grid contains non-finite loss values".into()));
    }
    let svg = contour_svg_string(grid, trajectory, levels);
    fs::write(path, svg)?;
    Ok(())
}

pub fn contour_svg_string(
    grid: &LandscapeGrid,
    trajectory: Option<&Trajectory2D>,
    levels: &Levels,
) -> String {
    let mapper = Mapper {
        x_range: grid.x_range,
        y_range: grid.y_range,
    };
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{VIEW}\" height=\"{VIEW}\" viewBox=\"0 0 {VIEW} {VIEW}\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{w}\" fill=\"none\" stroke=\"#888\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        w = VIEW - 2.0 * MARGIN
    ));

    let resolved = resolve_levels(grid, levels);
    for (i, &level) in resolved.iter().enumerate() {
        let segments = marching_squares(grid, level);
        if segments.is_empty() {
            continue;
        }
        let mut d = String::new();
        for seg in &segments {
            let (x1, y1) = mapper.map(seg.from.0, seg.from.1);
            let (x2, y2) = mapper.map(seg.to.0, seg.to.1);
            d.push_str(&format!(
                "M {} {} L {} {} ",
                fmt(x1),
                fmt(y1),
                fmt(x2),
                fmt(y2)
            ));
        }
        out.push_str(&format!(
            "  <path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\"/>\n",
            d.trim_end(),
            level_color(i, resolved.len())
        ));
    }

    if let Some(traj) = trajectory {
        let pts: Vec<(f64, f64)> = traj
            .points
            .iter()
            .map(|p| mapper.map(p.x, p.y))
            .collect();
        let poly: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y)))
            .collect();
        out.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#222\" stroke-width=\"1.5\"/>\n",
            poly.join(" ")
        ));
        for (x, y) in &pts {
            out.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"#222\"/>\n",
                fmt(*x),
                fmt(*y)
            ));
        }
        // Θ* marker: red cross at the plane origin
        let (ox, oy) = mapper.map(0.0, 0.0);
        let s = 6.0;
        out.push_str(&format!(
            "  <path d=\"M {} {} L {} {} M {} {} L {} {}\" stroke=\"#d00\" stroke-width=\"2.5\" fill=\"none\"/>\n",
            fmt(ox - s),
            fmt(oy - s),
            fmt(ox + s),
            fmt(oy + s),
            fmt(ox - s),
            fmt(oy + s),
            fmt(ox + s),
            fmt(oy - s)
        ));
    }

    out.push_str("</svg>\n");
    out
}
