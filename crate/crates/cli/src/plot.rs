//! Plain SVG figures: phase portraits, separation masks, coverage maps.

use std::fmt::Write;

use atlas_core::periodic::Window;
use atlas_core::regions::{CellClass, CoverageReport};
use atlas_core::topology::{Cell, OccupancyGrid};
use atlas_core::LiftPoint;

const WIDTH: f64 = 800.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub enum Layer {
    /// Polyline, drawn with x reduced mod 1 (broken where it wraps).
    Curve {
        points: Vec<LiftPoint>,
        color: &'static str,
    },
    Markers {
        points: Vec<LiftPoint>,
        color: &'static str,
    },
}

struct Frame {
    window: Window,
    height: f64,
}

impl Frame {
    fn new(window: Window) -> Self {
        let aspect = (window.y1 - window.y0) / (window.x1 - window.x0);
        Self {
            window,
            height: (WIDTH * aspect).clamp(200.0, 1600.0),
        }
    }

    fn px(&self, z: LiftPoint) -> (f64, f64) {
        let w = &self.window;
        (
            (z.x - w.x0) / (w.x1 - w.x0) * WIDTH,
            (w.y1 - z.y) / (w.y1 - w.y0) * self.height,
        )
    }

    fn open(&self, out: &mut String) {
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{h:.0}" viewBox="0 0 {WIDTH} {h:.0}">"#,
            h = self.height
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    }

    fn inside(&self, z: LiftPoint) -> bool {
        let w = &self.window;
        z.x >= w.x0 && z.x <= w.x1 && z.y >= w.y0 && z.y <= w.y1
    }

    /// `z` shifted by whole turns into the window's x-range, if possible.
    fn fold(&self, z: LiftPoint) -> LiftPoint {
        let k = (z.x - self.window.x0).div_euclid(1.0);
        z.translate(-(k as i64))
    }
}

fn dots(frame: &Frame, points: &[LiftPoint], color: &str, size: f64, out: &mut String) {
    let mut d = String::new();
    for &z in points {
        let z = frame.fold(z);
        if frame.inside(z) {
            let (x, y) = frame.px(z);
            let _ = write!(d, "M{x:.2} {y:.2}h0");
        }
    }
    if !d.is_empty() {
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{color}" stroke-width="{size}" stroke-linecap="round" fill="none"/>"#
        );
    }
}

fn curve(frame: &Frame, points: &[LiftPoint], color: &str, out: &mut String) {
    let mut d = String::new();
    let mut prev: Option<LiftPoint> = None;
    for &z in points {
        let f = frame.fold(z);
        let (x, y) = frame.px(f);
        let jump = prev.is_none_or(|p| (p.x - f.x).abs() > 0.5);
        let _ = write!(d, "{}{x:.2} {y:.2}", if jump { "M" } else { "L" });
        prev = Some(f);
    }
    if !d.is_empty() {
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{color}" stroke-width="1.2" fill="none"/>"#
        );
    }
}

/// One colour per orbit, then the overlay layers on top.
pub fn phase_portrait(window: Window, orbits: &[Vec<LiftPoint>], layers: &[Layer]) -> String {
    let frame = Frame::new(window);
    let mut out = String::new();
    frame.open(&mut out);
    for (i, orbit) in orbits.iter().enumerate() {
        dots(&frame, orbit, PALETTE[i % PALETTE.len()], 1.2, &mut out);
    }
    for layer in layers {
        match layer {
            Layer::Curve { points, color } => curve(&frame, points, color, &mut out),
            Layer::Markers { points, color } => dots(&frame, points, color, 6.0, &mut out),
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal runs of equal symbols as rectangles; `colour` returns `None`
/// for background cells.
fn runs(
    frame: &Frame,
    nx: usize,
    ny: usize,
    cell: (f64, f64),
    origin: (f64, f64),
    colour: impl Fn(usize, usize) -> Option<&'static str>,
    out: &mut String,
) {
    for j in 0..ny {
        let mut i = 0;
        while i < nx {
            let Some(c) = colour(i, j) else {
                i += 1;
                continue;
            };
            let start = i;
            while i < nx && colour(i, j) == Some(c) {
                i += 1;
            }
            let lo = LiftPoint::new(
                origin.0 + start as f64 * cell.0,
                origin.1 + j as f64 * cell.1,
            );
            let hi = LiftPoint::new(
                origin.0 + i as f64 * cell.0,
                origin.1 + (j + 1) as f64 * cell.1,
            );
            let (x0, y1) = frame.px(lo);
            let (x1, y0) = frame.px(hi);
            let _ = writeln!(
                out,
                r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{c}"/>"#,
                x1 - x0,
                y1 - y0
            );
        }
    }
}

pub fn separation_mask(grid: &OccupancyGrid) -> String {
    let window = Window::new(0.0, 1.0, grid.y0, grid.y0 + grid.ny as f64 * grid.h);
    let frame = Frame::new(window);
    let mut out = String::new();
    frame.open(&mut out);
    let colour = |i, j| match grid.get(i, j) {
        Cell::Free => None,
        Cell::Wall => Some("#222222"),
        Cell::Top => Some("#9ecae1"),
        Cell::Bottom => Some("#fdae6b"),
    };
    runs(
        &frame,
        grid.nx,
        grid.ny,
        (grid.h, grid.h),
        (0.0, grid.y0),
        colour,
        &mut out,
    );
    out.push_str("</svg>\n");
    out
}

pub fn coverage_map(report: &CoverageReport) -> String {
    let w = report.window;
    let frame = Frame::new(w);
    let mut out = String::new();
    frame.open(&mut out);
    let cell = (
        (w.x1 - w.x0) / report.nx as f64,
        (w.y1 - w.y0) / report.ny as f64,
    );
    let colour = |i, j| match report.class_at(i, j) {
        CellClass::HNear => Some("#d62728"),
        CellClass::ENear => Some("#1f77b4"),
        CellClass::Unresolved => Some("#dddddd"),
    };
    runs(
        &frame,
        report.nx,
        report.ny,
        cell,
        (w.x0, w.y0),
        colour,
        &mut out,
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn portrait_is_deterministic_and_clipped() {
        let w = Window::band(0.0, 1.0);
        let orbit = vec![
            LiftPoint::new(0.25, 0.5),
            LiftPoint::new(1.75, 0.5),
            LiftPoint::new(0.5, 2.0),
        ];
        let a = phase_portrait(w, std::slice::from_ref(&orbit), &[]);
        let b = phase_portrait(w, &[orbit], &[]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        // two visible dots (the second folded back), the third clipped
        assert_eq!(a.matches("h0").count(), 2);
    }

    #[test]
    fn curve_breaks_at_the_seam() {
        let w = Window::band(-1.0, 1.0);
        let pts = vec![
            LiftPoint::new(0.9, 0.0),
            LiftPoint::new(1.1, 0.0),
            LiftPoint::new(1.2, 0.1),
        ];
        let s = phase_portrait(
            w,
            &[],
            &[Layer::Curve {
                points: pts,
                color: "black",
            }],
        );
        assert_eq!(s.matches('M').count(), 2);
    }
}
