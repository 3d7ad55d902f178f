use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decompose::rationals_in;
use crate::dynamics::{rotation_interval_of_set, weighted_rotation, LiftPoint, LiftedMap};
use crate::error::{Error, Result};
use crate::manifolds::{
    branch_seed, grow_branch_partial, BranchKind, BranchSign, GrowthOptions, DEFAULT_EPS,
};
use crate::periodic::{find_all_pq_with, seed_grid, NewtonOptions, PeriodicOrbit, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellClass {
    /// Within `delta` of a stable manifold cloud.
    HNear,
    /// Not H-near, and the orbit of the cell centre looks quasi-periodic.
    ENear,
    Unresolved,
}

impl CellClass {
    pub fn symbol(self) -> char {
        match self {
            CellClass::HNear => 'H',
            CellClass::ENear => 'E',
            CellClass::Unresolved => '.',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageOptions {
    /// Arclength of every stable branch in the cloud.
    pub arclength: f64,
    pub growth: GrowthOptions,
    pub rotation_seeds: usize,
    pub rotation_steps: u64,
    pub newton_seeds: usize,
    /// Largest period tried while collecting saddles.
    pub q_limit: usize,
    /// Regularity test: `|rho(n) - rho(2n)| < regular_tol` for the weighted
    /// rotation of the cell centre.
    pub regular_n: u64,
    pub regular_tol: f64,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            arclength: 50.0,
            growth: GrowthOptions::default(),
            rotation_seeds: 16,
            rotation_steps: 10_000,
            newton_seeds: 32,
            q_limit: 30,
            regular_n: 2_000,
            regular_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub delta: f64,
    pub saddles: Vec<PeriodicOrbit>,
    /// Row-major from the bottom row, one symbol per cell (`H`, `E`, `.`).
    pub cells: String,
    pub h_fraction: f64,
    pub e_fraction: f64,
    pub unresolved_fraction: f64,
}

impl CoverageReport {
    pub fn class_at(&self, i: usize, j: usize) -> CellClass {
        match self.cells.as_bytes()[j * self.nx + i] {
            b'H' => CellClass::HNear,
            b'E' => CellClass::ENear,
            _ => CellClass::Unresolved,
        }
    }
}

/// First `budget` hyperbolic orbits in the window, by increasing `q` and
/// then `p`, with `p/q` in the window's sampled rotation interval.
pub fn discover_saddles(
    map: &LiftedMap,
    window: &Window,
    budget: usize,
    opts: &CoverageOptions,
) -> Result<Vec<PeriodicOrbit>> {
    let mut out = Vec::new();
    if budget == 0 {
        return Ok(out);
    }
    let n = opts.rotation_seeds;
    let probe = seed_grid(window, n, n);
    let rot = rotation_interval_of_set(map, &probe, opts.rotation_steps)?;
    let seeds = seed_grid(window, opts.newton_seeds, opts.newton_seeds);
    let newton = NewtonOptions::default();
    for (p, q) in rationals_in(rot.lo, rot.hi, opts.q_limit) {
        for o in find_all_pq_with(map, p, q, &seeds, window, &newton)? {
            if o.is_hyperbolic() {
                out.push(o);
                if out.len() == budget {
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}

fn seg_dist(p: LiftPoint, a: LiftPoint, b: LiftPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

/// Marks every cell whose centre is strictly within `delta` of a segment.
fn mark_near(
    near: &mut [bool],
    window: &Window,
    nx: usize,
    ny: usize,
    delta: f64,
    a: LiftPoint,
    b: LiftPoint,
) {
    let (cw, ch) = (
        (window.x1 - window.x0) / nx as f64,
        (window.y1 - window.y0) / ny as f64,
    );
    // every whole-turn shift of the segment that reaches the window
    let k0 = (a.x.min(b.x) - delta - window.x1).ceil() as i64;
    let k1 = (a.x.max(b.x) + delta - window.x0).floor() as i64;
    for k in k0..=k1 {
        let (sa, sb) = (a.translate(-k), b.translate(-k));
        let (xl, xh) = (sa.x.min(sb.x) - delta, sa.x.max(sb.x) + delta);
        let (yl, yh) = (sa.y.min(sb.y) - delta, sa.y.max(sb.y) + delta);
        let i0 = ((xl - window.x0) / cw).floor().max(0.0) as usize;
        let i1 = ((xh - window.x0) / cw).ceil().clamp(0.0, nx as f64) as usize;
        let j0 = ((yl - window.y0) / ch).floor().max(0.0) as usize;
        let j1 = ((yh - window.y0) / ch).ceil().clamp(0.0, ny as f64) as usize;
        for j in j0..j1 {
            for i in i0..i1 {
                let c = LiftPoint::new(
                    window.x0 + (i as f64 + 0.5) * cw,
                    window.y0 + (j as f64 + 0.5) * ch,
                );
                if seg_dist(c, sa, sb) < delta {
                    near[j * nx + i] = true;
                }
            }
        }
    }
}

/// Classifies an `nx` by `ny` grid over `window` into H-near (within
/// `delta` of the stable manifolds of up to `saddle_budget` saddles),
/// E-near (regular orbit) and unresolved cells. With `delta = 0` nothing
/// is resolved.
pub fn coverage_report(
    map: &LiftedMap,
    window: &Window,
    nx: usize,
    ny: usize,
    delta: f64,
    saddle_budget: usize,
) -> Result<CoverageReport> {
    coverage_report_with(
        map,
        window,
        nx,
        ny,
        delta,
        saddle_budget,
        &CoverageOptions::default(),
    )
}

pub fn coverage_report_with(
    map: &LiftedMap,
    window: &Window,
    nx: usize,
    ny: usize,
    delta: f64,
    saddle_budget: usize,
    opts: &CoverageOptions,
) -> Result<CoverageReport> {
    if window.is_empty() || nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(
            "coverage needs a non-empty window and grid".into(),
        ));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta {delta} must be >= 0"
        )));
    }
    let saddles = discover_saddles(map, window, saddle_budget, opts)?;

    let seeds: Vec<(&PeriodicOrbit, usize, BranchSign)> = saddles
        .iter()
        .flat_map(|o| {
            (0..o.q).flat_map(move |i| [BranchSign::Plus, BranchSign::Minus].map(|s| (o, i, s)))
        })
        .collect();
    let polylines: Vec<Vec<LiftPoint>> = seeds
        .par_iter()
        .filter_map(|&(o, i, s)| {
            let seed = branch_seed(map, o, i, BranchKind::Stable, s, DEFAULT_EPS).ok()?;
            grow_branch_partial(map, &seed, opts.arclength, &opts.growth)
                .ok()
                .map(|b| b.polyline)
        })
        .collect();

    let mut near = vec![false; nx * ny];
    if delta > 0.0 {
        for line in &polylines {
            for w in line.windows(2) {
                mark_near(&mut near, window, nx, ny, delta, w[0], w[1]);
            }
        }
    }
    let (cw, ch) = (
        (window.x1 - window.x0) / nx as f64,
        (window.y1 - window.y0) / ny as f64,
    );
    let classes: Vec<CellClass> = (0..nx * ny)
        .into_par_iter()
        .map(|c| {
            if near[c] {
                return CellClass::HNear;
            }
            if delta == 0.0 {
                return CellClass::Unresolved;
            }
            let z = LiftPoint::new(
                window.x0 + ((c % nx) as f64 + 0.5) * cw,
                window.y0 + ((c / nx) as f64 + 0.5) * ch,
            );
            let a = weighted_rotation(map, z, opts.regular_n);
            let b = weighted_rotation(map, z, 2 * opts.regular_n);
            match (a, b) {
                (Ok(a), Ok(b)) if (a - b).abs() < opts.regular_tol => CellClass::ENear,
                _ => CellClass::Unresolved,
            }
        })
        .collect();

    let total = (nx * ny) as f64;
    let frac = |k: CellClass| classes.iter().filter(|&&c| c == k).count() as f64 / total;
    Ok(CoverageReport {
        window: *window,
        nx,
        ny,
        delta,
        h_fraction: frac(CellClass::HNear),
        e_fraction: frac(CellClass::ENear),
        unresolved_fraction: frac(CellClass::Unresolved),
        cells: classes.iter().map(|c| c.symbol()).collect(),
        saddles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrable_is_all_regular() {
        let f = LiftedMap::standard(0.0);
        let w = Window::band(-0.5, 0.5);
        let r = coverage_report(&f, &w, 16, 16, 0.02, 10).unwrap();
        assert!(r.saddles.is_empty());
        assert_eq!(r.h_fraction, 0.0);
        assert!(r.e_fraction > 0.99);
    }

    #[test]
    fn zero_delta_resolves_nothing() {
        let f = LiftedMap::standard(1.5);
        let w = Window::band(-0.5, 0.5);
        let opts = CoverageOptions {
            arclength: 2.0,
            ..CoverageOptions::default()
        };
        let r = coverage_report_with(&f, &w, 8, 8, 0.0, 2, &opts).unwrap();
        assert_eq!(r.unresolved_fraction, 1.0);
        assert_eq!(r.saddles.len(), 2);
    }

    #[test]
    fn near_marking_wraps_in_x() {
        let w = Window::band(0.0, 1.0);
        let mut near = vec![false; 100];
        // a vertical segment at x = 1.0 must light the first and last columns
        mark_near(
            &mut near,
            &w,
            10,
            10,
            0.06,
            LiftPoint::new(1.0, 0.0),
            LiftPoint::new(1.0, 1.0),
        );
        for j in 0..10 {
            assert!(near[j * 10] && near[j * 10 + 9]);
            assert!(!near[j * 10 + 1] && !near[j * 10 + 8]);
        }
        // brute-force oracle on a diagonal segment
        let mut near = vec![false; 100];
        let (a, b) = (LiftPoint::new(0.13, 0.2), LiftPoint::new(0.71, 0.64));
        mark_near(&mut near, &w, 10, 10, 0.1, a, b);
        for j in 0..10 {
            for i in 0..10 {
                let c = LiftPoint::new((i as f64 + 0.5) / 10.0, (j as f64 + 0.5) / 10.0);
                let brute = (0..=10_000)
                    .map(|k| {
                        let t = k as f64 / 10_000.0;
                        c.dist(LiftPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)))
                    })
                    .fold(f64::INFINITY, f64::min);
                if (brute - 0.1).abs() > 1e-4 {
                    assert_eq!(near[j * 10 + i], brute < 0.1, "cell {i},{j}");
                }
            }
        }
    }
}
