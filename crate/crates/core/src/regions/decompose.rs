use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::{
    band_targets, detect_barrier, fit_circle, Barrier, BarrierSearch, GRAPH_NODES,
};
use crate::dynamics::{
    rotation_interval_of_set, Confidence, LiftPoint, LiftedMap, RotationInterval,
};
use crate::error::{Error, Result};
use crate::ids::content_id;
use crate::periodic::{find_all_pq_with, gcd, seed_grid, NewtonOptions, PeriodicOrbit, Window};
use crate::topology::{classify_essentiality, EssentialityStatus};

/// One side of a region: an invariant barrier, or the end of the scanned
/// range (the region is open towards that end of the cylinder).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Frontier {
    Barrier(Barrier),
    End { y: f64 },
}

impl Frontier {
    pub fn heights_at(&self, x: f64) -> (f64, f64) {
        match self {
            Frontier::Barrier(b) => b.heights_at(x),
            Frontier::End { y } => (*y, *y),
        }
    }

    pub fn barrier(&self) -> Option<&Barrier> {
        match self {
            Frontier::Barrier(b) => Some(b),
            Frontier::End { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryOrbit {
    pub id: String,
    pub orbit: PeriodicOrbit,
    /// `None` when essentiality was not requested or the orbit is not
    /// hyperbolic.
    pub essentiality: Option<EssentialityStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub lower: Frontier,
    pub upper: Frontier,
    pub rotation_interval: RotationInterval,
    pub inventory: Vec<InventoryOrbit>,
}

impl Region {
    /// Strictly between the two frontiers.
    pub fn contains(&self, z: LiftPoint) -> bool {
        z.y > self.lower.heights_at(z.x).1 && z.y < self.upper.heights_at(z.x).0
    }

    /// Lowest and highest heights reached by the frontiers.
    pub fn y_extent(&self) -> (f64, f64) {
        (0..GRAPH_NODES).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let x = i as f64 / GRAPH_NODES as f64;
            (
                lo.min(self.lower.heights_at(x).1),
                hi.max(self.upper.heights_at(x).0),
            )
        })
    }

    pub fn orbit_ids(&self) -> Vec<&str> {
        self.inventory.iter().map(|o| o.id.as_str()).collect()
    }

    pub fn essential_orbit_ids(&self) -> Vec<&str> {
        self.inventory
            .iter()
            .filter(|o| o.essentiality == Some(EssentialityStatus::Essential))
            .map(|o| o.id.as_str())
            .collect()
    }

    pub fn frontier(&self, side: Side) -> &Frontier {
        match side {
            Side::Upper => &self.upper,
            Side::Lower => &self.lower,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Upper => "upper",
            Side::Lower => "lower",
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssentialityParams {
    pub arclength: f64,
    pub resolution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    pub n_bands: usize,
    pub n_cert: u64,
    pub targets_per_band: usize,
    pub search: BarrierSearch,
    /// Step of the fine scan that pulls a frontier onto the innermost circle.
    pub refine_step: f64,
    pub rotation_grid: (usize, usize),
    pub rotation_steps: u64,
    pub q_max: usize,
    pub inventory_grid: usize,
    /// Classify hyperbolic inventory orbits; skipped when `None`.
    pub essentiality: Option<EssentialityParams>,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        Self {
            n_bands: 64,
            n_cert: 100_000,
            targets_per_band: 20,
            search: BarrierSearch::default(),
            refine_step: 1e-3,
            rotation_grid: (32, 16),
            rotation_steps: 10_000,
            q_max: 8,
            inventory_grid: 32,
            essentiality: Some(EssentialityParams {
                arclength: 20.0,
                resolution: 1.0 / 512.0,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandVerdict {
    pub y_band: (f64, f64),
    pub barrier: Option<Barrier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub bands: Vec<BandVerdict>,
    pub regions: Vec<Region>,
}

impl Decomposition {
    /// Region whose interior contains `z`.
    pub fn region_containing(&self, z: LiftPoint) -> Option<&Region> {
        self.regions.iter().find(|r| r.contains(z))
    }
}

/// Regions of instability in `y_range`, scanned with `n_bands` bands.
pub fn decompose(map: &LiftedMap, y_range: (f64, f64), n_bands: usize) -> Result<Vec<Region>> {
    let opts = DecomposeOptions {
        n_bands,
        ..DecomposeOptions::default()
    };
    Ok(decompose_with(map, y_range, &opts)?.regions)
}

/// Scans `n_bands` equal bands along the section `x = scan_x`; maximal runs
/// of bands without a barrier become regions. Frontiers are then pulled onto
/// the innermost circle found by a fine scan towards the neighbouring barrier.
pub fn decompose_with(
    map: &LiftedMap,
    y_range: (f64, f64),
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let (y0, y1) = y_range;
    if !(y0.is_finite() && y1.is_finite() && y1 > y0) {
        return Err(Error::InvalidArgument(format!(
            "y_range {y_range:?} must be bounded and non-empty"
        )));
    }
    if opts.n_bands == 0 {
        return Err(Error::InvalidArgument("n_bands must be >= 1".into()));
    }
    let n = opts.n_bands;
    let h = (y1 - y0) / n as f64;
    let bands: Vec<BandVerdict> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y_band = (y0 + i as f64 * h, y0 + (i + 1) as f64 * h);
            let targets = band_targets(map, y_band, opts.targets_per_band, &opts.search);
            BandVerdict {
                y_band,
                barrier: detect_barrier(map, y_band, &targets, opts.n_cert, &opts.search),
            }
        })
        .collect();

    let mut runs = Vec::new();
    let mut i = 0;
    while i < n {
        if bands[i].barrier.is_some() {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && bands[i].barrier.is_none() {
            i += 1;
        }
        runs.push((start, i - 1));
    }

    let mut regions = Vec::with_capacity(runs.len());
    for (a, b) in runs {
        let lower = match a.checked_sub(1).and_then(|k| bands[k].barrier.clone()) {
            Some(bar) => Frontier::Barrier(refine_frontier(map, bar, bands[a].y_band.1, opts)),
            None => Frontier::End { y: y0 },
        };
        let upper = match bands.get(b + 1).and_then(|v| v.barrier.clone()) {
            Some(bar) => Frontier::Barrier(refine_frontier(map, bar, bands[b].y_band.0, opts)),
            None => Frontier::End { y: y1 },
        };
        regions.push(build_region(map, lower, upper, opts)?);
    }
    Ok(Decomposition { bands, regions })
}

/// Walks from `from_y` towards the barrier along the section and returns the
/// first circle met, or the barrier itself.
fn refine_frontier(
    map: &LiftedMap,
    barrier: Barrier,
    from_y: f64,
    opts: &DecomposeOptions,
) -> Barrier {
    let x = opts.search.scan_x;
    let (lo, hi) = barrier.heights_at(x);
    let target = if from_y < lo { lo } else { hi };
    let dir = (target - from_y).signum();
    let steps = ((target - from_y).abs() / opts.refine_step).floor() as usize;
    (0..steps)
        .map(|k| from_y + dir * k as f64 * opts.refine_step)
        .find_map(|y| fit_circle(map, LiftPoint::new(x, y), &opts.search.circle))
        .unwrap_or(barrier)
}

/// Seeds strictly between two frontiers, `nx` columns by `ny` rows.
pub fn seeds_between(lower: &Frontier, upper: &Frontier, nx: usize, ny: usize) -> Vec<LiftPoint> {
    let mut out = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        let x = (i as f64 + 0.5) / nx as f64;
        let lo = lower.heights_at(x).1;
        let hi = upper.heights_at(x).0;
        if !(hi > lo) {
            continue;
        }
        for j in 0..ny {
            out.push(LiftPoint::new(
                x,
                lo + (hi - lo) * (j as f64 + 0.5) / ny as f64,
            ));
        }
    }
    out
}

fn build_region(
    map: &LiftedMap,
    lower: Frontier,
    upper: Frontier,
    opts: &DecomposeOptions,
) -> Result<Region> {
    let (nx, ny) = opts.rotation_grid;
    let seeds = seeds_between(&lower, &upper, nx, ny);
    let mut rotation_interval = rotation_interval_of_set(map, &seeds, opts.rotation_steps)?;
    // every orbit between two invariant circles rotates between their rotations
    if let Some(b) = lower.barrier() {
        rotation_interval.lo = rotation_interval
            .lo
            .max(b.rotation_estimate.min(rotation_interval.hi));
    }
    if let Some(b) = upper.barrier() {
        rotation_interval.hi = rotation_interval
            .hi
            .min(b.rotation_estimate.max(rotation_interval.lo));
    }
    rotation_interval.confidence = Confidence::Sampled;

    let mut region = Region {
        id: String::new(),
        lower,
        upper,
        rotation_interval,
        inventory: Vec::new(),
    };
    region.inventory = inventory(map, &region, opts)?;
    region.id = content_id(&region);
    Ok(region)
}

/// Coprime `(p, q)`, `1 <= q <= q_max`, with `p/q` in `[lo, hi]`.
pub fn rationals_in(lo: f64, hi: f64, q_max: usize) -> Vec<(i64, usize)> {
    let mut out = Vec::new();
    for q in 1..=q_max {
        let qf = q as f64;
        let (a, b) = ((lo * qf).ceil() as i64, (hi * qf).floor() as i64);
        for p in a..=b {
            if gcd(p, q as i64) == 1 {
                out.push((p, q));
            }
        }
    }
    out
}

fn inventory(
    map: &LiftedMap,
    region: &Region,
    opts: &DecomposeOptions,
) -> Result<Vec<InventoryOrbit>> {
    let (ylo, yhi) = region.y_extent();
    let window = Window::band(ylo, yhi);
    let seeds = seed_grid(&window, opts.inventory_grid, opts.inventory_grid);
    let newton = NewtonOptions::default();
    let ri = region.rotation_interval;
    let mut out = Vec::new();
    for (p, q) in rationals_in(ri.lo, ri.hi, opts.q_max) {
        for orbit in find_all_pq_with(map, p, q, &seeds, &window, &newton)? {
            if orbit.points.iter().all(|&z| region.contains(z)) {
                out.push(orbit);
            }
        }
    }
    let classify = |orbit: &PeriodicOrbit| -> Result<Option<EssentialityStatus>> {
        match opts.essentiality {
            Some(e) if orbit.is_hyperbolic() => Ok(Some(
                classify_essentiality(map, orbit, e.arclength, e.resolution)?.status,
            )),
            _ => Ok(None),
        }
    };
    out.into_iter()
        .map(|orbit| {
            Ok(InventoryOrbit {
                id: orbit.id(),
                essentiality: classify(&orbit)?,
                orbit,
            })
        })
        .collect()
}

/// Flat barriers of the integrable map are exact; used by tests and as a
/// fallback representation.
pub fn flat_frontier(y: f64) -> Frontier {
    Frontier::Barrier(Barrier::flat(y, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrable_has_no_regions() {
        let f = LiftedMap::standard(0.0);
        let t = std::time::Instant::now();
        let regions = decompose(&f, (0.0, 1.0), 16).unwrap();
        assert!(regions.is_empty());
        assert!(t.elapsed().as_secs_f64() < 5.0);
    }

    #[test]
    fn rationals_enumeration() {
        assert_eq!(rationals_in(-0.1, 0.3, 4), vec![(0, 1), (1, 4)]);
        assert_eq!(rationals_in(0.5, 0.5, 3), vec![(1, 2)]);
        assert!(rationals_in(0.3, 0.2, 5).is_empty());
    }

    #[test]
    fn seeds_stay_between_frontiers() {
        let s = seeds_between(&flat_frontier(0.1), &Frontier::End { y: 0.3 }, 4, 3);
        assert_eq!(s.len(), 12);
        assert!(s.iter().all(|z| z.y > 0.1 && z.y < 0.3));
    }
}
