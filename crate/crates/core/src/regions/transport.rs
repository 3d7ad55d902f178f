use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decompose::{rationals_in, Frontier, Region, Side};
use crate::dynamics::{rotation_interval_of_set, LiftPoint, LiftedMap, RotationInterval};
use crate::error::{Error, Result};
use crate::manifolds::{
    branch_seed, grow_branch_partial, BranchKind, BranchSign, GrowthOptions, DEFAULT_EPS,
};
use crate::periodic::{find_all_pq_with, NewtonOptions, PeriodicOrbit, Window};

/// Arclength of the unstable branches whose points seed the connecting
/// orbit search.
pub const TANGLE_ARCLENGTH: f64 = 2.0;

/// Vertical distance from `z` to the frontier graph (its nearer edge for a
/// strip).
pub fn frontier_distance(frontier: &Frontier, z: LiftPoint) -> f64 {
    let (lo, hi) = frontier.heights_at(z.x);
    if z.y < lo {
        lo - z.y
    } else if z.y > hi {
        z.y - hi
    } else {
        0.0
    }
}

/// An orbit segment approaching one frontier forwards and the other
/// backwards. The minima are attained at steps `forward_at` and
/// `backward_at` of the recorded orbit of `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectingOrbitEvidence {
    pub start: LiftPoint,
    /// Frontier approached by the forward orbit.
    pub forward_frontier: Side,
    pub forward_min_dist: f64,
    pub forward_at: u64,
    pub backward_min_dist: f64,
    pub backward_at: u64,
    pub n_forward: u64,
    pub n_backward: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "best")]
pub enum ConnectingOutcome {
    Found(ConnectingOrbitEvidence),
    /// Best distances achieved, none below `delta`.
    NotFound(ConnectingOrbitEvidence),
}

impl ConnectingOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, ConnectingOutcome::Found(_))
    }

    pub fn evidence(&self) -> &ConnectingOrbitEvidence {
        match self {
            ConnectingOutcome::Found(e) | ConnectingOutcome::NotFound(e) => e,
        }
    }
}

/// Minimum distance to `frontier` over `n` steps of the forward
/// (`backward = false`) or backward orbit, with the step attaining it.
fn min_distance(
    map: &LiftedMap,
    z: LiftPoint,
    frontier: &Frontier,
    n: u64,
    backward: bool,
) -> (f64, u64) {
    let mut w = z;
    let mut best = (frontier_distance(frontier, w), 0);
    for j in 1..=n {
        w = if backward {
            map.step_inverse(w)
        } else {
            map.step(w)
        };
        if !w.is_finite() {
            break;
        }
        let d = frontier_distance(frontier, w);
        if d < best.0 {
            best = (d, j);
        }
    }
    best
}

/// Points on short unstable branches of the hyperbolic inventory orbits
/// closest to each frontier; falls back to a grid between the frontiers.
pub fn tangle_seeds(map: &LiftedMap, region: &Region, n_seeds: usize) -> Vec<LiftPoint> {
    let saddles: Vec<&PeriodicOrbit> = region
        .inventory
        .iter()
        .map(|o| &o.orbit)
        .filter(|o| o.is_hyperbolic())
        .collect();
    let nearest = |side: Side| {
        let fr = region.frontier(side);
        saddles.iter().copied().min_by(|a, b| {
            let d = |o: &PeriodicOrbit| {
                o.points
                    .iter()
                    .map(|&z| frontier_distance(fr, z))
                    .fold(f64::INFINITY, f64::min)
            };
            d(a).total_cmp(&d(b))
        })
    };
    let mut chosen: Vec<&PeriodicOrbit> = [nearest(Side::Upper), nearest(Side::Lower)]
        .into_iter()
        .flatten()
        .collect();
    chosen.dedup_by(|a, b| a.id() == b.id());

    let opts = GrowthOptions::default();
    let mut pool = Vec::new();
    for orbit in chosen {
        for sign in [BranchSign::Plus, BranchSign::Minus] {
            let Ok(seed) = branch_seed(map, orbit, 0, BranchKind::Unstable, sign, DEFAULT_EPS)
            else {
                continue;
            };
            if let Ok(b) = grow_branch_partial(map, &seed, TANGLE_ARCLENGTH, &opts) {
                pool.extend(b.polyline.iter().skip(1).copied());
            }
        }
    }
    if pool.is_empty() {
        let side = (n_seeds as f64).sqrt().ceil() as usize;
        pool =
            super::decompose::seeds_between(&region.lower, &region.upper, side.max(1), side.max(1));
    }
    let n = n_seeds.min(pool.len());
    (0..n).map(|i| pool[i * pool.len() / n]).collect()
}

/// Best seed by (forward distance to the `forward` frontier, backward
/// distance to the opposite one). Found iff both are below `delta`.
pub fn connecting_orbit_search(
    map: &LiftedMap,
    region: &Region,
    forward: Side,
    n_seeds: usize,
    n_steps: u64,
    delta: f64,
) -> Result<ConnectingOutcome> {
    for side in [Side::Upper, Side::Lower] {
        if region.frontier(side).barrier().is_none() {
            return Err(Error::NoFrontier(side.name()));
        }
    }
    let seeds = tangle_seeds(map, region, n_seeds.max(1));
    if seeds.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    let to_fwd = region.frontier(forward);
    let to_bwd = region.frontier(forward.opposite());
    let runs: Vec<ConnectingOrbitEvidence> = seeds
        .par_iter()
        .map(|&start| {
            let (fd, fa) = min_distance(map, start, to_fwd, n_steps, false);
            let (bd, ba) = min_distance(map, start, to_bwd, n_steps, true);
            ConnectingOrbitEvidence {
                start,
                forward_frontier: forward,
                forward_min_dist: fd,
                forward_at: fa,
                backward_min_dist: bd,
                backward_at: ba,
                n_forward: n_steps,
                n_backward: n_steps,
            }
        })
        .collect();
    // ties resolved by seed order, so the result does not depend on scheduling
    let best = runs
        .into_iter()
        .min_by(|a, b| {
            a.forward_min_dist
                .total_cmp(&b.forward_min_dist)
                .then(a.backward_min_dist.total_cmp(&b.backward_min_dist))
        })
        .expect("non-empty");
    Ok(
        if best.forward_min_dist < delta && best.backward_min_dist < delta {
            ConnectingOutcome::Found(best)
        } else {
            ConnectingOutcome::NotFound(best)
        },
    )
}

/// Band of width `w` on the region side of a frontier.
#[derive(Debug, Clone, Copy)]
struct Band<'a> {
    frontier: &'a Frontier,
    side: Side,
    width: f64,
}

impl Band<'_> {
    /// Position across the band: 0 on the frontier, 1 on the inner edge;
    /// negative beyond the frontier.
    fn depth(&self, z: LiftPoint) -> f64 {
        let (lo, hi) = self.frontier.heights_at(z.x);
        match self.side {
            Side::Upper => (lo - z.y) / self.width,
            Side::Lower => (z.y - hi) / self.width,
        }
    }

    fn point(&self, x: f64, depth: f64) -> LiftPoint {
        let (lo, hi) = self.frontier.heights_at(x);
        match self.side {
            Side::Upper => LiftPoint::new(x, lo - depth * self.width),
            Side::Lower => LiftPoint::new(x, hi + depth * self.width),
        }
    }

    fn contains(&self, z: LiftPoint) -> bool {
        let d = self.depth(z);
        d > 0.0 && d < 1.0
    }
}

/// Low-discrepancy seeds strictly inside the band (the R2 sequence).
fn band_seeds(band: &Band, n: usize) -> Vec<LiftPoint> {
    const G: f64 = 1.324_717_957_244_746; // plastic number
    let (a1, a2) = (1.0 / G, 1.0 / (G * G));
    (0..n)
        .map(|i| {
            let i = i as f64 + 1.0;
            let x = (0.5 + a1 * i).fract();
            let d = (0.5 + a2 * i).fract().clamp(1e-6, 1.0 - 1e-6);
            band.point(x, d)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: u64,
    pub hi: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeStats {
    pub frontier: Side,
    pub band_width: f64,
    pub n_seeds: usize,
    pub n_cap: u64,
    /// Seeds that left the band into the region.
    pub escaped: usize,
    /// Seeds that left through the frontier itself.
    pub crossed: usize,
    /// Starting points of seeds still inside the band at the cap.
    pub stayed: Vec<LiftPoint>,
    /// Exit times of escaped seeds in decade bins `[10^k, 10^(k+1))`.
    pub histogram: Vec<HistogramBin>,
    pub max_escape_time: u64,
}

impl EscapeStats {
    pub fn escaped_fraction(&self) -> f64 {
        self.escaped as f64 / self.n_seeds.max(1) as f64
    }
}

enum Exit {
    Inner(u64),
    Frontier,
    Stayed,
}

/// Time for seeds in the width-`band_width` band next to a frontier to
/// leave it, capped at `n_cap` steps.
pub fn escape_time_stats(
    map: &LiftedMap,
    region: &Region,
    frontier: Side,
    band_width: f64,
    n_seeds: usize,
    n_cap: u64,
) -> Result<EscapeStats> {
    if !(band_width > 0.0) || !band_width.is_finite() {
        return Err(Error::InvalidBand(band_width));
    }
    let band = Band {
        frontier: region.frontier(frontier),
        side: frontier,
        width: band_width,
    };
    let seeds = band_seeds(&band, n_seeds);
    let exits: Vec<Exit> = seeds
        .par_iter()
        .map(|&z| {
            let mut w = z;
            for t in 1..=n_cap {
                w = map.step(w);
                let d = band.depth(w);
                if !(d < 1.0) {
                    return Exit::Inner(t);
                }
                if !(d > 0.0) {
                    return Exit::Frontier;
                }
            }
            Exit::Stayed
        })
        .collect();

    let mut stats = EscapeStats {
        frontier,
        band_width,
        n_seeds,
        n_cap,
        escaped: 0,
        crossed: 0,
        stayed: Vec::new(),
        histogram: Vec::new(),
        max_escape_time: 0,
    };
    let mut hi = 10;
    while hi / 10 <= n_cap {
        stats.histogram.push(HistogramBin {
            lo: hi / 10,
            hi,
            count: 0,
        });
        hi *= 10;
    }
    for (z, e) in seeds.iter().zip(exits) {
        match e {
            Exit::Inner(t) => {
                stats.escaped += 1;
                stats.max_escape_time = stats.max_escape_time.max(t);
                if let Some(b) = stats.histogram.iter_mut().find(|b| t >= b.lo && t < b.hi) {
                    b.count += 1;
                }
            }
            Exit::Frontier => stats.crossed += 1,
            Exit::Stayed => stats.stayed.push(*z),
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOrbitOptions {
    pub rotation_seeds: (usize, usize),
    pub rotation_steps: u64,
    pub newton_seeds: (usize, usize),
}

impl Default for BoundaryOrbitOptions {
    fn default() -> Self {
        Self {
            rotation_seeds: (32, 4),
            rotation_steps: 10_000,
            newton_seeds: (64, 8),
        }
    }
}

/// Periodic orbits with every point inside the band next to a frontier,
/// for all `q <= q_max` whose `p/q` lies in the band's sampled rotation
/// interval.
pub fn region_boundary_orbits(
    map: &LiftedMap,
    region: &Region,
    frontier: Side,
    band_width: f64,
    q_max: usize,
) -> Result<Vec<PeriodicOrbit>> {
    region_boundary_orbits_with(
        map,
        region,
        frontier,
        band_width,
        q_max,
        &BoundaryOrbitOptions::default(),
    )
}

pub fn region_boundary_orbits_with(
    map: &LiftedMap,
    region: &Region,
    frontier: Side,
    band_width: f64,
    q_max: usize,
    opts: &BoundaryOrbitOptions,
) -> Result<Vec<PeriodicOrbit>> {
    Ok(boundary_search(map, region, frontier, band_width, q_max, opts)?.1)
}

/// Sampled rotation interval of the band together with the orbits found.
pub fn boundary_search(
    map: &LiftedMap,
    region: &Region,
    frontier: Side,
    band_width: f64,
    q_max: usize,
    opts: &BoundaryOrbitOptions,
) -> Result<(RotationInterval, Vec<PeriodicOrbit>)> {
    if !(band_width > 0.0) || !band_width.is_finite() {
        return Err(Error::InvalidBand(band_width));
    }
    let band = Band {
        frontier: region.frontier(frontier),
        side: frontier,
        width: band_width,
    };
    let grid = |(nx, ny): (usize, usize)| -> Vec<LiftPoint> {
        (0..nx)
            .flat_map(|i| {
                let x = (i as f64 + 0.5) / nx as f64;
                (0..ny).map(move |j| band.point(x, (j as f64 + 0.5) / ny as f64))
            })
            .collect()
    };
    let rotation = rotation_interval_of_set(map, &grid(opts.rotation_seeds), opts.rotation_steps)?;
    let seeds = grid(opts.newton_seeds);
    let (ylo, yhi) = seeds
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| {
            (a.min(z.y), b.max(z.y))
        });
    let window = Window::band(ylo - band_width, yhi + band_width);
    let newton = NewtonOptions::default();
    let mut out = Vec::new();
    for (p, q) in rationals_in(rotation.lo, rotation.hi, q_max) {
        for orbit in find_all_pq_with(map, p, q, &seeds, &window, &newton)? {
            if orbit.points.iter().all(|&z| band.contains(z)) {
                out.push(orbit);
            }
        }
    }
    Ok((rotation, out))
}
