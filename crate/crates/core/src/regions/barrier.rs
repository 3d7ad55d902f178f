use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{weighted_rotation, LiftPoint, LiftedMap};
use crate::periodic::gcd;

/// Number of x-nodes of a fitted graph.
pub const GRAPH_NODES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detector {
    GraphFit,
    TransportExclusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BarrierShape {
    /// `y = psi(x)`, sampled at `x_i = i / psi.len()` and linearly
    /// interpolated (periodic in x).
    Graph { psi: Vec<f64> },
    /// Horizontal strip that no sampled orbit crossed.
    Strip { lo: f64, hi: f64 },
}

/// Proxy for an irrational invariant essential continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub shape: BarrierShape,
    pub rotation_estimate: f64,
    pub detector: Detector,
    /// y-interval occupied by the barrier.
    pub band: (f64, f64),
    /// Steps of the certifying run.
    pub n_cert: u64,
}

impl Barrier {
    /// A horizontal line, e.g. an invariant circle of an integrable map.
    pub fn flat(y: f64, rotation: f64) -> Self {
        Self {
            shape: BarrierShape::Graph {
                psi: vec![y; GRAPH_NODES],
            },
            rotation_estimate: rotation,
            detector: Detector::GraphFit,
            band: (y, y),
            n_cert: 0,
        }
    }

    /// Lowest and highest barrier height over `x` (equal for graphs).
    pub fn heights_at(&self, x: f64) -> (f64, f64) {
        match &self.shape {
            BarrierShape::Graph { psi } => {
                let y = interpolate(psi, x);
                (y, y)
            }
            BarrierShape::Strip { lo, hi } => (*lo, *hi),
        }
    }

    pub fn is_below(&self, z: LiftPoint) -> bool {
        z.y < self.heights_at(z.x).0
    }

    pub fn is_above(&self, z: LiftPoint) -> bool {
        z.y > self.heights_at(z.x).1
    }
}

fn interpolate(psi: &[f64], x: f64) -> f64 {
    let n = psi.len();
    let u = x.rem_euclid(1.0) * n as f64;
    let i = (u.floor() as usize).min(n - 1);
    let s = u - i as f64;
    psi[i] * (1.0 - s) + psi[(i + 1) % n] * s
}

/// Thresholds of the invariant-circle test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleTest {
    /// Orbit length used for the graph fit (at least 1e5 for certification).
    pub n_points: usize,
    /// Largest allowed height jump between x-neighbours of the sorted orbit.
    pub jump_tol: f64,
    /// Length of the shorter weighted Birkhoff average; the longer is twice this.
    pub conv_n: u64,
    pub conv_tol: f64,
    /// A rotation within `eta / q^2` of `p/q`, `q <= proxy_q`, is rejected.
    pub eta: f64,
    pub proxy_q: u64,
}

impl Default for CircleTest {
    fn default() -> Self {
        Self {
            n_points: 100_000,
            jump_tol: 2e-3,
            conv_n: 20_000,
            conv_tol: 1e-9,
            eta: 0.01,
            proxy_q: 50,
        }
    }
}

/// Nearest rational `p/q` with `q <= q_max` violating the irrational proxy,
/// if any.
pub fn rational_near(rho: f64, eta: f64, q_max: u64) -> Option<(i64, u64)> {
    (1..=q_max).find_map(|q| {
        let p = (rho * q as f64).round();
        ((rho - p / q as f64).abs() < eta / (q * q) as f64 && gcd(p as i64, q as i64) == 1)
            .then_some((p as i64, q))
    })
}

/// Runs the circle test on the orbit of `z`. On success returns the fitted
/// barrier.
pub fn fit_circle(map: &LiftedMap, z: LiftPoint, test: &CircleTest) -> Option<Barrier> {
    let a = weighted_rotation(map, z, test.conv_n).ok()?;
    let b = weighted_rotation(map, z, 2 * test.conv_n).ok()?;
    if !((a - b).abs() < test.conv_tol) || rational_near(b, test.eta, test.proxy_q).is_some() {
        return None;
    }
    let mut pts: Vec<LiftPoint> = Vec::with_capacity(test.n_points);
    for w in map.orbit(z).take(test.n_points) {
        if !w.is_finite() {
            return None;
        }
        pts.push(w.reduce());
    }
    pts.sort_by(|p, q| p.x.total_cmp(&q.x));
    let wrap = (pts[0].y - pts[pts.len() - 1].y).abs();
    let jump = pts
        .windows(2)
        .map(|w| (w[1].y - w[0].y).abs())
        .fold(wrap, f64::max);
    if !(jump < test.jump_tol) {
        return None;
    }
    let psi = resample(&pts, GRAPH_NODES);
    let lo = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(Barrier {
        shape: BarrierShape::Graph { psi },
        rotation_estimate: b,
        detector: Detector::GraphFit,
        band: (lo, hi),
        n_cert: test.n_points as u64,
    })
}

/// Linear interpolation of x-sorted points onto `n` equally spaced nodes.
fn resample(sorted: &[LiftPoint], n: usize) -> Vec<f64> {
    let m = sorted.len();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let x = i as f64 / n as f64;
        while k < m && sorted[k].x < x {
            k += 1;
        }
        // neighbours on either side, wrapping through x = 0
        let (a, b) = match k {
            0 => (sorted[m - 1].translate(-1), sorted[0]),
            k if k == m => (sorted[m - 1], sorted[0].translate(1)),
            k => (sorted[k - 1], sorted[k]),
        };
        let s = if b.x > a.x {
            (x - a.x) / (b.x - a.x)
        } else {
            0.0
        };
        out.push(a.y + s * (b.y - a.y));
    }
    out
}

/// Noble numbers in `(lo, hi)`, simplest first. Between Farey neighbours
/// `a/b < c/d` the candidates are `(a + g c)/(b + g d)` and
/// `(c + g a)/(d + g b)` with `g` the golden section.
pub fn noble_targets(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut out = Vec::new();
    if !(hi > lo) || count == 0 {
        return out;
    }
    let base = lo.floor();
    let mut queue = std::collections::VecDeque::new();
    let mut n = base as i64;
    while (n as f64) < hi {
        queue.push_back(((n, 1i64), (n + 1, 1i64)));
        n += 1;
    }
    let mut visited = 0;
    while let Some(((a, b), (c, d))) = queue.pop_front() {
        visited += 1;
        if visited > 100_000 {
            break;
        }
        let (fa, fb, fc, fd) = (a as f64, b as f64, c as f64, d as f64);
        if fc / fd <= lo || fa / fb >= hi {
            continue;
        }
        for v in [(fa + g * fc) / (fb + g * fd), (fc + g * fa) / (fd + g * fb)] {
            if v > lo && v < hi && !out.iter().any(|&o: &f64| (o - v).abs() < 1e-15) {
                out.push(v);
                if out.len() == count {
                    return out;
                }
            }
        }
        let (m, e) = (a + c, b + d);
        queue.push_back(((a, b), (m, e)));
        queue.push_back(((m, e), (c, d)));
    }
    out
}

/// Settings for one barrier search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSearch {
    /// Abscissa of the vertical section the band lives on.
    pub scan_x: f64,
    pub circle: CircleTest,
    /// Bisection steps when locating a target rotation on the section.
    pub bisection_steps: usize,
    /// Orbit length of the weighted rotation used while bisecting.
    pub bisection_n: u64,
    /// Additional evenly spaced candidates tried in every band.
    pub uniform_samples: usize,
    pub n_transport_seeds: usize,
}

impl Default for BarrierSearch {
    fn default() -> Self {
        Self {
            scan_x: 0.5,
            circle: CircleTest::default(),
            bisection_steps: 40,
            bisection_n: 4000,
            uniform_samples: 4,
            n_transport_seeds: 100,
        }
    }
}

/// Looks for a barrier crossing the section `x = scan_x` inside `y_band`.
/// Graph fits are tried first (noble targets, then evenly spaced heights);
/// otherwise the strip `y_band` is certified by transport exclusion over
/// `n_cert` steps. `None` means no barrier found.
pub fn detect_barrier(
    map: &LiftedMap,
    y_band: (f64, f64),
    targets: &[f64],
    n_cert: u64,
    search: &BarrierSearch,
) -> Option<Barrier> {
    let (lo, hi) = y_band;
    if !(hi > lo) {
        return None;
    }
    graph_fit_in_band(map, y_band, targets, search)
        .or_else(|| transport_exclusion(map, y_band, n_cert, search))
}

/// Noble targets between the section rotations at the band edges.
pub fn band_targets(
    map: &LiftedMap,
    y_band: (f64, f64),
    count: usize,
    search: &BarrierSearch,
) -> Vec<f64> {
    let r =
        |y: f64| weighted_rotation(map, LiftPoint::new(search.scan_x, y), search.bisection_n).ok();
    match (r(y_band.0), r(y_band.1)) {
        (Some(a), Some(b)) => noble_targets(a.min(b), a.max(b), count),
        _ => Vec::new(),
    }
}

pub fn graph_fit_in_band(
    map: &LiftedMap,
    y_band: (f64, f64),
    targets: &[f64],
    search: &BarrierSearch,
) -> Option<Barrier> {
    let (lo, hi) = y_band;
    let rot =
        |y: f64| weighted_rotation(map, LiftPoint::new(search.scan_x, y), search.bisection_n).ok();
    let (r_lo, r_hi) = (rot(lo)?, rot(hi)?);
    let up = r_hi > r_lo;
    // the section rotation need not be monotone; bisection still lands on
    // a circle of rotation w when exactly one crosses the band
    let bisect = |w: f64| -> Option<f64> {
        if (r_lo - w) * (r_hi - w) > 0.0 {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..search.bisection_steps {
            let m = 0.5 * (a + b);
            if (rot(m)? < w) == up {
                a = m;
            } else {
                b = m;
            }
        }
        Some(0.5 * (a + b))
    };
    let n = search.uniform_samples;
    targets
        .iter()
        .filter_map(|&w| bisect(w))
        .chain((0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64))
        .find_map(|y| fit_circle(map, LiftPoint::new(search.scan_x, y), &search.circle))
}

/// No seed started just below the strip (spread over x) reaches above it.
pub fn transport_exclusion(
    map: &LiftedMap,
    y_band: (f64, f64),
    n_cert: u64,
    search: &BarrierSearch,
) -> Option<Barrier> {
    let (lo, hi) = y_band;
    let n = search.n_transport_seeds.max(1);
    let crossed = (0..n).into_par_iter().any(|i| {
        let mut z = LiftPoint::new(i as f64 / n as f64, lo - 1e-9);
        for _ in 0..n_cert {
            z = map.step(z);
            if !(z.y <= hi) {
                return true;
            }
        }
        false
    });
    if crossed {
        return None;
    }
    let mid = LiftPoint::new(search.scan_x, 0.5 * (lo + hi));
    let rotation = weighted_rotation(map, mid, search.circle.conv_n).ok()?;
    Some(Barrier {
        shape: BarrierShape::Strip { lo, hi },
        rotation_estimate: rotation,
        detector: Detector::TransportExclusion,
        band: (lo, hi),
        n_cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_9;

    #[test]
    fn nobles_simplest_first() {
        let t = noble_targets(0.0, 1.0, 4);
        assert!((t[0] - (1.0 - GOLDEN)).abs() < 1e-15);
        assert!((t[1] - GOLDEN).abs() < 1e-15);
        assert_eq!(t.len(), 4);
        let t = noble_targets(0.6, 0.64, 20);
        assert!((t[0] - GOLDEN).abs() < 1e-15);
        assert!(t.iter().all(|&v| v > 0.6 && v < 0.64));
        // oracle: continued fraction of every target ends in ones
        for v in noble_targets(-0.3, 0.3, 20) {
            let mut x = v - v.floor();
            let mut tail_ones = 0;
            for _ in 0..25 {
                x = 1.0 / x;
                let a = x.floor();
                tail_ones = if a == 1.0 { tail_ones + 1 } else { 0 };
                x -= a;
            }
            assert!(tail_ones >= 8, "{v}");
        }
    }

    #[test]
    fn proxy_rejects_low_order_rationals() {
        assert_eq!(rational_near(0.5 + 1e-6, 0.01, 50), Some((1, 2)));
        assert_eq!(rational_near(GOLDEN, 0.01, 50), None);
        assert_eq!(rational_near(0.0, 0.01, 50), Some((0, 1)));
    }

    #[test]
    fn integrable_golden_line() {
        let f = LiftedMap::standard(0.0);
        let s = BarrierSearch::default();
        let band = (GOLDEN - 0.01, GOLDEN + 0.01);
        let t = band_targets(&f, band, 20, &s);
        let b = detect_barrier(&f, band, &t, 100_000, &s).unwrap();
        assert_eq!(b.detector, Detector::GraphFit);
        assert!((b.rotation_estimate - GOLDEN).abs() < 1e-12);
        assert!((b.band.1 - b.band.0) < 1e-12);
        let BarrierShape::Graph { psi } = &b.shape else {
            panic!()
        };
        assert!(psi.len() >= GRAPH_NODES);
    }

    #[test]
    fn golden_circle_persists_at_half() {
        let f = LiftedMap::standard(0.5);
        let s = BarrierSearch::default();
        let band = (0.60, 0.64);
        let b = detect_barrier(&f, band, &[GOLDEN], 100_000, &s).unwrap();
        assert_eq!(b.detector, Detector::GraphFit);
        assert!((b.rotation_estimate - GOLDEN).abs() < 1e-9);
    }

    #[test]
    fn flat_barrier_sides() {
        let b = Barrier::flat(0.25, 0.25);
        assert!(b.is_below(LiftPoint::new(3.7, 0.2)));
        assert!(b.is_above(LiftPoint::new(-0.1, 0.3)));
    }
}
