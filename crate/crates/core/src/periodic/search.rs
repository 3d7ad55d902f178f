use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newton::{newton_pq_with, NewtonOptions};
use super::{PeriodicOrbit, Stability};
use crate::dynamics::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};

/// Orbits whose point sets agree to this tolerance (mod 1) are identified.
pub const DEDUP_TOL: f64 = 1e-6;

/// Axis-aligned rectangle in lift coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    /// One fundamental domain in x over the given heights.
    pub fn band(y0: f64, y1: f64) -> Self {
        Self::new(0.0, 1.0, y0, y1)
    }

    pub fn is_empty(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0)
    }

    pub fn contains_y(&self, y: f64) -> bool {
        self.y0 <= y && y <= self.y1
    }
}

/// Row-major grid: `(x0 + i dx, y0 + j dy)` with `dx = (x1 - x0)/nx`.
pub fn seed_grid(window: &Window, nx: usize, ny: usize) -> Vec<LiftPoint> {
    let dx = (window.x1 - window.x0) / nx as f64;
    let dy = (window.y1 - window.y0) / ny as f64;
    (0..ny)
        .flat_map(|j| {
            (0..nx)
                .map(move |i| LiftPoint::new(window.x0 + i as f64 * dx, window.y0 + j as f64 * dy))
        })
        .collect()
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn find_all_pq(
    map: &LiftedMap,
    p: i64,
    q: usize,
    window: &Window,
    nx: usize,
    ny: usize,
) -> Result<Vec<PeriodicOrbit>> {
    find_all_pq_with(
        map,
        p,
        q,
        &seed_grid(window, nx, ny),
        window,
        &NewtonOptions::default(),
    )
}

/// Newton from every seed, keeping orbits with a point whose height lies in
/// the window; duplicates are merged in seed order, then sorted by the
/// lexicographically smallest point.
pub fn find_all_pq_with(
    map: &LiftedMap,
    p: i64,
    q: usize,
    seeds: &[LiftPoint],
    window: &Window,
    opts: &NewtonOptions,
) -> Result<Vec<PeriodicOrbit>> {
    if q == 0 || gcd(p, q as i64) != 1 {
        return Err(Error::InvalidArgument(format!(
            "(p, q) = ({p}, {q}) must be coprime with q >= 1"
        )));
    }
    let found: Vec<Option<PeriodicOrbit>> = seeds
        .par_iter()
        .map(|&s| newton_pq_with(map, s, p, q, opts).ok())
        .collect();

    // A parabolic zero has a quadratic residual, so Newton only pins it to
    // about sqrt(tol); merge degenerate orbits on that scale and keep the
    // best-converged copy.
    let degenerate_tol = DEDUP_TOL.max(10.0 * opts.tol.sqrt());
    let mut orbits: Vec<PeriodicOrbit> = Vec::new();
    for o in found.into_iter().flatten() {
        if !o.points.iter().any(|z| window.contains_y(z.y)) {
            continue;
        }
        let merge = |known: &PeriodicOrbit| {
            let degenerate =
                known.stability == Stability::Degenerate || o.stability == Stability::Degenerate;
            known.same_orbit(
                &o,
                if degenerate {
                    degenerate_tol
                } else {
                    DEDUP_TOL
                },
            )
        };
        match orbits.iter().position(merge) {
            Some(i)
                if o.newton_residual < orbits[i].newton_residual
                    && o.stability == Stability::Degenerate =>
            {
                orbits[i] = canonical(o);
            }
            Some(_) => {}
            None => orbits.push(canonical(o)),
        }
    }
    orbits.sort_by(|a, b| lex(seam_key(a.points[0]), seam_key(b.points[0])));
    Ok(orbits)
}

fn lex(a: LiftPoint, b: LiftPoint) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

fn seam_key(z: LiftPoint) -> LiftPoint {
    let x = if z.x > 1.0 - DEDUP_TOL {
        z.x - 1.0
    } else {
        z.x
    };
    LiftPoint::new(x, z.y)
}

/// Rotates the point list to start at the lexicographically smallest point.
/// Points within the dedup tolerance of x = 1 count as x = 0.
fn canonical(mut o: PeriodicOrbit) -> PeriodicOrbit {
    let start = (0..o.points.len())
        .min_by(|&i, &j| lex(seam_key(o.points[i]), seam_key(o.points[j])))
        .unwrap_or(0);
    o.points.rotate_left(start);
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = seed_grid(&Window::new(0.0, 1.0, 0.0, 1.0), 2, 2);
        assert_eq!(
            g,
            vec![
                LiftPoint::new(0.0, 0.0),
                LiftPoint::new(0.5, 0.0),
                LiftPoint::new(0.0, 0.5),
                LiftPoint::new(0.5, 0.5)
            ]
        );
        let w = Window::new(0.2, 0.4, -1.0, 1.0);
        assert_eq!(seed_grid(&w, 1, 1), vec![LiftPoint::new(0.2, -1.0)]);
        let g = seed_grid(&Window::new(0.0, 1.0, -1.0, 1.0), 100, 100);
        assert_eq!(g.len(), 10_000);
        let mut keys: Vec<(u64, u64)> = g.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 10_000);
    }

    #[test]
    fn fixed_points_at_k1() {
        let f = LiftedMap::standard(1.0);
        let orbits = find_all_pq(&f, 0, 1, &Window::new(0.0, 1.0, -0.5, 0.5), 50, 50).unwrap();
        assert_eq!(orbits.len(), 2);
        assert_eq!(orbits[0].stability, Stability::Elliptic);
        assert!(orbits[0].points[0].annulus_sup_dist(LiftPoint::new(0.0, 0.0)) < 1e-10);
        assert_eq!(orbits[1].stability, Stability::Hyperbolic);
        assert!(orbits[1].points[0].sup_dist(LiftPoint::new(0.5, 0.0)) < 1e-10);
    }

    /// {(0, y), (1/2, y)} with a(1 - y^2) = 1/2 is an exact (1,2) orbit of the
    /// nontwist map for any b, since sin(2 pi x) vanishes on it.
    #[test]
    fn nontwist_twin_chains() {
        let a: f64 = 0.52;
        let y = (1.0 - 0.5 / a).sqrt();
        let f = LiftedMap::nontwist(a, 0.05);
        let orbits = find_all_pq(&f, 1, 2, &Window::band(-1.0, 1.0), 32, 32).unwrap();
        assert_eq!(orbits.len(), 4);
        for sign in [1.0, -1.0] {
            let z = LiftPoint::new(0.0, sign * y);
            assert!(orbits
                .iter()
                .any(|o| o.points.iter().any(|p| p.annulus_sup_dist(z) < 1e-9)));
            let side: Vec<_> = orbits
                .iter()
                .filter(|o| o.points[0].y * sign > 0.0)
                .collect();
            assert_eq!(side.len(), 2);
            assert!(side.iter().any(|o| o.stability == Stability::Hyperbolic));
        }
    }

    /// At a = 1/2 the twins have merged into the parabolic orbit through the
    /// origin; Newton's smeared copies of it must collapse to one.
    #[test]
    fn nontwist_collided_chain_is_one_orbit() {
        let f = LiftedMap::nontwist(0.5, 0.05);
        let orbits = find_all_pq(&f, 1, 2, &Window::band(-1.0, 1.0), 32, 32).unwrap();
        assert_eq!(orbits.len(), 1);
        assert_eq!(orbits[0].stability, Stability::Degenerate);
        assert!(orbits[0]
            .points
            .iter()
            .any(|p| p.annulus_sup_dist(LiftPoint::new(0.0, 0.0)) < 1e-4));
    }

    /// The (1,3) elliptic orbit has a point on the seam x = 0; which side
    /// Newton lands on must not change the output order.
    #[test]
    fn order_is_independent_of_seed_order() {
        let f = LiftedMap::standard(1.0);
        let window = Window::band(-0.5, 1.0);
        let seeds = seed_grid(&window, 24, 24);
        let mut reversed = seeds.clone();
        reversed.reverse();
        let opts = NewtonOptions::default();
        let a = find_all_pq_with(&f, 1, 3, &seeds, &window, &opts).unwrap();
        let b = find_all_pq_with(&f, 1, 3, &reversed, &window, &opts).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.same_orbit(y, 1e-9) && x.stability == y.stability));
    }

    #[test]
    fn rejects_non_coprime() {
        let f = LiftedMap::standard(1.0);
        assert!(find_all_pq(&f, 2, 4, &Window::band(0.0, 1.0), 2, 2).is_err());
    }

    #[test]
    fn gcd_basics() {
        assert_eq!(gcd(0, 1), 1);
        assert_eq!(gcd(-4, 6), 2);
        assert_eq!(gcd(3, 8), 1);
    }
}
