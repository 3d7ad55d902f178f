//! Periodic orbits of type (p, q): Newton search on the lift, stability
//! classification and fixed-point indices.

mod index;
mod newton;
mod search;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{LiftPoint, LiftedMap, Mat2};
use crate::error::{Error, Result};

pub use index::{fixed_point_index, FixedPointIndex, MIN_INDEX_SAMPLES};
pub use newton::{newton_pq, NewtonOptions};
pub use search::{find_all_pq, find_all_pq_with, gcd, seed_grid, Window, DEDUP_TOL};

/// Half-width of the band `| |trace| - 2 | <= tau` classified as degenerate.
pub const DEGENERACY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Degenerate,
    Elliptic,
    Hyperbolic,
}

/// A periodic orbit of type (p, q): `f^q(z) = T^p(z)` for each of its points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub p: i64,
    pub q: usize,
    /// Orbit points in dynamical order, `x` reduced to `[0, 1)`.
    pub points: Vec<LiftPoint>,
    pub stability: Stability,
    pub eigenvalues: [Complex64; 2],
    pub trace: f64,
    pub residue: f64,
    pub newton_residual: f64,
}

impl PeriodicOrbit {
    pub fn rotation_number(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.stability == Stability::Hyperbolic
    }

    /// Whether the hyperbolic eigenvalues are negative (reflection saddle).
    pub fn is_reflecting(&self) -> bool {
        self.eigenvalues[0].re < 0.0
    }

    pub fn y_range(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.y), hi.max(p.y))
            })
    }

    /// Content id: hash of `(p, q)` and the points rounded to 1e-9.
    pub fn id(&self) -> String {
        let pts: Vec<(i64, i64)> = self
            .points
            .iter()
            .map(|z| ((z.x * 1e9).round() as i64, (z.y * 1e9).round() as i64))
            .collect();
        crate::ids::content_id(&(self.p, self.q, pts))
    }

    /// Same orbit up to `tol` in the annulus (x mod 1).
    pub fn same_orbit(&self, other: &PeriodicOrbit, tol: f64) -> bool {
        self.q == other.q
            && self.p == other.p
            && self
                .points
                .iter()
                .all(|a| other.points.iter().any(|b| a.annulus_sup_dist(*b) < tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub stability: Stability,
    pub eigenvalues: [Complex64; 2],
    pub trace: f64,
    pub residue: f64,
    pub monodromy: Mat2,
}

/// Residual `|f^q(z) - T^p(z)|` in the sup norm.
pub fn periodicity_residual(map: &LiftedMap, z: LiftPoint, p: i64, q: usize) -> Result<f64> {
    let w = map.power(z, q as i64)?;
    Ok(w.sup_dist(z.translate(p)))
}

pub fn stability_of_trace(trace: f64) -> Stability {
    let t = trace.abs();
    if (t - 2.0).abs() <= DEGENERACY_BAND {
        Stability::Degenerate
    } else if t < 2.0 {
        Stability::Elliptic
    } else {
        Stability::Hyperbolic
    }
}

/// Stability class of a periodic point from the q-fold Jacobian product.
pub fn classify(map: &LiftedMap, z: LiftPoint, p: i64, q: usize) -> Result<Classification> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be >= 1".into()));
    }
    const TOL: f64 = 1e-8;
    let (w, m) = map.power_with_jacobian(z, q)?;
    let residual = w.sup_dist(z.translate(p));
    if residual >= TOL {
        return Err(Error::ResidualTooLarge { residual, tol: TOL });
    }
    let trace = m.trace();
    Ok(Classification {
        stability: stability_of_trace(trace),
        eigenvalues: m.eigenvalues(),
        trace,
        residue: (2.0 - trace) / 4.0,
        monodromy: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_fixed_points_of_standard_map() {
        let f = LiftedMap::standard(1.0);
        let c = classify(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        assert_eq!(c.stability, Stability::Hyperbolic);
        let s5 = 5f64.sqrt();
        assert!((c.eigenvalues[0].re - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!((c.eigenvalues[1].re - (3.0 - s5) / 2.0).abs() < 1e-12);
        assert!((c.eigenvalues[0].re - 2.618034).abs() < 1e-6);
        assert!((c.residue + 0.25).abs() < 1e-14);

        let c = classify(&f, LiftPoint::new(0.0, 0.0), 0, 1).unwrap();
        assert_eq!(c.stability, Stability::Elliptic);
        assert!((c.trace - 1.0).abs() < 1e-14);
        assert!((c.residue - 0.25).abs() < 1e-14);
        assert!((c.eigenvalues[0].norm() - 1.0).abs() < 1e-12);

        let f = LiftedMap::standard(4.0);
        let c = classify(&f, LiftPoint::new(0.0, 0.0), 0, 1).unwrap();
        assert_eq!(c.stability, Stability::Degenerate);
        assert!((c.trace + 2.0).abs() < 1e-14);
    }

    #[test]
    fn classify_rejects_non_periodic_point() {
        let f = LiftedMap::standard(1.0);
        assert!(matches!(
            classify(&f, LiftPoint::new(0.3, 0.1), 0, 1),
            Err(Error::ResidualTooLarge { .. })
        ));
    }

    #[test]
    fn trace_band() {
        assert_eq!(stability_of_trace(2.0 + 5e-10), Stability::Degenerate);
        assert_eq!(stability_of_trace(-2.0 - 5e-10), Stability::Degenerate);
        assert_eq!(stability_of_trace(2.0 + 2e-9), Stability::Hyperbolic);
        assert_eq!(stability_of_trace(-2.0 + 2e-9), Stability::Elliptic);
    }
}
