use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, OccupancyGrid};
use crate::dynamics::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};
use crate::manifolds::{
    branch_seed, grow_branch_with, Branch, BranchKind, BranchSign, GrowthOptions, DEFAULT_EPS,
};
use crate::periodic::PeriodicOrbit;

/// Coarsest raster accepted: fewer than eight columns cannot resolve a loop.
pub const MAX_RESOLUTION: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EssentialityStatus {
    Essential,
    /// No separating loop at this arclength and resolution. Not a proof of
    /// inessentiality.
    NotFoundUpTo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// Closed loop in the lift: the last vertex is the first translated by
    /// `displacement` (±1). Every vertex is a corner of a wall cell.
    Curve {
        vertices: Vec<LiftPoint>,
        displacement: i64,
    },
    Bounds {
        arclength: f64,
        resolution: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialityVerdict {
    pub status: EssentialityStatus,
    pub certificate: Certificate,
    pub arclength: f64,
    pub resolution: f64,
    pub separation_mask: OccupancyGrid,
}

impl EssentialityVerdict {
    pub fn is_essential(&self) -> bool {
        self.status == EssentialityStatus::Essential
    }
}

/// The four branches of every point of `orbit`, grown to `arclength`.
pub fn all_branches(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    arclength: f64,
    opts: &GrowthOptions,
) -> Result<Vec<Branch>> {
    let mut jobs = Vec::with_capacity(4 * orbit.q);
    for i in 0..orbit.points.len() {
        for kind in [BranchKind::Unstable, BranchKind::Stable] {
            for sign in [BranchSign::Plus, BranchSign::Minus] {
                jobs.push((i, kind, sign));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(i, kind, sign)| {
            let seed = branch_seed(map, orbit, i, kind, sign, DEFAULT_EPS)?;
            grow_branch_with(map, &seed, arclength, opts)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| match e {
            Error::NotHyperbolic => Error::NotHyperbolic,
            other => Error::BranchGrowthFailed(other.to_string()),
        })
}

pub fn classify_essentiality(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    arclength: f64,
    h: f64,
) -> Result<EssentialityVerdict> {
    classify_essentiality_with(map, orbit, arclength, h, &GrowthOptions::default())
}

/// Rasterises the branch union on an `h` grid over one annulus band and
/// fills from the top and bottom rows. The fills never meet exactly when
/// the walls separate the ends; the certificate is then the upper boundary
/// of the bottom fill.
pub fn classify_essentiality_with(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    arclength: f64,
    h: f64,
    opts: &GrowthOptions,
) -> Result<EssentialityVerdict> {
    if !(arclength >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "arclength {arclength} must be >= 0"
        )));
    }
    let branches = all_branches(map, orbit, arclength, opts)?;
    let (lo, hi) = branches
        .iter()
        .flat_map(|b| b.polyline.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| {
            (lo.min(z.y), hi.max(z.y))
        });
    if !(h > 0.0) || h > MAX_RESOLUTION {
        return Err(Error::ResolutionTooCoarse { h, band: hi - lo });
    }
    let mut grid = OccupancyGrid::covering(h, lo, hi);
    for b in &branches {
        grid.mark_polyline(&b.polyline);
    }
    let top = grid.ny - 1;
    let leaked = grid.fill_from_row(top, 0, Cell::Top);
    let bounds = Certificate::Bounds {
        arclength,
        resolution: grid.h,
    };
    if leaked {
        return Ok(EssentialityVerdict {
            status: EssentialityStatus::NotFoundUpTo,
            certificate: bounds,
            arclength,
            resolution: grid.h,
            separation_mask: grid,
        });
    }
    grid.fill_from_row(0, top, Cell::Bottom);
    let certificate = match grid.trace_upper_boundary(Cell::Bottom) {
        Some((vertices, cols)) if cols.unsigned_abs() as usize == grid.nx => Certificate::Curve {
            vertices,
            displacement: cols.signum(),
        },
        // separated but no loop traced: keep the verdict conservative
        _ => {
            return Ok(EssentialityVerdict {
                status: EssentialityStatus::NotFoundUpTo,
                certificate: bounds,
                arclength,
                resolution: grid.h,
                separation_mask: grid,
            })
        }
    };
    Ok(EssentialityVerdict {
        status: EssentialityStatus::Essential,
        certificate,
        arclength,
        resolution: grid.h,
        separation_mask: grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::newton_pq;

    #[test]
    fn resonance_saddle_is_essential() {
        let f = LiftedMap::standard(0.8);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let v = classify_essentiality(&f, &o, 10.0, 1.0 / 512.0).unwrap();
        assert!(v.is_essential());
        let Certificate::Curve {
            vertices,
            displacement,
        } = &v.certificate
        else {
            panic!()
        };
        assert_eq!(displacement.abs(), 1);
        let a = vertices[0];
        let b = *vertices.last().unwrap();
        assert!((b.x - a.x - *displacement as f64).abs() < 1e-12);
        assert!((b.y - a.y).abs() < 1e-12);
    }

    #[test]
    fn bare_seeds_do_not_separate() {
        let f = LiftedMap::standard(0.8);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let v = classify_essentiality(&f, &o, 0.0, 1.0 / 512.0).unwrap();
        assert_eq!(v.status, EssentialityStatus::NotFoundUpTo);
    }

    #[test]
    fn island_saddle_is_not_essential() {
        let f = LiftedMap::standard(1.0);
        // rotation-0 orbits of period 7 circle the elliptic point inside the island
        let saddle = (0..24 * 24)
            .filter_map(|n| {
                let z = LiftPoint::new(
                    -0.3 + 0.025 * (n % 24) as f64,
                    -0.3 + 0.025 * (n / 24) as f64,
                );
                newton_pq(&f, z, 0, 7).ok()
            })
            .find(|o| {
                o.is_hyperbolic()
                    && o.points
                        .iter()
                        .all(|z| z.annulus_dist(LiftPoint::new(0.0, 0.0)) < 0.3)
            })
            .expect("secondary saddle in the main island");
        let saddle = &saddle;
        let v = classify_essentiality(&f, saddle, 20.0, 1.0 / 512.0).unwrap();
        assert_eq!(v.status, EssentialityStatus::NotFoundUpTo);
    }

    #[test]
    fn coarse_grid_rejected() {
        let f = LiftedMap::standard(0.8);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let r = classify_essentiality(&f, &o, 1.0, 0.3);
        assert!(matches!(r, Err(Error::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn monotone_in_arclength() {
        let f = LiftedMap::standard(0.8);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let mut seen = false;
        for l in [1.0, 3.0, 10.0] {
            let e = classify_essentiality(&f, &o, l, 1.0 / 256.0)
                .unwrap()
                .is_essential();
            assert!(!seen || e);
            seen |= e;
        }
        assert!(seen);
    }
}
