//! Region-level examples on small, fast decompositions.

use std::sync::OnceLock;

use atlas_core::periodic::Window;
use atlas_core::regions::{
    band_targets, connecting_orbit_search, coverage_report, decompose_with, detect_barrier,
    region_boundary_orbits, BarrierSearch, DecomposeOptions, Region, Side,
};
use atlas_core::{LiftPoint, LiftedMap};

/// Central k = 0.9 region from a coarse scan of y in [-0.3, 0.3].
fn central() -> &'static (LiftedMap, Region) {
    static CELL: OnceLock<(LiftedMap, Region)> = OnceLock::new();
    CELL.get_or_init(|| {
        let map = LiftedMap::standard(0.9);
        let opts = DecomposeOptions {
            n_bands: 8,
            q_max: 3,
            essentiality: None,
            ..DecomposeOptions::default()
        };
        let d = decompose_with(&map, (-0.3, 0.3), &opts).unwrap();
        let region = d
            .region_containing(LiftPoint::new(0.5, 0.0))
            .expect("central region")
            .clone();
        (map, region)
    })
}

#[test]
fn central_region_shape() {
    let (_, region) = central();
    let iv = region.rotation_interval;
    assert!(iv.lo < -0.1 && iv.hi > 0.1, "{iv:?}");
    // frontier circles have rotation 1/(3 + golden ratio conjugate) = 0.27639...
    let rho = 1.0 / (3.0 + (5f64.sqrt() - 1.0) / 2.0);
    let up = region.upper.barrier().unwrap().rotation_estimate;
    let lo = region.lower.barrier().unwrap().rotation_estimate;
    assert!(
        (up - rho).abs() < 1e-6 && (lo + rho).abs() < 1e-6,
        "{lo} {up}"
    );
    // the (0,1) saddle is in the inventory
    assert!(region
        .inventory
        .iter()
        .any(|o| o.orbit.p == 0 && o.orbit.q == 1 && o.orbit.is_hyperbolic()));
}

#[test]
fn unreachable_delta_reports_best_distances() {
    let (map, region) = central();
    let out = connecting_orbit_search(map, region, Side::Upper, 2, 100_000, 1e-9).unwrap();
    assert!(!out.is_found());
    let e = out.evidence();
    assert!(e.forward_min_dist.is_finite() && e.forward_min_dist >= 1e-9);
}

#[test]
fn boundary_orbit_windows() {
    let (map, region) = central();
    // the frontier rotation is near a noble number: no q = 1 rational nearby
    assert!(region_boundary_orbits(map, region, Side::Upper, 0.05, 1)
        .unwrap()
        .is_empty());
    // a band reaching down past y = 0 contains the (0,1) saddle
    let wide = region_boundary_orbits(map, region, Side::Upper, 0.3, 1).unwrap();
    assert!(wide.iter().any(|o| o.p == 0
        && o.q == 1
        && o.points[0].annulus_sup_dist(LiftPoint::new(0.5, 0.0)) < 1e-9));
}

/// Above the last invariant circle every band shows transport.
#[test]
fn no_barrier_at_k_1_2() {
    let map = LiftedMap::standard(1.2);
    let search = BarrierSearch::default();
    for j in 0..4 {
        let band = (j as f64 * 0.25, (j + 1) as f64 * 0.25);
        let targets = band_targets(&map, band, 8, &search);
        assert!(
            detect_barrier(&map, band, &targets, 100_000, &search).is_none(),
            "barrier in {band:?}"
        );
    }
}

#[test]
fn integrable_coverage_is_all_elliptic() {
    let rep = coverage_report(
        &LiftedMap::standard(0.0),
        &Window::band(-0.5, 0.5),
        8,
        8,
        0.02,
        4,
    )
    .unwrap();
    assert_eq!(rep.h_fraction, 0.0);
    assert_eq!(rep.e_fraction, 1.0);
}
