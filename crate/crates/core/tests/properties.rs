//! Randomised invariants of the map layer and the content-addressed ids.

use std::collections::BTreeMap;

use atlas_core::dynamics::birkhoff_rotation;
use atlas_core::ids::content_id;
use atlas_core::periodic::{newton_pq, periodicity_residual};
use atlas_core::{LiftPoint, LiftedMap};
use proptest::prelude::*;

fn user_standard(k: f64) -> LiftedMap {
    let mut params = BTreeMap::new();
    params.insert("k".to_string(), k);
    LiftedMap::user(
        "x + y - k/(2*pi)*sin(2*pi*x)",
        "y - k/(2*pi)*sin(2*pi*x)",
        Some(("x - y", "y + k/(2*pi)*sin(2*pi*(x - y))")),
        params,
    )
    .unwrap()
}

fn maps(k: f64, a: f64, b: f64) -> [LiftedMap; 3] {
    [
        LiftedMap::standard(k),
        LiftedMap::nontwist(a, b),
        user_standard(k),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn deck_translation_commutes(
        x in -3.0..3.0f64, y in -2.0..2.0f64, n in -5i64..=5,
        k in 0.0..3.0f64, a in 0.1..1.0f64, b in 0.0..0.8f64,
    ) {
        for f in maps(k, a, b) {
            let z = LiftPoint::new(x, y);
            let lhs = f.apply(z.translate(n)).unwrap();
            let rhs = f.apply(z).unwrap().translate(n);
            prop_assert!(lhs.sup_dist(rhs) < 1e-11);
        }
    }

    #[test]
    fn area_preserving(x in -1.0..1.0f64, y in -2.0..2.0f64, k in 0.0..3.0f64, a in 0.1..1.0f64, b in 0.0..0.8f64) {
        for f in maps(k, a, b) {
            let det = f.jacobian(LiftPoint::new(x, y)).unwrap().det();
            prop_assert!((det - 1.0).abs() < 1e-9, "det = {}", det);
        }
    }

    #[test]
    fn inverse_undoes_one_step(x in -1.0..1.0f64, y in -2.0..2.0f64, k in 0.0..3.0f64, a in 0.1..1.0f64, b in 0.0..0.8f64) {
        for f in maps(k, a, b) {
            let z = LiftPoint::new(x, y);
            prop_assert!(f.inverse(f.apply(z).unwrap()).unwrap().sup_dist(z) < 1e-10);
            prop_assert!(f.apply(f.inverse(z).unwrap()).unwrap().sup_dist(z) < 1e-10);
        }
    }

    /// Central finite differences agree with the analytic Jacobian.
    #[test]
    fn jacobian_matches_differences(x in -1.0..1.0f64, y in -1.0..1.0f64, k in 0.0..3.0f64) {
        let f = LiftedMap::standard(k);
        let z = LiftPoint::new(x, y);
        let h = 1e-6;
        let j = f.jacobian(z).unwrap();
        let dx = (f.apply(LiftPoint::new(x + h, y)).unwrap() - f.apply(LiftPoint::new(x - h, y)).unwrap()) * (0.5 / h);
        let dy = (f.apply(LiftPoint::new(x, y + h)).unwrap() - f.apply(LiftPoint::new(x, y - h)).unwrap()) * (0.5 / h);
        let m = j.0;
        prop_assert!((m[0][0] - dx.x).abs() < 1e-6 && (m[1][0] - dx.y).abs() < 1e-6);
        prop_assert!((m[0][1] - dy.x).abs() < 1e-6 && (m[1][1] - dy.y).abs() < 1e-6);
    }

    /// For k = 0 the orbit is a rigid shift and the rotation number is y.
    #[test]
    fn integrable_rotation_is_height(y in -2.0..2.0f64, x in 0.0..1.0f64) {
        let s = birkhoff_rotation(&LiftedMap::standard(0.0), LiftPoint::new(x, y), 500).unwrap();
        prop_assert!((s.rotation_estimate - y).abs() < 1e-12);
    }

    #[test]
    fn content_id_ignores_nothing(a in any::<i64>(), b in any::<i64>()) {
        prop_assert_eq!(content_id(&(a, b)), content_id(&(a, b)));
        if a != b {
            prop_assert_ne!(content_id(&(a, b)), content_id(&(b, a)));
        }
    }
}

/// Newton from a perturbed seed lands back on the known saddle and its
/// residual is what `periodicity_residual` recomputes.
#[test]
fn newton_residual_is_replayable() {
    let f = LiftedMap::standard(1.3);
    for dx in [-0.05, 0.0, 0.04] {
        let o = newton_pq(&f, LiftPoint::new(0.5 + dx, 0.02), 0, 1).unwrap();
        assert!(o.points[0].sup_dist(LiftPoint::new(0.5, 0.0)) < 1e-10);
        let r = periodicity_residual(&f, o.points[0], 0, 1).unwrap();
        assert!((r - o.newton_residual).abs() < 1e-15);
    }
}
