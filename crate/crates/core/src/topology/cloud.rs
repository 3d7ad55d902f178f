use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};
use crate::manifolds::{
    branch_intersections, branch_seed, grow_branch_partial, Branch, BranchKind, BranchSign,
    GrowthOptions, HeteroclinicPoint, DEFAULT_EPS,
};
use crate::periodic::PeriodicOrbit;

/// Quantum of the deduplication grid for cloud points.
pub const CLOUD_DEDUP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudOwner {
    pub p: i64,
    pub q: usize,
    pub points: Vec<LiftPoint>,
}

/// Finite sample of the closure of the branches of one saddle: the vertices
/// of its four branch polylines to arclength `arclength`, reduced mod 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCloud {
    pub owner: CloudOwner,
    pub arclength: f64,
    pub points: Vec<LiftPoint>,
}

impl ManifoldCloud {
    pub fn y_range(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| {
                (lo.min(z.y), hi.max(z.y))
            })
    }
}

pub fn sample_k(map: &LiftedMap, orbit: &PeriodicOrbit, arclength: f64) -> Result<ManifoldCloud> {
    sample_k_with(map, orbit, arclength, &GrowthOptions::default())
}

/// Samples the four branches of `orbit.points[0]`. At zero arclength the
/// cloud is the orbit itself.
pub fn sample_k_with(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    arclength: f64,
    opts: &GrowthOptions,
) -> Result<ManifoldCloud> {
    if !orbit.is_hyperbolic() {
        return Err(Error::NotHyperbolic);
    }
    let owner = CloudOwner {
        p: orbit.p,
        q: orbit.q,
        points: orbit.points.clone(),
    };
    if arclength <= 0.0 {
        let points = orbit.points.iter().map(|z| z.reduce()).collect();
        return Ok(ManifoldCloud {
            owner,
            arclength: 0.0,
            points,
        });
    }
    let branches = four_branches(map, orbit, 0, arclength, opts)?;
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    for z in branches.iter().flat_map(|b| b.polyline.iter()) {
        let r = z.reduce();
        let key = (
            (r.x / CLOUD_DEDUP).round() as i64,
            (r.y / CLOUD_DEDUP).round() as i64,
        );
        if seen.insert(key) {
            points.push(r);
        }
    }
    Ok(ManifoldCloud {
        owner,
        arclength,
        points,
    })
}

fn four_branches(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    point_index: usize,
    arclength: f64,
    opts: &GrowthOptions,
) -> Result<Vec<Branch>> {
    let jobs = [
        (BranchKind::Unstable, BranchSign::Plus),
        (BranchKind::Unstable, BranchSign::Minus),
        (BranchKind::Stable, BranchSign::Plus),
        (BranchKind::Stable, BranchSign::Minus),
    ];
    jobs.par_iter()
        .map(|&(kind, sign)| grow(map, orbit, point_index, kind, sign, arclength, opts))
        .collect()
}

fn grow(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    point_index: usize,
    kind: BranchKind,
    sign: BranchSign,
    arclength: f64,
    opts: &GrowthOptions,
) -> Result<Branch> {
    let seed = branch_seed(map, orbit, point_index, kind, sign, DEFAULT_EPS)?;
    grow_branch_partial(map, &seed, arclength, opts)
        .map_err(|e| Error::BranchGrowthFailed(e.to_string()))
}

/// Symmetric Hausdorff distance in the annulus metric.
pub fn hausdorff(a: &ManifoldCloud, b: &ManifoldCloud) -> Result<f64> {
    hausdorff_points(&a.points, &b.points)
}

pub fn hausdorff_points(a: &[LiftPoint], b: &[LiftPoint]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// Directed Hausdorff distance. Each target point is indexed at x - 1, x
/// and x + 1 so plain Euclidean k-d queries see the annulus metric.
///
/// Cloud points come in polyline order, so `d(a_j, B) <= d(a_i, B) + |a_i -
/// a_i+1| + ... + |a_j-1 - a_j|`; points whose bound stays under the running
/// maximum are skipped without a query. The result is exact.
fn directed(from: &[LiftPoint], to: &[LiftPoint]) -> f64 {
    let mut entries = Vec::with_capacity(3 * to.len());
    for z in to {
        let r = z.reduce();
        for shift in [-1.0, 0.0, 1.0] {
            entries.push([r.x + shift, r.y]);
        }
    }
    let tree: ImmutableKdTree<f64, u32, 2, 32> = ImmutableKdTree::new_from_slice(&entries);
    // non-negative f64s order like their bit patterns
    let best = AtomicU64::new(0f64.to_bits());
    from.par_chunks(4096).for_each(|chunk| {
        let mut bound = f64::INFINITY;
        let mut prev: Option<LiftPoint> = None;
        for z in chunk {
            let r = z.reduce();
            if let Some(p) = prev {
                bound += p.annulus_dist(r);
            }
            prev = Some(r);
            if bound <= f64::from_bits(best.load(Ordering::Relaxed)) {
                continue;
            }
            bound = tree
                .nearest_one::<SquaredEuclidean>(&[r.x, r.y])
                .distance
                .sqrt();
            best.fetch_max(bound.to_bits(), Ordering::Relaxed);
        }
    });
    f64::from_bits(best.into_inner())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KEquivalence {
    /// Witnesses of `W^u(A) ∩ W^s(B)` and `W^u(B) ∩ W^s(A)`.
    Equivalent {
        a_to_b: HeteroclinicPoint,
        b_to_a: HeteroclinicPoint,
        arclength: f64,
    },
    /// No witness in at least one direction within the cap.
    Undetermined {
        arclength: f64,
        a_to_b: Option<HeteroclinicPoint>,
        b_to_a: Option<HeteroclinicPoint>,
    },
}

impl KEquivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, KEquivalence::Equivalent { .. })
    }
}

pub fn k_equivalent(
    map: &LiftedMap,
    a: &PeriodicOrbit,
    b: &PeriodicOrbit,
    cap: f64,
) -> KEquivalence {
    k_equivalent_with(map, a, b, cap, &GrowthOptions::default())
}

/// Searches both heteroclinic directions, doubling the grown arclength from
/// 1 until both have a witness or `cap` is reached. Growth failures count
/// as no witness.
pub fn k_equivalent_with(
    map: &LiftedMap,
    a: &PeriodicOrbit,
    b: &PeriodicOrbit,
    cap: f64,
    opts: &GrowthOptions,
) -> KEquivalence {
    let mut length = cap.min(1.0);
    let mut ab = None;
    let mut ba = None;
    loop {
        if ab.is_none() {
            ab = witness(map, a, b, length, opts);
        }
        if ba.is_none() {
            ba = witness(map, b, a, length, opts);
        }
        if let (Some(x), Some(y)) = (ab, ba) {
            return KEquivalence::Equivalent {
                a_to_b: x,
                b_to_a: y,
                arclength: length,
            };
        }
        if length >= cap {
            return KEquivalence::Undetermined {
                arclength: length,
                a_to_b: ab,
                b_to_a: ba,
            };
        }
        length = (2.0 * length).min(cap);
    }
}

/// Earliest crossing (by arclength on the unstable side) of an unstable
/// branch of `from.points[0]` with a stable branch of any point of `to`.
fn witness(
    map: &LiftedMap,
    from: &PeriodicOrbit,
    to: &PeriodicOrbit,
    length: f64,
    opts: &GrowthOptions,
) -> Option<HeteroclinicPoint> {
    let mut jobs = vec![];
    for sign in [BranchSign::Plus, BranchSign::Minus] {
        jobs.push((from, 0, BranchKind::Unstable, sign));
    }
    for i in 0..to.points.len() {
        for sign in [BranchSign::Plus, BranchSign::Minus] {
            jobs.push((to, i, BranchKind::Stable, sign));
        }
    }
    let grown: Vec<Option<Branch>> = jobs
        .par_iter()
        .map(|&(o, i, kind, sign)| grow(map, o, i, kind, sign, length, opts).ok())
        .collect();
    let unstable: Vec<&Branch> = grown[..2].iter().flatten().collect();
    let stable: Vec<&Branch> = grown[2..].iter().flatten().collect();
    let pairs: Vec<(&Branch, &Branch)> = unstable
        .iter()
        .flat_map(|u| stable.iter().map(move |s| (*u, *s)))
        .collect();
    pairs
        .par_iter()
        .flat_map_iter(|(u, s)| branch_intersections(map, u, s))
        .filter(|h| {
            from.points
                .iter()
                .chain(to.points.iter())
                .all(|z| h.location.annulus_dist(*z) > 1e-6)
        })
        .min_by(|x, y| {
            x.arclength_from
                .total_cmp(&y.arclength_from)
                .then(x.location.x.total_cmp(&y.location.x))
                .then(x.location.y.total_cmp(&y.location.y))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointIndex;
    use crate::manifolds::primary_homoclinic;
    use crate::periodic::newton_pq;

    fn saddle(k: f64) -> (LiftedMap, PeriodicOrbit) {
        let f = LiftedMap::standard(k);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        (f, o)
    }

    #[test]
    fn zero_length_cloud_is_the_orbit() {
        let (f, o) = saddle(1.5);
        let c = sample_k(&f, &o, 0.0).unwrap();
        assert_eq!(c.points, vec![o.points[0].reduce()]);
    }

    #[test]
    fn cloud_contains_primary_homoclinic_point() {
        let (f, o) = saddle(1.5);
        let h = primary_homoclinic(&f, &o).unwrap();
        let c = sample_k(&f, &o, 50.0).unwrap();
        let idx = PointIndex::new(&c.points, 0.01);
        assert!(idx.nearest(h.location).unwrap() < 1e-3);
    }

    #[test]
    fn clouds_grow_monotonically() {
        let (f, o) = saddle(1.5);
        let small = sample_k(&f, &o, 10.0).unwrap();
        let big = sample_k(&f, &o, 20.0).unwrap();
        let idx = PointIndex::new(&big.points, 0.01);
        assert!(small
            .points
            .iter()
            .all(|z| idx.nearest(*z).unwrap() <= 1e-6));
    }

    #[test]
    fn hausdorff_examples() {
        let a = vec![LiftPoint::new(0.1, 0.0), LiftPoint::new(0.5, 0.2)];
        assert_eq!(hausdorff_points(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.push(LiftPoint::new(0.95, 0.0));
        // nearest is (0.1, 0) across the seam
        assert!((hausdorff_points(&a, &b).unwrap() - 0.15).abs() < 1e-12);
        assert!(matches!(hausdorff_points(&a, &[]), Err(Error::EmptyCloud)));
    }

    #[test]
    fn hausdorff_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let offset = rng.gen_range(0.0..0.6);
            let mut cloud = |n: usize, y0: f64| -> Vec<LiftPoint> {
                (0..n)
                    .map(|_| LiftPoint::new(rng.gen_range(0.0..1.0), y0 + rng.gen_range(0.0..0.3)))
                    .collect()
            };
            let a = cloud(300, 0.0);
            let b = cloud(200, offset);
            let dir = |from: &[LiftPoint], to: &[LiftPoint]| {
                from.iter()
                    .map(|p| {
                        to.iter()
                            .map(|q| p.annulus_dist(*q))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            };
            let brute = dir(&a, &b).max(dir(&b, &a));
            assert!((hausdorff_points(&a, &b).unwrap() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn reflexive_equivalence() {
        let (f, o) = saddle(1.5);
        let r = k_equivalent(&f, &o, &o, 8.0);
        let KEquivalence::Equivalent { a_to_b, b_to_a, .. } = r else {
            panic!("{r:?}")
        };
        assert_eq!(a_to_b.location, b_to_a.location);
    }
}
