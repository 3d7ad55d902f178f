use serde::{Deserialize, Serialize};

use super::branch::{
    branch_seed, grow_branch_partial, Branch, BranchKind, BranchOwner, BranchSign, GrowthOptions,
    DEFAULT_EPS,
};
use crate::dynamics::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};
use crate::geometry::{segment_crossing, SegmentIndex};
use crate::periodic::PeriodicOrbit;

/// Crossing angles below this are flagged as near-tangencies.
pub const TRANSVERSAL_ANGLE_FLOOR: f64 = 1e-4;
const REFINE_TOL: f64 = 1e-10;
const MAX_REFINE_STEPS: usize = 200;

/// Identifies a branch without carrying its polyline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchRef {
    pub owner: BranchOwner,
    pub kind: BranchKind,
    pub sign: BranchSign,
}

impl BranchRef {
    pub fn of(b: &Branch) -> Self {
        Self {
            owner: b.seed.owner,
            kind: b.seed.kind,
            sign: b.seed.sign,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicPoint {
    /// Location in the lift frame of `from_branch`.
    pub location: LiftPoint,
    pub from_branch: BranchRef,
    pub to_branch: BranchRef,
    /// Angle between the two curves at the crossing, in `[0, pi/2]`.
    pub crossing_angle: f64,
    pub near_tangency: bool,
    /// Growth parameters of the crossing on each branch.
    pub t_from: f64,
    pub t_to: f64,
    /// Arclength from the saddle along each polyline.
    pub arclength_from: f64,
    pub arclength_to: f64,
    /// Deck shift applied to `to_branch` to meet `from_branch`.
    pub shift: i64,
}

/// All crossings of two branches in the annulus (crossings with any deck
/// translate of `b2` count), refined on the exact curves to `1e-10` and
/// ordered along `b1`.
pub fn branch_intersections(map: &LiftedMap, b1: &Branch, b2: &Branch) -> Vec<HeteroclinicPoint> {
    if b1.polyline.len() < 2 || b2.polyline.len() < 2 {
        return Vec::new();
    }
    let mean_gap = |b: &Branch| b.arclength / (b.polyline.len() - 1) as f64;
    let cell = (2.0 * mean_gap(b1).max(mean_gap(b2))).clamp(1e-4, 0.05);
    let index = SegmentIndex::new(&b2.polyline, cell);
    let arc1 = cumulative(&b1.polyline);
    let arc2 = cumulative(&b2.polyline);

    let mut raw: Vec<(usize, f64, usize, i64)> = Vec::new();
    let mut cands = Vec::new();
    for (i, w) in b1.polyline.windows(2).enumerate() {
        let shift = -(w[0].x.min(w[1].x).floor()) as i64;
        for s in [shift, shift - 1] {
            let a0 = w[0].translate(s);
            let a1 = w[1].translate(s);
            if a0.x.max(a1.x) < 0.0 {
                continue;
            }
            index.candidates(a0, a1, &mut cands);
            for &(j, s2) in &cands {
                let j = j as usize;
                let c0 = b2.polyline[j].translate(s2 as i64);
                let c1 = b2.polyline[j + 1].translate(s2 as i64);
                if let Some((u, _)) = segment_crossing(a0, a1, c0, c1) {
                    // b2 shifted by (s2 - s) meets b1 in b1's own frame
                    raw.push((i, u, j, s2 as i64 - s));
                }
            }
        }
    }
    raw.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    raw.dedup_by(|a, b| a.0 == b.0 && a.2 == b.2 && a.3 == b.3);

    let mut out: Vec<HeteroclinicPoint> = Vec::new();
    for (i, _, j, m) in raw {
        // skip the shared saddle of homoclinic pairs
        if (i == 0 || j == 0) && m == 0 {
            continue;
        }
        let Some(r) = refine_crossing(map, b1, i, b2, j, m) else {
            continue;
        };
        if out
            .iter()
            .any(|h| h.location.dist(r.location) < REFINE_TOL * 10.0 && h.shift == m)
        {
            continue;
        }
        let arclength_from = arc1[i] + b1.polyline[i].dist(r.location);
        let arclength_to = arc2[j] + b2.polyline[j].translate(m).dist(r.location);
        out.push(HeteroclinicPoint {
            location: r.location,
            from_branch: BranchRef::of(b1),
            to_branch: BranchRef::of(b2),
            crossing_angle: r.angle,
            near_tangency: r.angle < TRANSVERSAL_ANGLE_FLOOR,
            t_from: r.t1,
            t_to: r.t2,
            arclength_from,
            arclength_to,
            shift: m,
        });
    }
    out
}

fn cumulative(poly: &[LiftPoint]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut v = Vec::with_capacity(poly.len());
    v.push(0.0);
    for w in poly.windows(2) {
        acc += w[0].dist(w[1]);
        v.push(acc);
    }
    v
}

struct Refined {
    location: LiftPoint,
    angle: f64,
    t1: f64,
    t2: f64,
}

/// Shrinks both crossing segments by splitting at points recomputed on the
/// true curves until both are shorter than `REFINE_TOL`. Returns `None`
/// when the crossing disappears (a chord artefact).
fn refine_crossing(
    map: &LiftedMap,
    b1: &Branch,
    i: usize,
    b2: &Branch,
    j: usize,
    shift: i64,
) -> Option<Refined> {
    let mut s1 = (
        b1.params[i],
        b1.polyline[i],
        b1.params[i + 1],
        b1.polyline[i + 1],
    );
    let mut s2 = (
        b2.params[j],
        b2.polyline[j].translate(shift),
        b2.params[j + 1],
        b2.polyline[j + 1].translate(shift),
    );
    let eval2 = |t: f64| b2.eval(map, t).translate(shift);
    for step in 0..MAX_REFINE_STEPS {
        let (u, w) = segment_crossing(s1.1, s1.3, s2.1, s2.3)?;
        let len1 = s1.1.dist(s1.3);
        let len2 = s2.1.dist(s2.3);
        if len1.max(len2) < REFINE_TOL || (s1.2 - s1.0).max(s2.2 - s2.0) < 1e-15 {
            let d1 = s1.3 - s1.1;
            let d2 = s2.3 - s2.1;
            let cross = (d1.x * d2.y - d1.y * d2.x).abs();
            let dot = (d1.x * d2.x + d1.y * d2.y).abs();
            return Some(Refined {
                location: s1.1 + d1 * u,
                angle: cross.atan2(dot),
                t1: s1.0 + u * (s1.2 - s1.0),
                t2: s2.0 + w * (s2.2 - s2.0),
            });
        }
        // alternate between the longer segment and the other one
        let split_first = if step % 2 == 0 {
            len1 >= len2
        } else {
            len1 < len2
        };
        if split_first {
            s1 = split(s1, u, |t| b1.eval(map, t), s2.1, s2.3)?;
        } else {
            s2 = split(s2, w, eval2, s1.1, s1.3)?;
        }
    }
    None
}

type Seg = (f64, LiftPoint, f64, LiftPoint);

fn split<F: Fn(f64) -> LiftPoint>(
    s: Seg,
    frac: f64,
    eval: F,
    o0: LiftPoint,
    o1: LiftPoint,
) -> Option<Seg> {
    let f = frac.clamp(0.05, 0.95);
    let tm = s.0 + f * (s.2 - s.0);
    let pm = eval(tm);
    if segment_crossing(s.1, pm, o0, o1).is_some() {
        Some((s.0, s.1, tm, pm))
    } else if segment_crossing(pm, s.3, o0, o1).is_some() {
        Some((tm, pm, s.2, s.3))
    } else {
        None
    }
}

/// First crossing along the unstable Plus branch of `orbit.points[0]` with
/// its stable Plus branch, doubling the arclength from 1 up to `cap`.
pub fn primary_homoclinic(map: &LiftedMap, orbit: &PeriodicOrbit) -> Result<HeteroclinicPoint> {
    primary_homoclinic_with(map, orbit, 64.0, &GrowthOptions::default())
}

pub fn primary_homoclinic_with(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    cap: f64,
    opts: &GrowthOptions,
) -> Result<HeteroclinicPoint> {
    let su = branch_seed(
        map,
        orbit,
        0,
        BranchKind::Unstable,
        BranchSign::Plus,
        DEFAULT_EPS,
    )?;
    let ss = branch_seed(
        map,
        orbit,
        0,
        BranchKind::Stable,
        BranchSign::Plus,
        DEFAULT_EPS,
    )?;
    let mut length = cap.min(1.0);
    loop {
        let bu = grow_branch_partial(map, &su, length, opts)?;
        let bs = grow_branch_partial(map, &ss, length, opts)?;
        let hits = branch_intersections(map, &bu, &bs);
        let best = hits
            .into_iter()
            .filter(|h| {
                orbit
                    .points
                    .iter()
                    .all(|z| h.location.annulus_dist(*z) > 1e-6)
            })
            .min_by(|a, b| a.arclength_from.total_cmp(&b.arclength_from));
        if let Some(h) = best {
            return Ok(h);
        }
        if length >= cap || bu.truncated() || bs.truncated() {
            return Err(Error::NotFoundWithinCap { cap });
        }
        length = (2.0 * length).min(cap);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::grow_branch;
    use crate::periodic::newton_pq;

    fn grown(
        f: &LiftedMap,
        o: &PeriodicOrbit,
        kind: BranchKind,
        sign: BranchSign,
        l: f64,
    ) -> Branch {
        let s = branch_seed(f, o, 0, kind, sign, DEFAULT_EPS).unwrap();
        grow_branch(f, &s, l, 1e-3, 0.2).unwrap()
    }

    /// Oracle: all proper chord crossings by exhaustive pairwise testing
    /// over deck shifts in range.
    fn brute_crossings(b1: &Branch, b2: &Branch) -> usize {
        let mut n = 0;
        let xs = |b: &Branch| {
            b.polyline
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.x), hi.max(p.x))
                })
        };
        let (l1, h1) = xs(b1);
        let (l2, h2) = xs(b2);
        for m in ((l1 - h2).floor() as i64 - 1)..=((h1 - l2).ceil() as i64 + 1) {
            for (i, a) in b1.polyline.windows(2).enumerate() {
                for (j, c) in b2.polyline.windows(2).enumerate() {
                    if (i == 0 || j == 0) && m == 0 {
                        continue;
                    }
                    if segment_crossing(a[0], a[1], c[0].translate(m), c[1].translate(m)).is_some()
                    {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn homoclinic_points_at_k15() {
        let f = LiftedMap::standard(1.5);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let u = grown(&f, &o, BranchKind::Unstable, BranchSign::Plus, 10.0);
        let s = grown(&f, &o, BranchKind::Stable, BranchSign::Plus, 10.0);
        let hits = branch_intersections(&f, &u, &s);
        assert!(!hits.is_empty());
        assert!(brute_crossings(&u, &s) >= hits.len());
        for h in &hits {
            // lies on both curves
            let a = f.power(h.location, 0).unwrap();
            assert!(u.eval(&f, h.t_from).dist(a) < 1e-8);
            assert!(s.eval(&f, h.t_to).translate(h.shift).dist(a) < 1e-8);
            assert!(h.crossing_angle > 0.0);
        }
    }

    #[test]
    fn short_seeds_do_not_cross() {
        let f = LiftedMap::standard(1.5);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let u = grown(&f, &o, BranchKind::Unstable, BranchSign::Plus, 1e-6);
        let s = grown(&f, &o, BranchKind::Stable, BranchSign::Plus, 1e-6);
        assert!(branch_intersections(&f, &u, &s).is_empty());
    }

    #[test]
    fn primary_homoclinic_k15() {
        let f = LiftedMap::standard(1.5);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let h = primary_homoclinic(&f, &o).unwrap();
        assert!(h.location.y.abs() < 0.5);
        assert!(!h.near_tangency);
    }

    #[test]
    fn small_cap_at_small_k() {
        let f = LiftedMap::standard(0.1);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        let r = primary_homoclinic_with(&f, &o, 1.0, &GrowthOptions::default());
        assert!(matches!(r, Err(Error::NotFoundWithinCap { .. })), "{r:?}");
    }
}
