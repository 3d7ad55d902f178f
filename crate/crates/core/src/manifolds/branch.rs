use serde::{Deserialize, Serialize};

use crate::dynamics::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};
use crate::periodic::PeriodicOrbit;

pub const DEFAULT_EPS: f64 = 1e-7;
/// Parameter stored for `polyline[0]`, the saddle itself.
pub const SADDLE_PARAM: f64 = -1.0;

const SEED_SAMPLES: usize = 16;
// smallest parameter interval (relative to t) still split during refinement
const MIN_DT: f64 = 1e-12;
const MAX_TURN_PASSES: usize = 40;
// corners are not resolved below this fraction of max_gap
const MIN_TURN_SEG: f64 = 1e-6;
// heights beyond this mean the branch escaped to an end of the cylinder
const ESCAPE_HEIGHT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    fn factor(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }
}

/// The saddle a branch emanates from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchOwner {
    pub p: i64,
    pub q: usize,
    pub point_index: usize,
    pub saddle: LiftPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    pub max_gap: f64,
    pub max_turn: f64,
    pub point_cap: usize,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            max_gap: 1e-3,
            max_turn: 0.2,
            point_cap: 2_000_000,
        }
    }
}

/// Fundamental segment of a branch. Points are parameterised by `t >= 0`:
/// `P(t) = g^floor(t)(z + sign * eps * mult^frac(t) * v)`, where `g` is the
/// growth map (`T^-p f^q` for unstable branches, its inverse for stable
/// ones; squared for reflecting saddles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSeed {
    pub owner: BranchOwner,
    pub kind: BranchKind,
    pub sign: BranchSign,
    pub eps: f64,
    /// Unit eigenvector of the growth direction, oriented with `x >= 0`.
    pub direction: LiftPoint,
    /// Expansion factor of one growth step along `direction`.
    pub multiplier: f64,
    /// Map iterates per growth step (`q`, or `2q` for reflecting saddles).
    pub steps: usize,
    /// Deck shift per growth step.
    pub shift: i64,
    pub params: Vec<f64>,
    pub points: Vec<LiftPoint>,
}

impl BranchSeed {
    /// One application of the growth map.
    pub fn grow_step(&self, map: &LiftedMap, z: LiftPoint) -> LiftPoint {
        let mut w = z;
        match self.kind {
            BranchKind::Unstable => {
                for _ in 0..self.steps {
                    w = map.step(w);
                }
                w.translate(-self.shift)
            }
            BranchKind::Stable => {
                w = w.translate(self.shift);
                for _ in 0..self.steps {
                    w = map.step_inverse(w);
                }
                w
            }
        }
    }

    /// Point on the branch at parameter `t >= 0`.
    pub fn eval(&self, map: &LiftedMap, t: f64) -> LiftPoint {
        let j = t.floor();
        let s = t - j;
        let mut w = self.owner.saddle
            + self.direction * (self.sign.factor() * self.eps * self.multiplier.powf(s));
        for _ in 0..j as usize {
            w = self.grow_step(map, w);
        }
        w
    }

    /// Length of the fundamental segment.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// One branch as an ordered polyline from the saddle outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub seed: BranchSeed,
    pub polyline: Vec<LiftPoint>,
    /// Growth parameter of each polyline point (`SADDLE_PARAM` for the saddle).
    pub params: Vec<f64>,
    pub arclength: f64,
    pub max_gap: f64,
    pub max_turn: f64,
    pub stop: GrowthStop,
}

/// Why growth ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthStop {
    Reached,
    PointCap,
    /// A gap could not be closed within the parameter resolution: the
    /// curve's fine structure is below double precision (typically after
    /// passing extremely close to another saddle). The polyline ends at the
    /// last resolved point.
    Unresolved,
}

impl Branch {
    /// Whether growth stopped short of the requested arclength.
    pub fn truncated(&self) -> bool {
        self.stop != GrowthStop::Reached
    }

    pub fn kind(&self) -> BranchKind {
        self.seed.kind
    }

    pub fn sign(&self) -> BranchSign {
        self.seed.sign
    }

    pub fn owner(&self) -> &BranchOwner {
        &self.seed.owner
    }

    /// Largest gap between consecutive points beyond the saddle.
    pub fn observed_max_gap(&self) -> f64 {
        self.polyline[1..]
            .windows(2)
            .map(|w| w[0].dist(w[1]))
            .fold(0.0, f64::max)
    }

    /// Largest turning angle between consecutive segments beyond the saddle.
    pub fn observed_max_turn(&self) -> f64 {
        self.polyline[1..]
            .windows(3)
            .map(|w| turn_angle(w[0], w[1], w[2]))
            .fold(0.0, f64::max)
    }

    /// Point at parameter `t` (recomputed from the seed).
    pub fn eval(&self, map: &LiftedMap, t: f64) -> LiftPoint {
        if t < 0.0 {
            self.seed.owner.saddle
        } else {
            self.seed.eval(map, t)
        }
    }
}

pub(crate) fn turn_angle(a: LiftPoint, b: LiftPoint, c: LiftPoint) -> f64 {
    let u = b - a;
    let v = c - b;
    let cross = u.x * v.y - u.y * v.x;
    let dot = u.x * v.x + u.y * v.y;
    if u.x.hypot(u.y) < 1e-15 || v.x.hypot(v.y) < 1e-15 {
        return 0.0;
    }
    cross.abs().atan2(dot)
}

/// Fundamental segment along the eigenvector of the chosen branch of
/// `orbit.points[point_index]`.
pub fn branch_seed(
    map: &LiftedMap,
    orbit: &PeriodicOrbit,
    point_index: usize,
    kind: BranchKind,
    sign: BranchSign,
    eps: f64,
) -> Result<BranchSeed> {
    if !orbit.is_hyperbolic() {
        return Err(Error::NotHyperbolic);
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidEps(eps));
    }
    let saddle = *orbit
        .points
        .get(point_index)
        .ok_or_else(|| Error::InvalidArgument(format!("orbit has no point {point_index}")))?;
    let (_, m) = map.power_with_jacobian(saddle, orbit.q)?;
    let [big, small] = m.eigenvalues();
    let (lambda, steps, shift) = if big.re < 0.0 {
        (big.re * big.re, 2 * orbit.q, 2 * orbit.p)
    } else {
        (big.re, orbit.q, orbit.p)
    };
    if !(lambda > 1.0) {
        return Err(Error::NotHyperbolic);
    }
    let direction = match kind {
        BranchKind::Unstable => m.eigenvector(big.re),
        BranchKind::Stable => m.eigenvector(small.re),
    };
    let mut seed = BranchSeed {
        owner: BranchOwner {
            p: orbit.p,
            q: orbit.q,
            point_index,
            saddle,
        },
        kind,
        sign,
        eps,
        direction,
        multiplier: lambda,
        steps,
        shift,
        params: Vec::new(),
        points: Vec::new(),
    };
    for i in 0..=SEED_SAMPLES {
        let t = i as f64 / SEED_SAMPLES as f64;
        let z = seed.eval(map, t);
        if !z.is_finite() {
            return Err(Error::NonFinite {
                step: i,
                last: saddle,
            });
        }
        seed.params.push(t);
        seed.points.push(z);
    }
    Ok(seed)
}

pub fn grow_branch(
    map: &LiftedMap,
    seed: &BranchSeed,
    target_arclength: f64,
    max_gap: f64,
    max_turn: f64,
) -> Result<Branch> {
    let opts = GrowthOptions {
        max_gap,
        max_turn,
        ..GrowthOptions::default()
    };
    grow_branch_with(map, seed, target_arclength, &opts)
}

/// Iterates the fundamental segment under the growth map, inserting points
/// (computed from their parameter, never interpolated) wherever a gap
/// exceeds `max_gap` or a turn exceeds `max_turn`. Fails with
/// `PointCapExceeded` at the cap; [`grow_branch_partial`] returns the
/// truncated branch instead.
pub fn grow_branch_with(
    map: &LiftedMap,
    seed: &BranchSeed,
    target_arclength: f64,
    opts: &GrowthOptions,
) -> Result<Branch> {
    let branch = grow_branch_partial(map, seed, target_arclength, opts)?;
    if branch.stop == GrowthStop::PointCap {
        return Err(Error::PointCapExceeded {
            cap: opts.point_cap,
        });
    }
    Ok(branch)
}

/// Like [`grow_branch_with`], but returns the partial branch when the point
/// cap is hit. Both report an unresolvable branch through
/// [`GrowthStop::Unresolved`].
pub fn grow_branch_partial(
    map: &LiftedMap,
    seed: &BranchSeed,
    target_arclength: f64,
    opts: &GrowthOptions,
) -> Result<Branch> {
    if !(opts.max_gap > 0.0) || !(opts.max_turn > 0.0) {
        return Err(Error::InvalidArgument(
            "max_gap and max_turn must be positive".into(),
        ));
    }
    let saddle = seed.owner.saddle;
    let mut polyline = vec![saddle];
    let mut params = vec![SADDLE_PARAM];
    let mut arclength = 0.0;

    let domain: Vec<(f64, LiftPoint)> = seed
        .params
        .iter()
        .copied()
        .zip(seed.points.iter().copied())
        .collect();
    let (mut domain, mut unresolved) = refine(map, seed, domain, None, opts);
    let mut stop = GrowthStop::Reached;
    let mut first = true;

    loop {
        // append the domain (its first point duplicates the previous last one)
        let skip = if first { 0 } else { 1 };
        first = false;
        for &(t, z) in &domain[skip..] {
            let prev = *polyline.last().expect("polyline starts with the saddle");
            arclength += prev.dist(z);
            polyline.push(z);
            params.push(t);
            // the seed itself is never cut
            if arclength >= target_arclength && t > 1.0 {
                break;
            }
        }
        if arclength >= target_arclength {
            break;
        }
        if unresolved {
            stop = GrowthStop::Unresolved;
            break;
        }
        if polyline.len() > opts.point_cap {
            stop = GrowthStop::PointCap;
            break;
        }

        let mut next = Vec::with_capacity(domain.len());
        for &(t, z) in &domain {
            let w = seed.grow_step(map, z);
            if !w.is_finite() || w.y.abs() > ESCAPE_HEIGHT {
                return Err(Error::NonFinite {
                    step: polyline.len(),
                    last: z,
                });
            }
            next.push((t + 1.0, w));
        }
        let before = polyline.get(polyline.len().saturating_sub(2)).copied();
        (domain, unresolved) = refine(map, seed, decimate(next, opts), before, opts);
        if domain.len() > opts.point_cap {
            domain.truncate(opts.point_cap);
        }
    }

    Ok(Branch {
        seed: seed.clone(),
        polyline,
        params,
        arclength,
        max_gap: opts.max_gap,
        max_turn: opts.max_turn,
        stop,
    })
}

/// Drops points that contraction has made redundant: the neighbours stay
/// within half a gap and the corner is nearly straight. Keeps the point
/// count proportional to arclength after passages near other saddles.
fn decimate(domain: Vec<(f64, LiftPoint)>, opts: &GrowthOptions) -> Vec<(f64, LiftPoint)> {
    if domain.len() < 3 {
        return domain;
    }
    let mut out = Vec::with_capacity(domain.len());
    out.push(domain[0]);
    for i in 1..domain.len() - 1 {
        let kept = out[out.len() - 1].1;
        let (z, next) = (domain[i].1, domain[i + 1].1);
        let redundant = kept.dist(next) <= 0.5 * opts.max_gap
            && (kept.dist(z) < MIN_TURN_SEG * opts.max_gap
                || turn_angle(kept, z, next) <= 0.25 * opts.max_turn);
        if !redundant {
            out.push(domain[i]);
        }
    }
    out.push(domain[domain.len() - 1]);
    out
}

/// Enforces the gap and turn contract on one fundamental domain. `before`
/// is the polyline point preceding the domain, used for the turn at its
/// first point.
fn refine(
    map: &LiftedMap,
    seed: &BranchSeed,
    domain: Vec<(f64, LiftPoint)>,
    before: Option<LiftPoint>,
    opts: &GrowthOptions,
) -> (Vec<(f64, LiftPoint)>, bool) {
    let (mut pts, mut cut) = refine_gaps(map, seed, domain, opts.max_gap);
    for _ in 0..MAX_TURN_PASSES {
        if cut {
            break;
        }
        let mut split = vec![false; pts.len()];
        let mut any = false;
        for i in 0..pts.len() {
            let prev = if i == 0 { before } else { Some(pts[i - 1].1) };
            let (Some(a), Some(c)) = (prev, pts.get(i + 1).map(|p| p.1)) else {
                continue;
            };
            let short = a.dist(pts[i].1).min(pts[i].1.dist(c)) < MIN_TURN_SEG * opts.max_gap;
            if !short && turn_angle(a, pts[i].1, c) > opts.max_turn {
                // split the segments on both sides of the corner
                if i > 0 && splittable(pts[i - 1].0, pts[i].0) {
                    split[i - 1] = true;
                    any = true;
                }
                if splittable(pts[i].0, pts[i + 1].0) {
                    split[i] = true;
                    any = true;
                }
            }
        }
        if !any {
            break;
        }
        let mut out = Vec::with_capacity(pts.len() * 2);
        for i in 0..pts.len() {
            out.push(pts[i]);
            if split[i] {
                let t = 0.5 * (pts[i].0 + pts[i + 1].0);
                out.push((t, seed.eval(map, t)));
            }
        }
        (pts, cut) = refine_gaps(map, seed, out, opts.max_gap);
    }
    (pts, cut)
}

fn splittable(a: f64, b: f64) -> bool {
    b - a > MIN_DT * b.abs().max(1.0)
}

/// Bisects every gap above `max_gap`, depth first along the curve. A gap
/// that is still open at the parameter resolution ends the domain there;
/// the flag reports the cut.
fn refine_gaps(
    map: &LiftedMap,
    seed: &BranchSeed,
    domain: Vec<(f64, LiftPoint)>,
    max_gap: f64,
) -> (Vec<(f64, LiftPoint)>, bool) {
    let mut out: Vec<(f64, LiftPoint)> = Vec::with_capacity(domain.len());
    let mut iter = domain.into_iter();
    let Some(first) = iter.next() else {
        return (out, false);
    };
    out.push(first);
    let mut pending: Vec<(f64, LiftPoint)> = Vec::new();
    for next in iter {
        pending.push(next);
        while let Some(&target) = pending.last() {
            let last = *out.last().expect("non-empty");
            if last.1.dist(target.1) <= max_gap {
                out.push(target);
                pending.pop();
            } else if splittable(last.0, target.0) {
                let t = 0.5 * (last.0 + target.0);
                pending.push((t, seed.eval(map, t)));
            } else {
                return (out, true);
            }
        }
    }
    (out, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::newton_pq;

    fn saddle(k: f64) -> (LiftedMap, PeriodicOrbit) {
        let f = LiftedMap::standard(k);
        let o = newton_pq(&f, LiftPoint::new(0.5, 0.0), 0, 1).unwrap();
        (f, o)
    }

    #[test]
    fn seed_follows_unstable_eigenvector() {
        let (f, o) = saddle(1.0);
        let s = branch_seed(&f, &o, 0, BranchKind::Unstable, BranchSign::Plus, 1e-7).unwrap();
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((s.multiplier - lambda).abs() < 1e-9);
        assert!(s.points.len() >= 8);
        assert!(((s.length() - (lambda - 1.0) * 1e-7) / 1e-7).abs() < 1e-6);
        // eigenvector of [[2,1],[1,1]] for lambda is (1, lambda - 2)
        let v = s.direction;
        assert!((v.y / v.x - (lambda - 2.0)).abs() < 1e-9);
        // last seed point is the exact image of the first
        let img = s.grow_step(&f, s.points[0]);
        assert!(img.dist(*s.points.last().unwrap()) < 1e-20);
    }

    #[test]
    fn seed_errors() {
        let f = LiftedMap::standard(1.0);
        let e = newton_pq(&f, LiftPoint::new(0.05, 0.05), 0, 1).unwrap();
        assert!(matches!(
            branch_seed(&f, &e, 0, BranchKind::Unstable, BranchSign::Plus, 1e-7),
            Err(Error::NotHyperbolic)
        ));
        let (f, o) = saddle(1.0);
        assert!(matches!(
            branch_seed(&f, &o, 0, BranchKind::Unstable, BranchSign::Plus, 0.0),
            Err(Error::InvalidEps(_))
        ));
    }

    #[test]
    fn zero_growth_returns_the_seed() {
        let (f, o) = saddle(1.0);
        let s = branch_seed(&f, &o, 0, BranchKind::Unstable, BranchSign::Plus, 1e-7).unwrap();
        let b = grow_branch(&f, &s, s.length(), 1e-3, 0.2).unwrap();
        assert_eq!(b.polyline[0], o.points[0]);
        assert_eq!(&b.polyline[1..], &s.points[..]);
    }

    #[test]
    fn refinement_contract_holds() {
        let (f, o) = saddle(1.5);
        for kind in [BranchKind::Unstable, BranchKind::Stable] {
            let s = branch_seed(&f, &o, 0, kind, BranchSign::Plus, 1e-7).unwrap();
            let b = grow_branch(&f, &s, 20.0, 1e-3, 0.2).unwrap();
            assert!(b.arclength >= 20.0);
            assert!(
                b.observed_max_gap() <= 1e-3 + 1e-15,
                "{}",
                b.observed_max_gap()
            );
            assert!(
                b.observed_max_turn() <= 0.2 + 1e-9,
                "{}",
                b.observed_max_turn()
            );
            assert!(b.polyline[0].dist(o.points[0]) < 1e-8);
        }
    }

    #[test]
    fn stable_points_converge_to_the_saddle() {
        let (f, o) = saddle(1.0);
        let s = branch_seed(&f, &o, 0, BranchKind::Stable, BranchSign::Minus, 1e-7).unwrap();
        let b = grow_branch(&f, &s, 0.5, 1e-3, 0.2).unwrap();
        let far = *b.polyline.last().unwrap();
        let fwd = f.power(far, 40).unwrap();
        assert!(fwd.dist(o.points[0]) < 1e-6, "{fwd:?}");
    }

    #[test]
    fn point_cap_flags_truncation() {
        let (f, o) = saddle(1.5);
        let s = branch_seed(&f, &o, 0, BranchKind::Unstable, BranchSign::Plus, 1e-7).unwrap();
        let opts = GrowthOptions {
            point_cap: 200,
            ..GrowthOptions::default()
        };
        assert!(matches!(
            grow_branch_with(&f, &s, 20.0, &opts),
            Err(Error::PointCapExceeded { cap: 200 })
        ));
        let partial = grow_branch_partial(&f, &s, 20.0, &opts).unwrap();
        assert_eq!(partial.stop, GrowthStop::PointCap);
        assert!(partial.arclength < 20.0);
    }
}
