//! Spatial indices in the annulus metric (x measured mod 1).

use std::collections::HashMap;

use crate::dynamics::{circle_diff, LiftPoint};

/// Proper crossing of segments `a0a1` and `b0b1`; returns the fractions
/// along each segment.
pub fn segment_crossing(
    a0: LiftPoint,
    a1: LiftPoint,
    b0: LiftPoint,
    b1: LiftPoint,
) -> Option<(f64, f64)> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.x * s.y - r.y * s.x;
    if denom == 0.0 {
        return None;
    }
    let d = b0 - a0;
    let u = (d.x * s.y - d.y * s.x) / denom;
    let w = (d.x * r.y - d.y * r.x) / denom;
    if u > 0.0 && u < 1.0 && w > 0.0 && w < 1.0 {
        Some((u, w))
    } else {
        None
    }
}

/// Uniform-grid index of polyline segments, each stored with the deck
/// shift that brings its leftmost end into `[0, 1)`. Segments straddling
/// `x = 1` are stored a second time one period to the left.
pub struct SegmentIndex {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<(u32, i32)>>,
}

impl SegmentIndex {
    pub fn new(points: &[LiftPoint], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<(u32, i32)>> = HashMap::new();
        for (i, w) in points.windows(2).enumerate() {
            let shift = -(w[0].x.min(w[1].x).floor()) as i32;
            for s in [shift, shift - 1] {
                let a = w[0].translate(s as i64);
                let b = w[1].translate(s as i64);
                if a.x.max(b.x) < 0.0 {
                    continue;
                }
                for key in cover(a, b, cell) {
                    cells.entry(key).or_default().push((i as u32, s));
                }
            }
        }
        Self { cell, cells }
    }

    /// Candidate segments near segment `ab` (already reduced by the
    /// caller's shift): `(segment index, its shift)`.
    pub fn candidates(&self, a: LiftPoint, b: LiftPoint, out: &mut Vec<(u32, i32)>) {
        out.clear();
        for key in cover(a, b, self.cell) {
            if let Some(v) = self.cells.get(&key) {
                out.extend_from_slice(v);
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

fn cover(a: LiftPoint, b: LiftPoint, cell: f64) -> impl Iterator<Item = (i64, i64)> {
    let ix0 = (a.x.min(b.x) / cell).floor() as i64;
    let ix1 = (a.x.max(b.x) / cell).floor() as i64;
    let iy0 = (a.y.min(b.y) / cell).floor() as i64;
    let iy1 = (a.y.max(b.y) / cell).floor() as i64;
    (ix0..=ix1).flat_map(move |i| (iy0..=iy1).map(move |j| (i, j)))
}

/// Nearest-neighbour index over annulus points (x reduced mod 1).
pub struct PointIndex {
    cell: f64,
    ncols: i64,
    cells: HashMap<(i64, i64), Vec<LiftPoint>>,
    len: usize,
}

impl PointIndex {
    pub fn new(points: &[LiftPoint], cell: f64) -> Self {
        let ncols = (1.0 / cell).ceil().max(1.0) as i64;
        let cell = 1.0 / ncols as f64;
        let mut cells: HashMap<(i64, i64), Vec<LiftPoint>> = HashMap::new();
        for p in points {
            let r = p.reduce();
            cells.entry(key(r, cell, ncols)).or_default().push(r);
        }
        Self {
            cell,
            ncols,
            cells,
            len: points.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Annulus distance to the nearest indexed point; `None` when empty.
    pub fn nearest(&self, z: LiftPoint) -> Option<f64> {
        if self.len == 0 {
            return None;
        }
        let r = z.reduce();
        let (cx, cy) = key(r, self.cell, self.ncols);
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for (dx, dy) in ring_offsets(ring) {
                let kx = (cx + dx).rem_euclid(self.ncols);
                if let Some(v) = self.cells.get(&(kx, cy + dy)) {
                    for p in v {
                        let d = circle_diff(p.x, r.x).hypot(p.y - r.y);
                        if d < best {
                            best = d;
                        }
                    }
                }
            }
            // everything outside the searched square is at least this far
            if best <= ring as f64 * self.cell {
                return Some(best);
            }
            ring += 1;
            if ring > 1 << 22 {
                return Some(best);
            }
        }
    }

    /// Whether some indexed point lies within `radius` of `z`.
    pub fn within(&self, z: LiftPoint, radius: f64) -> bool {
        let r = z.reduce();
        let (cx, cy) = key(r, self.cell, self.ncols);
        let reach = (radius / self.cell).ceil() as i64;
        // rings outward, so near hits end the search early
        for ring in 0..=reach {
            for (dx, dy) in ring_offsets(ring) {
                let kx = (cx + dx).rem_euclid(self.ncols);
                if let Some(v) = self.cells.get(&(kx, cy + dy)) {
                    if v.iter()
                        .any(|p| circle_diff(p.x, r.x).hypot(p.y - r.y) <= radius)
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn key(r: LiftPoint, cell: f64, ncols: i64) -> (i64, i64) {
    (
        ((r.x / cell).floor() as i64).clamp(0, ncols - 1),
        (r.y / cell).floor() as i64,
    )
}

fn ring_offsets(ring: i64) -> Vec<(i64, i64)> {
    if ring == 0 {
        return vec![(0, 0)];
    }
    let mut v = Vec::with_capacity(8 * ring as usize);
    for d in -ring..=ring {
        v.push((d, -ring));
        v.push((d, ring));
    }
    for d in -ring + 1..ring {
        v.push((-ring, d));
        v.push((ring, d));
    }
    v
}
