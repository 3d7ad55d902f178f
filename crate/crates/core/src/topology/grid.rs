use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::LiftPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Wall,
    /// Reached by the fill from the top row.
    Top,
    /// Reached by the fill from the bottom row.
    Bottom,
}

impl Cell {
    fn symbol(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Wall => '#',
            Cell::Top => 't',
            Cell::Bottom => 'b',
        }
    }

    fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            '.' => Cell::Free,
            '#' => Cell::Wall,
            't' => Cell::Top,
            'b' => Cell::Bottom,
            _ => return None,
        })
    }
}

/// Occupancy raster of one fundamental annulus band. Column `i` covers
/// `x mod 1 in [i h, (i+1) h)`, row `j` covers `y in [y0 + j h, y0 + (j+1) h)`;
/// rows sit on the global lattice `y0 = j0 h`, so grids built with the same
/// `h` agree cell-for-cell where they overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub y0: f64,
    #[serde(serialize_with = "rows_out", deserialize_with = "rows_in")]
    pub cells: Vec<Cell>,
}

impl OccupancyGrid {
    /// Empty grid with `nx = round(1/h)` columns covering `[y_lo, y_hi]`
    /// plus two cells of padding on either side.
    pub fn covering(h: f64, y_lo: f64, y_hi: f64) -> Self {
        let nx = (1.0 / h).round().max(1.0) as usize;
        let h = 1.0 / nx as f64;
        let j0 = (y_lo / h).floor() as i64 - 2;
        let j1 = (y_hi / h).floor() as i64 + 2;
        let ny = (j1 - j0 + 1) as usize;
        Self {
            nx,
            ny,
            h,
            y0: j0 as f64 * h,
            cells: vec![Cell::Free; nx * ny],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[j * self.nx + i]
    }

    fn set(&mut self, i: usize, j: usize, c: Cell) {
        self.cells[j * self.nx + i] = c;
    }

    /// Cell containing `z` (x taken mod 1), or `None` outside the band.
    pub fn cell_of(&self, z: LiftPoint) -> Option<(usize, usize)> {
        let i = ((z.x / self.h).floor() as i64).rem_euclid(self.nx as i64) as usize;
        let j = ((z.y - self.y0) / self.h).floor();
        (j >= 0.0 && (j as usize) < self.ny).then_some((i, j as usize))
    }

    /// Marks every cell the segment passes through, sampling at `h/4` so
    /// that consecutive marks are 8-adjacent.
    pub fn mark_segment(&mut self, a: LiftPoint, b: LiftPoint) {
        let n = (a.dist(b) / (0.25 * self.h)).ceil().max(1.0) as usize;
        for s in 0..=n {
            let z = a + (b - a) * (s as f64 / n as f64);
            if let Some((i, j)) = self.cell_of(z) {
                self.set(i, j, Cell::Wall);
            }
        }
    }

    pub fn mark_polyline(&mut self, pts: &[LiftPoint]) {
        if pts.len() == 1 {
            self.mark_segment(pts[0], pts[0]);
        }
        for w in pts.windows(2) {
            self.mark_segment(w[0], w[1]);
        }
    }

    /// 4-connected fill of free cells from row `start` (x periodic).
    /// Returns whether the fill reached row `goal`.
    pub fn fill_from_row(&mut self, start: usize, goal: usize, tag: Cell) -> bool {
        let mut stack: Vec<(usize, usize)> = (0..self.nx)
            .filter(|&i| self.get(i, start) == Cell::Free)
            .map(|i| (i, start))
            .collect();
        for &(i, j) in &stack {
            self.set(i, j, tag);
        }
        let mut reached = false;
        while let Some((i, j)) = stack.pop() {
            reached |= j == goal;
            let left = (i + self.nx - 1) % self.nx;
            let right = (i + 1) % self.nx;
            let mut nbrs = vec![(left, j), (right, j)];
            if j > 0 {
                nbrs.push((i, j - 1));
            }
            if j + 1 < self.ny {
                nbrs.push((i, j + 1));
            }
            for (a, b) in nbrs {
                if self.get(a, b) == Cell::Free {
                    self.set(a, b, tag);
                    stack.push((a, b));
                }
            }
        }
        reached
    }

    /// Traces the upper boundary of the cells tagged `tag`, starting on the
    /// top edge of the highest such cell in column 0 and keeping the tagged
    /// set on the right. Returns the lattice vertices visited (lift
    /// coordinates, x unwrapped) and the net column displacement.
    pub fn trace_upper_boundary(&self, tag: Cell) -> Option<(Vec<LiftPoint>, i64)> {
        let top = (0..self.ny).rev().find(|&j| self.get(0, j) == tag)?;
        let inside = |i: i64, j: i64| -> bool {
            j >= 0 && (j as usize) < self.ny && {
                let ii = i.rem_euclid(self.nx as i64) as usize;
                self.get(ii, j as usize) == tag
            }
        };
        // vertex (i, j) is the lattice corner at (i h, y0 + j h)
        let start = (0i64, top as i64 + 1);
        let (mut vx, mut vy) = start;
        let (mut dx, mut dy) = (1i64, 0i64);
        let mut path = vec![self.vertex(vx, vy)];
        let limit = 4 * (self.nx + 1) * (self.ny + 1);
        for _ in 0..limit {
            vx += dx;
            vy += dy;
            path.push(self.vertex(vx, vy));
            // cells ahead of the vertex; the left normal of (dx, dy) is (-dy, dx)
            let cell = |cx2: i64, cy2: i64| ((cx2 - 1).div_euclid(2), (cy2 - 1).div_euclid(2));
            let (lx, ly) = (-dy, dx);
            let la = cell(2 * vx + dx + lx, 2 * vy + dy + ly);
            let ra = cell(2 * vx + dx - lx, 2 * vy + dy - ly);
            if !inside(ra.0, ra.1) {
                (dx, dy) = (dy, -dx);
            } else if inside(la.0, la.1) {
                (dx, dy) = (-dy, dx);
            }
            if vy == start.1 && (vx - start.0).rem_euclid(self.nx as i64) == 0 && (dx, dy) == (1, 0)
            {
                return Some((simplify(path), vx - start.0));
            }
        }
        None
    }

    fn vertex(&self, i: i64, j: i64) -> LiftPoint {
        LiftPoint::new(i as f64 * self.h, self.y0 + j as f64 * self.h)
    }

    pub fn count(&self, c: Cell) -> usize {
        self.cells.iter().filter(|&&x| x == c).count()
    }
}

/// Drops vertices in the middle of straight runs.
fn simplify(path: Vec<LiftPoint>) -> Vec<LiftPoint> {
    let mut out: Vec<LiftPoint> = Vec::with_capacity(path.len());
    for z in path {
        if out.last().is_some_and(|l| l.dist(z) < 1e-15) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let cross = (b.x - a.x) * (z.y - b.y) - (b.y - a.y) * (z.x - b.x);
            if cross.abs() < 1e-15 {
                out.pop();
            }
        }
        out.push(z);
    }
    out
}

fn rows_out<S: Serializer>(cells: &[Cell], s: S) -> Result<S::Ok, S::Error> {
    let text: String = cells.iter().map(|c| c.symbol()).collect();
    s.serialize_str(&text)
}

fn rows_in<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Cell>, D::Error> {
    let text = String::deserialize(d)?;
    text.chars()
        .map(|c| {
            Cell::from_symbol(c).ok_or_else(|| serde::de::Error::custom(format!("bad cell {c:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_wall_separates() {
        let mut g = OccupancyGrid::covering(1.0 / 64.0, -0.1, 0.1);
        g.mark_polyline(&[LiftPoint::new(-0.2, 0.01), LiftPoint::new(1.3, -0.02)]);
        assert!(!g.fill_from_row(g.ny - 1, 0, Cell::Top));
        g.fill_from_row(0, g.ny - 1, Cell::Bottom);
        let (path, disp) = g.trace_upper_boundary(Cell::Bottom).unwrap();
        assert_eq!(disp, g.nx as i64);
        let a = path[0];
        let b = *path.last().unwrap();
        assert!((b.x - a.x - 1.0).abs() < 1e-12 && (b.y - a.y).abs() < 1e-12);
    }

    #[test]
    fn closed_disk_does_not_separate() {
        let mut g = OccupancyGrid::covering(1.0 / 64.0, -0.2, 0.2);
        let ring: Vec<LiftPoint> = (0..=200)
            .map(|i| {
                let t = i as f64 / 200.0 * std::f64::consts::TAU;
                LiftPoint::new(0.5 + 0.15 * t.cos(), 0.15 * t.sin())
            })
            .collect();
        g.mark_polyline(&ring);
        assert!(g.fill_from_row(g.ny - 1, 0, Cell::Top));
    }

    #[test]
    fn wavy_wall_across_seam() {
        let mut g = OccupancyGrid::covering(1.0 / 128.0, -0.3, 0.3);
        let curve: Vec<LiftPoint> = (0..=1000)
            .map(|i| {
                let x = 0.37 + i as f64 / 1000.0;
                LiftPoint::new(x, 0.2 * (std::f64::consts::TAU * 3.0 * x).sin())
            })
            .collect();
        g.mark_polyline(&curve);
        assert!(!g.fill_from_row(g.ny - 1, 0, Cell::Top));
        g.fill_from_row(0, g.ny - 1, Cell::Bottom);
        let (path, disp) = g.trace_upper_boundary(Cell::Bottom).unwrap();
        assert_eq!(disp, g.nx as i64);
        // every vertex is a corner of some wall cell
        for z in &path {
            let near = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]
                .iter()
                .any(|(a, b)| {
                    g.cell_of(LiftPoint::new(z.x + a * g.h, z.y + b * g.h))
                        .is_some_and(|(i, j)| g.get(i, j) == Cell::Wall)
                });
            assert!(near);
        }
    }

    #[test]
    fn serde_round_trip() {
        let mut g = OccupancyGrid::covering(0.25, 0.0, 0.1);
        g.mark_segment(LiftPoint::new(0.1, 0.05), LiftPoint::new(0.6, 0.05));
        let s = serde_json::to_string(&g).unwrap();
        let back: OccupancyGrid = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }
}
