use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::LiftPoint;

/// Row-major 2x2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn apply(&self, v: LiftPoint) -> LiftPoint {
        LiftPoint::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y,
            self.0[1][0] * v.x + self.0[1][1] * v.y,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Solves `self * v = rhs`; `None` when the determinant is negligible.
    pub fn solve(&self, rhs: LiftPoint, det_floor: f64) -> Option<LiftPoint> {
        let det = self.det();
        let scale = self.max_abs().max(1.0);
        if det.abs() <= det_floor * scale * scale || !det.is_finite() {
            return None;
        }
        Some(LiftPoint::new(
            (self.0[1][1] * rhs.x - self.0[0][1] * rhs.y) / det,
            (self.0[0][0] * rhs.y - self.0[1][0] * rhs.x) / det,
        ))
    }

    /// Eigenvalues ordered by decreasing modulus (real pairs) or with
    /// positive imaginary part first (complex pairs).
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let t = self.trace();
        let d = self.det();
        let disc = t * t - 4.0 * d;
        if disc >= 0.0 {
            let s = disc.sqrt();
            // avoid cancellation in the smaller root
            let big = if t >= 0.0 {
                (t + s) / 2.0
            } else {
                (t - s) / 2.0
            };
            let small = if big != 0.0 { d / big } else { 0.0 };
            [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
        } else {
            let im = (-disc).sqrt() / 2.0;
            [Complex64::new(t / 2.0, im), Complex64::new(t / 2.0, -im)]
        }
    }

    /// Unit eigenvector for a real eigenvalue, oriented with non-negative
    /// x component (positive y when x vanishes).
    pub fn eigenvector(&self, lambda: f64) -> LiftPoint {
        let [[a, b], [c, d]] = self.0;
        // rows of (M - lambda I); take the better conditioned one
        let r1 = LiftPoint::new(-b, a - lambda);
        let r2 = LiftPoint::new(d - lambda, -c);
        let v = if r1.x.hypot(r1.y) >= r2.x.hypot(r2.y) {
            r1
        } else {
            r2
        };
        let n = v.x.hypot(v.y);
        let v = if n > 0.0 {
            v * (1.0 / n)
        } else {
            LiftPoint::new(1.0, 0.0)
        };
        if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
            v * -1.0
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_spectrum() {
        let m = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let [l1, l2] = m.eigenvalues();
        let s5 = 5f64.sqrt();
        assert!((l1.re - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((l2.re - (3.0 - s5) / 2.0).abs() < 1e-14);
        let v = m.eigenvector(l1.re);
        let mv = m.apply(v);
        assert!((mv.x - l1.re * v.x).abs() < 1e-13 && (mv.y - l1.re * v.y).abs() < 1e-13);
    }

    #[test]
    fn rotation_has_complex_pair() {
        let m = Mat2::new(0.0, -1.0, 1.0, 0.0);
        let [l1, l2] = m.eigenvalues();
        assert_eq!(l1.re, 0.0);
        assert_eq!(l1.im, 1.0);
        assert_eq!(l2.im, -1.0);
    }

    #[test]
    fn solve_detects_singular() {
        let m = Mat2::new(0.0, 2.0, 0.0, 0.0);
        assert!(m.solve(LiftPoint::new(1.0, 0.0), 1e-14).is_none());
        let m = Mat2::new(2.0, 1.0, 1.0, 1.0);
        let v = m.solve(LiftPoint::new(3.0, 2.0), 1e-14).unwrap();
        assert!((v.x - 1.0).abs() < 1e-14 && (v.y - 1.0).abs() < 1e-14);
    }
}
