use serde::{Deserialize, Serialize};

/// A point of the universal cover of the annulus. `x` is the unbounded lift
/// coordinate, `y` the height.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LiftPoint {
    pub x: f64,
    pub y: f64,
}

impl LiftPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Deck translation `T^k (x, y) = (x + k, y)`.
    pub fn translate(self, k: i64) -> Self {
        Self::new(self.x + k as f64, self.y)
    }

    /// Projection onto the annulus, with `x` reduced to `[0, 1)`.
    pub fn reduce(self) -> Self {
        let mut x = self.x.rem_euclid(1.0);
        // rem_euclid can round up to exactly 1.0 for tiny negative inputs
        if x >= 1.0 {
            x = 0.0;
        }
        Self::new(x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sup_dist(self, other: Self) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn dist(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Euclidean distance in the annulus, `x` measured mod 1.
    pub fn annulus_dist(self, other: Self) -> f64 {
        circle_diff(self.x, other.x).hypot(self.y - other.y)
    }

    /// Sup-norm distance in the annulus.
    pub fn annulus_sup_dist(self, other: Self) -> f64 {
        circle_diff(self.x, other.x)
            .abs()
            .max((self.y - other.y).abs())
    }
}

impl std::ops::Add for LiftPoint {
    type Output = LiftPoint;
    fn add(self, o: LiftPoint) -> LiftPoint {
        LiftPoint::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for LiftPoint {
    type Output = LiftPoint;
    fn sub(self, o: LiftPoint) -> LiftPoint {
        LiftPoint::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for LiftPoint {
    type Output = LiftPoint;
    fn mul(self, s: f64) -> LiftPoint {
        LiftPoint::new(self.x * s, self.y * s)
    }
}

/// Signed difference `a - b` on the circle, in `[-0.5, 0.5)`.
pub fn circle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}
