use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dynamics::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};

pub const MIN_INDEX_SAMPLES: usize = 512;
const SAMPLES: usize = 1024;
const MAX_SUBDIVISION_DEPTH: u32 = 24;
// displacement magnitudes below this count as a zero on the circle
const ZERO_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointIndex {
    pub value: i64,
    pub radius: f64,
    /// Angle increments of the displacement field between consecutive samples.
    pub turning_data: Vec<f64>,
}

/// Winding number of `w -> f^q(w) - T^p(w)` around the circle of `radius`
/// centred at `z`.
pub fn fixed_point_index(
    map: &LiftedMap,
    z: LiftPoint,
    p: i64,
    q: usize,
    radius: f64,
) -> Result<FixedPointIndex> {
    if q == 0 || !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad q={q} or radius={radius}"
        )));
    }
    let field = |theta: f64| -> Result<(f64, f64)> {
        let w = z + LiftPoint::new(theta.cos(), theta.sin()) * radius;
        let d = map.power(w, q as i64)? - w.translate(p);
        if d.x.hypot(d.y) < ZERO_FLOOR {
            return Err(Error::ZeroVectorOnCircle);
        }
        Ok((d.y.atan2(d.x), d.x.hypot(d.y)))
    };

    let mut turning = Vec::with_capacity(SAMPLES);
    let mut prev = field(0.0)?.0;
    for i in 0..SAMPLES {
        let t0 = TAU * i as f64 / SAMPLES as f64;
        let t1 = TAU * (i + 1) as f64 / SAMPLES as f64;
        let (inc, end) = increment(&field, t0, t1, prev, 0)?;
        turning.push(inc);
        prev = end;
    }
    let total: f64 = turning.iter().sum();
    let turns = total / TAU;
    let value = turns.round();
    if (turns - value).abs() > 1e-3 {
        return Err(Error::AmbiguousWinding { turns });
    }
    Ok(FixedPointIndex {
        value: value as i64,
        radius,
        turning_data: turning,
    })
}

/// Angle increment over `[t0, t1]`, bisecting arcs whose increment is large.
fn increment<F>(field: &F, t0: f64, t1: f64, a0: f64, depth: u32) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<(f64, f64)>,
{
    let (a1, mag) = field(t1)?;
    let d = wrap(a1 - a0);
    if d.abs() <= PI / 4.0 || depth >= MAX_SUBDIVISION_DEPTH {
        if depth >= MAX_SUBDIVISION_DEPTH && d.abs() > PI / 2.0 && mag < 1e-10 {
            return Err(Error::ZeroVectorOnCircle);
        }
        return Ok((d, a1));
    }
    let tm = 0.5 * (t0 + t1);
    let (d1, am) = increment(field, t0, tm, a0, depth + 1)?;
    let (d2, a1) = increment(field, tm, t1, am, depth + 1)?;
    Ok((d1 + d2, a1))
}

fn wrap(a: f64) -> f64 {
    let mut a = a % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}
