use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LiftPoint, LiftedMap};
use crate::error::{Error, Result};

/// Birkhoff quotient of the horizontal displacement along a finite orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitStats {
    pub n_steps: u64,
    /// `p1(f^n(z)) - p1(z)` in the lift.
    pub displacement: f64,
    /// `displacement / n_steps`.
    pub rotation_estimate: f64,
    /// `C / n` where `C` is the oscillation of `D_j - j * rotation_estimate`.
    pub rotation_error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Confidence {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationInterval {
    pub lo: f64,
    pub hi: f64,
    pub confidence: Confidence,
}

impl RotationInterval {
    pub fn exact(lo: f64, hi: f64) -> Self {
        Self {
            lo: lo.min(hi),
            hi: lo.max(hi),
            confidence: Confidence::Exact,
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

pub fn birkhoff_rotation(map: &LiftedMap, z: LiftPoint, n: u64) -> Result<OrbitStats> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "birkhoff_rotation needs n >= 1".into(),
        ));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite { step: 0, last: z });
    }
    let end = walk(map, z, n)?;
    let displacement = end.x - z.x;
    let rho = displacement / n as f64;

    // second pass for the oscillation of the displacement around its trend
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for (j, w) in map.orbit(z).take(n as usize + 1).enumerate() {
        let dev = (w.x - z.x) - j as f64 * rho;
        lo = lo.min(dev);
        hi = hi.max(dev);
    }
    Ok(OrbitStats {
        n_steps: n,
        displacement,
        rotation_estimate: rho,
        rotation_error_bound: (hi - lo) / n as f64,
    })
}

/// `f^n(z)` with a NonFinite check every step.
fn walk(map: &LiftedMap, z: LiftPoint, n: u64) -> Result<LiftPoint> {
    let mut w = z;
    for i in 0..n {
        let next = map.step(w);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                step: i as usize,
                last: w,
            });
        }
        w = next;
    }
    Ok(w)
}

/// Weighted Birkhoff average of the per-step displacement with the smooth
/// bump `exp(-1/(t(1-t)))`. Converges super-polynomially on quasi-periodic
/// orbits and slowly on chaotic ones.
pub fn weighted_rotation(map: &LiftedMap, z: LiftPoint, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(
            "weighted_rotation needs n >= 2".into(),
        ));
    }
    let mut w = z;
    let (mut acc, mut norm) = (0.0, 0.0);
    for j in 0..n {
        let next = map.step(w);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                step: j as usize,
                last: w,
            });
        }
        let t = (j as f64 + 0.5) / n as f64;
        let weight = (-1.0 / (t * (1.0 - t))).exp();
        acc += weight * (next.x - w.x);
        norm += weight;
        w = next;
    }
    Ok(acc / norm)
}

pub fn rotation_interval_of_set(
    map: &LiftedMap,
    seeds: &[LiftPoint],
    n: u64,
) -> Result<RotationInterval> {
    if seeds.is_empty() {
        return Err(Error::EmptySeedSet);
    }
    let stats: Vec<OrbitStats> = seeds
        .par_iter()
        .map(|&z| birkhoff_rotation(map, z, n))
        .collect::<Result<_>>()?;
    let lo = stats
        .iter()
        .map(|s| s.rotation_estimate - s.rotation_error_bound)
        .fold(f64::INFINITY, f64::min);
    let hi = stats
        .iter()
        .map(|s| s.rotation_estimate + s.rotation_error_bound)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(RotationInterval {
        lo,
        hi,
        confidence: Confidence::Sampled,
    })
}
