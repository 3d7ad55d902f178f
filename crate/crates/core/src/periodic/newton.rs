use serde::{Deserialize, Serialize};

use super::{classify, PeriodicOrbit};
use crate::dynamics::{LiftPoint, LiftedMap, Mat2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Convergence threshold on `|f^q(z) - T^p(z)|` (sup norm).
    pub tol: f64,
    pub max_iters: usize,
    /// Step halvings tried when the residual does not decrease.
    pub max_halvings: usize,
    /// Minimal annulus separation of distinct orbit points.
    pub distinct_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 50,
            max_halvings: 20,
            distinct_tol: 1e-8,
        }
    }
}

// |det(Df^q - I)| below this (relative to the matrix scale) is singular
const DET_FLOOR: f64 = 1e-13;

pub fn newton_pq(map: &LiftedMap, seed: LiftPoint, p: i64, q: usize) -> Result<PeriodicOrbit> {
    newton_pq_with(map, seed, p, q, &NewtonOptions::default())
}

/// Damped Newton iteration on `G(z) = f^q(z) - T^p(z)`.
pub fn newton_pq_with(
    map: &LiftedMap,
    seed: LiftPoint,
    p: i64,
    q: usize,
    opts: &NewtonOptions,
) -> Result<PeriodicOrbit> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be >= 1".into()));
    }
    let residual_at = |z: LiftPoint| -> Result<(LiftPoint, Mat2, f64)> {
        let (w, m) = map.power_with_jacobian(z, q)?;
        let g = w - z.translate(p);
        Ok((g, m, g.x.abs().max(g.y.abs())))
    };

    let mut z = seed;
    let (mut g, mut m, mut r) = residual_at(z)?;
    let mut iters = 0;
    while r >= opts.tol {
        if iters == opts.max_iters {
            return Err(Error::NotConverged { iters, residual: r });
        }
        iters += 1;
        let a = Mat2::new(m.0[0][0] - 1.0, m.0[0][1], m.0[1][0], m.0[1][1] - 1.0);
        let dz = a
            .solve(g, DET_FLOOR)
            .ok_or(Error::SingularJacobian { at: z })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = z - dz * lambda;
            if let Ok((cg, cm, cr)) = residual_at(cand) {
                if cr < r {
                    accepted = Some((cand, cg, cm, cr));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cz, cg, cm, cr)) => {
                z = cz;
                g = cg;
                m = cm;
                r = cr;
            }
            None => return Err(Error::NotConverged { iters, residual: r }),
        }
    }

    // a parabolic solution (eigenvalue 1) is not isolated: report it as singular
    let a = Mat2::new(m.0[0][0] - 1.0, m.0[0][1], m.0[1][0], m.0[1][1] - 1.0);
    if a.solve(LiftPoint::new(1.0, 1.0), DET_FLOOR).is_none() {
        return Err(Error::SingularJacobian { at: z });
    }

    // store the representative with x in [0, 1)
    let z0 = z.reduce();
    let newton_residual = residual_at(z0)?.2;
    if newton_residual >= opts.tol {
        return Err(Error::NotConverged {
            iters,
            residual: newton_residual,
        });
    }

    let mut points = Vec::with_capacity(q);
    let mut w = z0;
    for _ in 0..q {
        points.push(w.reduce());
        w = map.apply(w)?;
    }
    if let Some(period) = true_period(&points, opts.distinct_tol) {
        if period < q {
            return Err(Error::PeriodDivisor { period, q });
        }
    }

    let c = classify(map, z0, p, q)?;
    Ok(PeriodicOrbit {
        p,
        q,
        points,
        stability: c.stability,
        eigenvalues: c.eigenvalues,
        trace: c.trace,
        residue: c.residue,
        newton_residual,
    })
}

/// Smallest `d` with `points[d]` equal to `points[0]` mod 1.
fn true_period(points: &[LiftPoint], tol: f64) -> Option<usize> {
    (1..points.len())
        .find(|&d| points[d].annulus_sup_dist(points[0]) < tol)
        .or(Some(points.len()))
}
