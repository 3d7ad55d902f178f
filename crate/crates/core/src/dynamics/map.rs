use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use super::linalg::Mat2;
use super::LiftPoint;
use crate::error::{Error, Result};

/// Default per-call cap on orbit length.
pub const DEFAULT_ORBIT_CAP: u64 = 100_000_000;

/// Central finite-difference step for user maps without an analytic Jacobian.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FamilyId {
    StandardMap,
    StandardNontwistMap,
    UserDefined,
}

impl FamilyId {
    /// Name used in config files and on the command line.
    pub fn config_name(self) -> &'static str {
        match self {
            FamilyId::StandardMap => "standard",
            FamilyId::StandardNontwistMap => "nontwist",
            FamilyId::UserDefined => "user",
        }
    }
}

/// Declarative, serializable description of a map. This is what configs,
/// CLI flags and store records carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Expression strings (`fx`, `fy`, optional `ix`, `iy`) for user maps.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub exprs: BTreeMap<String, String>,
}

impl MapSpec {
    pub fn standard(k: f64) -> Self {
        Self {
            family: "standard".into(),
            params: BTreeMap::from([("k".to_string(), k)]),
            exprs: BTreeMap::new(),
        }
    }

    pub fn nontwist(a: f64, b: f64) -> Self {
        Self {
            family: "nontwist".into(),
            params: BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]),
            exprs: BTreeMap::new(),
        }
    }

    pub fn build(&self) -> Result<LiftedMap> {
        LiftedMap::from_spec(self)
    }
}

#[derive(Debug, Clone)]
pub struct UserMap {
    fx: Expr,
    fy: Expr,
    inverse: Option<(Expr, Expr)>,
    values: Vec<f64>,
}

impl UserMap {
    fn eval(&self, pair: (&Expr, &Expr), z: LiftPoint) -> LiftPoint {
        let mut vars = Vec::with_capacity(self.values.len() + 2);
        vars.push(z.x);
        vars.push(z.y);
        vars.extend_from_slice(&self.values);
        LiftPoint::new(pair.0.eval(&vars), pair.1.eval(&vars))
    }
}

#[derive(Debug, Clone)]
enum Family {
    Standard { k: f64 },
    Nontwist { a: f64, b: f64 },
    User(Box<UserMap>),
}

/// An area-preserving annulus map given by its lift to the plane.
#[derive(Debug, Clone)]
pub struct LiftedMap {
    family: Family,
    spec: MapSpec,
}

impl LiftedMap {
    /// `y' = y - (k/2pi) sin(2pi x)`, `x' = x + y'`.
    pub fn standard(k: f64) -> Self {
        Self {
            family: Family::Standard { k },
            spec: MapSpec::standard(k),
        }
    }

    /// `y' = y - b sin(2pi x)`, `x' = x + a (1 - y'^2)`.
    pub fn nontwist(a: f64, b: f64) -> Self {
        Self {
            family: Family::Nontwist { a, b },
            spec: MapSpec::nontwist(a, b),
        }
    }

    /// User map from expression strings in `x`, `y` and the named params.
    pub fn user(
        fx: &str,
        fy: &str,
        inverse: Option<(&str, &str)>,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let mut names: Vec<&str> = vec!["x", "y"];
        names.extend(params.keys().map(String::as_str));
        let fxe = Expr::parse(fx, &names)?;
        let fye = Expr::parse(fy, &names)?;
        let inv = match inverse {
            Some((ix, iy)) => Some((Expr::parse(ix, &names)?, Expr::parse(iy, &names)?)),
            None => None,
        };
        let mut exprs = BTreeMap::from([
            ("fx".to_string(), fx.to_string()),
            ("fy".to_string(), fy.to_string()),
        ]);
        if let Some((ix, iy)) = inverse {
            exprs.insert("ix".into(), ix.into());
            exprs.insert("iy".into(), iy.into());
        }
        let values = params.values().copied().collect();
        Ok(Self {
            family: Family::User(Box::new(UserMap {
                fx: fxe,
                fy: fye,
                inverse: inv,
                values,
            })),
            spec: MapSpec {
                family: "user".into(),
                params,
                exprs,
            },
        })
    }

    pub fn from_spec(spec: &MapSpec) -> Result<Self> {
        let param = |name: &str| {
            spec.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name:?}")))
        };
        match spec.family.as_str() {
            "standard" => Ok(Self::standard(param("k")?)),
            "nontwist" => Ok(Self::nontwist(param("a")?, param("b")?)),
            "user" => {
                let get = |name: &str| {
                    spec.exprs.get(name).map(String::as_str).ok_or_else(|| {
                        Error::InvalidArgument(format!("missing expression {name:?}"))
                    })
                };
                let inverse = match (spec.exprs.get("ix"), spec.exprs.get("iy")) {
                    (Some(ix), Some(iy)) => Some((ix.as_str(), iy.as_str())),
                    _ => None,
                };
                Self::user(get("fx")?, get("fy")?, inverse, spec.params.clone())
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown map family {other:?}"
            ))),
        }
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn family_id(&self) -> FamilyId {
        match self.family {
            Family::Standard { .. } => FamilyId::StandardMap,
            Family::Nontwist { .. } => FamilyId::StandardNontwistMap,
            Family::User(_) => FamilyId::UserDefined,
        }
    }

    /// One step of the lift, without finiteness checks.
    #[inline]
    pub fn step(&self, z: LiftPoint) -> LiftPoint {
        match &self.family {
            Family::Standard { k } => {
                let y = z.y - k / TAU * (TAU * z.x).sin();
                LiftPoint::new(z.x + y, y)
            }
            Family::Nontwist { a, b } => {
                let y = z.y - b * (TAU * z.x).sin();
                LiftPoint::new(z.x + a * (1.0 - y * y), y)
            }
            Family::User(u) => u.eval((&u.fx, &u.fy), z),
        }
    }

    /// One step of the inverse lift, without finiteness checks.
    #[inline]
    pub fn step_inverse(&self, z: LiftPoint) -> LiftPoint {
        match &self.family {
            Family::Standard { k } => {
                let x = z.x - z.y;
                LiftPoint::new(x, z.y + k / TAU * (TAU * x).sin())
            }
            Family::Nontwist { a, b } => {
                let x = z.x - a * (1.0 - z.y * z.y);
                LiftPoint::new(x, z.y + b * (TAU * x).sin())
            }
            Family::User(u) => match &u.inverse {
                Some((ix, iy)) => u.eval((ix, iy), z),
                None => self.numeric_inverse(z),
            },
        }
    }

    fn numeric_inverse(&self, z: LiftPoint) -> LiftPoint {
        let mut w = z;
        for _ in 0..60 {
            let r = self.step(w) - z;
            if r.x.abs().max(r.y.abs()) < 1e-14 {
                break;
            }
            let Some(dw) = self.jacobian_raw(w).solve(r, 1e-300) else {
                return LiftPoint::new(f64::NAN, f64::NAN);
            };
            w = w - dw;
        }
        w
    }

    /// Jacobian of the lift, without finiteness checks.
    #[inline]
    pub fn jacobian_raw(&self, z: LiftPoint) -> Mat2 {
        match &self.family {
            Family::Standard { k } => {
                let c = k * (TAU * z.x).cos();
                Mat2::new(1.0 - c, 1.0, -c, 1.0)
            }
            Family::Nontwist { a, b } => {
                let y = z.y - b * (TAU * z.x).sin();
                let dydx = -TAU * b * (TAU * z.x).cos();
                let g = -2.0 * a * y;
                Mat2::new(1.0 + g * dydx, g, dydx, 1.0)
            }
            Family::User(_) => {
                let h = FD_STEP;
                let fxp = self.step(LiftPoint::new(z.x + h, z.y));
                let fxm = self.step(LiftPoint::new(z.x - h, z.y));
                let fyp = self.step(LiftPoint::new(z.x, z.y + h));
                let fym = self.step(LiftPoint::new(z.x, z.y - h));
                Mat2::new(
                    (fxp.x - fxm.x) / (2.0 * h),
                    (fyp.x - fym.x) / (2.0 * h),
                    (fxp.y - fxm.y) / (2.0 * h),
                    (fyp.y - fym.y) / (2.0 * h),
                )
            }
        }
    }

    pub fn apply(&self, z: LiftPoint) -> Result<LiftPoint> {
        check_input(z)?;
        let w = self.step(z);
        if w.is_finite() {
            Ok(w)
        } else {
            Err(Error::NonFinite { step: 0, last: z })
        }
    }

    pub fn inverse(&self, z: LiftPoint) -> Result<LiftPoint> {
        check_input(z)?;
        let w = self.step_inverse(z);
        if w.is_finite() {
            Ok(w)
        } else {
            Err(Error::NonFinite { step: 0, last: z })
        }
    }

    pub fn jacobian(&self, z: LiftPoint) -> Result<Mat2> {
        check_input(z)?;
        let m = self.jacobian_raw(z);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonFinite { step: 0, last: z })
        }
    }

    /// `f^n(z)` for signed `n` (inverse steps when negative).
    pub fn power(&self, z: LiftPoint, n: i64) -> Result<LiftPoint> {
        check_input(z)?;
        let mut w = z;
        for i in 0..n.unsigned_abs() {
            let next = if n >= 0 {
                self.step(w)
            } else {
                self.step_inverse(w)
            };
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

    /// `f^q(z)` together with the product of the per-step Jacobians.
    pub fn power_with_jacobian(&self, z: LiftPoint, q: usize) -> Result<(LiftPoint, Mat2)> {
        check_input(z)?;
        let mut w = z;
        let mut m = Mat2::IDENTITY;
        for i in 0..q {
            m = self.jacobian_raw(w).mul(&m);
            let next = self.step(w);
            if !next.is_finite() || !m.is_finite() {
                return Err(Error::NonFinite { step: i, last: w });
            }
            w = next;
        }
        Ok((w, m))
    }

    /// Orbit `[z, f(z), ..., f^n(z)]` (inverse iterates for negative `n`).
    pub fn iterate(&self, z: LiftPoint, n: i64) -> Result<Vec<LiftPoint>> {
        self.iterate_capped(z, n, DEFAULT_ORBIT_CAP)
    }

    pub fn iterate_capped(&self, z: LiftPoint, n: i64, cap: u64) -> Result<Vec<LiftPoint>> {
        if n.unsigned_abs() > cap {
            return Err(Error::OrbitCapExceeded {
                requested: n.unsigned_abs(),
                cap,
            });
        }
        check_input(z)?;
        let mut out = Vec::with_capacity(n.unsigned_abs() as usize + 1);
        out.push(z);
        let mut w = z;
        for i in 0..n.unsigned_abs() {
            let next = if n >= 0 {
                self.step(w)
            } else {
                self.step_inverse(w)
            };
            if !next.is_finite() {
                return Err(Error::NonFinite {
                    step: i as usize,
                    last: w,
                });
            }
            out.push(next);
            w = next;
        }
        Ok(out)
    }

    /// Streaming forward orbit; yields `z, f(z), f^2(z), ...` without storing it.
    pub fn orbit(&self, z: LiftPoint) -> Orbit<'_> {
        Orbit {
            map: self,
            current: z,
            backward: false,
        }
    }

    /// Streaming backward orbit.
    pub fn backward_orbit(&self, z: LiftPoint) -> Orbit<'_> {
        Orbit {
            map: self,
            current: z,
            backward: true,
        }
    }
}

fn check_input(z: LiftPoint) -> Result<()> {
    if z.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { step: 0, last: z })
    }
}

pub struct Orbit<'a> {
    map: &'a LiftedMap,
    current: LiftPoint,
    backward: bool,
}

impl Iterator for Orbit<'_> {
    type Item = LiftPoint;

    fn next(&mut self) -> Option<LiftPoint> {
        let z = self.current;
        if !z.is_finite() {
            return None;
        }
        self.current = if self.backward {
            self.map.step_inverse(z)
        } else {
            self.map.step(z)
        };
        Some(z)
    }
}
