//! Map families given by plane lifts, orbit iteration and rotation numbers.

mod expr;
mod linalg;
mod map;
mod point;
mod rotation;

pub use expr::Expr;
pub use linalg::Mat2;
pub use map::{FamilyId, LiftedMap, MapSpec, Orbit, DEFAULT_ORBIT_CAP};
pub use point::{circle_diff, LiftPoint};
pub use rotation::{
    birkhoff_rotation, rotation_interval_of_set, weighted_rotation, Confidence, OrbitStats,
    RotationInterval,
};
