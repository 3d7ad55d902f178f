//! Stable and unstable branches of hyperbolic periodic points, grown as
//! adaptive polylines, and their homoclinic/heteroclinic intersections.

mod branch;
mod intersect;

pub use branch::{
    branch_seed, grow_branch, grow_branch_partial, grow_branch_with, Branch, BranchKind,
    BranchOwner, BranchSeed, BranchSign, GrowthOptions, GrowthStop, DEFAULT_EPS, SADDLE_PARAM,
};
pub use intersect::{
    branch_intersections, primary_homoclinic, primary_homoclinic_with, BranchRef,
    HeteroclinicPoint, TRANSVERSAL_ANGLE_FLOOR,
};
