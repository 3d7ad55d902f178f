//! Essential/inessential saddles, branch-closure samples and their
//! comparison.

mod cloud;
mod essential;
mod grid;

pub use cloud::{
    hausdorff, hausdorff_points, k_equivalent, k_equivalent_with, sample_k, sample_k_with,
    CloudOwner, KEquivalence, ManifoldCloud, CLOUD_DEDUP,
};
pub use essential::{
    all_branches, classify_essentiality, classify_essentiality_with, Certificate,
    EssentialityStatus, EssentialityVerdict, MAX_RESOLUTION,
};
pub use grid::{Cell, OccupancyGrid};
