//! Invariant-circle barriers, regions of instability between them, and
//! transport statistics inside a region.

mod barrier;
mod coverage;
mod decompose;
mod transport;

pub use barrier::{
    band_targets, detect_barrier, fit_circle, graph_fit_in_band, noble_targets, rational_near,
    transport_exclusion, Barrier, BarrierSearch, BarrierShape, CircleTest, Detector, GRAPH_NODES,
};
pub use coverage::{
    coverage_report, coverage_report_with, discover_saddles, CellClass, CoverageOptions,
    CoverageReport,
};
pub use decompose::{
    decompose, decompose_with, flat_frontier, rationals_in, seeds_between, BandVerdict,
    DecomposeOptions, Decomposition, EssentialityParams, Frontier, InventoryOrbit, Region, Side,
};
pub use transport::{
    boundary_search, connecting_orbit_search, escape_time_stats, frontier_distance,
    region_boundary_orbits, region_boundary_orbits_with, tangle_seeds, BoundaryOrbitOptions,
    ConnectingOrbitEvidence, ConnectingOutcome, EscapeStats, HistogramBin, TANGLE_ARCLENGTH,
};
