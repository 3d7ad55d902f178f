use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "atlas",
    version,
    about = "Regions of instability for area-preserving annulus maps"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat TOML config; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Map family: standard, nontwist or user.
    #[arg(long, global = true)]
    pub family: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Output directory for reports and figures.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: one per processor).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rotation profile along a vertical section plus a phase portrait.
    Scan(ScanArgs),
    /// All (p, q) periodic orbits in a window.
    Orbits(OrbitsArgs),
    /// Grow one stable or unstable branch of a stored orbit.
    Manifold(ManifoldArgs),
    /// Essentiality of a stored hyperbolic orbit.
    Classify(ClassifyArgs),
    /// Barriers and regions of instability.
    Regions(RegionsArgs),
    /// Connecting-orbit search in a stored region.
    Connect(ConnectArgs),
    /// H-near / E-near / unresolved grid.
    Coverage(CoverageArgs),
    /// Full evidence report for a stored region.
    Report(ReportArgs),
}

/// `lo,hi` with `lo < hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("empty or unbounded range {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Positive integer, also written as `1e7`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if !(v >= 1.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(format!("{s} is not a positive integer"));
    }
    Ok(v as u64)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("{s} must be positive"));
    }
    Ok(v)
}

fn parse_non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("{s} must be non-negative"));
    }
    Ok(v)
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    #[arg(long, default_value = "-0.5,0.5", value_parser = parse_range, allow_hyphen_values = true)]
    pub y_range: (f64, f64),
    /// Section heights sampled for the rotation profile.
    #[arg(long, default_value = "64", value_parser = parse_count)]
    pub rows: u64,
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub steps: u64,
    /// Orbits drawn in the phase portrait.
    #[arg(long, default_value = "24", value_parser = parse_count)]
    pub seeds: u64,
    #[arg(long, default_value = "2000", value_parser = parse_count)]
    pub portrait_steps: u64,
    /// Stored region whose frontiers are overlaid.
    #[arg(long)]
    pub region: Option<String>,
}

#[derive(Debug, Args)]
pub struct OrbitsArgs {
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub p: i64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub q: u64,
    /// Seeds per axis of the Newton seed grid.
    #[arg(long, default_value = "50", value_parser = parse_count)]
    pub grid: u64,
    #[arg(long, default_value = "-0.5,0.5", value_parser = parse_range, allow_hyphen_values = true)]
    pub y_range: (f64, f64),
    /// Radius of the circle used for the fixed-point index.
    #[arg(long, default_value = "0.01", value_parser = parse_positive)]
    pub index_radius: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Upper,
    Lower,
    Both,
}

#[derive(Debug, Args)]
pub struct ManifoldArgs {
    /// Store id printed by `atlas orbits`.
    #[arg(long)]
    pub orbit: String,
    #[arg(long, value_enum, default_value = "unstable")]
    pub kind: KindArg,
    #[arg(long, value_enum, default_value = "plus")]
    pub sign: SignArg,
    #[arg(long, default_value = "50", value_parser = parse_non_negative)]
    pub arclength: f64,
    /// Index of the orbit point the branch belongs to.
    #[arg(long, default_value_t = 0)]
    pub point: usize,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub orbit: String,
    #[arg(long, default_value = "20", value_parser = parse_non_negative)]
    pub arclength: f64,
    #[arg(long, default_value = "0.001953125", value_parser = parse_positive)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[arg(long, default_value = "-1,1", value_parser = parse_range, allow_hyphen_values = true)]
    pub y_range: (f64, f64),
    /// Number of scan bands.
    #[arg(long, default_value = "64", value_parser = parse_count)]
    pub scan: u64,
    #[arg(long, default_value = "8", value_parser = parse_count)]
    pub q_max: u64,
    /// Steps of the transport-exclusion certificate.
    #[arg(long, default_value = "1e5", value_parser = parse_count)]
    pub n_cert: u64,
    /// Skip essentiality classification of the inventory.
    #[arg(long)]
    pub no_essentiality: bool,
}

#[derive(Debug, Args)]
pub struct ConnectArgs {
    /// Store id printed by `atlas regions`.
    #[arg(long)]
    pub region: String,
    #[arg(long, default_value = "0.05", value_parser = parse_positive)]
    pub delta: f64,
    #[arg(long, default_value = "1e7", value_parser = parse_count)]
    pub steps: u64,
    #[arg(long, default_value = "8", value_parser = parse_count)]
    pub seeds: u64,
    /// Frontier approached by the forward orbit.
    #[arg(long, value_enum, default_value = "both")]
    pub direction: DirectionArg,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long, default_value = "0.02", value_parser = parse_non_negative)]
    pub delta: f64,
    #[arg(long, default_value = "-0.5,0.5", value_parser = parse_range, allow_hyphen_values = true)]
    pub y_range: (f64, f64),
    /// Cells per axis.
    #[arg(long, default_value = "256", value_parser = parse_count)]
    pub grid: u64,
    #[arg(long, default_value = "10")]
    pub saddles: usize,
    #[arg(long, default_value = "50", value_parser = parse_non_negative)]
    pub arclength: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub region: String,
    /// Width of the frontier bands.
    #[arg(long, default_value = "0.05", value_parser = parse_positive)]
    pub width: f64,
    #[arg(long, default_value = "1000", value_parser = parse_count)]
    pub escape_seeds: u64,
    #[arg(long, default_value = "1e6", value_parser = parse_count)]
    pub escape_cap: u64,
    #[arg(long, default_value = "13", value_parser = parse_count)]
    pub q_max: u64,
    #[arg(long, default_value = "0.05", value_parser = parse_positive)]
    pub delta: f64,
    #[arg(long, default_value = "1e7", value_parser = parse_count)]
    pub steps: u64,
    #[arg(long, default_value = "8", value_parser = parse_count)]
    pub seeds: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_counts() {
        assert_eq!(parse_range("-1,1"), Ok((-1.0, 1.0)));
        assert!(parse_range("1,1").is_err());
        assert!(parse_range("0.5").is_err());
        assert_eq!(parse_count("1e7"), Ok(10_000_000));
        assert!(parse_count("0").is_err());
        assert!(parse_count("2.5").is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
