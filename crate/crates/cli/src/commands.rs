use std::path::PathBuf;

use anyhow::{Context, Result};
use atlas_core::dynamics::{birkhoff_rotation, weighted_rotation};
use atlas_core::manifolds::{
    branch_seed, grow_branch_with, Branch, BranchKind, BranchSign, DEFAULT_EPS,
};
use atlas_core::periodic::{find_all_pq_with, fixed_point_index, seed_grid, PeriodicOrbit, Window};
use atlas_core::regions::{
    boundary_search, connecting_orbit_search, coverage_report_with, decompose_with,
    escape_time_stats, BoundaryOrbitOptions, ConnectingOutcome, CoverageOptions, CoverageReport,
    DecomposeOptions, Decomposition, EscapeStats, EssentialityParams, Frontier, Region, Side,
};
use atlas_core::store::{RunKey, Store};
use atlas_core::topology::{classify_essentiality_with, EssentialityVerdict};
use atlas_core::{LiftPoint, LiftedMap, MapSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::*;
use crate::config::Config;
use crate::plot::{self, Layer};

/// A usage problem detected after parsing (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub struct Ctx {
    pub cfg: Config,
    pub store: Store,
    pub out: PathBuf,
}

impl Ctx {
    fn map(&self) -> Result<(MapSpec, LiftedMap)> {
        let spec = self
            .cfg
            .map_spec()
            .map_err(|e| UsageError(format!("{e:#}")))?;
        let map = spec.build()?;
        Ok((spec, map))
    }

    fn key(&self, spec: &MapSpec, op: &str, inputs: Value) -> RunKey {
        RunKey::new(
            &spec.family,
            json!({ "params": spec.params, "exprs": spec.exprs }),
            op,
            inputs,
        )
    }

    /// Loads the payload for `key` or computes and stores it. Returns the
    /// store id with the value.
    fn cached<T: Serialize + DeserializeOwned>(
        &self,
        key: &RunKey,
        compute: impl FnOnce() -> Result<T>,
    ) -> Result<(String, T)> {
        if let Some(v) = self.store.lookup::<T>(key)? {
            return Ok((key.id(), v));
        }
        let v = compute()?;
        let id = self
            .store
            .put(key, serde_json::to_value(&v)?, Some(self.cfg.seed))?;
        Ok((id, v))
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    /// Writes `<name>.json` under the output directory and prints it.
    fn emit(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(&format!("{name}.json"), &text)?;
        print!("{text}");
        Ok(())
    }

    fn write_csv<R: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv: {e}"))?;
        self.write(name, &String::from_utf8(bytes)?)
    }

    fn load<T: DeserializeOwned>(&self, id: &str, what: &str) -> Result<Stored<T>> {
        let rec = self
            .store
            .get(id)?
            .with_context(|| format!("no stored {what} with id {id}"))?;
        rec.payload_as::<Stored<T>>()
            .with_context(|| format!("record {id} is not a {what}"))
    }
}

/// Payload of records that later commands refer to by id.
#[derive(Serialize, Deserialize)]
struct Stored<T> {
    map: MapSpec,
    value: T,
}

fn store_item<T: Serialize + DeserializeOwned>(
    ctx: &Ctx,
    spec: &MapSpec,
    op: &str,
    content_id: &str,
    value: T,
) -> Result<String> {
    let key = ctx.key(spec, op, json!({ "content": content_id }));
    let (id, _) = ctx.cached(&key, || {
        Ok(Stored {
            map: spec.clone(),
            value,
        })
    })?;
    Ok(id)
}

pub fn run(ctx: &Ctx, command: &Command) -> Result<()> {
    match command {
        Command::Scan(a) => scan(ctx, a),
        Command::Orbits(a) => orbits(ctx, a),
        Command::Manifold(a) => manifold(ctx, a),
        Command::Classify(a) => classify(ctx, a),
        Command::Regions(a) => regions(ctx, a),
        Command::Connect(a) => connect(ctx, a),
        Command::Coverage(a) => coverage(ctx, a),
        Command::Report(a) => report(ctx, a),
    }
}

fn check_steps(ctx: &Ctx, steps: u64) -> Result<()> {
    if steps > ctx.cfg.orbit_cap {
        return Err(atlas_core::Error::OrbitCapExceeded {
            requested: steps,
            cap: ctx.cfg.orbit_cap,
        }
        .into());
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanRow {
    y: f64,
    rotation: Option<f64>,
    error_bound: Option<f64>,
    weighted_rotation: Option<f64>,
}

#[derive(Serialize)]
struct PortraitRow {
    seed: usize,
    step: usize,
    x: f64,
    y: f64,
}

fn frontier_layers(region: &Region) -> Vec<Layer> {
    [&region.lower, &region.upper]
        .into_iter()
        .filter(|f| f.barrier().is_some())
        .map(|f| Layer::Curve {
            points: (0..=256)
                .map(|i| {
                    let x = i as f64 / 256.0;
                    LiftPoint::new(x, f.heights_at(x).0)
                })
                .collect(),
            color: "black",
        })
        .collect()
}

fn scan(ctx: &Ctx, a: &ScanArgs) -> Result<()> {
    check_steps(ctx, a.steps.max(a.portrait_steps))?;
    // a region overlay brings its own map
    let region = a
        .region
        .as_deref()
        .map(|id| ctx.load::<Region>(id, "region"))
        .transpose()?;
    let (spec, map) = match &region {
        Some(stored) => (stored.map.clone(), stored.map.build()?),
        None => ctx.map()?,
    };
    let (y0, y1) = a.y_range;
    let rows: Vec<ScanRow> = {
        use rayon::prelude::*;
        (0..a.rows)
            .into_par_iter()
            .map(|j| {
                let y = y0 + (y1 - y0) * (j as f64 + 0.5) / a.rows as f64;
                let z = LiftPoint::new(a.x, y);
                let stats = birkhoff_rotation(&map, z, a.steps).ok();
                ScanRow {
                    y,
                    rotation: stats.map(|s| s.rotation_estimate),
                    error_bound: stats.map(|s| s.rotation_error_bound),
                    weighted_rotation: weighted_rotation(&map, z, a.steps.max(2)).ok(),
                }
            })
            .collect()
    };

    // seeds alternate between the two symmetry lines x = 0 and x = 1/2
    let window = Window::band(y0, y1);
    let n = a.seeds as usize;
    let orbits: Vec<Vec<LiftPoint>> = (0..n)
        .map(|j| {
            let z = LiftPoint::new(
                if j % 2 == 0 { 0.5 } else { 0.0 },
                y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64,
            );
            map.orbit(z)
                .take(a.portrait_steps as usize)
                .take_while(|w| w.is_finite())
                .map(LiftPoint::reduce)
                .collect()
        })
        .collect();
    let layers = region
        .map(|r| frontier_layers(&r.value))
        .unwrap_or_default();
    ctx.write(
        "portrait.svg",
        &plot::phase_portrait(window, &orbits, &layers),
    )?;
    ctx.write_csv(
        "portrait.csv",
        orbits.iter().enumerate().flat_map(|(seed, o)| {
            o.iter().enumerate().map(move |(step, z)| PortraitRow {
                seed,
                step,
                x: z.x,
                y: z.y,
            })
        }),
    )?;
    ctx.emit(
        "scan",
        &json!({ "map": spec, "x": a.x, "steps": a.steps, "rows": rows }),
    )
}

#[derive(Serialize, Deserialize)]
struct OrbitEntry {
    store_id: String,
    index: Option<i64>,
    orbit: PeriodicOrbit,
}

fn orbits(ctx: &Ctx, a: &OrbitsArgs) -> Result<()> {
    let (spec, map) = ctx.map()?;
    let q = a.q as usize;
    if atlas_core::periodic::gcd(a.p, q as i64) != 1 {
        return Err(UsageError(format!("--p {} and --q {q} must be coprime", a.p)).into());
    }
    let window = Window::band(a.y_range.0, a.y_range.1);
    let newton = ctx.cfg.newton();
    let key = ctx.key(
        &spec,
        "orbits",
        json!({ "p": a.p, "q": q, "grid": a.grid, "y_range": a.y_range, "newton": [newton.tol, newton.max_iters] }),
    );
    let (_, found) = ctx.cached(&key, || {
        let seeds = seed_grid(&window, a.grid as usize, a.grid as usize);
        Ok(find_all_pq_with(&map, a.p, q, &seeds, &window, &newton)?)
    })?;
    let mut entries = Vec::with_capacity(found.len());
    for orbit in found {
        let index = fixed_point_index(&map, orbit.points[0], a.p, q, a.index_radius)
            .ok()
            .map(|i| i.value);
        let store_id = store_item(ctx, &spec, "orbit", &orbit.id(), orbit.clone())?;
        entries.push(OrbitEntry {
            store_id,
            index,
            orbit,
        });
    }
    let index_sum: Option<i64> = entries.iter().map(|e| e.index).sum();
    ctx.emit(
        "orbits",
        &json!({ "map": spec, "p": a.p, "q": q, "orbits": entries, "index_sum": index_sum }),
    )
}

fn kind_sign(kind: KindArg, sign: SignArg) -> (BranchKind, BranchSign) {
    (
        match kind {
            KindArg::Stable => BranchKind::Stable,
            KindArg::Unstable => BranchKind::Unstable,
        },
        match sign {
            SignArg::Plus => BranchSign::Plus,
            SignArg::Minus => BranchSign::Minus,
        },
    )
}

#[derive(Serialize)]
struct BranchRow {
    t: f64,
    x: f64,
    y: f64,
}

fn manifold(ctx: &Ctx, a: &ManifoldArgs) -> Result<()> {
    let stored = ctx.load::<PeriodicOrbit>(&a.orbit, "orbit")?;
    let (spec, orbit) = (stored.map, stored.value);
    let map = spec.build()?;
    let (kind, sign) = kind_sign(a.kind, a.sign);
    let growth = ctx.cfg.growth();
    let key = ctx.key(
        &spec,
        "manifold",
        json!({ "orbit": orbit.id(), "kind": kind, "sign": sign, "point": a.point, "arclength": a.arclength, "growth": growth }),
    );
    let (store_id, branch) = ctx.cached(&key, || -> Result<Branch> {
        let seed = branch_seed(&map, &orbit, a.point, kind, sign, DEFAULT_EPS)?;
        Ok(grow_branch_with(&map, &seed, a.arclength, &growth)?)
    })?;
    ctx.write_csv(
        "manifold.csv",
        branch
            .params
            .iter()
            .zip(&branch.polyline)
            .map(|(&t, z)| BranchRow { t, x: z.x, y: z.y }),
    )?;
    let (lo, hi) = branch
        .polyline
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), z| {
            (l.min(z.y), h.max(z.y))
        });
    let window = Window::band(lo.min(-0.5) - 0.05, hi.max(0.5) + 0.05);
    let layers = [
        Layer::Curve {
            points: branch.polyline.clone(),
            color: "#d62728",
        },
        Layer::Markers {
            points: orbit.points.clone(),
            color: "black",
        },
    ];
    ctx.write("manifold.svg", &plot::phase_portrait(window, &[], &layers))?;
    ctx.emit(
        "manifold",
        &json!({
            "store_id": store_id,
            "map": spec,
            "owner": branch.owner(),
            "kind": kind,
            "sign": sign,
            "arclength": branch.arclength,
            "n_points": branch.polyline.len(),
            "max_gap": branch.max_gap,
            "max_turn": branch.max_turn,
            "observed_max_gap": branch.observed_max_gap(),
            "observed_max_turn": branch.observed_max_turn(),
            "stop": branch.stop,
            "csv": "manifold.csv",
        }),
    )
}

fn classify(ctx: &Ctx, a: &ClassifyArgs) -> Result<()> {
    let stored = ctx.load::<PeriodicOrbit>(&a.orbit, "orbit")?;
    let (spec, orbit) = (stored.map, stored.value);
    let map = spec.build()?;
    let growth = ctx.cfg.growth();
    let key = ctx.key(
        &spec,
        "classify",
        json!({ "orbit": orbit.id(), "arclength": a.arclength, "resolution": a.resolution, "growth": growth }),
    );
    let (store_id, verdict) = ctx.cached(&key, || -> Result<EssentialityVerdict> {
        Ok(classify_essentiality_with(
            &map,
            &orbit,
            a.arclength,
            a.resolution,
            &growth,
        )?)
    })?;
    ctx.write("mask.svg", &plot::separation_mask(&verdict.separation_mask))?;
    ctx.emit(
        "classify",
        &json!({ "store_id": store_id, "map": spec, "orbit": a.orbit, "verdict": verdict }),
    )
}

#[derive(Serialize)]
struct BandSummary {
    y_band: (f64, f64),
    detector: Option<String>,
    rotation: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RegionEntry {
    store_id: String,
    region: Region,
}

fn regions(ctx: &Ctx, a: &RegionsArgs) -> Result<()> {
    let (spec, map) = ctx.map()?;
    let opts = DecomposeOptions {
        n_bands: a.scan as usize,
        n_cert: a.n_cert,
        q_max: a.q_max as usize,
        essentiality: (!a.no_essentiality).then_some(EssentialityParams {
            arclength: 20.0,
            resolution: 1.0 / 512.0,
        }),
        ..DecomposeOptions::default()
    };
    let key = ctx.key(
        &spec,
        "regions",
        json!({ "y_range": a.y_range, "options": opts }),
    );
    let (_, d) = ctx.cached(&key, || -> Result<Decomposition> {
        Ok(decompose_with(&map, a.y_range, &opts)?)
    })?;
    let bands: Vec<BandSummary> = d
        .bands
        .iter()
        .map(|b| BandSummary {
            y_band: b.y_band,
            detector: b.barrier.as_ref().map(|x| format!("{:?}", x.detector)),
            rotation: b.barrier.as_ref().map(|x| x.rotation_estimate),
        })
        .collect();
    let mut entries = Vec::new();
    for region in d.regions {
        let store_id = store_item(ctx, &spec, "region", &region.id, region.clone())?;
        entries.push(RegionEntry { store_id, region });
    }
    ctx.emit(
        "regions",
        &json!({ "map": spec, "y_range": a.y_range, "bands": bands, "regions": entries }),
    )
}

fn directions(d: DirectionArg) -> Vec<Side> {
    match d {
        DirectionArg::Upper => vec![Side::Upper],
        DirectionArg::Lower => vec![Side::Lower],
        DirectionArg::Both => vec![Side::Upper, Side::Lower],
    }
}

#[allow(clippy::too_many_arguments)]
fn connect_outcome(
    ctx: &Ctx,
    spec: &MapSpec,
    map: &LiftedMap,
    region: &Region,
    forward: Side,
    seeds: u64,
    steps: u64,
    delta: f64,
) -> Result<ConnectingOutcome> {
    check_steps(ctx, steps)?;
    let key = ctx.key(
        spec,
        "connect",
        json!({ "region": region.id, "forward": forward, "seeds": seeds, "steps": steps, "delta": delta }),
    );
    let (_, out) = ctx.cached(&key, || -> Result<ConnectingOutcome> {
        Ok(connecting_orbit_search(
            map,
            region,
            forward,
            seeds as usize,
            steps,
            delta,
        )?)
    })?;
    Ok(out)
}

fn connect(ctx: &Ctx, a: &ConnectArgs) -> Result<()> {
    let stored = ctx.load::<Region>(&a.region, "region")?;
    let map = stored.map.build()?;
    let outcomes = directions(a.direction)
        .into_iter()
        .map(|side| {
            connect_outcome(
                ctx,
                &stored.map,
                &map,
                &stored.value,
                side,
                a.seeds,
                a.steps,
                a.delta,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let found = outcomes.iter().all(ConnectingOutcome::is_found);
    ctx.emit(
        "connect",
        &json!({ "region": a.region, "delta": a.delta, "steps": a.steps, "found": found, "outcomes": outcomes }),
    )
}

#[derive(Serialize)]
struct CoverageRow {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    class: char,
}

fn coverage(ctx: &Ctx, a: &CoverageArgs) -> Result<()> {
    let (spec, map) = ctx.map()?;
    let window = Window::band(a.y_range.0, a.y_range.1);
    let n = a.grid as usize;
    let opts = CoverageOptions {
        arclength: a.arclength,
        growth: ctx.cfg.growth(),
        ..CoverageOptions::default()
    };
    let key = ctx.key(
        &spec,
        "coverage",
        json!({ "window": window, "grid": n, "delta": a.delta, "saddles": a.saddles, "options": opts }),
    );
    let (store_id, rep) = ctx.cached(&key, || -> Result<CoverageReport> {
        Ok(coverage_report_with(
            &map, &window, n, n, a.delta, a.saddles, &opts,
        )?)
    })?;
    let (cw, ch) = (
        (window.x1 - window.x0) / n as f64,
        (window.y1 - window.y0) / n as f64,
    );
    ctx.write_csv(
        "coverage.csv",
        (0..n * n).map(|c| {
            let (i, j) = (c % n, c / n);
            CoverageRow {
                i,
                j,
                x: window.x0 + (i as f64 + 0.5) * cw,
                y: window.y0 + (j as f64 + 0.5) * ch,
                class: rep.class_at(i, j).symbol(),
            }
        }),
    )?;
    ctx.write("coverage.svg", &plot::coverage_map(&rep))?;
    let saddles: Vec<Value> = rep
        .saddles
        .iter()
        .map(|o| json!({ "p": o.p, "q": o.q, "points": o.points, "id": o.id() }))
        .collect();
    ctx.emit(
        "coverage",
        &json!({
            "store_id": store_id,
            "map": spec,
            "window": window,
            "grid": n,
            "delta": a.delta,
            "saddles": saddles,
            "h_fraction": rep.h_fraction,
            "e_fraction": rep.e_fraction,
            "unresolved_fraction": rep.unresolved_fraction,
            "csv": "coverage.csv",
        }),
    )
}

fn report(ctx: &Ctx, a: &ReportArgs) -> Result<()> {
    let stored = ctx.load::<Region>(&a.region, "region")?;
    let (spec, region) = (stored.map, stored.value);
    let map = spec.build()?;
    check_steps(ctx, a.escape_cap.max(a.steps))?;

    let mut escape = serde_json::Map::new();
    let mut boundary = serde_json::Map::new();
    for side in [Side::Upper, Side::Lower] {
        let key = ctx.key(
            &spec,
            "escape",
            json!({ "region": region.id, "side": side, "width": a.width, "seeds": a.escape_seeds, "cap": a.escape_cap }),
        );
        let (_, stats) = ctx.cached(&key, || -> Result<EscapeStats> {
            Ok(escape_time_stats(
                &map,
                &region,
                side,
                a.width,
                a.escape_seeds as usize,
                a.escape_cap,
            )?)
        })?;
        escape.insert(side.name().into(), serde_json::to_value(stats)?);

        let opts = BoundaryOrbitOptions::default();
        let key = ctx.key(
            &spec,
            "boundary_orbits",
            json!({ "region": region.id, "side": side, "width": a.width, "q_max": a.q_max, "options": opts }),
        );
        let (_, found) = ctx.cached(&key, || -> Result<Value> {
            let (rot, orbits) =
                boundary_search(&map, &region, side, a.width, a.q_max as usize, &opts)?;
            Ok(json!({ "band_rotation": rot, "orbits": orbits }))
        })?;
        boundary.insert(side.name().into(), found);
    }

    let mut connecting = Vec::new();
    for side in [Side::Upper, Side::Lower] {
        connecting.push(
            match connect_outcome(ctx, &spec, &map, &region, side, a.seeds, a.steps, a.delta) {
                Ok(o) => serde_json::to_value(o)?,
                Err(e) => match e.downcast_ref::<atlas_core::Error>() {
                    Some(err @ atlas_core::Error::NoFrontier(_)) => {
                        json!({ "unavailable": err.kind(), "message": err.to_string() })
                    }
                    _ => return Err(e),
                },
            },
        );
    }

    ctx.emit(
        "report",
        &json!({
            "region": {
                "store_id": a.region,
                "id": region.id,
                "lower": frontier_summary(&region.lower),
                "upper": frontier_summary(&region.upper),
                "rotation_interval": region.rotation_interval,
                "orbit_ids": region.orbit_ids(),
                "essential_orbit_ids": region.essential_orbit_ids(),
            },
            "map": spec,
            "band_width": a.width,
            "escape": escape,
            "boundary_orbits": boundary,
            "connecting": connecting,
        }),
    )
}

fn frontier_summary(f: &Frontier) -> Value {
    match f {
        Frontier::Barrier(b) => json!({
            "kind": "Barrier",
            "detector": b.detector,
            "rotation_estimate": b.rotation_estimate,
            "band": b.band,
            "n_cert": b.n_cert,
        }),
        Frontier::End { y } => json!({ "kind": "End", "y": y }),
    }
}
