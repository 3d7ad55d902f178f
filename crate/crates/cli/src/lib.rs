//! Command-line front end for the atlas core library.

pub mod args;
pub mod commands;
pub mod config;
pub mod plot;

use std::ffi::OsString;
use std::io::Write;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, GlobalArgs};
use commands::{Ctx, UsageError};
use config::Config;

/// Runs the CLI on `argv` and returns the process exit code: 0 on success,
/// 2 for usage errors, 1 for everything else.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let usage = e.chain().any(|c| c.is::<UsageError>());
            let kind = if usage {
                "Usage"
            } else {
                e.chain()
                    .find_map(|c| c.downcast_ref::<atlas_core::Error>())
                    .map_or("Failure", |c| c.kind())
            };
            let body = serde_json::json!({ "error": kind, "message": format!("{e:#}") });
            let _ = writeln!(std::io::stderr(), "{body}");
            if usage {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(path) => Config::load(path).map_err(|e| UsageError(format!("{e:#}")))?,
        None => Config::default(),
    };
    if let Some(f) = &g.family {
        cfg.family = f.clone();
    }
    cfg.k = g.k.or(cfg.k);
    cfg.a = g.a.or(cfg.a);
    cfg.b = g.b.or(cfg.b);
    if let Some(out) = &g.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| UsageError(format!("{e:#}")))?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    if cfg.workers > 0 {
        // fails harmlessly when a pool already exists (tests run in-process)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global();
    }
    let store = atlas_core::store::Store::from_env().context("opening the result store")?;
    let out = cfg.out_dir.clone();
    commands::run(&Ctx { cfg, store, out }, &cli.command)
}
