//! Flat TOML run configuration. Every key is optional; flags override it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use atlas_core::manifolds::GrowthOptions;
use atlas_core::periodic::{NewtonOptions, DEDUP_TOL, DEGENERACY_BAND};
use atlas_core::MapSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub family: String,
    pub k: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub fx: Option<String>,
    pub fy: Option<String>,
    pub ix: Option<String>,
    pub iy: Option<String>,

    pub newton_tol: f64,
    pub dedup_tol: f64,
    pub max_gap: f64,
    pub max_turn: f64,
    pub degeneracy_band: f64,

    pub orbit_cap: u64,
    pub branch_point_cap: usize,
    pub newton_max_iters: usize,

    pub out_dir: PathBuf,
    pub seed: u64,
    /// 0 means one worker per processor.
    pub workers: usize,

    /// Keys not listed above: user-map parameters (`param_<name>`) and
    /// experiment settings.
    #[serde(flatten)]
    pub extra: BTreeMap<String, toml::Value>,
}

impl Default for Config {
    fn default() -> Self {
        let newton = NewtonOptions::default();
        let growth = GrowthOptions::default();
        Self {
            family: "standard".into(),
            k: None,
            a: None,
            b: None,
            fx: None,
            fy: None,
            ix: None,
            iy: None,
            newton_tol: newton.tol,
            dedup_tol: DEDUP_TOL,
            max_gap: growth.max_gap,
            max_turn: growth.max_turn,
            degeneracy_band: DEGENERACY_BAND,
            orbit_cap: atlas_core::dynamics::DEFAULT_ORBIT_CAP,
            branch_point_cap: growth.point_cap,
            newton_max_iters: newton.max_iters,
            out_dir: "atlas-out".into(),
            seed: 0,
            workers: 0,
            extra: BTreeMap::new(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("dedup_tol", self.dedup_tol),
            ("max_gap", self.max_gap),
            ("max_turn", self.max_turn),
            ("degeneracy_band", self.degeneracy_band),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be a positive number, got {v}");
            }
        }
        for (name, v) in [
            ("orbit_cap", self.orbit_cap),
            ("branch_point_cap", self.branch_point_cap as u64),
            ("newton_max_iters", self.newton_max_iters as u64),
        ] {
            if v < 1 {
                bail!("{name} must be at least 1");
            }
        }
        // these two are compile-time constants of the detectors
        if self.dedup_tol != DEDUP_TOL || self.degeneracy_band != DEGENERACY_BAND {
            bail!(
                "dedup_tol and degeneracy_band are fixed at {DEDUP_TOL:e} and {DEGENERACY_BAND:e}"
            );
        }
        Ok(())
    }

    pub fn map_spec(&self) -> Result<MapSpec> {
        let need = |v: Option<f64>, name: &str| {
            v.with_context(|| format!("family {} needs {name}", self.family))
        };
        Ok(match self.family.as_str() {
            "standard" => MapSpec::standard(need(self.k, "k")?),
            "nontwist" => MapSpec::nontwist(need(self.a, "a")?, need(self.b, "b")?),
            "user" => {
                let mut exprs = BTreeMap::new();
                for (key, v) in [
                    ("fx", &self.fx),
                    ("fy", &self.fy),
                    ("ix", &self.ix),
                    ("iy", &self.iy),
                ] {
                    if let Some(e) = v {
                        exprs.insert(key.to_string(), e.clone());
                    }
                }
                let params = self
                    .extra
                    .iter()
                    .filter_map(|(key, v)| {
                        Some((key.strip_prefix("param_")?.to_string(), v.as_float()?))
                    })
                    .collect();
                MapSpec {
                    family: "user".into(),
                    params,
                    exprs,
                }
            }
            other => bail!("unknown family {other:?} (expected standard, nontwist or user)"),
        })
    }

    pub fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iters: self.newton_max_iters,
            ..NewtonOptions::default()
        }
    }

    pub fn growth(&self) -> GrowthOptions {
        GrowthOptions {
            max_gap: self.max_gap,
            max_turn: self.max_turn,
            point_cap: self.branch_point_cap,
        }
    }

    /// Numeric experiment setting (integers are accepted).
    pub fn number(&self, key: &str) -> Option<f64> {
        match self.extra.get(key)? {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> f64 {
        self.number(key).unwrap_or(default)
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.extra.get(key)?.as_str()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let c = Config::parse("k = 0.9").unwrap();
        assert_eq!(c.family, "standard");
        assert_eq!(c.newton_tol, 1e-10);
        assert_eq!(c.map_spec().unwrap(), MapSpec::standard(0.9));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("newton_tol = 0.0").is_err());
        assert!(Config::parse("max_gap = -1e-3").is_err());
        assert!(Config::parse("branch_point_cap = 0").is_err());
        assert!(Config::parse("family = \"henon\"\nk = 1.0")
            .unwrap()
            .map_spec()
            .is_err());
        assert!(Config::parse("family = \"standard\"")
            .unwrap()
            .map_spec()
            .is_err());
    }

    #[test]
    fn extra_keys_and_user_params() {
        let c = Config::parse(
            "family = \"user\"\nfx = \"x + y\"\nfy = \"y + e*sin(x)\"\nparam_e = 0.5\ndelta = 2",
        )
        .unwrap();
        let spec = c.map_spec().unwrap();
        assert_eq!(spec.params.get("e"), Some(&0.5));
        assert_eq!(c.number("delta"), Some(2.0));
        assert_eq!(c.number_or("missing", 3.0), 3.0);
    }
}
