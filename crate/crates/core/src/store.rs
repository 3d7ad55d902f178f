//! Content-addressed run records in append-only JSON-lines files, one file
//! per map family.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DATA_ENV: &str = "ATLAS_DATA";
pub const DEFAULT_DIR: &str = "atlas-data";
/// Code version folded into every id, so results from other versions are
/// never replayed.
pub const CODE_VERSION: &str = concat!("atlas-", env!("CARGO_PKG_VERSION"));

/// What a record is keyed on. `inputs` must contain everything the result
/// depends on besides the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub family: String,
    pub params: Value,
    pub op: String,
    pub inputs: Value,
}

impl RunKey {
    pub fn new(family: &str, params: Value, op: &str, inputs: Value) -> Self {
        Self {
            family: family.to_owned(),
            params,
            op: op.to_owned(),
            inputs,
        }
    }

    pub fn id(&self) -> String {
        let canonical = serde_json::json!({
            "family": self.family,
            "params": self.params,
            "op": self.op,
            "inputs": self.inputs,
            "ver": CODE_VERSION,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

/// One stored line. `inputs` holds the family and params next to the
/// operation inputs; `sum` is the hash of the payload text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub id: String,
    pub op: String,
    pub inputs: Value,
    pub payload: Value,
    pub seed: Option<u64>,
    pub ts: String,
    pub ver: String,
    pub sum: String,
}

impl RunRecord {
    pub fn payload_as<T: DeserializeOwned>(&self) -> Result<T> {
        Ok(serde_json::from_value(self.payload.clone())?)
    }

    fn key(&self) -> Option<RunKey> {
        let o = self.inputs.as_object()?;
        Some(RunKey {
            family: o.get("family")?.as_str()?.to_owned(),
            params: o.get("params")?.clone(),
            op: self.op.clone(),
            inputs: o.get("op_inputs")?.clone(),
        })
    }

    fn verify(&self) -> Result<()> {
        let key = self
            .key()
            .ok_or_else(|| Error::Integrity(format!("record {} has malformed inputs", self.id)))?;
        if self.ver != CODE_VERSION || key.id() != self.id {
            return Err(Error::Integrity(format!(
                "record {} does not match its inputs",
                self.id
            )));
        }
        if payload_sum(&self.payload) != self.sum {
            return Err(Error::Integrity(format!(
                "record {} payload checksum mismatch",
                self.id
            )));
        }
        Ok(())
    }
}

fn payload_sum(payload: &Value) -> String {
    hex::encode(Sha256::digest(payload.to_string().as_bytes()))
}

pub fn validate_id(id: &str) -> Result<()> {
    if id.len() == 64
        && id
            .bytes()
            .all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
    {
        Ok(())
    } else {
        Err(Error::InvalidId(id.to_owned()))
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    /// `$ATLAS_DATA`, or `./atlas-data`.
    pub fn from_env() -> Result<Self> {
        Self::open(
            std::env::var_os(DATA_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| DEFAULT_DIR.into()),
        )
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn family_file(&self, family: &str) -> Result<PathBuf> {
        if family.is_empty()
            || !family
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            return Err(Error::InvalidArgument(format!(
                "invalid family name {family:?}"
            )));
        }
        Ok(self.dir.join(format!("{family}.jsonl")))
    }

    /// Appends the record unless an intact record with the same id exists.
    pub fn put(&self, key: &RunKey, payload: Value, seed: Option<u64>) -> Result<String> {
        let id = key.id();
        let path = self.family_file(&key.family)?;
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)?;
        file.lock()?;
        if matches!(scan_file(&path, &id), Ok(Some(_))) {
            return Ok(id);
        }
        let record = RunRecord {
            id: id.clone(),
            op: key.op.clone(),
            inputs: serde_json::json!({
                "family": key.family,
                "params": key.params,
                "op_inputs": key.inputs,
            }),
            sum: payload_sum(&payload),
            payload,
            seed,
            ts: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            ver: CODE_VERSION.to_owned(),
        };
        let mut line = serde_json::to_string(&record)?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(id)
    }

    /// `Ok(None)` means Missing.
    pub fn get(&self, id: &str) -> Result<Option<RunRecord>> {
        validate_id(id)?;
        for path in self.family_files()? {
            if let Some(r) = scan_file(&path, id)? {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }

    /// Cached payload for `key`, if present and intact.
    pub fn lookup<T: DeserializeOwned>(&self, key: &RunKey) -> Result<Option<T>> {
        match self.get(&key.id())? {
            Some(r) => Ok(Some(r.payload_as()?)),
            None => Ok(None),
        }
    }

    /// Ids of intact records for `(family, params, op)`, in insertion order.
    pub fn query(&self, family: &str, params: &Value, op: &str) -> Result<Vec<String>> {
        let path = self.family_file(family)?;
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut out: Vec<String> = Vec::new();
        for line in BufReader::new(File::open(&path)?).lines() {
            let Ok(r) = serde_json::from_str::<RunRecord>(&line?) else {
                continue;
            };
            if r.op == op
                && r.verify().is_ok()
                && r.key()
                    .is_some_and(|k| k.family == family && &k.params == params)
                && !out.contains(&r.id)
            {
                out.push(r.id);
            }
        }
        Ok(out)
    }

    fn family_files(&self) -> Result<Vec<PathBuf>> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        files.sort();
        Ok(files)
    }
}

/// First line for `id`. A line that mentions the id but does not parse or
/// verify is an integrity error; unrelated damaged lines are skipped.
fn scan_file(path: &Path, id: &str) -> Result<Option<RunRecord>> {
    if !path.exists() {
        return Ok(None);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.contains(id) {
            continue;
        }
        match serde_json::from_str::<RunRecord>(&line) {
            Ok(r) if r.id == id => {
                r.verify()?;
                return Ok(Some(r));
            }
            Ok(_) => continue,
            Err(e) => return Err(Error::Integrity(format!("unreadable record for {id}: {e}"))),
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn key(k: f64, q: usize) -> RunKey {
        RunKey::new(
            "standard",
            json!({ "k": k }),
            "orbits",
            json!({ "p": 0, "q": q }),
        )
    }

    #[test]
    fn put_get_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let payload = json!({ "x": 0.1 + 0.2, "tiny": 5e-324, "v": [1.0 / 3.0, -0.0] });
        let id = s.put(&key(1.0, 1), payload.clone(), Some(7)).unwrap();
        let r = s.get(&id).unwrap().unwrap();
        assert_eq!(r.payload, payload);
        assert_eq!(
            r.payload["x"].as_f64().unwrap().to_bits(),
            (0.1f64 + 0.2).to_bits()
        );
        assert_eq!(r.seed, Some(7));
        assert_eq!(r.id.len(), 64);
    }

    #[test]
    fn same_inputs_stored_once() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let a = s.put(&key(1.0, 1), json!({ "n": 1 }), None).unwrap();
        let b = s.put(&key(1.0, 1), json!({ "n": 1 }), None).unwrap();
        assert_eq!(a, b);
        let text = fs::read_to_string(dir.path().join("standard.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn missing_and_invalid_ids() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        assert!(s.get(&"0".repeat(64)).unwrap().is_none());
        assert!(matches!(s.get("abc"), Err(Error::InvalidId(_))));
        assert!(matches!(s.get(&"G".repeat(64)), Err(Error::InvalidId(_))));
    }

    #[test]
    fn corruption_is_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        let a = s.put(&key(1.0, 1), json!({ "n": 1.5 }), None).unwrap();
        let b = s.put(&key(1.0, 2), json!({ "n": 2.5 }), None).unwrap();
        let path = dir.path().join("standard.jsonl");
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("1.5", "1.25", 1)).unwrap();
        assert!(matches!(s.get(&a), Err(Error::Integrity(_))));
        assert_eq!(s.get(&b).unwrap().unwrap().payload, json!({ "n": 2.5 }));
        // a truncated line
        let text = fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        fs::write(
            &path,
            format!(
                "{}\n{}",
                &first[..first.len() / 2],
                text.lines().nth(1).unwrap()
            ),
        )
        .unwrap();
        assert!(matches!(s.get(&a), Err(Error::Integrity(_))));
        assert!(s.get(&b).unwrap().is_some());
    }

    #[test]
    fn query_in_insertion_order() {
        let dir = tempfile::tempdir().unwrap();
        let s = Store::open(dir.path()).unwrap();
        assert!(s
            .query("standard", &json!({ "k": 1.0 }), "orbits")
            .unwrap()
            .is_empty());
        let ids: Vec<String> = (1..=3)
            .map(|q| s.put(&key(1.0, q), json!({ "q": q }), None).unwrap())
            .collect();
        assert_eq!(
            s.query("standard", &json!({ "k": 1.0 }), "orbits").unwrap(),
            ids
        );
        assert!(s
            .query("standard", &json!({ "k": 0.9 }), "orbits")
            .unwrap()
            .is_empty());
        assert!(s
            .query("standard", &json!({ "k": 1.0 }), "manifold")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn ids_depend_on_every_key_part() {
        let base = key(1.0, 1);
        let mut other = base.clone();
        other.family = "nontwist".into();
        assert_ne!(base.id(), other.id());
        assert_ne!(base.id(), key(1.0, 2).id());
        assert_ne!(base.id(), key(0.5, 1).id());
        assert_eq!(base.id(), key(1.0, 1).id());
    }
}
