//! Flat-file persistence and run provenance.
//!
//! Layout under a store root:
//!
//! ```text
//! runs/<id>/manifest.json
//! runs/<id>/scenario.json
//! runs/<id>/assignment.json   (+ assignment.csv)
//! runs/<id>/report.json       (+ report.csv)
//! datasets/<name>.txt
//! models/<name>.json
//! ```
//!
//! JSON artifacts are wrapped in an envelope carrying `schema_version` and
//! `kind`; loading checks both.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::PerfReport;
use crate::surrogate::{Dataset, TrainedModel};
use crate::types::{Assignment, ProtocolParams, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    kind: String,
    data: T,
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

pub fn save_json<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let env = Envelope { schema_version: SCHEMA_VERSION, kind: kind.to_string(), data: value };
    serde_json::to_writer_pretty(&mut w, &env).map_err(|e| parse_err(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion { path: path.into(), found: header.schema_version, expected: SCHEMA_VERSION });
    }
    if header.kind != kind {
        return Err(Error::Parse { path: path.into(), message: format!("expected a {kind} file, found {}", header.kind) });
    }
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    Ok(env.data)
}

fn parse_err(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse { path: path.into(), message: e.to_string() }
}

pub fn save_scenario(path: &Path, s: &Scenario) -> Result<()> {
    save_json(path, "scenario", s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_json(path, "scenario")
}

pub fn save_assignment(path: &Path, a: &Assignment) -> Result<()> {
    save_json(path, "assignment", a)
}

pub fn load_assignment(path: &Path) -> Result<Assignment> {
    load_json(path, "assignment")
}

/// `device_id,class,slot,mini_slot`; unassigned devices have empty cells.
pub fn write_assignment_csv<W: Write>(mut w: W, scenario: &Scenario, a: &Assignment) -> std::io::Result<()> {
    writeln!(w, "device_id,class,slot,mini_slot")?;
    for d in &scenario.devices {
        match a.anchor(d.id) {
            Some(an) => writeln!(w, "{},{},{},{}", d.id, d.class, an.slot, an.mini_slot)?,
            None => writeln!(w, "{},{},,", d.id, d.class)?,
        }
    }
    Ok(())
}

pub fn save_report(path: &Path, r: &PerfReport) -> Result<()> {
    save_json(path, "report", r)
}

pub fn load_report(path: &Path) -> Result<PerfReport> {
    load_json(path, "report")
}

pub fn save_model(path: &Path, m: &TrainedModel) -> Result<()> {
    save_json(path, "model", m)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    load_json(path, "model")
}

pub fn save_dataset(path: &Path, d: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    d.write(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::read(BufReader::new(file), path)
}

/// SHA-256 over the QoS and the sorted per-device records, so listing order
/// does not matter.
pub fn scenario_hash(s: &Scenario) -> String {
    let mut lines: Vec<String> = s
        .devices
        .iter()
        .map(|d| serde_json::to_string(d).expect("device profiles serialize"))
        .collect();
    lines.sort_unstable();
    let mut h = Sha256::new();
    h.update(serde_json::to_string(&s.qos).expect("qos serializes").as_bytes());
    for l in &lines {
        h.update(b"\n");
        h.update(l.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub tool_version: String,
    pub scenario_hash: Option<String>,
    pub params: Option<ProtocolParams>,
    pub seeds: Vec<(String, u64)>,
    /// Seconds since the Unix epoch at creation.
    pub created: u64,
    pub wall_clock_s: f64,
    pub options: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            id: String::new(),
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_hash: None,
            params: None,
            seeds: Vec::new(),
            created: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_s: 0.0,
            options: serde_json::Value::Null,
        }
    }
}

/// Root of the on-disk layout.
#[derive(Debug, Clone)]
pub struct Store {
    pub root: PathBuf,
}

/// A run directory owned by one writer.
#[derive(Debug)]
pub struct RunDir {
    pub id: String,
    pub path: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn ensure(&self, sub: &str) -> Result<PathBuf> {
        let p = self.root.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn datasets(&self) -> Result<PathBuf> {
        self.ensure("datasets")
    }

    pub fn models(&self) -> Result<PathBuf> {
        self.ensure("models")
    }

    /// Creates `runs/<prefix>-<n>` with the first free `n`. Directory
    /// creation is atomic, so concurrent callers never share a run.
    pub fn create_run(&self, prefix: &str) -> Result<RunDir> {
        let runs = self.ensure("runs")?;
        for n in 1u32.. {
            let id = format!("{prefix}-{n:04}");
            let path = runs.join(&id);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { id, path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
        unreachable!("run counter exhausted")
    }
}

impl RunDir {
    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Writes the manifest once; an existing manifest is never replaced.
    pub fn write_manifest(&self, m: &RunManifest) -> Result<()> {
        let path = self.file("manifest.json");
        let file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let env = Envelope { schema_version: SCHEMA_VERSION, kind: "manifest".to_string(), data: m };
        serde_json::to_writer_pretty(&mut w, &env).map_err(|e| parse_err(&path, e))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))
    }

    pub fn read_manifest(&self) -> Result<RunManifest> {
        load_json(&self.file("manifest.json"), "manifest")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::GeneratorSpec;
    use crate::types::QosSpec;

    #[test]
    fn scenario_round_trip_and_hash_order() {
        let dir = tempfile::tempdir().unwrap();
        let s = GeneratorSpec::industrial().generate(QosSpec::industrial_default(), 3).unwrap();
        let p = dir.path().join("s.json");
        save_scenario(&p, &s).unwrap();
        assert_eq!(load_scenario(&p).unwrap(), s);

        let mut shuffled = s.clone();
        shuffled.devices.reverse();
        assert_eq!(scenario_hash(&s), scenario_hash(&shuffled));
        let mut changed = s.clone();
        changed.devices[0].rate += 1e-9;
        assert_ne!(scenario_hash(&s), scenario_hash(&changed));
    }

    #[test]
    fn schema_and_kind_gates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        save_assignment(&p, &Assignment::empty(2)).unwrap();
        assert!(matches!(load_scenario(&p), Err(Error::Parse { .. })));
        let text = fs::read_to_string(&p).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 2");
        fs::write(&p, text).unwrap();
        assert!(matches!(load_assignment(&p), Err(Error::SchemaVersion { found: 2, .. })));
    }

    #[test]
    fn runs_get_distinct_dirs_and_manifests_are_write_once() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let a = store.create_run("sim").unwrap();
        let b = store.create_run("sim").unwrap();
        assert_ne!(a.path, b.path);
        let mut m = RunManifest::new("simulate");
        m.id = a.id.clone();
        m.seeds.push(("sim".into(), 7));
        a.write_manifest(&m).unwrap();
        assert_eq!(a.read_manifest().unwrap(), m);
        assert!(a.write_manifest(&m).is_err());
    }
}
