//! On-disk formats.
//!
//! A scene directory holds, per scene, `<scene_id>.csv` with the columns
//! `agent_id,role,t,x,y` (rows of one agent in increasing `t`) and a
//! `<scene_id>.json` sidecar with the scene id, scenario kind, domain info
//! and geometry. Generator output adds `manifest.json` with ground truth.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extraction::{Dataset, ExtractionStats, Sample, SampleInput, SampleOutput};
use crate::geometry::Position;
use crate::scalar::Real;
use crate::scene::{AgentRole, AgentTrack, DomainInfo, Geometry, Scene, ScenarioKind, TrackSample};
use crate::splitting::SplitResult;
use crate::synthgen::GroundTruth;

pub const SCENE_COLUMNS: [&str; 5] = ["agent_id", "role", "t", "x", "y"];
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const DATASET_INDEX_FILE: &str = "dataset_index.json";

/// Hex SHA-256 of a value's JSON encoding.
pub fn config_hash<S: Serialize>(value: &S) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        file: path.to_owned(),
        row: e.line(),
        column: format!("char {}", e.column()),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct SceneMeta<T: Real> {
    pub scene_id: String,
    pub scenario_kind: ScenarioKind,
    pub domain_info: DomainInfo,
    pub geometry: Geometry<T>,
}

/// Writes the CSV and sidecar of one scene into `dir`.
pub fn write_scene<T: Real + Serialize>(dir: &Path, scene: &Scene<T>) -> Result<()> {
    create_dir(dir)?;
    let csv_path = dir.join(format!("{}.csv", scene.scene_id));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(SCENE_COLUMNS)?;
    for track in scene.tracks() {
        for s in track.samples() {
            w.write_record([
                track.agent_id.clone(),
                track.role.as_str().to_owned(),
                s.t.to_f64_lossy().to_string(),
                s.position.x.to_f64_lossy().to_string(),
                s.position.y.to_f64_lossy().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let meta = SceneMeta {
        scene_id: scene.scene_id.clone(),
        scenario_kind: scene.scenario_kind,
        domain_info: scene.domain_info.clone(),
        geometry: scene.geometry.clone(),
    };
    write_json(&dir.join(format!("{}.json", scene.scene_id)), &meta)
}

pub fn write_scenes<T: Real + Serialize>(dir: &Path, scenes: &[Scene<T>]) -> Result<()> {
    scenes.iter().try_for_each(|s| write_scene(dir, s))
}

fn schema(file: &Path, row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Schema {
        file: file.to_owned(),
        row,
        column: column.to_owned(),
        reason: reason.into(),
    }
}

/// Reads one scene from its CSV; the sidecar is the same path with a
/// `.json` extension. Rows are numbered from 1 for the header.
pub fn load_scene<T: Real + DeserializeOwned>(csv_path: &Path) -> Result<Scene<T>> {
    let meta: SceneMeta<T> = read_json(&csv_path.with_extension("json"))?;
    let mut reader = csv::Reader::from_path(csv_path).map_err(|e| schema(csv_path, 0, "", e.to_string()))?;
    let headers = reader.headers().map_err(|e| schema(csv_path, 1, "", e.to_string()))?.clone();
    for (i, expected) in SCENE_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(expected) {
            return Err(schema(
                csv_path,
                1,
                expected,
                format!("expected header {:?}, found {:?}", SCENE_COLUMNS, headers.iter().collect::<Vec<_>>()),
            ));
        }
    }
    if headers.len() != SCENE_COLUMNS.len() {
        return Err(schema(csv_path, 1, "", format!("expected {} columns", SCENE_COLUMNS.len())));
    }

    let mut order: Vec<String> = Vec::new();
    let mut agents: BTreeMap<String, (AgentRole, Vec<TrackSample<T>>)> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| schema(csv_path, row, "", e.to_string()))?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let number = |c: usize| -> Result<T> {
            let v: f64 = field(c)
                .trim()
                .parse()
                .map_err(|_| schema(csv_path, row, SCENE_COLUMNS[c], format!("not a number: {:?}", field(c))))?;
            if !v.is_finite() {
                return Err(schema(csv_path, row, SCENE_COLUMNS[c], "not finite"));
            }
            Ok(T::lit(v))
        };
        let agent_id = field(0).to_owned();
        if agent_id.is_empty() {
            return Err(schema(csv_path, row, "agent_id", "empty agent id"));
        }
        let role = AgentRole::parse(field(1))
            .ok_or_else(|| schema(csv_path, row, "role", format!("unknown role {:?}", field(1))))?;
        let sample = TrackSample { t: number(2)?, position: Position::new(number(3)?, number(4)?) };
        let entry = agents.entry(agent_id.clone()).or_insert_with(|| {
            order.push(agent_id.clone());
            (role, Vec::new())
        });
        if entry.0 != role {
            return Err(schema(csv_path, row, "role", format!("agent {agent_id} changes role")));
        }
        if let Some(last) = entry.1.last() {
            if sample.t <= last.t {
                return Err(schema(
                    csv_path,
                    row,
                    "t",
                    format!("agent {agent_id}: timestamp {} not after {}", sample.t, last.t),
                ));
            }
        }
        entry.1.push(sample);
    }
    let tracks = order
        .into_iter()
        .map(|id| {
            let (role, samples) = agents.remove(&id).expect("recorded agent");
            AgentTrack::new(id, role, samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Scene::new(meta.scene_id, meta.scenario_kind, meta.domain_info, meta.geometry, tracks)
}

/// Loads every `*.csv` scene in `dir`, sorted by file name.
pub fn load_scenes<T: Real + DeserializeOwned>(dir: &Path) -> Result<Vec<Scene<T>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.with_extension("json").exists())
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scene(p)).collect()
}

pub fn write_manifest(dir: &Path, truth: &[GroundTruth]) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join(MANIFEST_FILE), &truth)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<GroundTruth>> {
    read_json(&dir.join(MANIFEST_FILE))
}

/// Sidecar of an exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub config_hash: String,
    pub provenance: String,
    pub samples: usize,
    pub stats: ExtractionStats,
}

const DATASET_COLUMNS: [&str; 12] = [
    "scene_id",
    "scenario_kind",
    "t_0",
    "t_s",
    "accepted",
    "t_a",
    "t_c",
    "t_crit",
    "gap_at_t0",
    "n_outputs",
    "input",
    "output",
];

/// One CSV row per sample (summary columns plus JSON-encoded input and
/// output records) and a JSON index with counts.
pub fn write_dataset<T: Real + Serialize>(dir: &Path, dataset: &Dataset<T>, config_hash: &str) -> Result<()> {
    create_dir(dir)?;
    let path = dir.join(DATASET_FILE);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(DATASET_COLUMNS)?;
    for s in &dataset.samples {
        let (i, o) = (&s.input, &s.output);
        w.write_record([
            i.scene_id.clone(),
            i.scenario_kind.to_string(),
            i.t_0.to_string(),
            i.t_s.to_string(),
            u8::from(o.accepted).to_string(),
            o.t_a.to_string(),
            o.t_c.to_string(),
            o.t_crit.to_string(),
            i.gap_at_t0.to_string(),
            i.output_times.len().to_string(),
            serde_json::to_string(i)?,
            serde_json::to_string(o)?,
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(
        &dir.join(DATASET_INDEX_FILE),
        &DatasetIndex {
            config_hash: config_hash.to_owned(),
            provenance: dataset.provenance.clone(),
            samples: dataset.len(),
            stats: dataset.stats.clone(),
        },
    )
}

pub fn read_dataset<T: Real + DeserializeOwned>(dir: &Path) -> Result<(Dataset<T>, DatasetIndex)> {
    let index: DatasetIndex = read_json(&dir.join(DATASET_INDEX_FILE))?;
    let path = dir.join(DATASET_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| schema(&path, 0, "", e.to_string()))?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| schema(&path, row, "", e.to_string()))?;
        let json_col = |c: usize| record.get(c).unwrap_or("");
        let input: SampleInput<T> =
            serde_json::from_str(json_col(10)).map_err(|e| schema(&path, row, "input", e.to_string()))?;
        let output: SampleOutput<T> =
            serde_json::from_str(json_col(11)).map_err(|e| schema(&path, row, "output", e.to_string()))?;
        samples.push(Sample { input, output });
    }
    let dataset = Dataset::new(samples, index.provenance.clone(), index.stats.clone())?;
    Ok((dataset, index))
}

/// Split indices with the method that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub dataset_provenance: String,
    pub split: SplitResult,
}

pub fn write_split(path: &Path, record: &SplitRecord) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    write_json(path, record)
}

pub fn read_split(path: &Path) -> Result<SplitRecord> {
    read_json(path)
}
