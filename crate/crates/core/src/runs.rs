//! Scenario evaluation against a loaded model, and append-only run records.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analytics::UtilitySpec;
use crate::document::{content_hash, pretty_json, LoadedModel, ScenarioDocument, ScenarioError};
use crate::error::{Error, Result};
use crate::temporal::{evaluate_scenario, UtilityTimeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMarginals {
    pub slice: usize,
    /// Distribution over each variable's states, keyed by variable name.
    pub marginals: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub model_hash: String,
    pub scenario: ScenarioDocument,
    pub timeline: UtilityTimeline,
    pub marginals: Vec<SliceMarginals>,
}

#[derive(Debug)]
pub enum EvaluationError {
    Scenario(ScenarioError),
    Engine(Error),
}

impl std::fmt::Display for EvaluationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Scenario(e) => e.fmt(f),
            Self::Engine(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for EvaluationError {}

impl From<Error> for EvaluationError {
    fn from(e: Error) -> Self {
        Self::Engine(e)
    }
}

/// The scenario's utility override, else the model's own.
pub fn utility_for<'a>(model: &'a LoadedModel, doc: &'a ScenarioDocument) -> Result<&'a UtilitySpec> {
    doc.utility
        .as_ref()
        .or(model.utility())
        .ok_or_else(|| Error::InvalidUtility("neither the scenario nor the model defines a utility".into()))
}

pub fn evaluate(model: &LoadedModel, doc: &ScenarioDocument) -> std::result::Result<Evaluation, EvaluationError> {
    let scenario = doc.resolve(&model.dbn).map_err(EvaluationError::Scenario)?;
    let spec = utility_for(model, doc)?;
    let run = evaluate_scenario(&model.dbn, &scenario, doc.horizon, spec)?;
    let marginals = run
        .marginals
        .into_iter()
        .enumerate()
        .map(|(i, slice)| SliceMarginals {
            slice: i + 1,
            marginals: slice.into_iter().map(|m| (m.variable, m.distribution)).collect(),
        })
        .collect();
    Ok(Evaluation {
        model_hash: model.hash.clone(),
        scenario: doc.clone(),
        timeline: run.timeline,
        marginals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Hash of the model hash and the canonical scenario document.
    pub id: String,
    pub model_hash: String,
    pub scenario: ScenarioDocument,
    pub timeline: UtilityTimeline,
    pub marginals: Vec<SliceMarginals>,
    /// Seconds since the Unix epoch at first persistence.
    pub created_unix: u64,
}

#[derive(Serialize)]
struct RunKey<'a> {
    model_hash: &'a str,
    scenario: &'a ScenarioDocument,
}

impl RunRecord {
    pub fn id_for(model_hash: &str, scenario: &ScenarioDocument) -> Result<String> {
        content_hash(&RunKey { model_hash, scenario })
    }

    pub fn from_evaluation(e: Evaluation) -> Result<Self> {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or_default();
        Ok(Self {
            id: Self::id_for(&e.model_hash, &e.scenario)?,
            model_hash: e.model_hash,
            scenario: e.scenario,
            timeline: e.timeline,
            marginals: e.marginals,
            created_unix,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub id: String,
    pub model_hash: String,
    pub scenario: String,
    pub horizon: usize,
    pub created_unix: u64,
}

/// One JSON file per run, named by id. Files are never rewritten.
#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}

impl RunStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    /// Persist `record` unless a run with its id exists; returns the
    /// stored record either way.
    pub fn append(&self, record: &RunRecord) -> Result<RunRecord> {
        if !valid_id(&record.id) {
            return Err(Error::InvalidQuery(format!("malformed run id `{}`", record.id)));
        }
        if let Some(existing) = self.get(&record.id)? {
            return Ok(existing);
        }
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(pretty_json(record)?.as_bytes())?;
        tmp.as_file().sync_all()?;
        match tmp.persist_noclobber(self.path(&record.id)) {
            Ok(_) => Ok(record.clone()),
            // Lost a race with an identical write.
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => {
                self.get(&record.id)?.ok_or(Error::Io(e.error))
            }
            Err(e) => Err(Error::Io(e.error)),
        }
    }

    pub fn get(&self, id: &str) -> Result<Option<RunRecord>> {
        if !valid_id(id) {
            return Ok(None);
        }
        match std::fs::read_to_string(self.path(id)) {
            Ok(text) => Ok(Some(crate::document::parse_json(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    /// Oldest first, ties by id.
    pub fn list(&self) -> Result<Vec<RunSummary>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".json"))
            else {
                continue;
            };
            if let Some(r) = self.get(id)? {
                out.push(RunSummary {
                    id: r.id,
                    model_hash: r.model_hash,
                    scenario: r.scenario.name,
                    horizon: r.scenario.horizon,
                    created_unix: r.created_unix,
                });
            }
        }
        out.sort_by(|a, b| a.created_unix.cmp(&b.created_unix).then_with(|| a.id.cmp(&b.id)));
        Ok(out)
    }
}
