//! File-backed session store.
//!
//! ```text
//! <root>/instances/<sha256>.txt     instance payloads, content-addressed
//! <root>/artifacts/<sha256>.json    explanation artifacts, content-addressed
//! <root>/sessions/<id>.json         session record
//! <root>/sessions/<id>.history.json explanation history, append-only
//! ```

use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use exmip_core::iis::IisAlgorithm;
use exmip_core::problems::Family;
use exmip_core::query::{OutcomeCase, Query};
use serde::{Deserialize, Serialize};

use crate::pipeline::{sha256_hex, Artifact, Solved};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Created,
    Solving,
    Solved,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub family: Family,
    /// Hash of the stored instance payload.
    pub instance: String,
    pub status: SessionStatus,
    pub solved: Option<Solved>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub index: usize,
    pub query: Query,
    pub algorithm: IisAlgorithm,
    pub outcome: OutcomeCase,
    /// Hash of the stored artifact.
    pub artifact: String,
}

pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

fn write_atomic(path: &Path, body: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4()));
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Option<T>> {
    match std::fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        for dir in ["instances", "artifacts", "sessions"] {
            std::fs::create_dir_all(root.join(dir))?;
        }
        Ok(Store {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn history_path(&self, id: &str) -> PathBuf {
        self.root
            .join("sessions")
            .join(format!("{id}.history.json"))
    }

    /// Exclusive-access handle for one session id.
    pub fn lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    pub fn create(&self, family: Family, payload: &str) -> io::Result<Session> {
        let hash = sha256_hex(payload.as_bytes());
        let path = self.root.join("instances").join(format!("{hash}.txt"));
        if !path.exists() {
            write_atomic(&path, payload.as_bytes())?;
        }
        let session = Session {
            id: uuid::Uuid::new_v4().to_string(),
            family,
            instance: hash,
            status: SessionStatus::Created,
            solved: None,
            error: None,
        };
        self.put(&session)?;
        write_atomic(&self.history_path(&session.id), b"[]")?;
        Ok(session)
    }

    pub fn get(&self, id: &str) -> io::Result<Option<Session>> {
        if !valid_key(id) {
            return Ok(None);
        }
        read_json(&self.session_path(id))
    }

    pub fn put(&self, session: &Session) -> io::Result<()> {
        let body = serde_json::to_vec_pretty(session).expect("sessions serialize");
        write_atomic(&self.session_path(&session.id), &body)
    }

    pub fn payload(&self, hash: &str) -> io::Result<String> {
        std::fs::read_to_string(self.root.join("instances").join(format!("{hash}.txt")))
    }

    pub fn history(&self, id: &str) -> io::Result<Option<Vec<HistoryEntry>>> {
        if !valid_key(id) {
            return Ok(None);
        }
        read_json(&self.history_path(id))
    }

    /// Stores the artifact and appends a history entry pointing at it.
    pub fn append(&self, id: &str, artifact: &Artifact) -> io::Result<HistoryEntry> {
        let hash = self.put_artifact(artifact)?;
        let mut history = self.history(id)?.unwrap_or_default();
        let entry = HistoryEntry {
            index: history.len(),
            query: artifact.query.clone(),
            algorithm: artifact.algorithm,
            outcome: artifact.outcome,
            artifact: hash,
        };
        history.push(entry.clone());
        let body = serde_json::to_vec_pretty(&history).expect("history serializes");
        write_atomic(&self.history_path(id), &body)?;
        Ok(entry)
    }

    pub fn put_artifact(&self, artifact: &Artifact) -> io::Result<String> {
        let hash = artifact.hash();
        let path = self.root.join("artifacts").join(format!("{hash}.json"));
        if !path.exists() {
            write_atomic(&path, artifact.to_json().as_bytes())?;
        }
        Ok(hash)
    }

    pub fn artifact(&self, hash: &str) -> io::Result<Option<Artifact>> {
        if !valid_key(hash) {
            return Ok(None);
        }
        read_json(&self.root.join("artifacts").join(format!("{hash}.json")))
    }
}
