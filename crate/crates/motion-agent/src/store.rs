//! Append-only session log: one file per session holding length-prefixed
//! JSON records, replayed in order on load.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use motion_agent_core::agent::{MotionRecord, Session, Turn};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum Record {
    Created { id: String, at: u64 },
    Turn { turn: Turn, motions: Vec<MotionRecord> },
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session '{0}' not found")]
    NotFound(String),
    #[error("session '{0}' already exists")]
    Exists(String),
    #[error("invalid session id '{0}'")]
    BadId(String),
    #[error("{path}: corrupt record at offset {offset}")]
    Corrupt { path: PathBuf, offset: usize },
    #[error("replay: {0}")]
    Replay(#[from] motion_agent_core::agent::AgentError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl SessionStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::BadId(id.into()));
        }
        Ok(self.dir.join(format!("{id}.log")))
    }

    fn append(&self, path: &Path, record: &Record) -> Result<(), StoreError> {
        let body = serde_json::to_vec(record)?;
        let mut buf = Vec::with_capacity(body.len() + 4);
        buf.extend_from_slice(&(body.len() as u32).to_le_bytes());
        buf.extend_from_slice(&body);
        let mut f = OpenOptions::new().append(true).open(path)?;
        f.write_all(&buf)?;
        f.sync_data()?;
        Ok(())
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).map(|p| p.exists()).unwrap_or(false)
    }

    pub fn create(&self, id: &str, now: u64) -> Result<Session, StoreError> {
        let path = self.path(id)?;
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(StoreError::Exists(id.into())),
            Err(e) => return Err(e.into()),
        }
        self.append(&path, &Record::Created { id: id.into(), at: now })?;
        Ok(Session::new(id, now))
    }

    /// Next free id of the form `s<n>`.
    pub fn next_id(&self) -> Result<String, StoreError> {
        let n = self.ids()?.len();
        (n + 1..).map(|i| format!("s{i}")).find(|id| !self.exists(id)).ok_or_else(|| StoreError::BadId("s".into()))
    }

    pub fn append_turn(&self, id: &str, turn: &Turn, motions: &[MotionRecord]) -> Result<(), StoreError> {
        let path = self.path(id)?;
        if !path.exists() {
            return Err(StoreError::NotFound(id.into()));
        }
        self.append(&path, &Record::Turn { turn: turn.clone(), motions: motions.to_vec() })
    }

    pub fn records(&self, id: &str) -> Result<Vec<Record>, StoreError> {
        let path = self.path(id)?;
        let mut bytes = Vec::new();
        match File::open(&path) {
            Ok(mut f) => f.read_to_end(&mut bytes)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.into())),
            Err(e) => return Err(e.into()),
        };
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let corrupt = || StoreError::Corrupt { path: path.clone(), offset: pos };
            let len_bytes = bytes.get(pos..pos + 4).ok_or_else(corrupt)?;
            let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
            let body = bytes.get(pos + 4..pos + 4 + len).ok_or_else(corrupt)?;
            out.push(serde_json::from_slice(body).map_err(|_| corrupt())?);
            pos += 4 + len;
        }
        Ok(out)
    }

    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let mut session: Option<Session> = None;
        let path = self.path(id)?;
        for (i, r) in self.records(id)?.into_iter().enumerate() {
            match (r, session.as_mut()) {
                (Record::Created { id, at }, None) => session = Some(Session::new(&id, at)),
                (Record::Turn { turn, motions }, Some(s)) => s.commit(turn, motions)?,
                _ => return Err(StoreError::Corrupt { path, offset: i }),
            }
        }
        session.ok_or(StoreError::NotFound(id.into()))
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".log")).map(str::to_owned))
            .collect();
        ids.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        Ok(ids)
    }
}
