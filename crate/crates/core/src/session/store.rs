//! One JSON document per session plus an index, written atomically.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Phase, Result, SessionError, SessionState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub session_id: String,
    pub name: String,
    pub phase: Phase,
    pub trial_counter: u32,
    pub updated_at: DateTime<Utc>,
}

impl From<&SessionState> for IndexEntry {
    fn from(s: &SessionState) -> Self {
        Self {
            session_id: s.session_id.clone(),
            name: s.name.clone(),
            phase: s.phase,
            trial_counter: s.trial_counter,
            updated_at: s.updated_at,
        }
    }
}

/// Directory-backed session storage. Mutations of one session are
/// serialized within the process.
pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    index_lock: Mutex<()>,
}

fn storage(e: impl std::fmt::Display) -> SessionError {
    SessionError::Storage(e.to_string())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(storage)?;
    tmp.write_all(bytes).map_err(storage)?;
    tmp.as_file().sync_all().map_err(storage)?;
    tmp.persist(path).map_err(|e| storage(e.error))?;
    Ok(())
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| storage(format!("{}: {e}", root.display())))?;
        Ok(Self { root, locks: Mutex::new(HashMap::new()), index_lock: Mutex::new(()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_of(&self, id: &str) -> Result<PathBuf> {
        // ids are uuids; anything else could escape the directory
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(SessionError::NotFound(id.to_string()));
        }
        Ok(self.root.join(format!("{id}.json")))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    pub fn load(&self, id: &str) -> Result<SessionState> {
        let path = self.path_of(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SessionError::NotFound(id.to_string())),
            Err(e) => return Err(storage(format!("{}: {e}", path.display()))),
        };
        serde_json::from_str(&text).map_err(|e| storage(format!("{}: {e}", path.display())))
    }

    fn write(&self, state: &SessionState) -> Result<()> {
        let path = self.path_of(&state.session_id)?;
        let bytes = serde_json::to_vec_pretty(state).map_err(storage)?;
        write_atomic(&path, &bytes)?;
        self.update_index(state)
    }

    fn update_index(&self, state: &SessionState) -> Result<()> {
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut index = self.read_index()?;
        let entry = IndexEntry::from(state);
        match index.iter_mut().find(|e| e.session_id == entry.session_id) {
            Some(slot) => *slot = entry,
            None => index.push(entry),
        }
        let bytes = serde_json::to_vec_pretty(&index).map_err(storage)?;
        write_atomic(&self.root.join("index.json"), &bytes)
    }

    fn read_index(&self) -> Result<Vec<IndexEntry>> {
        let path = self.root.join("index.json");
        match fs::read_to_string(&path) {
            Ok(t) => serde_json::from_str(&t).map_err(|e| storage(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(storage(format!("{}: {e}", path.display()))),
        }
    }

    /// Stores a new session; fails if the id is taken.
    pub fn insert(&self, state: &SessionState) -> Result<()> {
        let lock = self.lock_for(&state.session_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if self.path_of(&state.session_id)?.exists() {
            return Err(storage(format!("session {} already exists", state.session_id)));
        }
        self.write(state)
    }

    pub fn list(&self) -> Result<Vec<IndexEntry>> {
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.read_index()
    }

    /// Applies `f` under the session's lock and saves whatever state it
    /// leaves behind, including partial progress before an error.
    pub fn update<T>(&self, id: &str, f: impl FnOnce(&mut SessionState) -> Result<T>) -> Result<T> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let before = self.load(id)?;
        let mut state = before.clone();
        let out = f(&mut state);
        if state != before {
            self.write(&state)?;
        }
        out
    }
}
