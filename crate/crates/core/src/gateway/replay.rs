//! Replays recorded exchanges from a JSON Lines transcript.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{request_hash, ChatBackend, Conversation, GatewayError, ModelReply, TranscriptEntry};

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, GatewayError> {
    let text =
        fs::read_to_string(path).map_err(|e| GatewayError::Storage(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| GatewayError::Storage(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Exclusive claim on a transcript, released on drop.
struct TranscriptLock {
    path: PathBuf,
}

impl TranscriptLock {
    fn acquire(transcript: &Path) -> Result<Self, GatewayError> {
        let mut name = transcript.as_os_str().to_owned();
        name.push(".lock");
        let path = PathBuf::from(name);
        let mut file = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            GatewayError::Storage(format!("transcript {} is in use ({e})", transcript.display()))
        })?;
        let _ = writeln!(file, "{}", std::process::id());
        Ok(Self { path })
    }
}

impl Drop for TranscriptLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

pub struct ReplayBackend {
    entries: Vec<TranscriptEntry>,
    cursor: usize,
    model: Option<String>,
    _lock: TranscriptLock,
}

impl ReplayBackend {
    /// `model` overrides the recorded model name in the request hash.
    pub fn open(path: &Path, model: Option<String>) -> Result<Self, GatewayError> {
        let lock = TranscriptLock::acquire(path)?;
        let entries = read_transcript(path)?;
        Ok(Self { entries, cursor: 0, model, _lock: lock })
    }

    /// Continue after `cursor` already-consumed exchanges.
    pub fn with_cursor(mut self, cursor: usize) -> Self {
        self.cursor = cursor;
        self
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.entries.len().saturating_sub(self.cursor)
    }
}

impl ChatBackend for ReplayBackend {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&mut self, conv: &Conversation) -> Result<ModelReply, GatewayError> {
        conv.validate_request()?;
        let entry = self.entries.get(self.cursor).ok_or(GatewayError::ReplayExhausted(self.cursor))?;
        let model = self.model.as_deref().unwrap_or(&entry.request.model);
        let actual = request_hash(conv, model);
        if actual != entry.request_hash {
            return Err(GatewayError::ReplayMismatch {
                index: self.cursor,
                expected: entry.request_hash.clone(),
                actual,
            });
        }
        self.cursor += 1;
        Ok(entry.reply.clone())
    }

    fn model(&self) -> Option<&str> {
        self.model.as_deref().or_else(|| self.entries.get(self.cursor).map(|e| e.request.model.as_str()))
    }
}
