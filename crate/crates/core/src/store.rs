//! Append-only event storage: one JSON line per event, one file per session.

use crate::events::SessionEvent;
use crate::session::{EngineError, EventSink, FoldError, Session};
use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session {0} already exists")]
    AlreadyExists(String),
    #[error("sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("corrupt event on line {line}: {reason}")]
    CorruptEvent { line: usize, reason: String },
    #[error("invalid session id {0:?}")]
    InvalidSessionId(String),
    #[error(transparent)]
    Fold(FoldError),
}

impl From<FoldError> for StoreError {
    fn from(e: FoldError) -> Self {
        match e {
            FoldError::SequenceGap { expected, found } => Self::SequenceGap { expected, found },
            other => Self::Fold(other),
        }
    }
}

/// Events read back from storage plus anything skipped on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLog {
    pub events: Vec<SessionEvent>,
    pub warnings: Vec<String>,
}

pub trait EventStore: Send + Sync {
    /// Appends events for one session. The first event must continue the
    /// stored sequence.
    fn append_events(&self, events: &[SessionEvent]) -> Result<(), StoreError>;
    fn load_events(&self, session_id: &str) -> Result<LoadedLog, StoreError>;
    fn session_ids(&self) -> Result<Vec<String>, StoreError>;

    fn load_session(&self, session_id: &str) -> Result<(Session, Vec<String>), StoreError> {
        let log = self.load_events(session_id)?;
        Ok((Session::replay(&log.events)?, log.warnings))
    }
}

impl<T: EventStore + ?Sized> EventSink for T {
    fn append(&self, events: &[SessionEvent]) -> Result<(), EngineError> {
        Ok(self.append_events(events)?)
    }
}

fn check_batch(last: Option<u64>, events: &[SessionEvent]) -> Result<(), StoreError> {
    for (expected, e) in (last.map_or(0, |s| s + 1)..).zip(events) {
        if e.seq != expected {
            return Err(StoreError::SequenceGap { expected, found: e.seq });
        }
    }
    Ok(())
}

fn single_session(events: &[SessionEvent]) -> Result<Option<&str>, StoreError> {
    let Some(first) = events.first() else { return Ok(None) };
    if let Some(other) = events.iter().find(|e| e.session_id != first.session_id) {
        return Err(StoreError::InvalidSessionId(other.session_id.clone()));
    }
    Ok(Some(&first.session_id))
}

#[derive(Debug, Default)]
pub struct MemoryEventStore {
    logs: Mutex<HashMap<String, Vec<SessionEvent>>>,
}

impl MemoryEventStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryEventStore {
    fn append_events(&self, events: &[SessionEvent]) -> Result<(), StoreError> {
        let Some(id) = single_session(events)? else { return Ok(()) };
        let mut logs = self.logs.lock().expect("store lock");
        let log = logs.entry(id.to_owned()).or_default();
        check_batch(log.last().map(|e| e.seq), events)?;
        log.extend_from_slice(events);
        Ok(())
    }

    fn load_events(&self, session_id: &str) -> Result<LoadedLog, StoreError> {
        let logs = self.logs.lock().expect("store lock");
        let events = logs.get(session_id).cloned().ok_or_else(|| StoreError::NotFound(session_id.to_owned()))?;
        Ok(LoadedLog { events, warnings: Vec::new() })
    }

    fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = self.logs.lock().expect("store lock").keys().cloned().collect();
        ids.sort();
        Ok(ids)
    }
}

/// Parses log text. A final line without its newline that ends mid-document
/// is treated as an interrupted write: it is dropped with a warning.
pub fn parse_log(text: &str) -> Result<LoadedLog, StoreError> {
    let mut events = Vec::new();
    let mut warnings = Vec::new();
    let terminated = text.ends_with('\n');
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let last_unterminated = i + 1 == lines.len() && !terminated;
        let event: SessionEvent = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(e) if last_unterminated && e.is_eof() => {
                warnings.push(format!("line {}: truncated final event dropped", i + 1));
                break;
            }
            Err(e) => return Err(StoreError::CorruptEvent { line: i + 1, reason: e.to_string() }),
        };
        if event.to_line() != *line {
            return Err(StoreError::CorruptEvent { line: i + 1, reason: "not in canonical encoding".into() });
        }
        if let Some(prev) = events.last().map(|e: &SessionEvent| e.seq) {
            if event.seq != prev + 1 {
                return Err(StoreError::SequenceGap { expected: prev + 1, found: event.seq });
            }
        }
        events.push(event);
    }
    Ok(LoadedLog { events, warnings })
}

pub fn read_log_file(path: &Path) -> Result<LoadedLog, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_log(&text)
}

/// One `<session_id>.jsonl` file per session under a directory.
#[derive(Debug)]
pub struct FileEventStore {
    dir: PathBuf,
    last_seq: Mutex<HashMap<String, u64>>,
}

impl FileEventStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.display().to_string(), source })?;
        Ok(Self { dir, last_seq: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        let ok = !session_id.is_empty()
            && session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !ok {
            return Err(StoreError::InvalidSessionId(session_id.to_owned()));
        }
        Ok(self.dir.join(format!("{session_id}.jsonl")))
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
        move |source| StoreError::Io { path: path.display().to_string(), source }
    }

    /// Drops a torn final line so new events start on a fresh line.
    fn heal_tail(path: &Path) -> Result<(), StoreError> {
        let bytes = fs::read(path).map_err(Self::io(path))?;
        if bytes.is_empty() || bytes.ends_with(b"\n") {
            return Ok(());
        }
        let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
        tracing::warn!(path = %path.display(), dropped = bytes.len() - keep, "discarding torn final line");
        let file = OpenOptions::new().write(true).open(path).map_err(Self::io(path))?;
        file.set_len(keep as u64).map_err(Self::io(path))
    }
}

impl EventStore for FileEventStore {
    fn append_events(&self, events: &[SessionEvent]) -> Result<(), StoreError> {
        let Some(id) = single_session(events)? else { return Ok(()) };
        let path = self.path_for(id)?;
        let mut cache = self.last_seq.lock().expect("store lock");
        let last = match cache.get(id) {
            Some(s) => Some(*s),
            None if path.exists() => {
                Self::heal_tail(&path)?;
                read_log_file(&path)?.events.last().map(|e| e.seq)
            }
            None => None,
        };
        check_batch(last, events)?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&e.to_line());
            buf.push('\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(Self::io(&path))?;
        file.write_all(buf.as_bytes()).map_err(Self::io(&path))?;
        file.flush().map_err(Self::io(&path))?;
        cache.insert(id.to_owned(), events.last().expect("non-empty batch").seq);
        Ok(())
    }

    fn load_events(&self, session_id: &str) -> Result<LoadedLog, StoreError> {
        let path = self.path_for(session_id)?;
        if !path.exists() {
            return Err(StoreError::NotFound(session_id.to_owned()));
        }
        read_log_file(&path)
    }

    fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(Self::io(&self.dir))? {
            let path = entry.map_err(Self::io(&self.dir))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_owned());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
