//! A flat directory of pack files, keyed by file stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use tutorloop_core::{ContentPack, IssueCode, Strictness, ValidationReport};

#[derive(Debug, Clone)]
pub enum PackState {
    Valid(Box<ContentPack>),
    Invalid(ValidationReport),
}

#[derive(Debug, Clone)]
pub struct PackEntry {
    pub id: String,
    pub path: PathBuf,
    pub state: PackState,
}

/// Reads and validates one pack file. JSON that does not decode becomes a
/// report with a single `MalformedJson` error.
pub fn load_pack_file(path: &Path, strictness: Strictness) -> std::io::Result<PackState> {
    let text = std::fs::read_to_string(path)?;
    Ok(match ContentPack::from_json_str(&text, strictness) {
        Ok(loaded) if loaded.report.ok => PackState::Valid(Box::new(loaded.pack)),
        Ok(loaded) => PackState::Invalid(loaded.report),
        Err(e) => PackState::Invalid(malformed(path, &e)),
    })
}

/// The report for a file whose JSON does not decode into a pack.
pub fn malformed(path: &Path, error: &impl std::fmt::Display) -> ValidationReport {
    let mut report = ValidationReport::new();
    report.error(IssueCode::MalformedJson, path.display().to_string(), error.to_string());
    report
}

#[derive(Debug, Clone, Default)]
pub struct PackRegistry {
    entries: BTreeMap<String, PackEntry>,
}

impl PackRegistry {
    /// Loads every `*.json` file in `dir`. Packs are validated strictly.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut entries = BTreeMap::new();
        for item in std::fs::read_dir(dir)? {
            let path = item?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else { continue };
            let state = load_pack_file(&path, Strictness::Strict)?;
            if let PackState::Valid(p) = &state {
                if p.pack_id != id {
                    tracing::warn!(file = %path.display(), pack_id = %p.pack_id, "pack_id differs from file name; serving under file name");
                }
            }
            entries.insert(id.clone(), PackEntry { id, path, state });
        }
        Ok(Self { entries })
    }

    /// Adds (or replaces) one pack file under its file stem.
    pub fn add_file(&mut self, path: &Path) -> std::io::Result<String> {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "pack path has no file name"))?
            .to_owned();
        let state = load_pack_file(path, Strictness::Strict)?;
        self.entries.insert(id.clone(), PackEntry { id: id.clone(), path: path.to_owned(), state });
        Ok(id)
    }

    pub fn from_packs(packs: impl IntoIterator<Item = ContentPack>) -> Self {
        let entries = packs
            .into_iter()
            .map(|p| {
                let id = p.pack_id.clone();
                (id.clone(), PackEntry { id, path: PathBuf::new(), state: PackState::Valid(Box::new(p)) })
            })
            .collect();
        Self { entries }
    }

    pub fn get(&self, id: &str) -> Option<&PackEntry> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PackEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
