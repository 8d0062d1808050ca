//! JSON-lines event store.
//!
//! Layout:
//!
//! ```text
//! <root>/store.json                  schema_version + per-endpoint sync state
//! <root>/<owner>__<name>/<kind>.jsonl one ActionEvent per line, canonical order
//! ```
//!
//! Records are identified by their source node id and are never replaced or
//! removed once stored. Each `.jsonl` file is rewritten in canonical order
//! (timestamp, then id) on flush, so identical record sets give identical
//! bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ActionEvent, EventKind, IngestError, ProjectRef};
use crate::util::write_atomic;
use crate::SCHEMA_VERSION;

pub const STORE_MANIFEST: &str = "store.json";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSync {
    /// Page to resume from after an interrupted fetch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_url: Option<String>,
    pub complete: bool,
    #[serde(default)]
    pub pages: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<DateTime<Utc>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoreManifest {
    pub schema_version: u32,
    /// project -> endpoint -> sync state
    #[serde(default)]
    pub sync: BTreeMap<String, BTreeMap<String, EndpointSync>>,
}

impl Default for StoreManifest {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sync: BTreeMap::new(),
        }
    }
}

type Partition = BTreeMap<String, ActionEvent>;

#[derive(Debug)]
pub struct EventStore {
    root: PathBuf,
    manifest: StoreManifest,
    partitions: BTreeMap<(ProjectRef, EventKind), Partition>,
    dirty: BTreeSet<(ProjectRef, EventKind)>,
    manifest_dirty: bool,
}

fn store_err(path: &Path, message: impl ToString) -> IngestError {
    IngestError::Store {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn kind_from_file(path: &Path) -> Option<EventKind> {
    let stem = path.file_stem()?.to_str()?;
    EventKind::ALL.into_iter().find(|k| k.as_str() == stem)
}

impl EventStore {
    /// Open (or create) the store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, IngestError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| store_err(&root, e))?;
        let manifest_path = root.join(STORE_MANIFEST);
        let manifest = if manifest_path.exists() {
            let text =
                fs::read_to_string(&manifest_path).map_err(|e| store_err(&manifest_path, e))?;
            let m: StoreManifest =
                serde_json::from_str(&text).map_err(|e| store_err(&manifest_path, e))?;
            if m.schema_version != SCHEMA_VERSION {
                return Err(store_err(
                    &manifest_path,
                    format!(
                        "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                        m.schema_version
                    ),
                ));
            }
            m
        } else {
            StoreManifest::default()
        };

        let mut store = Self {
            root,
            manifest,
            partitions: BTreeMap::new(),
            dirty: BTreeSet::new(),
            manifest_dirty: false,
        };
        store.load_records()?;
        Ok(store)
    }

    fn load_records(&mut self) -> Result<(), IngestError> {
        let mut dirs: Vec<PathBuf> = fs::read_dir(&self.root)
            .map_err(|e| store_err(&self.root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for dir in dirs {
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .map_err(|e| store_err(&dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            files.sort();
            for file in files {
                let Some(kind) = kind_from_file(&file) else {
                    log::warn!("ignoring unknown store file {}", file.display());
                    continue;
                };
                let text = fs::read_to_string(&file).map_err(|e| store_err(&file, e))?;
                for (lineno, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let event: ActionEvent = serde_json::from_str(line)
                        .map_err(|e| store_err(&file, format!("line {}: {e}", lineno + 1)))?;
                    if event.kind != kind {
                        return Err(store_err(
                            &file,
                            format!("line {}: kind {} in {} file", lineno + 1, event.kind, kind),
                        ));
                    }
                    self.partitions
                        .entry((event.project.clone(), kind))
                        .or_default()
                        .entry(event.id.clone())
                        .or_insert(event);
                }
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    /// Add events; returns how many were new. Known ids are left untouched.
    pub fn insert(&mut self, events: impl IntoIterator<Item = ActionEvent>) -> usize {
        let mut added = 0;
        for event in events {
            let key = (event.project.clone(), event.kind);
            let part = self.partitions.entry(key.clone()).or_default();
            if part.contains_key(&event.id) {
                continue;
            }
            part.insert(event.id.clone(), event);
            self.dirty.insert(key);
            added += 1;
        }
        added
    }

    pub fn contains(&self, project: &ProjectRef, kind: EventKind, id: &str) -> bool {
        self.partitions
            .get(&(project.clone(), kind))
            .is_some_and(|p| p.contains_key(id))
    }

    pub fn len(&self) -> usize {
        self.partitions.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn projects(&self) -> BTreeSet<ProjectRef> {
        self.partitions.keys().map(|(p, _)| p.clone()).collect()
    }

    /// All events in canonical replay order.
    pub fn events(&self) -> Vec<ActionEvent> {
        let mut all: Vec<ActionEvent> = self
            .partitions
            .values()
            .flat_map(|p| p.values().cloned())
            .collect();
        all.sort_by(ActionEvent::canonical_cmp);
        all
    }

    pub fn project_events(&self, project: &ProjectRef) -> Vec<ActionEvent> {
        let mut all: Vec<ActionEvent> = self
            .partitions
            .iter()
            .filter(|((p, _), _)| p == project)
            .flat_map(|(_, part)| part.values().cloned())
            .collect();
        all.sort_by(ActionEvent::canonical_cmp);
        all
    }

    pub fn sync_state(&self, project: &ProjectRef, endpoint: &str) -> Option<&EndpointSync> {
        self.manifest.sync.get(&project.to_string())?.get(endpoint)
    }

    pub fn set_sync_state(&mut self, project: &ProjectRef, endpoint: &str, state: EndpointSync) {
        self.manifest
            .sync
            .entry(project.to_string())
            .or_default()
            .insert(endpoint.to_string(), state);
        self.manifest_dirty = true;
    }

    /// Persist changed partitions (canonically sorted) and the manifest.
    pub fn flush(&mut self) -> Result<(), IngestError> {
        for key in std::mem::take(&mut self.dirty) {
            let (project, kind) = &key;
            let dir = self.root.join(project.dir_name());
            fs::create_dir_all(&dir).map_err(|e| store_err(&dir, e))?;
            let path = dir.join(format!("{}.jsonl", kind.as_str()));
            let mut events: Vec<&ActionEvent> = self.partitions[&key].values().collect();
            events.sort_by(|a, b| a.canonical_cmp(b));
            let mut out = String::new();
            for e in events {
                out.push_str(&serde_json::to_string(e).map_err(|e| store_err(&path, e))?);
                out.push('\n');
            }
            write_atomic(&path, out.as_bytes()).map_err(|e| store_err(&path, e))?;
        }
        let path = self.root.join(STORE_MANIFEST);
        if self.manifest_dirty || !path.exists() {
            let text =
                serde_json::to_string_pretty(&self.manifest).map_err(|e| store_err(&path, e))?;
            write_atomic(&path, format!("{text}\n").as_bytes()).map_err(|e| store_err(&path, e))?;
            self.manifest_dirty = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(id: &str, ts: &str, kind: EventKind) -> ActionEvent {
        ActionEvent::new(
            id,
            ProjectRef::new("o", "r").unwrap(),
            "alice",
            ts.parse().unwrap(),
            kind,
        )
    }

    #[test]
    fn insert_is_idempotent_and_persists_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = EventStore::open(dir.path()).unwrap();
        let batch = vec![
            ev("b", "2015-02-01T00:00:00Z", EventKind::IssueComment),
            ev("a", "2015-02-01T00:00:00Z", EventKind::IssueComment),
            ev("c", "2015-01-05T00:00:00Z", EventKind::Commit),
        ];
        assert_eq!(store.insert(batch.clone()), 3);
        assert_eq!(store.insert(batch), 0);
        store.flush().unwrap();

        let reopened = EventStore::open(dir.path()).unwrap();
        let ids: Vec<_> = reopened.events().into_iter().map(|e| e.id).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
        let text = fs::read_to_string(dir.path().join("o__r/issue_comment.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"id\":\"a\""));
    }

    #[test]
    fn existing_records_are_never_replaced() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = EventStore::open(dir.path()).unwrap();
        store.insert([ev("x", "2015-02-01T00:00:00Z", EventKind::Commit)]);
        let mut changed = ev("x", "2015-02-01T00:00:00Z", EventKind::Commit);
        changed.loc_changed = 99;
        assert_eq!(store.insert([changed]), 0);
        assert_eq!(store.events()[0].loc_changed, 0);
    }

    #[test]
    fn rejects_foreign_schema_version() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(STORE_MANIFEST),
            r#"{"schema_version": 99, "sync": {}}"#,
        )
        .unwrap();
        assert!(EventStore::open(dir.path()).is_err());
    }
}
