//! On-disk persistence under a single data directory.
//!
//! ```text
//! <root>/datasets/<id>/dataset.json
//! <root>/datasets/<id>/records.jsonl
//! <root>/datasets/<id>/index.snapshot
//! <root>/tags.json
//! <root>/sessions/<id>.json
//! <root>/sessions/<id>.actions.jsonl
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::Utc;
use tempfile::NamedTempFile;

use crate::entities::TagStore;
use crate::error::{Error, Result};
use crate::ingest::{DatasetHandle, DocId, EmailRecord};
use crate::query::ActionLog;
use crate::session::SessionState;
use crate::textindex::CorpusIndex;

/// A loaded dataset: its handle, records in doc-id order, and index.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub handle: DatasetHandle,
    pub records: Vec<EmailRecord>,
    pub index: CorpusIndex,
}

impl Dataset {
    pub fn new(handle: DatasetHandle, mut records: Vec<EmailRecord>) -> Result<Self> {
        records.sort_by_key(|r| r.doc_id);
        let index = CorpusIndex::build(handle.dataset_id.clone(), &records)?;
        Ok(Dataset {
            handle,
            records,
            index,
        })
    }

    pub fn id(&self) -> &str {
        &self.handle.dataset_id
    }

    pub fn record(&self, doc_id: DocId) -> Option<&EmailRecord> {
        self.records
            .binary_search_by_key(&doc_id, |r| r.doc_id)
            .ok()
            .map(|i| &self.records[i])
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::storage(path, e.to_string())
}

/// Writes `bytes` to `path` via a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(io_failure(dir))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(io_failure(dir))?;
    tmp.write_all(bytes).map_err(io_failure(path))?;
    tmp.as_file().sync_all().map_err(io_failure(path))?;
    tmp.persist(path)
        .map_err(|e| Error::storage(path, e.error.to_string()))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_failure(path))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    /// Opens (creating if needed) a data directory.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["datasets", "sessions"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_failure(&dir))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dataset_dir(&self, id: &str) -> PathBuf {
        self.root.join("datasets").join(id)
    }

    fn tags_path(&self) -> PathBuf {
        self.root.join("tags.json")
    }

    fn session_paths(&self, id: &str) -> (PathBuf, PathBuf) {
        let dir = self.root.join("sessions");
        (
            dir.join(format!("{id}.json")),
            dir.join(format!("{id}.actions.jsonl")),
        )
    }

    /// Persists `records` under a fresh dataset id. The index snapshot and
    /// records are written before the handle, so a listed dataset is always
    /// complete.
    pub fn create_dataset(&self, label: &str, records: Vec<EmailRecord>) -> Result<DatasetHandle> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let handle = DatasetHandle {
            dataset_id: uuid::Uuid::new_v4().to_string(),
            record_count: records.len(),
            ingested_at: Utc::now(),
            label: label.to_string(),
        };
        let dataset = Dataset::new(handle.clone(), records)?;
        let dir = self.dataset_dir(&handle.dataset_id);

        let mut lines = Vec::new();
        for record in &dataset.records {
            serde_json::to_writer(&mut lines, record)
                .map_err(|e| Error::storage(&dir, e.to_string()))?;
            lines.push(b'\n');
        }
        write_atomic(&dir.join("records.jsonl"), &lines)?;
        write_atomic(&dir.join("index.snapshot"), &dataset.index.to_snapshot()?)?;
        let meta =
            serde_json::to_vec_pretty(&handle).map_err(|e| Error::storage(&dir, e.to_string()))?;
        write_atomic(&dir.join("dataset.json"), &meta)?;
        Ok(handle)
    }

    /// All complete datasets, oldest first.
    pub fn list_datasets(&self) -> Result<Vec<DatasetHandle>> {
        let dir = self.root.join("datasets");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_failure(&dir))? {
            let entry = entry.map_err(io_failure(&dir))?;
            let meta = entry.path().join("dataset.json");
            if meta.is_file() {
                let bytes = read_file(&meta)?;
                let handle: DatasetHandle = serde_json::from_slice(&bytes)
                    .map_err(|e| Error::storage(&meta, e.to_string()))?;
                out.push(handle);
            }
        }
        out.sort_by(|a, b| {
            a.ingested_at
                .cmp(&b.ingested_at)
                .then_with(|| a.dataset_id.cmp(&b.dataset_id))
        });
        Ok(out)
    }

    pub fn dataset_handle(&self, dataset_id: &str) -> Result<DatasetHandle> {
        let meta = self.dataset_dir(dataset_id).join("dataset.json");
        if !valid_id(dataset_id) || !meta.is_file() {
            return Err(Error::UnknownDataset(dataset_id.to_string()));
        }
        serde_json::from_slice(&read_file(&meta)?).map_err(|e| Error::storage(&meta, e.to_string()))
    }

    /// Loads records and the index snapshot of a dataset.
    pub fn load_dataset(&self, dataset_id: &str) -> Result<Dataset> {
        let handle = self.dataset_handle(dataset_id)?;
        let dir = self.dataset_dir(dataset_id);
        let records_path = dir.join("records.jsonl");
        let text = String::from_utf8(read_file(&records_path)?)
            .map_err(|e| Error::storage(&records_path, e.to_string()))?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<EmailRecord>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::storage(&records_path, e.to_string()))?;
        if records.len() != handle.record_count {
            return Err(Error::storage(
                &records_path,
                format!(
                    "expected {} records, found {}",
                    handle.record_count,
                    records.len()
                ),
            ));
        }
        let index = CorpusIndex::from_snapshot(&read_file(&dir.join("index.snapshot"))?)?;
        Ok(Dataset {
            handle,
            records,
            index,
        })
    }

    /// Writes the session state and its action log.
    pub fn save_session(&self, state: &SessionState) -> Result<()> {
        if !valid_id(&state.session_id) {
            return Err(Error::UnknownSession(state.session_id.clone()));
        }
        let (state_path, log_path) = self.session_paths(&state.session_id);
        let mut value =
            serde_json::to_value(state).map_err(|e| Error::storage(&state_path, e.to_string()))?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("action_log");
        }
        let bytes = serde_json::to_vec_pretty(&value)
            .map_err(|e| Error::storage(&state_path, e.to_string()))?;
        write_atomic(&log_path, state.action_log.to_jsonl().as_bytes())?;
        write_atomic(&state_path, &bytes)
    }

    pub fn load_session(&self, session_id: &str) -> Result<SessionState> {
        let (state_path, log_path) = self.session_paths(session_id);
        if !valid_id(session_id) || !state_path.is_file() {
            return Err(Error::UnknownSession(session_id.to_string()));
        }
        let mut value: serde_json::Value = serde_json::from_slice(&read_file(&state_path)?)
            .map_err(|e| Error::storage(&state_path, e.to_string()))?;
        let log_text = String::from_utf8(read_file(&log_path)?)
            .map_err(|e| Error::storage(&log_path, e.to_string()))?;
        let log = ActionLog::from_jsonl(&log_text)?;
        if let Some(obj) = value.as_object_mut() {
            obj.insert(
                "action_log".into(),
                serde_json::to_value(&log).map_err(|e| Error::storage(&log_path, e.to_string()))?,
            );
        }
        serde_json::from_value(value).map_err(|e| Error::storage(&state_path, e.to_string()))
    }

    pub fn persist_tag_store(&self, tags: &TagStore) -> Result<()> {
        let path = self.tags_path();
        let bytes =
            serde_json::to_vec_pretty(tags).map_err(|e| Error::storage(&path, e.to_string()))?;
        write_atomic(&path, &bytes)
    }

    /// The last persisted tag store, or an empty one if none was saved.
    pub fn load_tag_store(&self) -> Result<TagStore> {
        let path = self.tags_path();
        if !path.exists() {
            return Ok(TagStore::new());
        }
        serde_json::from_slice(&read_file(&path)?).map_err(|e| Error::storage(&path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{normalize_address, SourceFormat};
    use crate::query::Predicate;
    use crate::session::Session;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn records(n: u32) -> Vec<EmailRecord> {
        (1..=n)
            .map(|i| EmailRecord {
                doc_id: DocId(i),
                sender: normalize_address(&format!("Person {i} <p{i}@x.com>")).unwrap(),
                recipients: vec![normalize_address("boss@x.com").unwrap()],
                subject: format!("note {i}"),
                body: format!("money item{i}"),
                timestamp: None,
                source_format: SourceFormat::Jsonl,
                synthetic_body: i % 2 == 0,
            })
            .collect()
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let handle = store.create_dataset("fixture", records(4)).unwrap();
        assert_eq!(handle.record_count, 4);
        let loaded = store.load_dataset(&handle.dataset_id).unwrap();
        assert_eq!(loaded.handle, handle);
        assert_eq!(loaded.records, records(4));
        let rebuilt = CorpusIndex::build(handle.dataset_id.clone(), &records(4)).unwrap();
        assert_eq!(loaded.index, rebuilt);
        assert_eq!(loaded.record(DocId(3)).unwrap().subject, "note 3");
        assert_eq!(store.list_datasets().unwrap(), vec![handle]);
        assert!(matches!(
            store.load_dataset("nope"),
            Err(Error::UnknownDataset(_))
        ));
        assert!(matches!(
            store.load_dataset("../x"),
            Err(Error::UnknownDataset(_))
        ));
    }

    #[test]
    fn session_round_trip_is_a_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let handle = store.create_dataset("fixture", records(3)).unwrap();
        let dataset = Arc::new(store.load_dataset(&handle.dataset_id).unwrap());
        let mut session = Session::new(dataset);
        store.save_session(session.state()).unwrap();
        assert_eq!(&store.load_session(session.id()).unwrap(), session.state());

        session
            .add_filter(Predicate::content("money").unwrap())
            .unwrap();
        store.save_session(session.state()).unwrap();
        let saved = session.state().clone();
        session
            .add_filter(Predicate::content("item1").unwrap())
            .unwrap();
        assert_eq!(store.load_session(session.id()).unwrap(), saved);
        assert!(matches!(
            store.load_session("missing"),
            Err(Error::UnknownSession(_))
        ));
    }

    #[test]
    fn tag_store_round_trip_and_restart() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            assert!(store.load_tag_store().unwrap().is_empty());
            store.persist_tag_store(&TagStore::new()).unwrap();
            assert!(store.load_tag_store().unwrap().is_empty());
            let mut tags = TagStore::new();
            tags.assign("money", "suspicious").unwrap();
            tags.assign("urgent", "suspicious").unwrap();
            tags.assign("receipt", "politics").unwrap();
            store.persist_tag_store(&tags).unwrap();
        }
        let reopened = Store::open(dir.path()).unwrap();
        let tags = reopened.load_tag_store().unwrap();
        assert_eq!(tags.assignment_count(), 3);
        assert!(tags.lookup("receipt").contains("politics"));
    }

    #[test]
    fn interrupted_write_leaves_previous_version() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut tags = TagStore::new();
        tags.assign("money", "suspicious").unwrap();
        store.persist_tag_store(&tags).unwrap();

        // a writer that died before the rename leaves only its temp file
        let mut partial = NamedTempFile::new_in(dir.path()).unwrap();
        partial.write_all(b"{\"money\": [\"trun").unwrap();
        let (_file, _path) = partial.keep().unwrap();

        assert_eq!(store.load_tag_store().unwrap(), tags);
    }

    proptest! {
        #[test]
        fn tag_store_persistence_is_lossless(
            pairs in proptest::collection::vec(("[a-z]{2,6}", "[a-z ]{1,8}"), 0..20)
        ) {
            let dir = tempfile::tempdir().unwrap();
            let store = Store::open(dir.path()).unwrap();
            let mut tags = TagStore::new();
            for (term, tag) in &pairs {
                let _ = tags.assign(term, tag);
            }
            store.persist_tag_store(&tags).unwrap();
            prop_assert_eq!(store.load_tag_store().unwrap(), tags);
        }
    }
}
