use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{Filter, FilterId};
use crate::error::{Error, Result};

/// Value of the `format` field in the header line of an exported log.
pub const LOG_FORMAT: &str = "mailsleuth-action-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    LoadDataset,
    AddFilter,
    RemoveFilter,
    AssignTag,
    RemoveNode,
    RemoveEdge,
    UndoRemoval,
    Clusterize,
}

/// A user action and its payload. Serialized as `{"kind": ..., "payload": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Action {
    LoadDataset {
        dataset_id: String,
    },
    AddFilter(Filter),
    RemoveFilter {
        filter_id: FilterId,
    },
    AssignTag {
        term: String,
        tag: String,
    },
    RemoveNode {
        address: String,
    },
    RemoveEdge {
        a: String,
        b: String,
    },
    UndoRemoval {},
    Clusterize {
        k: usize,
        seed: u64,
        restarts: usize,
    },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::LoadDataset { .. } => ActionKind::LoadDataset,
            Action::AddFilter(_) => ActionKind::AddFilter,
            Action::RemoveFilter { .. } => ActionKind::RemoveFilter,
            Action::AssignTag { .. } => ActionKind::AssignTag,
            Action::RemoveNode { .. } => ActionKind::RemoveNode,
            Action::RemoveEdge { .. } => ActionKind::RemoveEdge,
            Action::UndoRemoval {} => ActionKind::UndoRemoval,
            Action::Clusterize { .. } => ActionKind::Clusterize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub seq: u64,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Append-only record of session actions, numbered from 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionLog {
    entries: Vec<ActionEntry>,
}

impl ActionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, action: Action) -> &ActionEntry {
        self.append_at(action, Utc::now())
    }

    pub fn append_at(&mut self, action: Action, ts: DateTime<Utc>) -> &ActionEntry {
        let seq = self.entries.len() as u64 + 1;
        self.entries.push(ActionEntry { seq, ts, action });
        self.entries.last().expect("just pushed")
    }

    pub fn entries(&self) -> &[ActionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// JSON lines: a version header followed by one entry per line in seq
    /// order.
    pub fn to_jsonl(&self) -> String {
        let header = Header {
            format: LOG_FORMAT.to_string(),
            version: LOG_VERSION,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("entries serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses an exported log, checking the header and seq numbering. A
    /// completely empty input is an empty log.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let Some((line_no, first)) = lines.next() else {
            return Ok(ActionLog::default());
        };
        let header: Header = serde_json::from_str(first).map_err(|e| Error::MalformedLog {
            line: line_no,
            reason: format!("bad header: {e}"),
        })?;
        if header.format != LOG_FORMAT || header.version != LOG_VERSION {
            return Err(Error::MalformedLog {
                line: line_no,
                reason: format!("unsupported log {} v{}", header.format, header.version),
            });
        }
        let mut log = ActionLog::default();
        for (line_no, line) in lines {
            let entry: ActionEntry =
                serde_json::from_str(line).map_err(|e| Error::MalformedLog {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            let expected = log.entries.len() as u64 + 1;
            if entry.seq != expected {
                return Err(Error::MalformedLog {
                    line: line_no,
                    reason: format!("expected seq {expected}, found {}", entry.seq),
                });
            }
            log.entries.push(entry);
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Predicate;

    fn sample() -> ActionLog {
        let mut log = ActionLog::new();
        log.append(Action::LoadDataset {
            dataset_id: "ds".into(),
        });
        log.append(Action::AddFilter(Filter {
            filter_id: FilterId("f1".into()),
            predicate: Predicate::content("money").unwrap(),
        }));
        log.append(Action::RemoveFilter {
            filter_id: FilterId("f1".into()),
        });
        log.append(Action::UndoRemoval {});
        log
    }

    #[test]
    fn seq_numbers_start_at_one() {
        let log = sample();
        let seqs: Vec<_> = log.entries().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3, 4]);
        assert_eq!(log.entries()[1].action.kind(), ActionKind::AddFilter);
    }

    #[test]
    fn jsonl_round_trip_and_determinism() {
        let log = sample();
        let text = log.to_jsonl();
        assert_eq!(text, log.to_jsonl());
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(2).unwrap().contains(
            r#""kind":"add_filter","payload":{"filter_id":"f1","field":"content","value":"money"}"#
        ));
        assert_eq!(ActionLog::from_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn malformed_logs_are_rejected() {
        assert!(ActionLog::from_jsonl("").unwrap().is_empty());
        assert!(matches!(
            ActionLog::from_jsonl("{\"format\":\"other\",\"version\":1}\n"),
            Err(Error::MalformedLog { .. })
        ));
        let text = sample().to_jsonl();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(1, 2);
        assert!(matches!(
            ActionLog::from_jsonl(&lines.join("\n")),
            Err(Error::MalformedLog { .. })
        ));
        let garbage = format!("{}\nnot json\n", text.lines().next().unwrap());
        assert!(matches!(
            ActionLog::from_jsonl(&garbage),
            Err(Error::MalformedLog { line: 2, .. })
        ));
    }
}
