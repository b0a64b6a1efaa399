use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Stable per-dataset document identifier, rendered as `d<n>` with `n >= 1`.
///
/// Ordering is numeric, so `d2 < d10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocId(pub u32);

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

impl FromStr for DocId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.strip_prefix('d')
            .and_then(|n| n.parse().ok())
            .map(DocId)
            .ok_or_else(|| Error::UnknownDoc(s.to_string()))
    }
}

impl Serialize for DocId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DocId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A normalized email address. Equality, hashing and ordering only look at
/// the canonical `local@domain` form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Address {
    pub canonical: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl Address {
    pub fn as_str(&self) -> &str {
        &self.canonical
    }
}

impl PartialEq for Address {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for Address {}

impl Hash for Address {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for Address {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Address {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Mbox,
    Eml,
    Csv,
    Jsonl,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mbox" => Ok(SourceFormat::Mbox),
            "eml" => Ok(SourceFormat::Eml),
            "csv" => Ok(SourceFormat::Csv),
            "jsonl" => Ok(SourceFormat::Jsonl),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::Mbox => "mbox",
            SourceFormat::Eml => "eml",
            SourceFormat::Csv => "csv",
            SourceFormat::Jsonl => "jsonl",
        })
    }
}

/// One normalized email.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmailRecord {
    pub doc_id: DocId,
    pub sender: Address,
    pub recipients: Vec<Address>,
    pub subject: String,
    pub body: String,
    pub timestamp: Option<DateTime<Utc>>,
    pub source_format: SourceFormat,
    pub synthetic_body: bool,
}

impl EmailRecord {
    /// Checks the record-level invariants that parsers are expected to uphold.
    pub fn validate(&self) -> Result<()> {
        if self.recipients.is_empty() {
            return Err(Error::InvalidAddress(format!(
                "{} has no recipients",
                self.doc_id
            )));
        }
        for addr in std::iter::once(&self.sender).chain(&self.recipients) {
            if !super::address::is_canonical(&addr.canonical) {
                return Err(Error::InvalidAddress(addr.canonical.clone()));
            }
        }
        Ok(())
    }

    /// Sender followed by recipients, possibly with repeats.
    pub fn participants(&self) -> impl Iterator<Item = &Address> {
        std::iter::once(&self.sender).chain(self.recipients.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHandle {
    pub dataset_id: String,
    pub record_count: usize,
    pub ingested_at: DateTime<Utc>,
    pub label: String,
}
