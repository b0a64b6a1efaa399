//! CSV and JSON-lines ingestion.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};

use serde::Deserialize;

use super::address::{normalize_address, parse_address_list};
use super::mbox::parse_date;
use super::record::{DocId, EmailRecord, SourceFormat};
use super::ParseOutcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordField {
    Sender,
    Recipients,
    Subject,
    Body,
    Timestamp,
}

impl RecordField {
    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "sender" | "from" => Ok(RecordField::Sender),
            "recipients" | "to" => Ok(RecordField::Recipients),
            "subject" => Ok(RecordField::Subject),
            "body" | "content" => Ok(RecordField::Body),
            "timestamp" | "date" => Ok(RecordField::Timestamp),
            other => Err(Error::InvalidSchema(format!(
                "unknown record field `{other}`"
            ))),
        }
    }

    // Column names tried, in order, when no explicit mapping is given.
    fn default_columns(self) -> &'static [&'static str] {
        match self {
            RecordField::Sender => &["sender", "from", "from_email"],
            RecordField::Recipients => &["recipients", "to", "to_email"],
            RecordField::Subject => &["subject"],
            RecordField::Body => &["body", "content", "message", "text"],
            RecordField::Timestamp => &["timestamp", "date", "datetime"],
        }
    }
}

/// Maps record fields to CSV column names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaMap {
    columns: BTreeMap<RecordField, String>,
}

impl SchemaMap {
    /// Builds a mapping from `(field, column)` pairs. Sender and at least one
    /// of body/subject are required.
    pub fn new<I, F, C>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (F, C)>,
        F: AsRef<str>,
        C: Into<String>,
    {
        let mut columns = BTreeMap::new();
        for (field, column) in pairs {
            columns.insert(RecordField::parse(field.as_ref())?, column.into());
        }
        let map = SchemaMap { columns };
        map.check_required()?;
        Ok(map)
    }

    /// Parses `field=column` strings.
    pub fn parse_pairs<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let split = pairs
            .iter()
            .map(|p| {
                p.as_ref()
                    .split_once('=')
                    .map(|(f, c)| (f.trim().to_string(), c.trim().to_string()))
                    .ok_or_else(|| {
                        Error::InvalidSchema(format!("expected field=column, got `{}`", p.as_ref()))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(split)
    }

    pub fn column(&self, field: RecordField) -> Option<&str> {
        self.columns.get(&field).map(String::as_str)
    }

    fn check_required(&self) -> Result<()> {
        if !self.columns.contains_key(&RecordField::Sender) {
            return Err(Error::InvalidSchema(
                "schema map must name a sender column".into(),
            ));
        }
        if !self.columns.contains_key(&RecordField::Body)
            && !self.columns.contains_key(&RecordField::Subject)
        {
            return Err(Error::InvalidSchema(
                "schema map must name a body or subject column".into(),
            ));
        }
        Ok(())
    }

    /// Resolves field positions against a CSV header row.
    fn resolve(&self, headers: &csv::StringRecord) -> Result<BTreeMap<RecordField, usize>> {
        let position = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name.trim()))
        };
        let mut resolved = BTreeMap::new();
        for (field, column) in &self.columns {
            let idx = position(column).ok_or_else(|| Error::MissingColumn(column.clone()))?;
            resolved.insert(*field, idx);
        }
        Ok(resolved)
    }

    /// Guesses a mapping from conventional column names.
    fn detect(headers: &csv::StringRecord) -> Result<Self> {
        let mut columns = BTreeMap::new();
        for field in [
            RecordField::Sender,
            RecordField::Recipients,
            RecordField::Subject,
            RecordField::Body,
            RecordField::Timestamp,
        ] {
            let found = field.default_columns().iter().find_map(|candidate| {
                headers
                    .iter()
                    .find(|h| h.trim().eq_ignore_ascii_case(candidate))
                    .map(|h| h.to_string())
            });
            if let Some(column) = found {
                columns.insert(field, column);
            }
        }
        if !columns.contains_key(&RecordField::Sender) {
            return Err(Error::MissingColumn("sender".into()));
        }
        if !columns.contains_key(&RecordField::Body) && !columns.contains_key(&RecordField::Subject)
        {
            return Err(Error::MissingColumn("body".into()));
        }
        Ok(SchemaMap { columns })
    }
}

/// Parses a CSV stream with a header row. `schema` of `None` auto-detects
/// conventional column names.
pub fn parse_tabular<R: Read>(stream: R, schema: Option<&SchemaMap>) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(stream);
    let headers = reader
        .byte_headers()
        .map_err(|e| Error::UnreadableStream(e.to_string()))?
        .clone();
    let headers = csv::StringRecord::from_byte_record_lossy(headers);
    let detected;
    let schema = match schema {
        Some(s) => s,
        None => {
            detected = SchemaMap::detect(&headers)?;
            &detected
        }
    };
    let positions = schema.resolve(&headers)?;

    let mut outcome = ParseOutcome::default();
    for row in reader.byte_records() {
        let row = match row {
            Ok(row) => csv::StringRecord::from_byte_record_lossy(row),
            Err(e) if e.is_io_error() => return Err(Error::UnreadableStream(e.to_string())),
            Err(_) => {
                outcome.skipped += 1;
                continue;
            }
        };
        let cell = |field| {
            positions
                .get(&field)
                .and_then(|&i| row.get(i))
                .unwrap_or("")
        };
        let draft = RowDraft {
            sender: cell(RecordField::Sender).to_string(),
            recipients: parse_address_list(cell(RecordField::Recipients))
                .into_iter()
                .map(|a| a.canonical)
                .collect(),
            subject: cell(RecordField::Subject).to_string(),
            body: cell(RecordField::Body).to_string(),
            timestamp: Some(cell(RecordField::Timestamp).to_string()),
        };
        outcome.push_draft(draft, SourceFormat::Csv);
    }
    outcome.non_empty()
}

#[derive(Debug, Deserialize)]
struct JsonRecord {
    sender: String,
    #[serde(default)]
    recipients: Recipients,
    #[serde(default)]
    subject: Option<String>,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    timestamp: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum Recipients {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

/// Parses JSON lines with fields `sender`, `recipients`, `subject`, `body`,
/// `timestamp`. Blank lines are ignored; malformed lines are skipped.
pub fn parse_jsonl<R: Read>(stream: R) -> Result<ParseOutcome> {
    let mut outcome = ParseOutcome::default();
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::UnreadableStream(e.to_string()))?;
        if n == 0 {
            break;
        }
        let line = String::from_utf8_lossy(&buf);
        if line.trim().is_empty() {
            continue;
        }
        let Ok(rec) = serde_json::from_str::<JsonRecord>(line.trim()) else {
            outcome.skipped += 1;
            continue;
        };
        let recipients = match rec.recipients {
            Recipients::None => Vec::new(),
            Recipients::One(s) => parse_address_list(&s)
                .into_iter()
                .map(|a| a.canonical)
                .collect(),
            Recipients::Many(list) => list,
        };
        outcome.push_draft(
            RowDraft {
                sender: rec.sender,
                recipients,
                subject: rec.subject.unwrap_or_default(),
                body: rec.body.unwrap_or_default(),
                timestamp: rec.timestamp,
            },
            SourceFormat::Jsonl,
        );
    }
    outcome.non_empty()
}

struct RowDraft {
    sender: String,
    recipients: Vec<String>,
    subject: String,
    body: String,
    timestamp: Option<String>,
}

impl ParseOutcome {
    fn push_draft(&mut self, draft: RowDraft, format: SourceFormat) {
        let Ok(sender) = normalize_address(&draft.sender) else {
            self.skipped += 1;
            return;
        };
        let recipients: Vec<_> = draft
            .recipients
            .iter()
            .filter_map(|r| normalize_address(r).ok())
            .collect();
        if recipients.is_empty() {
            self.skipped += 1;
            return;
        }
        self.records.push(EmailRecord {
            doc_id: DocId(self.records.len() as u32 + 1),
            sender,
            recipients,
            subject: draft.subject.trim().to_string(),
            body: draft.body.trim().to_string(),
            timestamp: draft.timestamp.as_deref().and_then(parse_date),
            source_format: format,
            synthetic_body: false,
        });
    }
}
