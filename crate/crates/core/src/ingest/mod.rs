//! Corpus ingestion: parsers for mbox, EML, CSV and JSONL sources, address
//! normalization, and synthetic body injection.

mod address;
mod mbox;
mod record;
mod synth;
mod tabular;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

pub use address::{normalize_address, parse_address_list, split_address_list};
pub use mbox::{parse_date, parse_eml, parse_mbox};
pub use record::{Address, DatasetHandle, DocId, EmailRecord, SourceFormat};
pub use synth::synthesize_corpus;
pub use tabular::{parse_jsonl, parse_tabular, RecordField, SchemaMap};

use crate::error::{Error, Result};
use crate::store::Store;

/// Records produced by a parser plus the number of input messages or rows
/// that had to be skipped. `records.len() + skipped` always equals the
/// number of input units.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<EmailRecord>,
    pub skipped: usize,
}

impl ParseOutcome {
    fn non_empty(self) -> Result<Self> {
        if self.records.is_empty() {
            Err(Error::EmptyCorpus)
        } else {
            Ok(self)
        }
    }

    fn renumber(&mut self) {
        for (i, record) in self.records.iter_mut().enumerate() {
            record.doc_id = DocId(i as u32 + 1);
        }
    }
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub label: Option<String>,
    pub schema: Option<SchemaMap>,
    /// Body pool and seed for [`synthesize_corpus`].
    pub synthesize: Option<(Vec<String>, u64)>,
}

/// Parses a byte stream in the given format.
pub fn parse_stream<R: std::io::Read>(
    stream: R,
    format: SourceFormat,
    schema: Option<&SchemaMap>,
) -> Result<ParseOutcome> {
    match format {
        SourceFormat::Mbox => parse_mbox(stream),
        SourceFormat::Eml => parse_eml(stream),
        SourceFormat::Csv => parse_tabular(stream, schema),
        SourceFormat::Jsonl => parse_jsonl(stream),
    }
}

/// Parses a file, or for EML a directory of `.eml` files read in name order.
pub fn parse_path(
    path: &Path,
    format: SourceFormat,
    schema: Option<&SchemaMap>,
) -> Result<ParseOutcome> {
    let unreadable =
        |e: std::io::Error| Error::UnreadableStream(format!("{}: {e}", path.display()));
    if format == SourceFormat::Eml && path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(unreadable)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("eml")))
            .collect();
        files.sort();
        let mut outcome = ParseOutcome::default();
        for file in files {
            let reader = BufReader::new(File::open(&file).map_err(unreadable)?);
            match parse_eml(reader) {
                Ok(one) => {
                    outcome.records.extend(one.records);
                    outcome.skipped += one.skipped;
                }
                Err(Error::EmptyCorpus) => outcome.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        outcome.renumber();
        return outcome.non_empty();
    }
    let file = File::open(path).map_err(unreadable)?;
    parse_stream(BufReader::new(file), format, schema)
}

/// Parses `path` and persists the records under a fresh dataset id.
pub fn load_dataset(
    store: &Store,
    path: &Path,
    format: SourceFormat,
    options: &LoadOptions,
) -> Result<DatasetHandle> {
    let outcome = parse_path(path, format, options.schema.as_ref())?;
    let label = options.label.clone().unwrap_or_else(|| {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    });
    ingest_records(store, outcome.records, &label, options.synthesize.as_ref())
}

/// Optionally synthesizes bodies, then persists `records` as a new dataset.
pub fn ingest_records(
    store: &Store,
    records: Vec<EmailRecord>,
    label: &str,
    synthesize: Option<&(Vec<String>, u64)>,
) -> Result<DatasetHandle> {
    let records = match synthesize {
        Some((pool, seed)) => synthesize_corpus(&records, pool, *seed)?,
        None => records,
    };
    store.create_dataset(label, records)
}
