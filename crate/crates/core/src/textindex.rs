//! Tokenization, the per-dataset inverted index, and TF-IDF scoring.
//!
//! Scores use raw term counts and the natural log:
//! `tfidf(t, d) = f(t, d) * ln(|D| / df(t))`, where `f(t, d)` sums the
//! subject and body occurrences of `t` in `d`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Deref;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DocId, EmailRecord};

/// Snapshot format version written by [`CorpusIndex::to_snapshot`].
pub const SNAPSHOT_VERSION: u32 = 1;

const MIN_TOKEN_CHARS: usize = 2;

/// A case-folded token with no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Term(String);

impl Term {
    pub fn new(surface: impl Into<String>) -> Result<Self> {
        let surface = surface.into();
        let valid = !surface.is_empty()
            && !surface.chars().any(char::is_whitespace)
            && surface.to_lowercase() == surface;
        if valid {
            Ok(Term(surface))
        } else {
            Err(Error::InvalidTerm(surface))
        }
    }

    /// Tokenizes `text` and requires exactly one resulting term.
    pub fn parse_single(text: &str) -> Result<Self> {
        let mut tokens = tokenize(text);
        if tokens.len() == 1 {
            Ok(tokens.remove(0))
        } else {
            Err(Error::InvalidTerm(text.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Term {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Term {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Term::new(value)
    }
}

impl From<Term> for String {
    fn from(term: Term) -> String {
        term.0
    }
}

/// Lowercases, splits on every non-alphanumeric character and drops tokens
/// shorter than two characters. Order and duplicates are preserved.
pub fn tokenize(text: &str) -> Vec<Term> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().count() >= MIN_TOKEN_CHARS)
        .map(|tok| Term(tok.to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Subject,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: DocId,
    pub field: Field,
    pub tf: u32,
}

/// Occurrence counts of one term in one document, split by field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCounts {
    pub subject: u32,
    pub body: u32,
}

impl FieldCounts {
    pub fn total(&self) -> u32 {
        self.subject + self.body
    }

    pub fn get(&self, field: Field) -> u32 {
        match field {
            Field::Subject => self.subject,
            Field::Body => self.body,
        }
    }

    fn bump(&mut self, field: Field) {
        match field {
            Field::Subject => self.subject += 1,
            Field::Body => self.body += 1,
        }
    }
}

/// Per-document data kept alongside the postings: field lengths, the forward
/// term table and the metadata facets that filters need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEntry {
    pub lengths: FieldCounts,
    pub terms: BTreeMap<String, FieldCounts>,
    /// Canonical sender and recipient addresses, sorted and deduplicated.
    pub participants: Vec<String>,
    pub timestamp: Option<DateTime<Utc>>,
}

/// Immutable inverted index over one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    dataset_id: String,
    doc_count: usize,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_freq: BTreeMap<String, u32>,
    docs: BTreeMap<DocId, DocEntry>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    index: CorpusIndex,
}

impl CorpusIndex {
    pub fn build(dataset_id: impl Into<String>, records: &[EmailRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut docs = BTreeMap::new();
        for record in records {
            let mut entry = DocEntry {
                lengths: FieldCounts::default(),
                terms: BTreeMap::new(),
                participants: record
                    .participants()
                    .map(|a| a.canonical.clone())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
                timestamp: record.timestamp,
            };
            for (field, text) in [
                (Field::Subject, &record.subject),
                (Field::Body, &record.body),
            ] {
                for term in tokenize(text) {
                    entry.lengths.bump(field);
                    entry.terms.entry(term.0).or_default().bump(field);
                }
            }
            if docs.insert(record.doc_id, entry).is_some() {
                return Err(Error::DuplicateDocId(record.doc_id.to_string()));
            }
        }

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
        for (&doc_id, entry) in &docs {
            for (term, counts) in &entry.terms {
                let list = postings.entry(term.clone()).or_default();
                for field in [Field::Subject, Field::Body] {
                    let tf = counts.get(field);
                    if tf > 0 {
                        list.push(Posting { doc_id, field, tf });
                    }
                }
                *doc_freq.entry(term.clone()).or_default() += 1;
            }
        }

        Ok(CorpusIndex {
            dataset_id: dataset_id.into(),
            doc_count: docs.len(),
            postings,
            doc_freq,
            docs,
        })
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    /// `|D|`.
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Postings for `term`, ordered by document then field.
    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.doc_freq.keys().map(String::as_str)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = DocId> + '_ {
        self.docs.keys().copied()
    }

    pub fn doc(&self, doc_id: DocId) -> Option<&DocEntry> {
        self.docs.get(&doc_id)
    }

    pub fn contains_doc(&self, doc_id: DocId) -> bool {
        self.docs.contains_key(&doc_id)
    }

    /// Documents containing `term` in `field`, ascending.
    pub fn docs_with_term(&self, field: Field, term: &str) -> impl Iterator<Item = DocId> + '_ {
        self.postings(term)
            .iter()
            .filter(move |p| p.field == field)
            .map(|p| p.doc_id)
    }

    /// Raw count of `term` in `doc_id`, subject and body summed.
    pub fn term_count(&self, term: &str, doc_id: DocId) -> Result<u32> {
        let entry = self.entry(doc_id)?;
        Ok(entry.terms.get(term).map(FieldCounts::total).unwrap_or(0))
    }

    pub fn tfidf(&self, term: &str, doc_id: DocId) -> Result<f64> {
        let f = self.term_count(term, doc_id)?;
        if f == 0 {
            return Ok(0.0);
        }
        let df = self.doc_freq(term);
        Ok(f as f64 * (self.doc_count as f64 / df as f64).ln())
    }

    /// Sparse TF-IDF vector of a document, one entry per term it contains
    /// (zero-valued entries included).
    pub fn doc_vector(&self, doc_id: DocId) -> Result<BTreeMap<String, f64>> {
        let entry = self.entry(doc_id)?;
        Ok(entry
            .terms
            .iter()
            .map(|(term, counts)| {
                let df = self.doc_freq(term);
                let value = counts.total() as f64 * (self.doc_count as f64 / df as f64).ln();
                (term.clone(), value)
            })
            .collect())
    }

    pub fn to_snapshot(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct SnapshotRef<'a> {
            version: u32,
            index: &'a CorpusIndex,
        }
        serde_json::to_vec(&SnapshotRef {
            version: SNAPSHOT_VERSION,
            index: self,
        })
        .map_err(|e| Error::storage("index.snapshot", e))
    }

    pub fn from_snapshot(bytes: &[u8]) -> Result<Self> {
        let snapshot: Snapshot =
            serde_json::from_slice(bytes).map_err(|e| Error::storage("index.snapshot", e))?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(Error::storage(
                "index.snapshot",
                format!("unsupported snapshot version {}", snapshot.version),
            ));
        }
        Ok(snapshot.index)
    }

    fn entry(&self, doc_id: DocId) -> Result<&DocEntry> {
        self.docs
            .get(&doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))
    }
}

/// Convenience wrapper for [`CorpusIndex::build`].
pub fn build_index(dataset_id: impl Into<String>, records: &[EmailRecord]) -> Result<CorpusIndex> {
    CorpusIndex::build(dataset_id, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{normalize_address, SourceFormat};
    use proptest::prelude::*;

    fn record(id: u32, subject: &str, body: &str) -> EmailRecord {
        EmailRecord {
            doc_id: DocId(id),
            sender: normalize_address("a@x.com").unwrap(),
            recipients: vec![normalize_address("b@y.com").unwrap()],
            subject: subject.into(),
            body: body.into(),
            timestamp: None,
            source_format: SourceFormat::Jsonl,
            synthetic_body: false,
        }
    }

    fn surfaces(terms: Vec<Term>) -> Vec<String> {
        terms.into_iter().map(String::from).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(
            surfaces(tokenize("Urgent: transfer MONEY, urgent!")),
            vec!["urgent", "transfer", "money", "urgent"]
        );
        assert_eq!(
            surfaces(tokenize("Click the LINK!!")),
            vec!["click", "the", "link"]
        );
        assert_eq!(surfaces(tokenize("a b cd 9 10")), vec!["cd", "10"]);
        assert_eq!(
            surfaces(tokenize("Überweisung GELD")),
            vec!["überweisung", "geld"]
        );
    }

    #[test]
    fn term_validation() {
        assert!(Term::new("money").is_ok());
        assert!(Term::new("Money").is_err());
        assert!(Term::new("two words").is_err());
        assert!(Term::new("").is_err());
        assert_eq!(Term::parse_single(" Money! ").unwrap().as_str(), "money");
        assert!(Term::parse_single("money transfer").is_err());
        assert!(Term::parse_single("x").is_err());
    }

    #[test]
    fn single_record_postings() {
        let index = build_index("ds", &[record(1, "", "money money")]).unwrap();
        assert_eq!(
            index.postings("money"),
            &[Posting {
                doc_id: DocId(1),
                field: Field::Body,
                tf: 2
            }]
        );
        assert_eq!(index.doc_freq("money"), 1);
    }

    #[test]
    fn doc_freq_counts_documents() {
        let index = build_index(
            "ds",
            &[record(1, "", "bank"), record(2, "bank", "the bank")],
        )
        .unwrap();
        assert_eq!(index.doc_freq("bank"), 2);
        assert_eq!(index.postings("bank").len(), 3);
        assert_eq!(index.term_count("bank", DocId(2)).unwrap(), 2);
    }

    #[test]
    fn build_errors() {
        assert!(matches!(build_index("ds", &[]), Err(Error::EmptyCorpus)));
        assert!(matches!(
            build_index("ds", &[record(1, "", "x"), record(1, "", "y")]),
            Err(Error::DuplicateDocId(_))
        ));
    }

    // 4-doc fixture shared by the tfidf and doc_vector checks.
    fn fixture() -> Vec<EmailRecord> {
        vec![
            record(1, "urgent transfer", "money money money bank"),
            record(2, "meeting", "money agenda"),
            record(3, "hello", "bank urgent"),
            record(4, "urgent", "lunch"),
        ]
    }

    #[test]
    fn doc_freq_matches_linear_scan() {
        let records = fixture();
        let index = build_index("ds", &records).unwrap();
        let mut vocab = BTreeSet::new();
        for r in &records {
            vocab.extend(surfaces(tokenize(&r.subject)));
            vocab.extend(surfaces(tokenize(&r.body)));
        }
        assert_eq!(
            index.vocabulary().collect::<Vec<_>>(),
            vocab.iter().map(String::as_str).collect::<Vec<_>>()
        );
        for term in &vocab {
            let expected = records
                .iter()
                .filter(|r| {
                    let text = format!("{} {}", r.subject, r.body);
                    text.split_whitespace().any(|w| w == term)
                })
                .count() as u32;
            assert_eq!(index.doc_freq(term), expected, "df({term})");
        }
    }

    #[test]
    fn tfidf_examples() {
        let index = build_index("ds", &fixture()).unwrap();
        // money: f(d1)=3, df=2, |D|=4 -> 3 ln 2
        let v = index.tfidf("money", DocId(1)).unwrap();
        assert!((v - 2.0794415416798357).abs() < 1e-9, "{v}");
        assert_eq!(index.tfidf("money", DocId(4)).unwrap(), 0.0);
        assert_eq!(index.tfidf("absent", DocId(1)).unwrap(), 0.0);
        assert!(matches!(
            index.tfidf("money", DocId(9)),
            Err(Error::UnknownDoc(_))
        ));

        let everywhere =
            build_index("ds", &[record(1, "", "spam a"), record(2, "", "spam b")]).unwrap();
        assert_eq!(everywhere.tfidf("spam", DocId(1)).unwrap(), 0.0);
    }

    #[test]
    fn doc_vector_examples() {
        let one = build_index("ds", &[record(1, "hi there", "money")]).unwrap();
        let v = one.doc_vector(DocId(1)).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.values().all(|&x| x == 0.0));

        let index = build_index("ds", &fixture()).unwrap();
        for doc in index.doc_ids().collect::<Vec<_>>() {
            let v = index.doc_vector(doc).unwrap();
            for (term, value) in &v {
                assert_eq!(*value, index.tfidf(term, doc).unwrap());
            }
            let expected: BTreeSet<String> =
                index.doc(doc).unwrap().terms.keys().cloned().collect();
            assert_eq!(v.keys().cloned().collect::<BTreeSet<_>>(), expected);
        }
    }

    #[test]
    fn snapshot_round_trip_and_version_check() {
        let index = build_index("ds", &fixture()).unwrap();
        let bytes = index.to_snapshot().unwrap();
        assert_eq!(CorpusIndex::from_snapshot(&bytes).unwrap(), index);
        let bumped =
            String::from_utf8(bytes)
                .unwrap()
                .replacen("\"version\":1", "\"version\":99", 1);
        assert!(CorpusIndex::from_snapshot(bumped.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn postings_sum_to_token_occurrences(
            subjects in prop::collection::vec("[a-d ]{0,12}", 1..6),
            bodies in prop::collection::vec("[a-d ]{0,24}", 1..6),
        ) {
            let records: Vec<_> = subjects
                .iter()
                .zip(&bodies)
                .enumerate()
                .map(|(i, (s, b))| record(i as u32 + 1, s, b))
                .collect();
            let index = build_index("ds", &records).unwrap();
            let before = index.clone();
            for r in &records {
                let mut counts: BTreeMap<String, u32> = BTreeMap::new();
                for t in tokenize(&r.subject).into_iter().chain(tokenize(&r.body)) {
                    *counts.entry(t.0).or_default() += 1;
                }
                for (term, n) in counts {
                    let summed: u32 = index
                        .postings(&term)
                        .iter()
                        .filter(|p| p.doc_id == r.doc_id)
                        .map(|p| p.tf)
                        .sum();
                    prop_assert_eq!(summed, n);
                    let score = index.tfidf(&term, r.doc_id).unwrap();
                    let df = index.doc_freq(&term) as usize;
                    prop_assert!(score >= 0.0);
                    prop_assert_eq!(score > 0.0, df < index.doc_count());
                }
            }
            prop_assert_eq!(index, before);
        }
    }
}
