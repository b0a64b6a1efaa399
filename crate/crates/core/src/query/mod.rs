//! Conjunctive filter stacks, their evaluation against a [`CorpusIndex`],
//! and the session action log.

mod actionlog;

use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use actionlog::{Action, ActionEntry, ActionKind, ActionLog, LOG_FORMAT, LOG_VERSION};

use crate::error::{Error, Result};
use crate::ingest::{normalize_address, DocId};
use crate::textindex::{CorpusIndex, Field, Term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterId(pub String);

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// What a filter matches on.
///
/// Serialized as `{"field": ..., "value": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "field", content = "value", rename_all = "snake_case")]
pub enum Predicate {
    /// Whole-token match in the subject.
    Subject(Term),
    /// Whole-token match in the body.
    Content(Term),
    /// Canonical address appearing as sender or recipient.
    Correspondent(String),
    /// Inclusive instant range; undated documents never match.
    DateRange {
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
}

impl Predicate {
    pub fn subject(text: &str) -> Result<Self> {
        Term::parse_single(text)
            .map(Predicate::Subject)
            .map_err(|_| {
                Error::InvalidFilter(format!(
                    "subject filter needs exactly one term, got `{text}`"
                ))
            })
    }

    pub fn content(text: &str) -> Result<Self> {
        Term::parse_single(text)
            .map(Predicate::Content)
            .map_err(|_| {
                Error::InvalidFilter(format!(
                    "content filter needs exactly one term, got `{text}`"
                ))
            })
    }

    pub fn correspondent(raw: &str) -> Result<Self> {
        Ok(Predicate::Correspondent(normalize_address(raw)?.canonical))
    }

    pub fn date_range(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidFilter(format!(
                "date range start {start} is after end {end}"
            )));
        }
        Ok(Predicate::DateRange { start, end })
    }

    /// Re-checks the invariants of a deserialized predicate.
    pub fn validate(&self) -> Result<()> {
        match self {
            Predicate::Subject(t) | Predicate::Content(t) => match Term::parse_single(t) {
                Ok(parsed) if &parsed == t => Ok(()),
                _ => Err(Error::InvalidFilter(format!("`{t}` is not a single token"))),
            },
            Predicate::Correspondent(a) => {
                if normalize_address(a)?.canonical == *a {
                    Ok(())
                } else {
                    Err(Error::InvalidFilter(format!(
                        "`{a}` is not a canonical address"
                    )))
                }
            }
            Predicate::DateRange { start, end } => Predicate::date_range(*start, *end).map(|_| ()),
        }
    }

    /// Canonical text used for duplicate detection and fingerprints.
    pub fn key(&self) -> String {
        match self {
            Predicate::Subject(t) => format!("subject:{t}"),
            Predicate::Content(t) => format!("content:{t}"),
            Predicate::Correspondent(a) => format!("correspondent:{a}"),
            Predicate::DateRange { start, end } => format!(
                "date_range:{}..{}",
                start.to_rfc3339_opts(SecondsFormat::AutoSi, true),
                end.to_rfc3339_opts(SecondsFormat::AutoSi, true)
            ),
        }
    }

    fn matches_into(&self, index: &CorpusIndex) -> BTreeSet<DocId> {
        match self {
            Predicate::Subject(t) => index.docs_with_term(Field::Subject, t).collect(),
            Predicate::Content(t) => index.docs_with_term(Field::Body, t).collect(),
            Predicate::Correspondent(addr) => index
                .doc_ids()
                .filter(|&d| {
                    index
                        .doc(d)
                        .is_some_and(|e| e.participants.binary_search(addr).is_ok())
                })
                .collect(),
            Predicate::DateRange { start, end } => index
                .doc_ids()
                .filter(|&d| {
                    index
                        .doc(d)
                        .and_then(|e| e.timestamp)
                        .is_some_and(|ts| *start <= ts && ts <= *end)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Filter {
    pub filter_id: FilterId,
    #[serde(flatten)]
    pub predicate: Predicate,
}

/// Ordered, reversible list of conjunctive filters for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStack {
    pub dataset_id: String,
    pub filters: Vec<Filter>,
}

impl QueryStack {
    pub fn new(dataset_id: impl Into<String>) -> Self {
        QueryStack {
            dataset_id: dataset_id.into(),
            filters: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    /// Returns a new stack with `filter` appended.
    pub fn push(&self, filter: Filter) -> Result<QueryStack> {
        let key = filter.predicate.key();
        if self.filters.iter().any(|f| f.predicate.key() == key) {
            return Err(Error::DuplicateFilter(key));
        }
        if self.filters.iter().any(|f| f.filter_id == filter.filter_id) {
            return Err(Error::InvalidFilter(format!(
                "filter id {} already in use",
                filter.filter_id
            )));
        }
        let mut next = self.clone();
        next.filters.push(filter);
        Ok(next)
    }

    /// Returns a new stack without the filter named `filter_id`.
    pub fn remove(&self, filter_id: &FilterId) -> Result<QueryStack> {
        let pos = self
            .filters
            .iter()
            .position(|f| &f.filter_id == filter_id)
            .ok_or_else(|| Error::UnknownFilter(filter_id.0.clone()))?;
        let mut next = self.clone();
        next.filters.remove(pos);
        Ok(next)
    }

    /// Hash of the filter multiset; independent of order and filter ids.
    pub fn fingerprint(&self) -> String {
        let mut keys: Vec<String> = self.filters.iter().map(|f| f.predicate.key()).collect();
        keys.sort();
        let mut hasher = Sha256::new();
        for key in keys {
            hasher.update(key.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(&hasher.finalize()[..16])
    }
}

/// Documents matching every filter of a stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSet {
    pub doc_ids: BTreeSet<DocId>,
    pub evaluated_against: String,
    pub stack_fingerprint: String,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn contains(&self, doc_id: DocId) -> bool {
        self.doc_ids.contains(&doc_id)
    }
}

pub fn push_filter(stack: &QueryStack, filter: Filter) -> Result<QueryStack> {
    stack.push(filter)
}

pub fn remove_filter(stack: &QueryStack, filter_id: &FilterId) -> Result<QueryStack> {
    stack.remove(filter_id)
}

/// Evaluates the conjunction of `stack` over `index`. An empty stack
/// matches every document.
pub fn evaluate(stack: &QueryStack, index: &CorpusIndex) -> Result<ResultSet> {
    if stack.dataset_id != index.dataset_id() {
        return Err(Error::DatasetMismatch {
            stack: stack.dataset_id.clone(),
            index: index.dataset_id().to_string(),
        });
    }
    let mut matched: Option<BTreeSet<DocId>> = None;
    for filter in &stack.filters {
        let hits = filter.predicate.matches_into(index);
        matched = Some(match matched {
            None => hits,
            Some(acc) => acc.intersection(&hits).copied().collect(),
        });
        if matched.as_ref().is_some_and(BTreeSet::is_empty) {
            break;
        }
    }
    Ok(ResultSet {
        doc_ids: matched.unwrap_or_else(|| index.doc_ids().collect()),
        evaluated_against: index.dataset_id().to_string(),
        stack_fingerprint: stack.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EmailRecord, SourceFormat};
    use crate::textindex::build_index;
    use chrono::TimeZone;

    fn filter(id: &str, predicate: Predicate) -> Filter {
        Filter {
            filter_id: FilterId(id.into()),
            predicate,
        }
    }

    fn record(
        id: u32,
        from: &str,
        to: &str,
        subject: &str,
        body: &str,
        day: Option<u32>,
    ) -> EmailRecord {
        EmailRecord {
            doc_id: DocId(id),
            sender: normalize_address(from).unwrap(),
            recipients: vec![normalize_address(to).unwrap()],
            subject: subject.into(),
            body: body.into(),
            timestamp: day.map(|d| Utc.with_ymd_and_hms(2003, 5, d, 12, 0, 0).unwrap()),
            source_format: SourceFormat::Jsonl,
            synthetic_body: false,
        }
    }

    fn five_docs() -> CorpusIndex {
        build_index(
            "fix",
            &[
                record(1, "a@x.com", "b@y.com", "hello", "click the link", Some(1)),
                record(
                    2,
                    "b@y.com",
                    "a@x.com",
                    "Re: hello",
                    "send money now",
                    Some(2),
                ),
                record(3, "c@z.com", "a@x.com", "urgent", "meeting agenda", None),
                record(
                    4,
                    "a@x.com",
                    "c@z.com",
                    "urgent money",
                    "money transfer urgent",
                    Some(3),
                ),
                record(5, "d@w.com", "b@y.com", "lunch", "lunch at noon", Some(4)),
            ],
        )
        .unwrap()
    }

    fn ids(rs: &ResultSet) -> Vec<u32> {
        rs.doc_ids.iter().map(|d| d.0).collect()
    }

    #[test]
    fn push_examples() {
        let stack = QueryStack::new("fix");
        let one = stack
            .push(filter("f1", Predicate::content("click").unwrap()))
            .unwrap();
        assert_eq!(one.len(), 1);
        let two = one
            .push(filter("f2", Predicate::content("link").unwrap()))
            .unwrap();
        assert_eq!(
            two.filters
                .iter()
                .map(|f| f.predicate.key())
                .collect::<Vec<_>>(),
            vec!["content:click", "content:link"]
        );
        assert!(matches!(
            one.push(filter("f3", Predicate::content("Click").unwrap())),
            Err(Error::DuplicateFilter(_))
        ));
    }

    #[test]
    fn remove_examples() {
        let stack = QueryStack::new("fix")
            .push(filter("a", Predicate::content("money").unwrap()))
            .unwrap();
        assert!(stack.remove(&FilterId("a".into())).unwrap().is_empty());

        let two = stack
            .push(filter("b", Predicate::subject("urgent").unwrap()))
            .unwrap();
        let left = two.remove(&FilterId("a".into())).unwrap();
        assert_eq!(left.filters.len(), 1);
        assert_eq!(left.filters[0].filter_id.0, "b");
        assert!(matches!(
            two.remove(&FilterId("zz".into())),
            Err(Error::UnknownFilter(_))
        ));
    }

    #[test]
    fn predicate_validation() {
        assert!(Predicate::content("money transfer").is_err());
        assert!(Predicate::subject("!").is_err());
        assert!(Predicate::correspondent("nobody").is_err());
        let a = Utc.with_ymd_and_hms(2003, 1, 1, 0, 0, 0).unwrap();
        let b = Utc.with_ymd_and_hms(2004, 1, 1, 0, 0, 0).unwrap();
        assert!(Predicate::date_range(b, a).is_err());
        assert!(Predicate::date_range(a, a).is_ok());
        let bogus: Predicate =
            serde_json::from_str(r#"{"field":"content","value":"money"}"#).unwrap();
        assert!(bogus.validate().is_ok());
        let bogus: Predicate =
            serde_json::from_str(r#"{"field":"correspondent","value":"A@X.com"}"#).unwrap();
        assert!(bogus.validate().is_err());
    }

    #[test]
    fn evaluate_examples() {
        let index = five_docs();
        let empty = QueryStack::new("fix");
        assert_eq!(evaluate(&empty, &index).unwrap().len(), 5);

        let money = empty
            .push(filter("f1", Predicate::content("money").unwrap()))
            .unwrap();
        assert_eq!(ids(&evaluate(&money, &index).unwrap()), vec![2, 4]);
        let both = money
            .push(filter("f2", Predicate::content("transfer").unwrap()))
            .unwrap();
        assert_eq!(ids(&evaluate(&both, &index).unwrap()), vec![4]);

        let spam = empty
            .push(filter("f1", Predicate::subject("spam").unwrap()))
            .unwrap();
        assert!(evaluate(&spam, &index).unwrap().is_empty());

        // content filters look at the body only
        let subj_only = empty
            .push(filter("f1", Predicate::content("hello").unwrap()))
            .unwrap();
        assert!(evaluate(&subj_only, &index).unwrap().is_empty());

        let corr = empty
            .push(filter("f1", Predicate::correspondent("C@Z.com").unwrap()))
            .unwrap();
        assert_eq!(ids(&evaluate(&corr, &index).unwrap()), vec![3, 4]);

        let range = empty
            .push(filter(
                "f1",
                Predicate::date_range(
                    Utc.with_ymd_and_hms(2003, 5, 2, 12, 0, 0).unwrap(),
                    Utc.with_ymd_and_hms(2003, 5, 3, 12, 0, 0).unwrap(),
                )
                .unwrap(),
            ))
            .unwrap();
        assert_eq!(ids(&evaluate(&range, &index).unwrap()), vec![2, 4]);
    }

    #[test]
    fn mismatched_dataset_is_rejected() {
        let index = five_docs();
        assert!(matches!(
            evaluate(&QueryStack::new("other"), &index),
            Err(Error::DatasetMismatch { .. })
        ));
    }

    #[test]
    fn fingerprint_ignores_order_and_ids() {
        let a = QueryStack::new("fix")
            .push(filter("f1", Predicate::content("money").unwrap()))
            .unwrap()
            .push(filter("f2", Predicate::subject("urgent").unwrap()))
            .unwrap();
        let b = QueryStack::new("fix")
            .push(filter("x", Predicate::subject("urgent").unwrap()))
            .unwrap()
            .push(filter("y", Predicate::content("money").unwrap()))
            .unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), QueryStack::new("fix").fingerprint());
    }

    #[test]
    fn filter_wire_format() {
        let f = filter("f1", Predicate::content("money").unwrap());
        assert_eq!(
            serde_json::to_string(&f).unwrap(),
            r#"{"filter_id":"f1","field":"content","value":"money"}"#
        );
        let back: Filter = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }
}
