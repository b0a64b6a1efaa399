#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use mailsleuth_core::ingest::{normalize_address, DatasetHandle, DocId, EmailRecord, SourceFormat};
use mailsleuth_core::store::Dataset;
use proptest::prelude::*;

pub const WORDS: &[&str] = &[
    "money", "transfer", "urgent", "bank", "meeting", "agenda", "lunch", "account", "nigeria",
    "deal", "report", "click", "link", "offer", "reply", "the", "fund", "prince", "visa", "cash",
];

pub const PEOPLE: &[&str] = &[
    "alice@x.com",
    "bob@x.com",
    "carol@y.org",
    "dave@y.org",
    "erin@z.net",
    "frank@z.net",
];

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2001, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone)]
pub struct RawDoc {
    pub sender: usize,
    pub recipients: Vec<usize>,
    pub subject: Vec<usize>,
    pub body: Vec<usize>,
    pub hours: Option<i64>,
}

pub fn raw_doc() -> impl Strategy<Value = RawDoc> {
    (
        0..PEOPLE.len(),
        prop::collection::vec(0..PEOPLE.len(), 1..4),
        prop::collection::vec(0..WORDS.len(), 0..4),
        prop::collection::vec(0..WORDS.len(), 0..12),
        prop::option::weighted(0.8, 0i64..(24 * 365 * 4)),
    )
        .prop_map(|(sender, recipients, subject, body, hours)| RawDoc {
            sender,
            recipients,
            subject,
            body,
            hours,
        })
}

pub fn corpus(max: usize) -> impl Strategy<Value = Vec<RawDoc>> {
    prop::collection::vec(raw_doc(), 1..=max)
}

fn words(idx: &[usize]) -> String {
    idx.iter().map(|&i| WORDS[i]).collect::<Vec<_>>().join(" ")
}

pub fn records(raw: &[RawDoc]) -> Vec<EmailRecord> {
    raw.iter()
        .enumerate()
        .map(|(i, d)| EmailRecord {
            doc_id: DocId(i as u32 + 1),
            sender: normalize_address(PEOPLE[d.sender]).unwrap(),
            recipients: d
                .recipients
                .iter()
                .map(|&r| normalize_address(PEOPLE[r]).unwrap())
                .collect(),
            subject: words(&d.subject),
            body: words(&d.body),
            timestamp: d.hours.map(|h| epoch() + Duration::hours(h)),
            source_format: SourceFormat::Jsonl,
            synthetic_body: false,
        })
        .collect()
}

pub fn dataset(raw: &[RawDoc]) -> Arc<Dataset> {
    let recs = records(raw);
    let handle = DatasetHandle {
        dataset_id: "prop".into(),
        record_count: recs.len(),
        ingested_at: epoch(),
        label: "prop".into(),
    };
    Arc::new(Dataset::new(handle, recs).unwrap())
}
