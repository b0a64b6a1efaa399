//! Deterministic corpora for the benchmarks.

use chrono::{Duration, TimeZone, Utc};
use mailsleuth_core::ingest::{normalize_address, DatasetHandle, DocId, EmailRecord, SourceFormat};
use mailsleuth_core::store::Dataset;

const WORDS: &[&str] = &[
    "money",
    "transfer",
    "urgent",
    "bank",
    "meeting",
    "agenda",
    "lunch",
    "account",
    "nigeria",
    "deal",
    "report",
    "click",
    "link",
    "offer",
    "reply",
    "fund",
    "prince",
    "visa",
    "cash",
    "schedule",
    "contract",
    "invoice",
    "payment",
    "beneficiary",
    "confidential",
    "project",
    "review",
    "quarter",
];

/// Splitmix-style mixer so the corpus depends only on `docs`.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn words(seed: u64, n: usize) -> String {
    (0..n as u64)
        .map(|j| WORDS[(mix(seed * 131 + j) % WORDS.len() as u64) as usize])
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn corpus(docs: usize) -> Vec<EmailRecord> {
    let epoch = Utc.with_ymd_and_hms(2003, 1, 1, 0, 0, 0).unwrap();
    (0..docs as u64)
        .map(|i| {
            let h = mix(i);
            let person =
                |k: u64| normalize_address(&format!("user{}@example.com", k % 40)).unwrap();
            EmailRecord {
                doc_id: DocId(i as u32 + 1),
                sender: person(h),
                recipients: vec![person(h >> 8), person(h >> 16)],
                subject: words(h, 4),
                body: words(h >> 4, 40 + (h % 60) as usize),
                timestamp: Some(epoch + Duration::minutes((h % (60 * 24 * 365 * 5)) as i64)),
                source_format: SourceFormat::Jsonl,
                synthetic_body: false,
            }
        })
        .collect()
}

pub fn dataset(docs: usize) -> Dataset {
    let records = corpus(docs);
    let handle = DatasetHandle {
        dataset_id: "bench".into(),
        record_count: records.len(),
        ingested_at: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
        label: "bench".into(),
    };
    Dataset::new(handle, records).unwrap()
}
