//! Correspondent statistics and timeline histograms over a result set.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ingest::{Address, EmailRecord};
use crate::query::ResultSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondentStat {
    pub address: Address,
    pub sent: u64,
    pub received: u64,
    pub total: u64,
}

/// Sent/received counts for every address in the matched emails, busiest
/// first. Each recipient of a multi-recipient email counts one receipt.
pub fn correspondent_stats(results: &ResultSet, records: &[EmailRecord]) -> Vec<CorrespondentStat> {
    fn slot<'a>(
        stats: &'a mut HashMap<String, CorrespondentStat>,
        addr: &Address,
    ) -> &'a mut CorrespondentStat {
        stats
            .entry(addr.canonical.clone())
            .or_insert_with(|| CorrespondentStat {
                address: addr.clone(),
                sent: 0,
                received: 0,
                total: 0,
            })
    }

    let mut stats = HashMap::new();
    for record in records.iter().filter(|r| results.contains(r.doc_id)) {
        slot(&mut stats, &record.sender).sent += 1;
        for recipient in &record.recipients {
            slot(&mut stats, recipient).received += 1;
        }
    }
    let mut out: Vec<CorrespondentStat> = stats
        .into_values()
        .map(|mut s| {
            s.total = s.sent + s.received;
            s
        })
        .collect();
    out.sort_by(|a, b| {
        b.total
            .cmp(&a.total)
            .then_with(|| a.address.cmp(&b.address))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Day,
    Month,
    Year,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Day, Granularity::Month, Granularity::Year];
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "day" => Ok(Granularity::Day),
            "month" => Ok(Granularity::Month),
            "year" => Ok(Granularity::Year),
            other => Err(Error::InvalidFilter(format!(
                "unknown granularity `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Day => "day",
            Granularity::Month => "month",
            Granularity::Year => "year",
        })
    }
}

/// UTC calendar bucket. Unused components are zero, so the derived ordering
/// is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketKey {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.month, self.day) {
            (0, _) => write!(f, "{:04}", self.year),
            (m, 0) => write!(f, "{:04}-{:02}", self.year, m),
            (m, d) => write!(f, "{:04}-{:02}-{:02}", self.year, m, d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBin {
    /// `YYYY`, `YYYY-MM` or `YYYY-MM-DD`.
    pub bucket: String,
    pub count: u64,
}

pub fn timeline_bins(
    results: &ResultSet,
    records: &[EmailRecord],
    granularity: Granularity,
) -> Vec<TimeBin> {
    let mut bins: BTreeMap<BucketKey, u64> = BTreeMap::new();
    for record in records.iter().filter(|r| results.contains(r.doc_id)) {
        let Some(ts) = record.timestamp else { continue };
        let key = match granularity {
            Granularity::Year => BucketKey {
                year: ts.year(),
                month: 0,
                day: 0,
            },
            Granularity::Month => BucketKey {
                year: ts.year(),
                month: ts.month(),
                day: 0,
            },
            Granularity::Day => BucketKey {
                year: ts.year(),
                month: ts.month(),
                day: ts.day(),
            },
        };
        *bins.entry(key).or_default() += 1;
    }
    bins.into_iter()
        .map(|(key, count)| TimeBin {
            bucket: key.to_string(),
            count,
        })
        .collect()
}
