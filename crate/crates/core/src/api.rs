//! JSON payloads shared by the HTTP service and the CLI's `--json` output.
//!
//! Session-scoped payloads are wrapped in an [`Envelope`] carrying the
//! result-set fingerprint they were computed from.

use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::analytics::{
    correspondent_stats, timeline_bins, CorrespondentStat, Granularity, TimeBin,
};
use crate::cluster::{ClusterSummary, Clustering};
use crate::entities::{rank_entities, TagStore};
use crate::error::{Error, Result};
use crate::graph::GraphView;
use crate::ingest::{parse_date, DocId, EmailRecord};
use crate::query::{Filter, Predicate};
use crate::session::Session;
use crate::textindex::{Field, Term};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const DEFAULT_ENTITY_COUNT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub fingerprint: String,
    pub data: T,
}

impl<T> Envelope<T> {
    pub fn of(session: &Session, data: T) -> Self {
        Envelope {
            fingerprint: session.fingerprint().to_string(),
            data,
        }
    }
}

/// Filter as typed by a client: `{"field": "content", "value": "money"}` or
/// `{"field": "date_range", "value": {"start": "2003-01-01", "end": "2003-12-31"}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRequest {
    pub field: String,
    pub value: FilterValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterValue {
    Text(String),
    Range { start: String, end: String },
}

fn range_bound(raw: &str, end: bool) -> Result<DateTime<Utc>> {
    if end {
        // a bare date as the upper bound covers that whole day
        if let Ok(day) = NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d") {
            let last = day
                .and_hms_nano_opt(23, 59, 59, 999_999_999)
                .expect("valid time");
            return Ok(last.and_utc());
        }
    }
    parse_date(raw).ok_or_else(|| Error::InvalidFilter(format!("unparseable date `{raw}`")))
}

impl FilterRequest {
    pub fn text(field: &str, value: &str) -> Self {
        FilterRequest {
            field: field.to_string(),
            value: FilterValue::Text(value.to_string()),
        }
    }

    pub fn range(start: &str, end: &str) -> Self {
        FilterRequest {
            field: "date_range".into(),
            value: FilterValue::Range {
                start: start.to_string(),
                end: end.to_string(),
            },
        }
    }

    pub fn to_predicate(&self) -> Result<Predicate> {
        match (self.field.as_str(), &self.value) {
            ("subject", FilterValue::Text(t)) => Predicate::subject(t),
            ("content", FilterValue::Text(t)) => Predicate::content(t),
            ("correspondent", FilterValue::Text(a)) => Predicate::correspondent(a),
            ("date_range", FilterValue::Range { start, end }) => {
                Predicate::date_range(range_bound(start, false)?, range_bound(end, true)?)
            }
            (field, _) => Err(Error::InvalidFilter(format!(
                "bad value for field `{field}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub dataset_id: String,
    pub count: usize,
    pub filters: Vec<Filter>,
    pub doc_ids: Vec<DocId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub records: Vec<EmailRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedEntity {
    pub term: Term,
    pub score: f64,
    pub origin_fields: BTreeSet<Field>,
    pub tags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagUpdate {
    pub term: String,
    pub tags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMembers {
    pub index: usize,
    pub head: Option<DocId>,
    pub members: Vec<DocId>,
}

/// Every panel of a session at once; used to compare sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSnapshot {
    pub summary: Envelope<ResultSummary>,
    pub results: Envelope<ResultsPage>,
    pub correspondents: Envelope<Vec<CorrespondentStat>>,
    pub timeline: Vec<Envelope<Vec<TimeBin>>>,
    pub entities: Option<Envelope<Vec<TaggedEntity>>>,
    pub graph: Envelope<GraphView>,
    pub clusters: Option<Envelope<ClusterSummary>>,
}

pub fn summary(session: &Session) -> Envelope<ResultSummary> {
    let results = session.results();
    Envelope::of(
        session,
        ResultSummary {
            dataset_id: results.evaluated_against.clone(),
            count: results.len(),
            filters: session.state().query_stack.filters.clone(),
            doc_ids: results.doc_ids.iter().copied().collect(),
        },
    )
}

pub fn results_page(session: &Session, offset: usize, limit: usize) -> Envelope<ResultsPage> {
    let results = session.results();
    let dataset = session.dataset();
    let records = results
        .doc_ids
        .iter()
        .skip(offset)
        .take(limit)
        .filter_map(|&d| dataset.record(d).cloned())
        .collect();
    Envelope::of(
        session,
        ResultsPage {
            total: results.len(),
            offset,
            limit,
            records,
        },
    )
}

pub fn correspondents(session: &Session) -> Envelope<Vec<CorrespondentStat>> {
    Envelope::of(
        session,
        correspondent_stats(session.results(), &session.dataset().records),
    )
}

pub fn timeline(session: &Session, granularity: Granularity) -> Envelope<Vec<TimeBin>> {
    Envelope::of(
        session,
        timeline_bins(session.results(), &session.dataset().records, granularity),
    )
}

pub fn entities(
    session: &Session,
    k: usize,
    tags: &TagStore,
) -> Result<Envelope<Vec<TaggedEntity>>> {
    let ranked = rank_entities(session.results(), &session.dataset().index, k)?;
    Ok(Envelope::of(
        session,
        ranked
            .into_iter()
            .map(|e| TaggedEntity {
                tags: tags.lookup(e.term.as_str()),
                term: e.term,
                score: e.score,
                origin_fields: e.origin_fields,
            })
            .collect(),
    ))
}

pub fn graph(session: &Session) -> Envelope<GraphView> {
    Envelope::of(session, session.graph().view())
}

fn current_clustering(session: &Session) -> Result<&Clustering> {
    session.clustering().ok_or(Error::NoClustering)
}

pub fn cluster_summary(session: &Session) -> Result<Envelope<ClusterSummary>> {
    Ok(Envelope::of(
        session,
        current_clustering(session)?.summary(),
    ))
}

pub fn cluster_members(session: &Session, index: usize) -> Result<Envelope<ClusterMembers>> {
    let clustering = current_clustering(session)?;
    let members = clustering.members(index)?;
    Ok(Envelope::of(
        session,
        ClusterMembers {
            index,
            head: clustering.heads[index],
            members,
        },
    ))
}

pub fn tag_update(tags: &TagStore, term: &str) -> TagUpdate {
    TagUpdate {
        term: term.trim().to_lowercase(),
        tags: tags.lookup(term),
    }
}

pub fn snapshot(session: &Session, tags: &TagStore) -> PanelSnapshot {
    PanelSnapshot {
        summary: summary(session),
        results: results_page(session, 0, usize::MAX),
        correspondents: correspondents(session),
        timeline: Granularity::ALL
            .iter()
            .map(|&g| timeline(session, g))
            .collect(),
        entities: entities(session, DEFAULT_ENTITY_COUNT, tags).ok(),
        graph: graph(session),
        clusters: cluster_summary(session).ok(),
    }
}
