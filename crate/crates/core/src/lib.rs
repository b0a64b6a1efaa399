//! Investigative email analytics: ingest mail corpora, filter them with a
//! reversible query stack, and inspect correspondents, timelines, ranked
//! terms, the contact graph and content clusters of the matching subset.

pub mod analytics;
pub mod api;
pub mod cluster;
pub mod entities;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod query;
pub mod session;
pub mod store;
pub mod textindex;

pub use analytics::{correspondent_stats, timeline_bins, CorrespondentStat, Granularity, TimeBin};
pub use cluster::{cluster_heads, clusterize, members, ClusterConfig, ClusterSummary, Clustering};
pub use entities::{
    assign_tag, lookup_tags, rank_entities, tag_distribution, EntityScore, TagCount, TagStore,
};
pub use error::{Error, Result};
pub use graph::{build_graph, ContactGraph, EdgeKey, GraphView, Removal};
pub use ingest::{
    load_dataset, normalize_address, Address, DatasetHandle, DocId, EmailRecord, LoadOptions,
    SchemaMap, SourceFormat,
};
pub use query::{
    evaluate, push_filter, remove_filter, Action, ActionLog, Filter, FilterId, Predicate,
    QueryStack, ResultSet,
};
pub use session::{replay, ClusterParams, Session, SessionState};
pub use store::{Dataset, Store};
pub use textindex::{build_index, tokenize, CorpusIndex, Field, Term};
