//! Analyst sessions: a query stack over one dataset plus the derived panel
//! state, with every successful mutation appended to the action log.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::cluster::{clusterize, ClusterConfig, Clustering, DEFAULT_MAX_ITERATIONS};
use crate::entities::TagStore;
use crate::error::{Error, Result};
use crate::graph::{ContactGraph, Removal};
use crate::query::{
    evaluate, Action, ActionLog, Filter, FilterId, Predicate, QueryStack, ResultSet,
};
use crate::store::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
}

/// Everything needed to rebuild a session against its dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub dataset_id: String,
    pub query_stack: QueryStack,
    pub graph_edits: Vec<Removal>,
    pub clustering_params: Option<ClusterParams>,
    pub next_filter_seq: u64,
    pub action_log: ActionLog,
}

#[derive(Debug, Clone)]
pub struct Session {
    state: SessionState,
    dataset: Arc<Dataset>,
    results: ResultSet,
    graph: ContactGraph,
    clustering: Option<Clustering>,
}

impl Session {
    pub fn new(dataset: Arc<Dataset>) -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string(), dataset)
    }

    pub fn with_id(session_id: impl Into<String>, dataset: Arc<Dataset>) -> Self {
        let mut session = Self::pristine(session_id.into(), dataset);
        session.state.action_log.append(Action::LoadDataset {
            dataset_id: session.dataset.id().to_string(),
        });
        session
    }

    fn pristine(session_id: String, dataset: Arc<Dataset>) -> Self {
        let stack = QueryStack::new(dataset.id());
        let results = evaluate(&stack, &dataset.index).expect("stack built for this index");
        let graph = ContactGraph::build(&results, &dataset.records);
        Session {
            state: SessionState {
                session_id,
                dataset_id: dataset.id().to_string(),
                query_stack: stack,
                graph_edits: Vec::new(),
                clustering_params: None,
                next_filter_seq: 1,
                action_log: ActionLog::new(),
            },
            dataset,
            results,
            graph,
            clustering: None,
        }
    }

    /// Rebuilds the derived state of a saved session.
    pub fn restore(state: SessionState, dataset: Arc<Dataset>) -> Result<Self> {
        if state.dataset_id != dataset.id() {
            return Err(Error::DatasetMismatch {
                stack: state.dataset_id,
                index: dataset.id().to_string(),
            });
        }
        let results = evaluate(&state.query_stack, &dataset.index)?;
        let mut graph = ContactGraph::build(&results, &dataset.records);
        graph.apply_removals(&state.graph_edits)?;
        let clustering = match state.clustering_params {
            Some(p) => Some(run_clustering(&results, &dataset, p)?),
            None => None,
        };
        Ok(Session {
            state,
            dataset,
            results,
            graph,
            clustering,
        })
    }

    pub fn id(&self) -> &str {
        &self.state.session_id
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn results(&self) -> &ResultSet {
        &self.results
    }

    pub fn fingerprint(&self) -> &str {
        &self.results.stack_fingerprint
    }

    pub fn graph(&self) -> &ContactGraph {
        &self.graph
    }

    pub fn clustering(&self) -> Option<&Clustering> {
        self.clustering.as_ref()
    }

    pub fn action_log(&self) -> &ActionLog {
        &self.state.action_log
    }

    pub fn export_action_log(&self) -> String {
        self.state.action_log.to_jsonl()
    }

    fn set_stack(&mut self, stack: QueryStack) -> Result<()> {
        let results = evaluate(&stack, &self.dataset.index)?;
        self.graph = ContactGraph::build(&results, &self.dataset.records);
        self.results = results;
        self.state.query_stack = stack;
        self.state.graph_edits.clear();
        self.state.clustering_params = None;
        self.clustering = None;
        Ok(())
    }

    /// Appends a filter under the next `f<n>` id.
    pub fn add_filter(&mut self, predicate: Predicate) -> Result<Filter> {
        self.add_filter_at(predicate, Utc::now())
    }

    fn add_filter_at(&mut self, predicate: Predicate, ts: DateTime<Utc>) -> Result<Filter> {
        predicate.validate()?;
        let filter = Filter {
            filter_id: FilterId(format!("f{}", self.state.next_filter_seq)),
            predicate,
        };
        let stack = self.state.query_stack.push(filter.clone())?;
        self.set_stack(stack)?;
        self.state.next_filter_seq += 1;
        self.state
            .action_log
            .append_at(Action::AddFilter(filter.clone()), ts);
        Ok(filter)
    }

    pub fn remove_filter(&mut self, filter_id: &FilterId) -> Result<()> {
        self.remove_filter_at(filter_id, Utc::now())
    }

    fn remove_filter_at(&mut self, filter_id: &FilterId, ts: DateTime<Utc>) -> Result<()> {
        let stack = self.state.query_stack.remove(filter_id)?;
        self.set_stack(stack)?;
        self.state.action_log.append_at(
            Action::RemoveFilter {
                filter_id: filter_id.clone(),
            },
            ts,
        );
        Ok(())
    }

    pub fn remove_node(&mut self, address: &str) -> Result<()> {
        self.remove_node_at(address, Utc::now())
    }

    fn remove_node_at(&mut self, address: &str, ts: DateTime<Utc>) -> Result<()> {
        self.graph.remove_node(address)?;
        self.sync_edits();
        self.state.action_log.append_at(
            Action::RemoveNode {
                address: address.to_string(),
            },
            ts,
        );
        Ok(())
    }

    pub fn remove_edge(&mut self, a: &str, b: &str) -> Result<()> {
        self.remove_edge_at(a, b, Utc::now())
    }

    fn remove_edge_at(&mut self, a: &str, b: &str, ts: DateTime<Utc>) -> Result<()> {
        self.graph.remove_edge(a, b)?;
        self.sync_edits();
        self.state.action_log.append_at(
            Action::RemoveEdge {
                a: a.to_string(),
                b: b.to_string(),
            },
            ts,
        );
        Ok(())
    }

    pub fn undo_removal(&mut self) -> Result<()> {
        self.undo_removal_at(Utc::now())
    }

    fn undo_removal_at(&mut self, ts: DateTime<Utc>) -> Result<()> {
        self.graph.undo_removal()?;
        self.sync_edits();
        self.state.action_log.append_at(Action::UndoRemoval {}, ts);
        Ok(())
    }

    fn sync_edits(&mut self) {
        self.state.graph_edits = self.graph.deletion_stack().to_vec();
    }

    pub fn clusterize(&mut self, k: usize, seed: u64, restarts: usize) -> Result<&Clustering> {
        self.clusterize_at(ClusterParams { k, seed, restarts }, Utc::now())
    }

    fn clusterize_at(&mut self, params: ClusterParams, ts: DateTime<Utc>) -> Result<&Clustering> {
        let clustering = run_clustering(&self.results, &self.dataset, params)?;
        self.state.clustering_params = Some(params);
        self.state.action_log.append_at(
            Action::Clusterize {
                k: params.k,
                seed: params.seed,
                restarts: params.restarts,
            },
            ts,
        );
        Ok(self.clustering.insert(clustering))
    }

    /// Tags `term` in the global store and logs the assignment. Returns the
    /// term's tags afterwards.
    pub fn assign_tag(
        &mut self,
        tags: &mut TagStore,
        term: &str,
        tag: &str,
    ) -> Result<BTreeSet<String>> {
        self.assign_tag_at(tags, term, tag, Utc::now())
    }

    fn assign_tag_at(
        &mut self,
        tags: &mut TagStore,
        term: &str,
        tag: &str,
        ts: DateTime<Utc>,
    ) -> Result<BTreeSet<String>> {
        tags.assign(term, tag)?;
        self.state.action_log.append_at(
            Action::AssignTag {
                term: term.to_string(),
                tag: tag.to_string(),
            },
            ts,
        );
        Ok(tags.lookup(term))
    }

    fn apply(&mut self, action: &Action, ts: DateTime<Utc>, tags: &mut TagStore) -> Result<()> {
        match action {
            Action::LoadDataset { .. } => {
                Err(Error::InvalidFilter("dataset already loaded".into()))
            }
            Action::AddFilter(filter) => {
                let added = self.add_filter_at(filter.predicate.clone(), ts)?;
                if added.filter_id != filter.filter_id {
                    return Err(Error::UnknownFilter(filter.filter_id.0.clone()));
                }
                Ok(())
            }
            Action::RemoveFilter { filter_id } => self.remove_filter_at(filter_id, ts),
            Action::AssignTag { term, tag } => self.assign_tag_at(tags, term, tag, ts).map(drop),
            Action::RemoveNode { address } => self.remove_node_at(address, ts),
            Action::RemoveEdge { a, b } => self.remove_edge_at(a, b, ts),
            Action::UndoRemoval {} => self.undo_removal_at(ts),
            Action::Clusterize { k, seed, restarts } => self
                .clusterize_at(
                    ClusterParams {
                        k: *k,
                        seed: *seed,
                        restarts: *restarts,
                    },
                    ts,
                )
                .map(drop),
        }
    }
}

fn run_clustering(
    results: &ResultSet,
    dataset: &Dataset,
    params: ClusterParams,
) -> Result<Clustering> {
    let config = ClusterConfig {
        max_iterations: DEFAULT_MAX_ITERATIONS,
        restarts: params.restarts,
    };
    clusterize(results, &dataset.index, params.k, params.seed, &config)
}

/// Re-executes an exported log against `dataset`, applying tag assignments
/// to `tags`. Entries keep their original timestamps, so the replayed log
/// exports identically to the source log.
pub fn replay(log: &ActionLog, dataset: Arc<Dataset>, tags: &mut TagStore) -> Result<Session> {
    replay_as(uuid::Uuid::new_v4().to_string(), log, dataset, tags)
}

pub fn replay_as(
    session_id: impl Into<String>,
    log: &ActionLog,
    dataset: Arc<Dataset>,
    tags: &mut TagStore,
) -> Result<Session> {
    let mut entries = log.entries().iter().peekable();
    let mut session = Session::pristine(session_id.into(), dataset);
    match entries.next_if(|e| matches!(e.action, Action::LoadDataset { .. })) {
        Some(first) => {
            session
                .state
                .action_log
                .append_at(first.action.clone(), first.ts);
        }
        None => {
            session.state.action_log.append(Action::LoadDataset {
                dataset_id: session.dataset.id().to_string(),
            });
        }
    }
    for entry in entries {
        session
            .apply(&entry.action, entry.ts, tags)
            .map_err(|e| Error::ReplayDivergence {
                seq: entry.seq,
                reason: e.to_string(),
            })?;
    }
    Ok(session)
}
