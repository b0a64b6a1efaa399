//! Spherical k-means over unit-normalized TF-IDF document vectors.
//!
//! Seeding is k-means++ with `1 - cosine` as the distance. Each restart runs
//! assign/update rounds until assignments stop changing or the iteration cap
//! is hit; the restart with the lowest objective wins, earlier restarts
//! winning ties. Documents whose vector is all zeros have no direction and
//! are parked in cluster 0 without contributing to the objective.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::DocId;
use crate::query::ResultSet;
use crate::textindex::CorpusIndex;

pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<DocId, usize>,
    /// Unit-length centroid per cluster (non-zero entries only). Empty for a
    /// cluster that never received a seed.
    pub centroids: Vec<BTreeMap<String, f64>>,
    /// Head of each cluster; `None` for empty clusters.
    pub heads: Vec<Option<DocId>>,
    /// Sum of `1 - cosine(doc, centroid)` over documents with a direction.
    pub objective: f64,
    pub iterations_run: usize,
    pub converged: bool,
    /// Objective after seeding and after every iteration of the winning run.
    pub objective_trace: Vec<f64>,
    /// Final objective of every restart, in restart order.
    pub restart_objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub index: usize,
    pub head: Option<DocId>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub seed: u64,
    pub objective: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub clusters: Vec<ClusterInfo>,
}

impl Clustering {
    /// Heads of the non-empty clusters, in cluster order.
    pub fn cluster_heads(&self) -> Vec<DocId> {
        self.heads.iter().flatten().copied().collect()
    }

    /// Members of cluster `index`, ascending.
    pub fn members(&self, index: usize) -> Result<Vec<DocId>> {
        if index >= self.k {
            return Err(Error::IndexOutOfRange { index, k: self.k });
        }
        Ok(self
            .assignments
            .iter()
            .filter(|(_, &c)| c == index)
            .map(|(&d, _)| d)
            .collect())
    }

    pub fn summary(&self) -> ClusterSummary {
        let mut sizes = vec![0usize; self.k];
        for &c in self.assignments.values() {
            sizes[c] += 1;
        }
        ClusterSummary {
            k: self.k,
            seed: self.seed,
            objective: self.objective,
            iterations_run: self.iterations_run,
            converged: self.converged,
            clusters: (0..self.k)
                .map(|index| ClusterInfo {
                    index,
                    head: self.heads[index],
                    size: sizes[index],
                })
                .collect(),
        }
    }
}

pub fn cluster_heads(clustering: &Clustering) -> Vec<DocId> {
    clustering.cluster_heads()
}

pub fn members(clustering: &Clustering, index: usize) -> Result<Vec<DocId>> {
    clustering.members(index)
}

/// Sparse unit vector: `(term slot, weight)` sorted by slot.
type SparseVec = Vec<(usize, f64)>;

struct Prepared {
    docs: Vec<DocId>,
    vectors: Vec<Option<SparseVec>>,
    vocab: Vec<String>,
}

fn prepare(results: &ResultSet, index: &CorpusIndex) -> Result<Prepared> {
    let docs: Vec<DocId> = results.doc_ids.iter().copied().collect();
    let mut raw = Vec::with_capacity(docs.len());
    let mut vocab_set = BTreeSet::new();
    for &d in &docs {
        let v = index.doc_vector(d)?;
        vocab_set.extend(v.iter().filter(|(_, &w)| w > 0.0).map(|(t, _)| t.clone()));
        raw.push(v);
    }
    let vocab: Vec<String> = vocab_set.into_iter().collect();
    let slot: BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let vectors = raw
        .into_iter()
        .map(|v| {
            let entries: SparseVec = v
                .iter()
                .filter(|(_, &w)| w > 0.0)
                .map(|(t, &w)| (slot[t.as_str()], w))
                .collect();
            let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            (norm > 0.0).then(|| entries.into_iter().map(|(i, w)| (i, w / norm)).collect())
        })
        .collect();
    Ok(Prepared {
        docs,
        vectors,
        vocab,
    })
}

fn cosine(doc: &SparseVec, centroid: &[f64]) -> f64 {
    doc.iter().map(|&(i, w)| w * centroid[i]).sum()
}

fn densify(doc: &SparseVec, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for &(i, w) in doc {
        out[i] = w;
    }
    out
}

struct Run {
    assign: Vec<usize>,
    centroids: Vec<Option<Vec<f64>>>,
    objective: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn seed_centroids(
    p: &Prepared,
    live: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<Vec<f64>>> {
    let dim = p.vocab.len();
    let mut centroids: Vec<Option<Vec<f64>>> = vec![None; k];
    if live.is_empty() {
        return centroids;
    }
    let vec_of = |i: usize| p.vectors[i].as_ref().expect("live docs have vectors");
    let mut chosen = vec![live[rng.random_range(0..live.len())]];
    centroids[0] = Some(densify(vec_of(chosen[0]), dim));
    let mut distance: Vec<f64> = live
        .iter()
        .map(|&i| (1.0 - cosine(vec_of(i), centroids[0].as_ref().unwrap())).max(0.0))
        .collect();

    for slot in centroids.iter_mut().take(k).skip(1) {
        let total: f64 = distance.iter().sum();
        let pick = if total > 1e-12 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (pos, &d) in distance.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                pick = Some(pos);
                if target < d {
                    break;
                }
                target -= d;
            }
            pick.map(|pos| live[pos])
        } else {
            let remaining: Vec<usize> = live
                .iter()
                .copied()
                .filter(|i| !chosen.contains(i))
                .collect();
            (!remaining.is_empty()).then(|| remaining[rng.random_range(0..remaining.len())])
        };
        let Some(pick) = pick else { break };
        chosen.push(pick);
        let centroid = densify(vec_of(pick), dim);
        for (pos, &i) in live.iter().enumerate() {
            let d = (1.0 - cosine(vec_of(i), &centroid)).max(0.0);
            if d < distance[pos] {
                distance[pos] = d;
            }
        }
        *slot = Some(centroid);
    }
    centroids
}

fn assign_all(p: &Prepared, centroids: &[Option<Vec<f64>>]) -> Vec<usize> {
    p.vectors
        .iter()
        .map(|v| match v {
            None => 0,
            Some(v) => {
                let mut best = (0usize, f64::NEG_INFINITY);
                for (j, c) in centroids.iter().enumerate() {
                    if let Some(c) = c {
                        let sim = cosine(v, c);
                        if sim > best.1 {
                            best = (j, sim);
                        }
                    }
                }
                best.0
            }
        })
        .collect()
}

fn update_centroids(
    p: &Prepared,
    assign: &[usize],
    previous: &[Option<Vec<f64>>],
) -> Vec<Option<Vec<f64>>> {
    let dim = p.vocab.len();
    let mut sums: Vec<Option<Vec<f64>>> = vec![None; previous.len()];
    for (v, &c) in p.vectors.iter().zip(assign) {
        let Some(v) = v else { continue };
        let sum = sums[c].get_or_insert_with(|| vec![0.0; dim]);
        for &(i, w) in v {
            sum[i] += w;
        }
    }
    sums.into_iter()
        .zip(previous)
        .map(|(sum, prev)| match sum {
            Some(mut s) => {
                let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    s.iter_mut().for_each(|x| *x /= norm);
                    Some(s)
                } else {
                    prev.clone()
                }
            }
            None => prev.clone(),
        })
        .collect()
}

fn objective(p: &Prepared, assign: &[usize], centroids: &[Option<Vec<f64>>]) -> f64 {
    p.vectors
        .iter()
        .zip(assign)
        .filter_map(|(v, &c)| {
            let v = v.as_ref()?;
            let sim = centroids[c].as_ref().map_or(0.0, |cv| cosine(v, cv));
            Some(1.0 - sim)
        })
        .sum()
}

fn run_once(p: &Prepared, k: usize, max_iterations: usize, rng: &mut ChaCha8Rng) -> Run {
    let live: Vec<usize> = (0..p.docs.len())
        .filter(|&i| p.vectors[i].is_some())
        .collect();
    let mut centroids = seed_centroids(p, &live, k, rng);
    let mut assign = assign_all(p, &centroids);
    let mut trace = vec![objective(p, &assign, &centroids)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        iterations += 1;
        centroids = update_centroids(p, &assign, &centroids);
        let next = assign_all(p, &centroids);
        trace.push(objective(p, &next, &centroids));
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
    }
    Run {
        objective: *trace.last().expect("trace is never empty"),
        assign,
        centroids,
        trace,
        iterations,
        converged,
    }
}

/// Clusters the matched documents into `k` groups.
pub fn clusterize(
    results: &ResultSet,
    index: &CorpusIndex,
    k: usize,
    seed: u64,
    config: &ClusterConfig,
) -> Result<Clustering> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    if k == 0 || k > results.len() {
        return Err(Error::InvalidK {
            k,
            docs: results.len(),
        });
    }
    let p = prepare(results, index)?;

    let mut best: Option<Run> = None;
    let mut restart_objectives = Vec::new();
    for restart in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let run = run_once(&p, k, config.max_iterations, &mut rng);
        restart_objectives.push(run.objective);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    let mut heads: Vec<Option<(DocId, f64)>> = vec![None; k];
    for (i, &c) in run.assign.iter().enumerate() {
        let sim = match (&p.vectors[i], &run.centroids[c]) {
            (Some(v), Some(cv)) => cosine(v, cv),
            _ => 0.0,
        };
        let doc = p.docs[i];
        // docs are visited in ascending order, so strict > keeps the lowest id on ties
        if heads[c].is_none_or(|(_, s)| sim > s) {
            heads[c] = Some((doc, sim));
        }
    }

    Ok(Clustering {
        k,
        seed,
        assignments: p
            .docs
            .iter()
            .copied()
            .zip(run.assign.iter().copied())
            .collect(),
        centroids: run
            .centroids
            .iter()
            .map(|c| {
                c.as_ref()
                    .map(|c| {
                        c.iter()
                            .enumerate()
                            .filter(|(_, &w)| w != 0.0)
                            .map(|(i, &w)| (p.vocab[i].clone(), w))
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .collect(),
        heads: heads.into_iter().map(|h| h.map(|(d, _)| d)).collect(),
        objective: run.objective,
        iterations_run: run.iterations,
        converged: run.converged,
        objective_trace: run.trace,
        restart_objectives,
    })
}
