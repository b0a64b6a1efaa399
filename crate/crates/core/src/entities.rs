//! Entity ranking over the filtered subset and the global analyst tag store.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::query::ResultSet;
use crate::textindex::{CorpusIndex, Field, Term};

/// Words never surfaced as entities. The index itself keeps them, so they
/// remain queryable.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "but", "by", "can", "do", "for", "from", "had", "has", "have", "he", "her", "him",
    "his", "how", "i", "if", "in", "into", "is", "it", "its", "me", "my", "no", "not", "of", "on",
    "or", "our", "she", "so", "than", "that", "the", "their", "them", "there", "these", "they",
    "this", "to", "up", "us", "was", "we", "were", "what", "when", "which", "who", "will", "with",
    "would", "you", "your",
];

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.binary_search(&term).is_ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub term: Term,
    pub score: f64,
    pub origin_fields: BTreeSet<Field>,
}

/// Ranks terms of the matched documents by TF-IDF summed over those
/// documents, treating the matched set itself as the collection:
/// `score(t) = sum_d f(t, d) * ln(|D'| / df'(t))`.
///
/// Stopwords and zero scores are dropped; ties are broken by term.
pub fn rank_entities(
    results: &ResultSet,
    index: &CorpusIndex,
    k: usize,
) -> Result<Vec<EntityScore>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    if k == 0 {
        return Err(Error::InvalidK {
            k,
            docs: results.len(),
        });
    }

    struct Acc {
        occurrences: u64,
        docs: u64,
        fields: BTreeSet<Field>,
    }
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for &doc_id in &results.doc_ids {
        let entry = index
            .doc(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))?;
        for (term, counts) in &entry.terms {
            let slot = acc.entry(term.as_str()).or_insert_with(|| Acc {
                occurrences: 0,
                docs: 0,
                fields: BTreeSet::new(),
            });
            slot.occurrences += u64::from(counts.total());
            slot.docs += 1;
            if counts.subject > 0 {
                slot.fields.insert(Field::Subject);
            }
            if counts.body > 0 {
                slot.fields.insert(Field::Body);
            }
        }
    }

    let n = results.len() as f64;
    let mut scored: Vec<EntityScore> = acc
        .into_iter()
        .filter(|(term, a)| a.docs < results.len() as u64 && !is_stopword(term))
        .map(|(term, a)| EntityScore {
            term: Term::new(term).expect("index terms are valid"),
            score: a.occurrences as f64 * (n / a.docs as f64).ln(),
            origin_fields: a.fields,
        })
        .filter(|e| e.score > 0.0)
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.term.cmp(&b.term))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Analyst tags per term, shared by every dataset. Append-only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagStore {
    assignments: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCount {
    pub tag: String,
    pub count: u64,
}

/// Normalizes a term as typed by a user for tag storage.
pub fn tag_term(raw: &str) -> Result<Term> {
    Term::new(raw.trim().to_lowercase())
}

impl TagStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `tag` to `term`'s set. Returns whether the store changed.
    pub fn assign(&mut self, term: &str, tag: &str) -> Result<bool> {
        let label = tag.trim();
        if label.is_empty() {
            return Err(Error::EmptyLabel);
        }
        let term = tag_term(term)?;
        Ok(self
            .assignments
            .entry(term.into())
            .or_default()
            .insert(label.to_string()))
    }

    pub fn lookup(&self, term: &str) -> BTreeSet<String> {
        tag_term(term)
            .ok()
            .and_then(|t| self.assignments.get(t.as_str()).cloned())
            .unwrap_or_default()
    }

    /// Number of terms carrying each tag, most used first.
    pub fn distribution(&self) -> Vec<TagCount> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for labels in self.assignments.values() {
            for label in labels {
                *counts.entry(label).or_default() += 1;
            }
        }
        let mut out: Vec<TagCount> = counts
            .into_iter()
            .map(|(tag, count)| TagCount {
                tag: tag.to_string(),
                count,
            })
            .collect();
        out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.tag.cmp(&b.tag)));
        out
    }

    pub fn assignment_count(&self) -> usize {
        self.assignments.values().map(BTreeSet::len).sum()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.assignments.iter().map(|(t, l)| (t.as_str(), l))
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

pub fn assign_tag(store: &mut TagStore, term: &str, tag: &str) -> Result<bool> {
    store.assign(term, tag)
}

pub fn lookup_tags(store: &TagStore, term: &str) -> BTreeSet<String> {
    store.lookup(term)
}

pub fn tag_distribution(store: &TagStore) -> Vec<TagCount> {
    store.distribution()
}
