//! Correspondent contact graph with LIFO-undoable node and edge removal.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Address, EmailRecord};
use crate::query::ResultSet;

/// Unordered endpoint pair stored with `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub a: String,
    pub b: String,
}

impl EdgeKey {
    pub fn new(x: &str, y: &str) -> Self {
        if x <= y {
            EdgeKey {
                a: x.to_string(),
                b: y.to_string(),
            }
        } else {
            EdgeKey {
                a: y.to_string(),
                b: x.to_string(),
            }
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.a == self.b
    }
}

/// Message counts in each direction between `a` and `b` of an [`EdgeKey`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub a_to_b: u64,
    pub b_to_a: u64,
}

impl EdgeCounts {
    pub fn weight(&self) -> u64 {
        self.a_to_b + self.b_to_a
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(flatten)]
    pub key: EdgeKey,
    pub weight: u64,
    #[serde(flatten)]
    pub counts: EdgeCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Removal {
    Node {
        node: Address,
        edges: Vec<(EdgeKey, EdgeCounts)>,
    },
    Edge {
        key: EdgeKey,
        counts: EdgeCounts,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContactGraph {
    nodes: BTreeMap<String, Address>,
    edges: BTreeMap<EdgeKey, EdgeCounts>,
    deletion_stack: Vec<Removal>,
}

/// Serializable view of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphView {
    pub nodes: Vec<Address>,
    pub edges: Vec<Edge>,
    pub undo_depth: usize,
}

impl ContactGraph {
    /// One node per address in the matched emails and one edge per
    /// communicating pair. A message to several recipients contributes one
    /// pair per recipient; a self-edge only arises when the sender is the
    /// sole recipient.
    pub fn build(results: &ResultSet, records: &[EmailRecord]) -> Self {
        let mut graph = ContactGraph::default();
        for record in records.iter().filter(|r| results.contains(r.doc_id)) {
            for addr in record.participants() {
                graph
                    .nodes
                    .entry(addr.canonical.clone())
                    .or_insert_with(|| addr.clone());
            }
            let sole = record.recipients.len() == 1;
            for recipient in &record.recipients {
                if recipient == &record.sender && !sole {
                    continue;
                }
                graph.add_message(record.sender.as_str(), recipient.as_str());
            }
        }
        graph
    }

    fn add_message(&mut self, from: &str, to: &str) {
        let key = EdgeKey::new(from, to);
        let forward = key.a == from;
        let counts = self.edges.entry(key).or_default();
        if forward {
            counts.a_to_b += 1;
        } else {
            counts.b_to_a += 1;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn undo_depth(&self) -> usize {
        self.deletion_stack.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Address> {
        self.nodes.values()
    }

    pub fn has_node(&self, address: &str) -> bool {
        self.nodes.contains_key(address)
    }

    pub fn edge(&self, x: &str, y: &str) -> Option<EdgeCounts> {
        self.edges.get(&EdgeKey::new(x, y)).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &EdgeCounts)> {
        self.edges.iter()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().map(EdgeCounts::weight).sum()
    }

    pub fn deletion_stack(&self) -> &[Removal] {
        &self.deletion_stack
    }

    /// Removes `address` and its incident edges.
    pub fn remove_node(&mut self, address: &str) -> Result<()> {
        let node = self
            .nodes
            .remove(address)
            .ok_or_else(|| Error::UnknownNode(address.to_string()))?;
        let incident: Vec<EdgeKey> = self
            .edges
            .keys()
            .filter(|k| k.a == address || k.b == address)
            .cloned()
            .collect();
        let edges = incident
            .into_iter()
            .map(|k| {
                let counts = self.edges.remove(&k).expect("key collected from map");
                (k, counts)
            })
            .collect();
        self.deletion_stack.push(Removal::Node { node, edges });
        Ok(())
    }

    /// Removes the edge between `x` and `y`; both endpoints stay.
    pub fn remove_edge(&mut self, x: &str, y: &str) -> Result<()> {
        let key = EdgeKey::new(x, y);
        let counts = self
            .edges
            .remove(&key)
            .ok_or_else(|| Error::UnknownEdge(key.a.clone(), key.b.clone()))?;
        self.deletion_stack.push(Removal::Edge { key, counts });
        Ok(())
    }

    /// Reinstates the most recent removal.
    pub fn undo_removal(&mut self) -> Result<()> {
        match self.deletion_stack.pop().ok_or(Error::EmptyUndoStack)? {
            Removal::Node { node, edges } => {
                self.nodes.insert(node.canonical.clone(), node);
                self.edges.extend(edges);
            }
            Removal::Edge { key, counts } => {
                self.edges.insert(key, counts);
            }
        }
        Ok(())
    }

    /// Re-applies a recorded removal sequence to a freshly built graph.
    pub fn apply_removals(&mut self, removals: &[Removal]) -> Result<()> {
        for removal in removals {
            match removal {
                Removal::Node { node, .. } => self.remove_node(node.as_str())?,
                Removal::Edge { key, .. } => self.remove_edge(&key.a, &key.b)?,
            }
        }
        Ok(())
    }

    /// Same nodes and edges, ignoring the undo history.
    pub fn same_structure(&self, other: &ContactGraph) -> bool {
        self.nodes.keys().eq(other.nodes.keys()) && self.edges == other.edges
    }

    pub fn view(&self) -> GraphView {
        GraphView {
            nodes: self.nodes.values().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|(key, counts)| Edge {
                    key: key.clone(),
                    weight: counts.weight(),
                    counts: *counts,
                })
                .collect(),
            undo_depth: self.deletion_stack.len(),
        }
    }

    /// Graphviz DOT export with weight and directed-count attributes.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph contacts {\n");
        for node in self.nodes.values() {
            let _ = write!(out, "  \"{}\"", dot_escape(node.as_str()));
            if let Some(name) = &node.display_name {
                let _ = write!(out, " [label=\"{}\"]", dot_escape(name));
            }
            out.push_str(";\n");
        }
        for (key, counts) in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -- \"{}\" [weight={}, a_to_b={}, b_to_a={}];",
                dot_escape(&key.a),
                dot_escape(&key.b),
                counts.weight(),
                counts.a_to_b,
                counts.b_to_a
            );
        }
        out.push_str("}\n");
        out
    }

    /// GraphML export with weight and directed-count attributes.
    pub fn to_graphml(&self) -> String {
        let mut out = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n\
  <key id=\"name\" for=\"node\" attr.name=\"display_name\" attr.type=\"string\"/>\n\
  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n\
  <key id=\"a_to_b\" for=\"edge\" attr.name=\"a_to_b\" attr.type=\"long\"/>\n\
  <key id=\"b_to_a\" for=\"edge\" attr.name=\"b_to_a\" attr.type=\"long\"/>\n\
  <graph id=\"contacts\" edgedefault=\"undirected\">\n",
        );
        for node in self.nodes.values() {
            let id = xml_escape(node.as_str());
            match &node.display_name {
                Some(name) => {
                    let _ = writeln!(
                        out,
                        "    <node id=\"{id}\"><data key=\"name\">{}</data></node>",
                        xml_escape(name)
                    );
                }
                None => {
                    let _ = writeln!(out, "    <node id=\"{id}\"/>");
                }
            }
        }
        for (key, counts) in &self.edges {
            let _ = writeln!(
                out,
                "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{}</data><data key=\"a_to_b\">{}</data><data key=\"b_to_a\">{}</data></edge>",
                xml_escape(&key.a),
                xml_escape(&key.b),
                counts.weight(),
                counts.a_to_b,
                counts.b_to_a
            );
        }
        out.push_str("  </graph>\n</graphml>\n");
        out
    }
}

pub fn build_graph(results: &ResultSet, records: &[EmailRecord]) -> ContactGraph {
    ContactGraph::build(results, records)
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}
