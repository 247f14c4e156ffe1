//! Depth / chronology layout and deterministic DOT and JSON serialization.
//!
//! X is the generation depth, Y the chronological rank of a node among the
//! nodes sharing its depth. DOT output pins those grid positions with Y
//! growing downward.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::agent::ContextDigest;
use crate::ingest::Timestamp;
use crate::lineage::{AssetNode, GraphStats, LineageEdge, NodeOrigin, WorkflowGraph};
use crate::mining::{top_ngrams, MiningReport, NGramTable, RankedNGram};
use crate::scalar::percent_display;
use crate::{TOOL_NAME, TOOL_VERSION};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error("invalid graph document: {0}")]
    InvalidDocument(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutedGraph {
    pub graph: WorkflowGraph,
    /// node_id → (x = depth, y = chronological rank within that depth).
    pub coords: BTreeMap<String, (usize, usize)>,
}

impl LayoutedGraph {
    /// Nodes in `(x, y)` order.
    pub fn ordered_nodes(&self) -> Vec<&AssetNode> {
        let mut nodes: Vec<&AssetNode> = self.graph.nodes.values().collect();
        nodes.sort_by_key(|n| self.coords[&n.node_id]);
        nodes
    }
}

pub fn layout(graph: WorkflowGraph) -> LayoutedGraph {
    let mut by_depth: BTreeMap<usize, Vec<&AssetNode>> = BTreeMap::new();
    for node in graph.nodes.values() {
        by_depth.entry(node.depth).or_default().push(node);
    }
    let mut coords = BTreeMap::new();
    for (depth, mut nodes) in by_depth {
        nodes.sort_by(|a, b| {
            (a.created_at, a.created_global_seq, &a.node_id).cmp(&(b.created_at, b.created_global_seq, &b.node_id))
        });
        for (rank, node) in nodes.into_iter().enumerate() {
            coords.insert(node.node_id.clone(), (depth, rank));
        }
    }
    LayoutedGraph { graph, coords }
}

/// Fill color for an asset kind.
pub fn kind_color(kind: &str) -> &'static str {
    match kind {
        "image" => "lightblue",
        "video" => "lightgreen",
        "prompt" => "pink",
        _ => "gray",
    }
}

pub fn origin_shape(origin: NodeOrigin) -> &'static str {
    match origin {
        NodeOrigin::Generated => "box",
        NodeOrigin::Manual => "ellipse",
    }
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn join_nums(nums: &[usize]) -> String {
    nums.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Label text: `#<global_seq>` then optional `M:` and `R:` lines.
pub fn node_label(node: &AssetNode) -> String {
    let mut label = if node.placeholder {
        "#?".to_string()
    } else {
        format!("#{}", node.created_global_seq)
    };
    if !node.modify_seqs.is_empty() {
        let _ = write!(label, "\nM:{}", join_nums(&node.modify_seqs));
    }
    if let Some(r) = node.remove_seq {
        let _ = write!(label, "\nR:{r}");
    }
    label
}

pub fn to_dot(lg: &LayoutedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", dot_quote(&lg.graph.session_id));
    out.push_str("  graph [rankdir=LR];\n");
    out.push_str("  node [style=filled];\n");
    for node in lg.ordered_nodes() {
        let (x, y) = lg.coords[&node.node_id];
        let _ = writeln!(
            out,
            "  {} [label={}, shape={}, fillcolor={}, pos=\"{},{}!\"];",
            dot_quote(&node.node_id),
            dot_quote(&node_label(node)),
            origin_shape(node.origin),
            kind_color(&node.kind),
            x,
            -(y as i64),
        );
    }
    for edge in &lg.graph.edges {
        let _ = writeln!(out, "  {} -> {};", dot_quote(&edge.parent_id), dot_quote(&edge.child_id));
    }
    out.push_str("}\n");
    out
}

fn meta(session_id: Option<&str>) -> Value {
    let mut m = Map::new();
    if let Some(s) = session_id {
        m.insert("session_id".into(), json!(s));
    }
    m.insert("tool".into(), json!(TOOL_NAME));
    m.insert("version".into(), json!(TOOL_VERSION));
    Value::Object(m)
}

fn node_value(node: &AssetNode, (x, y): (usize, usize)) -> Value {
    json!({
        "node_id": node.node_id,
        "kind": node.kind,
        "origin": node.origin.as_str(),
        "created_global_seq": node.created_global_seq,
        "created_at": node.created_at.to_string(),
        "depth": node.depth,
        "modify_seqs": node.modify_seqs,
        "remove_seq": node.remove_seq,
        "placeholder": node.placeholder,
        "x": x,
        "y": y,
    })
}

fn ranked_value(r: &RankedNGram<f64>) -> Value {
    json!({ "gram": r.gram, "count": r.count, "share": r.share, "display": r.display })
}

fn ngram_value(table: &NGramTable, top_k: usize) -> Value {
    let entries: Vec<Value> = table
        .counts
        .iter()
        .map(|(gram, &count)| {
            json!({
                "gram": gram,
                "count": count,
                "share": if table.total == 0 { 0.0 } else { count as f64 / table.total as f64 },
                "display": percent_display(count, table.total),
            })
        })
        .collect();
    let top: Vec<Value> = top_ngrams::<f64>(table, top_k).iter().map(ranked_value).collect();
    json!({ "n": table.n, "total": table.total, "entries": entries, "top": top })
}

fn transitions_value(mining: &MiningReport) -> Value {
    let model = &mining.model;
    let entries: Vec<Value> = model
        .transition_counts
        .iter()
        .map(|((from, to), &count)| {
            json!({
                "from": from,
                "to": to,
                "count": count,
                "probability": model.transition_probs[&(from.clone(), to.clone())],
                "display": model.display(from, to),
            })
        })
        .collect();
    json!({ "states": model.states, "outgoing": model.outgoing, "entries": entries })
}

fn render(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    text
}

/// Builder for the structured document; absent sections serialize as `null`.
#[derive(Debug, Clone, Copy)]
pub struct Document<'a> {
    graph: &'a LayoutedGraph,
    stats: Option<&'a GraphStats>,
    mining: Option<&'a MiningReport>,
    digest: Option<&'a ContextDigest>,
}

impl<'a> Document<'a> {
    pub fn new(graph: &'a LayoutedGraph) -> Self {
        Document {
            graph,
            stats: None,
            mining: None,
            digest: None,
        }
    }

    pub fn stats(mut self, stats: Option<&'a GraphStats>) -> Self {
        self.stats = stats;
        self
    }

    pub fn mining(mut self, mining: Option<&'a MiningReport>) -> Self {
        self.mining = mining;
        self
    }

    pub fn digest(mut self, digest: Option<&'a ContextDigest>) -> Self {
        self.digest = digest;
        self
    }

    pub fn to_value(&self) -> Value {
        let lg = self.graph;
        let nodes: Vec<Value> = lg
            .ordered_nodes()
            .into_iter()
            .map(|n| node_value(n, lg.coords[&n.node_id]))
            .collect();
        let edges: Vec<Value> = lg
            .graph
            .edges
            .iter()
            .map(|e| json!({ "parent": e.parent_id, "child": e.child_id }))
            .collect();
        let mut doc = Map::new();
        doc.insert("meta".into(), meta(Some(&lg.graph.session_id)));
        doc.insert("nodes".into(), Value::Array(nodes));
        doc.insert("edges".into(), Value::Array(edges));
        doc.insert("stats".into(), self.stats.map_or(Value::Null, |s| json!(s)));
        doc.insert(
            "ngrams".into(),
            self.mining.map_or(Value::Null, |m| {
                Value::Array(m.ngrams.iter().map(|t| ngram_value(t, m.top_k)).collect())
            }),
        );
        doc.insert("transitions".into(), self.mining.map_or(Value::Null, transitions_value));
        if let Some(d) = self.digest {
            doc.insert("digest".into(), d.to_value());
        }
        Value::Object(doc)
    }

    pub fn render(&self) -> String {
        render(&self.to_value())
    }
}

pub fn to_json(lg: &LayoutedGraph, stats: Option<&GraphStats>, mining: Option<&MiningReport>) -> String {
    Document::new(lg).stats(stats).mining(mining).render()
}

/// Statistics-only document: `meta`, `ngrams` and `transitions`.
pub fn mining_to_json(mining: &MiningReport) -> String {
    render(&json!({
        "meta": meta(None),
        "ngrams": mining.ngrams.iter().map(|t| ngram_value(t, mining.top_k)).collect::<Vec<_>>(),
        "transitions": transitions_value(mining),
    }))
}

/// Recovers the layouted graph (and stats, when present) from [`to_json`] output.
pub fn read_graph_json(text: &str) -> Result<(LayoutedGraph, Option<GraphStats>), ExportError> {
    let bad = |what: &str| ExportError::InvalidDocument(what.to_string());
    let doc: Value = serde_json::from_str(text).map_err(|e| ExportError::InvalidDocument(e.to_string()))?;
    let session_id = doc["meta"]["session_id"].as_str().ok_or_else(|| bad("meta.session_id"))?.to_string();
    let str_field = |v: &Value, k: &str| v[k].as_str().map(str::to_string).ok_or_else(|| bad(k));
    let usize_field = |v: &Value, k: &str| v[k].as_u64().map(|n| n as usize).ok_or_else(|| bad(k));

    let mut nodes = BTreeMap::new();
    let mut coords = BTreeMap::new();
    for v in doc["nodes"].as_array().ok_or_else(|| bad("nodes"))? {
        let node_id = str_field(v, "node_id")?;
        let origin = match v["origin"].as_str() {
            Some("generated") => NodeOrigin::Generated,
            Some("manual") => NodeOrigin::Manual,
            _ => return Err(bad("origin")),
        };
        let created_at = Timestamp::parse(&str_field(v, "created_at")?).map_err(ExportError::InvalidDocument)?;
        let modify_seqs = v["modify_seqs"]
            .as_array()
            .ok_or_else(|| bad("modify_seqs"))?
            .iter()
            .map(|n| n.as_u64().map(|n| n as usize).ok_or_else(|| bad("modify_seqs")))
            .collect::<Result<Vec<_>, _>>()?;
        let remove_seq = match &v["remove_seq"] {
            Value::Null => None,
            n => Some(n.as_u64().ok_or_else(|| bad("remove_seq"))? as usize),
        };
        coords.insert(node_id.clone(), (usize_field(v, "x")?, usize_field(v, "y")?));
        nodes.insert(
            node_id.clone(),
            AssetNode {
                node_id,
                kind: str_field(v, "kind")?,
                origin,
                created_global_seq: usize_field(v, "created_global_seq")?,
                created_at,
                depth: usize_field(v, "depth")?,
                modify_seqs,
                remove_seq,
                placeholder: v["placeholder"].as_bool().unwrap_or(false),
            },
        );
    }
    let mut edges = Vec::new();
    for v in doc["edges"].as_array().ok_or_else(|| bad("edges"))? {
        edges.push(LineageEdge {
            parent_id: str_field(v, "parent")?,
            child_id: str_field(v, "child")?,
        });
    }
    let max_depth = nodes.values().map(|n| n.depth).max().unwrap_or(0);
    let stats = match &doc["stats"] {
        Value::Null => None,
        s => Some(serde_json::from_value(s.clone()).map_err(|e| ExportError::InvalidDocument(e.to_string()))?),
    };
    Ok((
        LayoutedGraph {
            graph: WorkflowGraph {
                session_id,
                nodes,
                edges,
                max_depth,
            },
            coords,
        },
        stats,
    ))
}
