//! Provenance DAG of creative assets.
//!
//! INSERT and GENERATION moves create nodes; their `connected_from` parents
//! become edges. MODIFY and REMOVE moves annotate existing nodes with numbers
//! drawn from two session-wide counters. A node's depth is one more than the
//! deepest of its parents, roots sit at depth 0.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::filter::{DesignMove, MoveKind};
use crate::ingest::Timestamp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("parent `{parent}` of `{child}` was never created")]
    DanglingParent { parent: String, child: String },
    #[error("node `{0}` created more than once")]
    DuplicateNode(String),
    #[error("MODIFY targets unknown node `{0}`")]
    ModifyUnknownNode(String),
    #[error("REMOVE targets unknown node `{0}`")]
    RemoveUnknownNode(String),
    #[error("MODIFY of node `{0}` after it was removed")]
    ModifyAfterRemove(String),
    #[error("node `{0}` removed more than once")]
    DuplicateRemove(String),
    #[error("move {global_seq} ({move_kind}) carries no node_id")]
    MissingNodeId { global_seq: usize, move_kind: MoveKind },
}

/// Square (generated) versus circle (manual) in the rendered workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeOrigin {
    Generated,
    Manual,
}

impl NodeOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeOrigin::Generated => "generated",
            NodeOrigin::Manual => "manual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssetNode {
    pub node_id: String,
    pub kind: String,
    pub origin: NodeOrigin,
    /// Global sequence number of the creating move; 0 for lenient placeholders.
    pub created_global_seq: usize,
    pub created_at: Timestamp,
    pub depth: usize,
    pub modify_seqs: Vec<usize>,
    pub remove_seq: Option<usize>,
    /// Synthesized for a parent that never appeared in the log (lenient mode only).
    pub placeholder: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LineageEdge {
    pub parent_id: String,
    pub child_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkflowGraph {
    pub session_id: String,
    pub nodes: BTreeMap<String, AssetNode>,
    /// Sorted by `(parent_id, child_id)`.
    pub edges: Vec<LineageEdge>,
    pub max_depth: usize,
}

impl WorkflowGraph {
    pub fn empty(session_id: impl Into<String>) -> Self {
        WorkflowGraph {
            session_id: session_id.into(),
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            max_depth: 0,
        }
    }

    pub fn parents_of<'a>(&'a self, node_id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.child_id == node_id)
            .map(|e| e.parent_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphOptions {
    pub strict: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { strict: true }
    }
}

/// Problems tolerated in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphWarning {
    PlaceholderParent { parent: String, child: String },
    ModifyAfterRemove(String),
    DuplicateRemove(String),
}

pub fn build_graph(moves: &[DesignMove], options: GraphOptions) -> Result<(WorkflowGraph, Vec<GraphWarning>), GraphError> {
    let session_id = moves.first().map(|m| m.event.session_id.clone()).unwrap_or_default();
    let mut nodes: BTreeMap<String, AssetNode> = BTreeMap::new();
    let mut declared: Vec<(String, Vec<String>)> = Vec::new();
    let mut warnings = Vec::new();
    let (mut modify_counter, mut remove_counter) = (0usize, 0usize);

    for m in moves {
        let node_id = m.event.node_id.clone().ok_or(GraphError::MissingNodeId {
            global_seq: m.global_seq,
            move_kind: m.move_kind,
        })?;
        match m.move_kind {
            MoveKind::Insert | MoveKind::Generation => {
                if nodes.contains_key(&node_id) {
                    return Err(GraphError::DuplicateNode(node_id));
                }
                let origin = if m.move_kind == MoveKind::Generation {
                    NodeOrigin::Generated
                } else {
                    NodeOrigin::Manual
                };
                nodes.insert(
                    node_id.clone(),
                    AssetNode {
                        node_id: node_id.clone(),
                        kind: m.event.node_kind.clone(),
                        origin,
                        created_global_seq: m.global_seq,
                        created_at: m.event.timestamp,
                        depth: 0,
                        modify_seqs: Vec::new(),
                        remove_seq: None,
                        placeholder: false,
                    },
                );
                declared.push((node_id, m.event.connected_from.clone()));
            }
            MoveKind::Modify => {
                modify_counter += 1;
                let node = nodes
                    .get_mut(&node_id)
                    .ok_or_else(|| GraphError::ModifyUnknownNode(node_id.clone()))?;
                if node.remove_seq.is_some() {
                    if options.strict {
                        return Err(GraphError::ModifyAfterRemove(node_id));
                    }
                    warnings.push(GraphWarning::ModifyAfterRemove(node_id));
                }
                node.modify_seqs.push(modify_counter);
            }
            MoveKind::Remove => {
                remove_counter += 1;
                let node = nodes
                    .get_mut(&node_id)
                    .ok_or_else(|| GraphError::RemoveUnknownNode(node_id.clone()))?;
                if node.remove_seq.is_some() {
                    if options.strict {
                        return Err(GraphError::DuplicateRemove(node_id));
                    }
                    warnings.push(GraphWarning::DuplicateRemove(node_id));
                } else {
                    node.remove_seq = Some(remove_counter);
                }
            }
        }
    }

    let mut edge_set: BTreeSet<LineageEdge> = BTreeSet::new();
    for (child, parents) in &declared {
        for parent in parents {
            if parent == child {
                return Err(GraphError::CycleDetected(vec![child.clone(), child.clone()]));
            }
            edge_set.insert(LineageEdge {
                parent_id: parent.clone(),
                child_id: child.clone(),
            });
        }
    }
    if let Some(cycle) = find_cycle(&edge_set) {
        return Err(GraphError::CycleDetected(cycle));
    }
    for edge in &edge_set {
        if !nodes.contains_key(&edge.parent_id) {
            if options.strict {
                return Err(GraphError::DanglingParent {
                    parent: edge.parent_id.clone(),
                    child: edge.child_id.clone(),
                });
            }
            let child_at = nodes[&edge.child_id].created_at;
            let placeholder = nodes.entry(edge.parent_id.clone()).or_insert_with(|| {
                warnings.push(GraphWarning::PlaceholderParent {
                    parent: edge.parent_id.clone(),
                    child: edge.child_id.clone(),
                });
                AssetNode {
                    node_id: edge.parent_id.clone(),
                    kind: crate::ingest::DEFAULT_NODE_KIND.to_string(),
                    origin: NodeOrigin::Manual,
                    created_global_seq: 0,
                    created_at: child_at,
                    depth: 0,
                    modify_seqs: Vec::new(),
                    remove_seq: None,
                    placeholder: true,
                }
            });
            placeholder.created_at = placeholder.created_at.min(child_at);
        }
    }

    let edges: Vec<LineageEdge> = edge_set.into_iter().collect();
    let depths: BTreeMap<String, usize> = longest_path_depths(nodes.keys().map(String::as_str), &edges)
        .into_iter()
        .map(|(id, d)| (id.to_string(), d))
        .collect();
    let mut max_depth = 0;
    for (id, node) in nodes.iter_mut() {
        node.depth = depths[id];
        max_depth = max_depth.max(node.depth);
    }
    Ok((
        WorkflowGraph {
            session_id,
            nodes,
            edges,
            max_depth,
        },
        warnings,
    ))
}

/// Depth by Kahn's algorithm: each node is one deeper than its deepest parent.
fn longest_path_depths<'a>(ids: impl Iterator<Item = &'a str>, edges: &'a [LineageEdge]) -> BTreeMap<&'a str, usize> {
    let mut indegree: BTreeMap<&str, usize> = ids.map(|id| (id, 0)).collect();
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in edges {
        *indegree.entry(e.child_id.as_str()).or_default() += 1;
        children.entry(e.parent_id.as_str()).or_default().push(e.child_id.as_str());
    }
    let mut depth: BTreeMap<&str, usize> = indegree.keys().map(|&id| (id, 0)).collect();
    let mut queue: VecDeque<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
    while let Some(id) = queue.pop_front() {
        let next = depth[id] + 1;
        for &child in children.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            let d = depth.get_mut(child).expect("child registered");
            *d = (*d).max(next);
            let deg = indegree.get_mut(child).expect("child registered");
            *deg -= 1;
            if *deg == 0 {
                queue.push_back(child);
            }
        }
    }
    depth
}

/// Returns one cycle as a closed path (first element repeated at the end).
fn find_cycle(edges: &BTreeSet<LineageEdge>) -> Option<Vec<String>> {
    let mut adjacency: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in edges {
        adjacency.entry(e.parent_id.as_str()).or_default().push(e.child_id.as_str());
        adjacency.entry(e.child_id.as_str()).or_default();
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Active,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = adjacency.keys().map(|&k| (k, Mark::Fresh)).collect();
    for &start in adjacency.keys() {
        if marks[start] != Mark::Fresh {
            continue;
        }
        // iterative DFS; `path` mirrors the active stack
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        let mut path: Vec<&str> = vec![start];
        marks.insert(start, Mark::Active);
        while let Some((node, next_idx)) = stack.last_mut() {
            let succ = &adjacency[*node];
            if *next_idx < succ.len() {
                let child = succ[*next_idx];
                *next_idx += 1;
                match marks[child] {
                    Mark::Active => {
                        let pos = path.iter().position(|&p| p == child).expect("active nodes are on the path");
                        let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
                        cycle.push(child.to_string());
                        return Some(cycle);
                    }
                    Mark::Fresh => {
                        marks.insert(child, Mark::Active);
                        stack.push((child, 0));
                        path.push(child);
                    }
                    Mark::Done => {}
                }
            } else {
                marks.insert(*node, Mark::Done);
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub max_depth: usize,
    /// Nodes with out-degree of at least 2.
    pub branch_count: usize,
    /// Nodes with out-degree 0.
    pub leaf_count: usize,
    /// Depth holding the most nodes; the shallowest wins ties.
    pub widest_depth: usize,
}

pub fn graph_stats(graph: &WorkflowGraph) -> GraphStats {
    let mut out_degree: BTreeMap<&str, usize> = graph.nodes.keys().map(|k| (k.as_str(), 0)).collect();
    for e in &graph.edges {
        *out_degree.entry(e.parent_id.as_str()).or_default() += 1;
    }
    let mut per_depth: BTreeMap<usize, usize> = BTreeMap::new();
    for node in graph.nodes.values() {
        *per_depth.entry(node.depth).or_default() += 1;
    }
    let widest_depth = per_depth
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&d, _)| d)
        .unwrap_or(0);
    GraphStats {
        node_count: graph.nodes.len(),
        edge_count: graph.edges.len(),
        max_depth: graph.max_depth,
        branch_count: out_degree.values().filter(|&&d| d >= 2).count(),
        leaf_count: out_degree.values().filter(|&&d| d == 0).count(),
        widest_depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Origin, RawEvent};

    fn mv(seq: usize, kind: MoveKind, node: &str, parents: &[&str]) -> DesignMove {
        DesignMove {
            move_kind: kind,
            global_seq: seq,
            event: RawEvent {
                event_id: format!("e{seq}"),
                timestamp: Timestamp::from_millis(seq as i64 * 10),
                session_id: "s".into(),
                action_type: "x".into(),
                raw_source_label: "y".into(),
                node_id: Some(node.into()),
                node_kind: "image".into(),
                connected_from: parents.iter().map(|p| p.to_string()).collect(),
                origin: Origin::User,
                payload: String::new(),
            },
        }
    }

    fn build(moves: &[DesignMove]) -> Result<WorkflowGraph, GraphError> {
        build_graph(moves, GraphOptions::default()).map(|(g, _)| g)
    }

    use MoveKind::*;

    #[test]
    fn single_parent_chain() {
        let g = build(&[mv(1, Insert, "A", &[]), mv(2, Generation, "B", &["A"])]).unwrap();
        assert_eq!(g.nodes["A"].depth, 0);
        assert_eq!(g.nodes["A"].origin, NodeOrigin::Manual);
        assert_eq!(g.nodes["B"].depth, 1);
        assert_eq!(g.nodes["B"].origin, NodeOrigin::Generated);
        assert_eq!(
            g.edges,
            vec![LineageEdge {
                parent_id: "A".into(),
                child_id: "B".into()
            }]
        );
    }

    #[test]
    fn depth_uses_deepest_parent() {
        let g = build(&[
            mv(1, Insert, "R", &[]),
            mv(2, Generation, "P1", &["R"]),
            mv(3, Generation, "X", &["P1"]),
            mv(4, Generation, "Y", &["X"]),
            mv(5, Generation, "P3", &["Y"]),
            mv(6, Generation, "D", &["P1", "P3"]),
        ])
        .unwrap();
        assert_eq!(g.nodes["P1"].depth, 1);
        assert_eq!(g.nodes["P3"].depth, 4);
        assert_eq!(g.nodes["D"].depth, 5);
        assert_eq!(g.max_depth, 5);
    }

    #[test]
    fn modify_counter_is_session_wide() {
        let g = build(&[
            mv(1, Insert, "A", &[]),
            mv(2, Modify, "A", &[]),
            mv(3, Modify, "A", &[]),
            mv(4, Insert, "B", &[]),
            mv(5, Modify, "B", &[]),
        ])
        .unwrap();
        assert_eq!(g.nodes["A"].modify_seqs, vec![1, 2]);
        assert_eq!(g.nodes["B"].modify_seqs, vec![3]);
    }

    #[test]
    fn remove_annotates_without_deleting() {
        let g = build(&[
            mv(1, Insert, "A", &[]),
            mv(2, Insert, "B", &[]),
            mv(3, Remove, "B", &[]),
            mv(4, Remove, "A", &[]),
        ])
        .unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.nodes["B"].remove_seq, Some(1));
        assert_eq!(g.nodes["A"].remove_seq, Some(2));
    }

    #[test]
    fn cycle_is_reported() {
        let err = build(&[mv(1, Insert, "A", &["B"]), mv(2, Insert, "B", &["A"])]).unwrap_err();
        match err {
            GraphError::CycleDetected(path) => {
                assert_eq!(path.first(), path.last());
                assert_eq!(path.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_parent_strict_and_lenient() {
        let moves = [mv(1, Generation, "B", &["ghost"])];
        assert_eq!(
            build(&moves),
            Err(GraphError::DanglingParent {
                parent: "ghost".into(),
                child: "B".into()
            })
        );
        let (g, warnings) = build_graph(&moves, GraphOptions { strict: false }).unwrap();
        assert!(g.nodes["ghost"].placeholder);
        assert_eq!(g.nodes["ghost"].depth, 0);
        assert_eq!(g.nodes["ghost"].origin, NodeOrigin::Manual);
        assert_eq!(g.nodes["B"].depth, 1);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn creation_and_target_errors() {
        assert_eq!(
            build(&[mv(1, Insert, "A", &[]), mv(2, Insert, "A", &[])]),
            Err(GraphError::DuplicateNode("A".into()))
        );
        assert_eq!(
            build(&[mv(1, Modify, "A", &[])]),
            Err(GraphError::ModifyUnknownNode("A".into()))
        );
        assert_eq!(
            build(&[mv(1, Remove, "A", &[])]),
            Err(GraphError::RemoveUnknownNode("A".into()))
        );
        let after_remove = [mv(1, Insert, "A", &[]), mv(2, Remove, "A", &[]), mv(3, Modify, "A", &[])];
        assert_eq!(build(&after_remove), Err(GraphError::ModifyAfterRemove("A".into())));
        let (g, w) = build_graph(&after_remove, GraphOptions { strict: false }).unwrap();
        assert_eq!(g.nodes["A"].modify_seqs, vec![1]);
        assert_eq!(w, vec![GraphWarning::ModifyAfterRemove("A".into())]);
    }

    #[test]
    fn stats_shapes() {
        let g = build(&[mv(1, Insert, "A", &[])]).unwrap();
        let s = graph_stats(&g);
        assert_eq!(
            (s.node_count, s.edge_count, s.max_depth, s.branch_count, s.leaf_count, s.widest_depth),
            (1, 0, 0, 0, 1, 0)
        );
        let g = build(&[
            mv(1, Insert, "R", &[]),
            mv(2, Generation, "a", &["R"]),
            mv(3, Generation, "b", &["R"]),
            mv(4, Generation, "c", &["R"]),
        ])
        .unwrap();
        let s = graph_stats(&g);
        assert_eq!((s.branch_count, s.leaf_count, s.max_depth, s.widest_depth), (1, 3, 1, 1));
        let s = graph_stats(&WorkflowGraph::empty("s"));
        assert_eq!((s.node_count, s.widest_depth), (0, 0));
    }

    #[test]
    fn duplicate_parent_listing_gives_one_edge() {
        let g = build(&[mv(1, Insert, "A", &[]), mv(2, Generation, "B", &["A", "A"])]).unwrap();
        assert_eq!(g.edges.len(), 1);
    }
}
