//! Deterministic synthetic session logs with declared ground truth.
//!
//! [`SessionBuilder`] records design moves and system noise, tracking what the
//! pipeline should reconstruct as it goes: node depths are computed when a
//! node is created (its parents already exist), and sequence numbers are
//! assigned when the log is finalized. That bookkeeping is independent of the
//! filter and graph code it is used to check.
//!
//! The pilot fixtures are constructed to match published aggregate counts
//! (927 raw events of which 563 survive filtering, and a 195-token stream with
//! 37 of 194 bigrams being GENERATION_image → GENERATION_image). They are not
//! the original data.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::filter::{DesignMove, FilterReport, MoveKind};
use crate::ingest::{Format, Origin, RawEvent, SessionLog, Timestamp};
use crate::lineage::{AssetNode, LineageEdge, NodeOrigin, WorkflowGraph};
use crate::token::{tokenize, TokenSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("token script step {step}: no live `{kind}` node for {move_kind}")]
    NoTarget { step: usize, move_kind: MoveKind, kind: String },
}

/// 2024-03-01T09:00:00Z
const BASE_MILLIS: i64 = 1_709_283_600_000;
const MAX_GAP_MILLIS: i64 = 2_500;

/// System noise templates: `(action_type, raw_source_label, discard reason)`.
/// Each one is claimed by a DISCARD rule of the default rule set.
pub const NOISE_TEMPLATES: [(&str, &str, &str); 8] = [
    ("temp_cache_purge", "cache_manager", "cleanup"),
    ("asset_cleanup", "gc_worker", "cleanup"),
    ("node_deleted", "temp_cache_purge", "cleanup"),
    ("edge_reroute", "graph_backend", "rerouting"),
    ("connection_updated", "backend_routing", "rerouting"),
    ("generation_progress", "async_worker", "async_intermediate"),
    ("state_update", "state_sync", "async_intermediate"),
    ("preview_render", "async_intermediate", "async_intermediate"),
];

#[derive(Debug, Clone)]
struct Signal {
    move_kind: MoveKind,
    node_id: String,
    kind: String,
    parents: Vec<String>,
    action: &'static str,
    source: &'static str,
    origin: Origin,
    payload: String,
}

#[derive(Debug, Clone)]
struct Noise {
    template: usize,
    node_id: Option<String>,
    kind: String,
    parents: Vec<String>,
    payload: String,
}

#[derive(Debug, Clone)]
enum Item {
    Signal(Signal),
    Noise(Noise),
}

#[derive(Debug, Clone)]
struct NodeInfo {
    kind: String,
    depth: usize,
    generated: bool,
    live: bool,
}

/// What the pipeline must reconstruct from a generated log.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: WorkflowGraph,
    pub moves: Vec<DesignMove>,
    pub report: FilterReport,
    pub tokens: TokenSequence,
}

/// Records a session move by move.
#[derive(Debug, Clone)]
pub struct SessionBuilder {
    session_id: String,
    rng: ChaCha8Rng,
    items: Vec<Item>,
    nodes: BTreeMap<String, NodeInfo>,
    created: Vec<String>,
    next_node: usize,
    next_temp: usize,
}

impl SessionBuilder {
    pub fn new(session_id: impl Into<String>, seed: u64) -> Self {
        SessionBuilder {
            session_id: session_id.into(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            items: Vec::new(),
            nodes: BTreeMap::new(),
            created: Vec::new(),
            next_node: 1,
            next_temp: 1,
        }
    }

    pub fn signal_count(&self) -> usize {
        self.items.iter().filter(|i| matches!(i, Item::Signal(_))).count()
    }

    pub fn is_live(&self, node: &str) -> bool {
        self.nodes.get(node).is_some_and(|n| n.live)
    }

    pub fn kind_of(&self, node: &str) -> Option<&str> {
        self.nodes.get(node).map(|n| n.kind.as_str())
    }

    /// Live nodes in creation order.
    pub fn live_nodes(&self) -> Vec<String> {
        self.created.iter().filter(|id| self.nodes[*id].live).cloned().collect()
    }

    /// Most recently created live node matching the predicate.
    fn latest_live(&self, pred: impl Fn(&NodeInfo) -> bool) -> Option<String> {
        self.created
            .iter()
            .rev()
            .find(|id| {
                let n = &self.nodes[*id];
                n.live && pred(n)
            })
            .cloned()
    }

    fn create(&mut self, move_kind: MoveKind, kind: &str, parents: &[String]) -> String {
        let node_id = format!("n{:04}", self.next_node);
        self.next_node += 1;
        let depth = parents
            .iter()
            .map(|p| self.nodes.get(p).expect("parents are created before children").depth + 1)
            .max()
            .unwrap_or(0);
        let (action, source, origin) = match move_kind {
            MoveKind::Generation => ("generation_executed", "model_runner", Origin::Generated),
            _ if kind == "image" && self.rng.gen_bool(0.5) => ("image_imported", "upload", Origin::User),
            _ => ("node_created", "canvas", Origin::User),
        };
        let mut unique_parents: Vec<String> = Vec::new();
        for p in parents {
            if !unique_parents.contains(p) {
                unique_parents.push(p.clone());
            }
        }
        self.nodes.insert(
            node_id.clone(),
            NodeInfo {
                kind: kind.to_string(),
                depth,
                generated: move_kind == MoveKind::Generation,
                live: true,
            },
        );
        self.created.push(node_id.clone());
        self.items.push(Item::Signal(Signal {
            move_kind,
            node_id: node_id.clone(),
            kind: kind.to_string(),
            parents: unique_parents,
            action,
            source,
            origin,
            payload: String::new(),
        }));
        node_id
    }

    pub fn insert(&mut self, kind: &str, parents: &[String]) -> String {
        self.create(MoveKind::Insert, kind, parents)
    }

    pub fn generate(&mut self, kind: &str, parents: &[String]) -> String {
        self.create(MoveKind::Generation, kind, parents)
    }

    pub fn modify(&mut self, node: &str) {
        let info = self.nodes.get(node).expect("modify targets a created node");
        assert!(info.live, "modify targets a live node");
        let kind = info.kind.clone();
        let (action, source, payload) = if kind == "prompt" {
            ("prompt_edited", "editor", r#"{"field":"text"}"#)
        } else if self.rng.gen_bool(0.5) {
            ("param_changed", "inspector", r#"{"field":"aspect_ratio","value":"16:9"}"#)
        } else {
            ("metadata_update", "inspector", r#"{"field":"scale","value":0.5}"#)
        };
        self.items.push(Item::Signal(Signal {
            move_kind: MoveKind::Modify,
            node_id: node.to_string(),
            kind,
            parents: Vec::new(),
            action,
            source,
            origin: Origin::User,
            payload: payload.to_string(),
        }));
    }

    pub fn remove(&mut self, node: &str) {
        let info = self.nodes.get_mut(node).expect("remove targets a created node");
        assert!(info.live, "remove targets a live node");
        info.live = false;
        let kind = info.kind.clone();
        self.items.push(Item::Signal(Signal {
            move_kind: MoveKind::Remove,
            node_id: node.to_string(),
            kind,
            parents: Vec::new(),
            action: "node_deleted",
            source: "canvas",
            origin: Origin::User,
            payload: String::new(),
        }));
    }

    fn random_noise(&mut self) -> Noise {
        let template = self.rng.gen_range(0..NOISE_TEMPLATES.len());
        let touches_real = !self.created.is_empty() && self.rng.gen_bool(0.5);
        let node_id = if touches_real {
            let idx = self.rng.gen_range(0..self.created.len());
            Some(self.created[idx].clone())
        } else if self.rng.gen_bool(0.8) {
            self.next_temp += 1;
            Some(format!("tmp{:04}", self.next_temp - 1))
        } else {
            None
        };
        let kind = node_id
            .as_deref()
            .and_then(|id| self.kind_of(id))
            .unwrap_or("image")
            .to_string();
        // re-routing noise carries parent links; they must be ignored downstream
        let parents = if NOISE_TEMPLATES[template].2 == "rerouting" && !self.created.is_empty() {
            let idx = self.rng.gen_range(0..self.created.len());
            let p = self.created[idx].clone();
            if Some(&p) == node_id.as_ref() {
                Vec::new()
            } else {
                vec![p]
            }
        } else {
            Vec::new()
        };
        let payload = if self.rng.gen_bool(0.3) {
            format!(r#"{{"step":{},"note":"bg, sync"}}"#, self.rng.gen_range(1..10))
        } else {
            String::new()
        };
        Noise {
            template,
            node_id,
            kind,
            parents,
            payload,
        }
    }

    /// Appends one noise event.
    pub fn noise(&mut self) {
        let n = self.random_noise();
        self.items.push(Item::Noise(n));
    }

    /// Inserts `count` noise events at uniformly random positions.
    pub fn scatter_noise(&mut self, count: usize) {
        for _ in 0..count {
            let n = self.random_noise();
            let pos = self.rng.gen_range(0..=self.items.len());
            self.items.insert(pos, Item::Noise(n));
        }
    }

    /// Assigns ids and timestamps, producing the log and its ground truth.
    pub fn finish(mut self) -> (SessionLog, GroundTruth) {
        let mut log = SessionLog::new(self.session_id.clone(), Format::Csv);
        let mut moves = Vec::new();
        let mut report = FilterReport {
            input_count: 0,
            kept_count: 0,
            discarded_count: 0,
            discarded_by_reason: BTreeMap::new(),
            kept_by_move: MoveKind::ALL.into_iter().map(|m| (m, 0)).collect(),
        };
        let mut graph_nodes: BTreeMap<String, AssetNode> = BTreeMap::new();
        let mut edges: Vec<LineageEdge> = Vec::new();
        let (mut modify_counter, mut remove_counter) = (0usize, 0usize);
        let mut clock = BASE_MILLIS;
        let width = self.items.len().to_string().len().max(6);

        let items = std::mem::take(&mut self.items);
        for (idx, item) in items.into_iter().enumerate() {
            clock += self.rng.gen_range(0..=MAX_GAP_MILLIS);
            let timestamp = Timestamp::from_millis(clock);
            let event_id = format!("e{:0width$}", idx + 1);
            report.input_count += 1;
            match item {
                Item::Noise(n) => {
                    let (action, source, reason) = NOISE_TEMPLATES[n.template];
                    report.discarded_count += 1;
                    *report.discarded_by_reason.entry(reason.to_string()).or_default() += 1;
                    log.events.push(RawEvent {
                        event_id,
                        timestamp,
                        session_id: self.session_id.clone(),
                        action_type: action.to_string(),
                        raw_source_label: source.to_string(),
                        node_id: n.node_id,
                        node_kind: n.kind,
                        connected_from: n.parents,
                        origin: Origin::System,
                        payload: n.payload,
                    });
                }
                Item::Signal(s) => {
                    report.kept_count += 1;
                    *report.kept_by_move.entry(s.move_kind).or_default() += 1;
                    let global_seq = moves.len() + 1;
                    match s.move_kind {
                        MoveKind::Insert | MoveKind::Generation => {
                            let info = &self.nodes[&s.node_id];
                            for p in &s.parents {
                                edges.push(LineageEdge {
                                    parent_id: p.clone(),
                                    child_id: s.node_id.clone(),
                                });
                            }
                            graph_nodes.insert(
                                s.node_id.clone(),
                                AssetNode {
                                    node_id: s.node_id.clone(),
                                    kind: s.kind.clone(),
                                    origin: if info.generated { NodeOrigin::Generated } else { NodeOrigin::Manual },
                                    created_global_seq: global_seq,
                                    created_at: timestamp,
                                    depth: info.depth,
                                    modify_seqs: Vec::new(),
                                    remove_seq: None,
                                    placeholder: false,
                                },
                            );
                        }
                        MoveKind::Modify => {
                            modify_counter += 1;
                            graph_nodes.get_mut(&s.node_id).expect("modified node exists").modify_seqs.push(modify_counter);
                        }
                        MoveKind::Remove => {
                            remove_counter += 1;
                            graph_nodes.get_mut(&s.node_id).expect("removed node exists").remove_seq = Some(remove_counter);
                        }
                    }
                    let event = RawEvent {
                        event_id,
                        timestamp,
                        session_id: self.session_id.clone(),
                        action_type: s.action.to_string(),
                        raw_source_label: s.source.to_string(),
                        node_id: Some(s.node_id),
                        node_kind: s.kind,
                        connected_from: s.parents,
                        origin: s.origin,
                        payload: s.payload,
                    };
                    log.events.push(event.clone());
                    moves.push(DesignMove {
                        move_kind: s.move_kind,
                        event,
                        global_seq,
                    });
                }
            }
        }
        edges.sort();
        let max_depth = graph_nodes.values().map(|n| n.depth).max().unwrap_or(0);
        let graph = WorkflowGraph {
            session_id: self.session_id.clone(),
            nodes: graph_nodes,
            edges,
            max_depth,
        };
        let tokens = TokenSequence {
            session_id: self.session_id.clone(),
            tokens: tokenize(&moves).tokens,
        };
        (
            log,
            GroundTruth {
                graph,
                moves,
                report,
                tokens,
            },
        )
    }
}

/// Parameters of a random scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub n_roots: usize,
    /// Inclusive range of chains grown from each root.
    pub branch_factor_range: (usize, usize),
    /// Inclusive range of nodes per chain.
    pub chain_depth_range: (usize, usize),
    /// Fraction of all emitted events that are system noise, in `[0, 1)`.
    pub noise_ratio: f64,
    /// Target proportions over INSERT, MODIFY, GENERATION, REMOVE.
    pub move_mix: [f64; 4],
    pub kinds_mix: Vec<(String, f64)>,
}

impl ScenarioSpec {
    pub fn with_seed(seed: u64) -> Self {
        ScenarioSpec {
            seed,
            n_roots: 3,
            branch_factor_range: (1, 3),
            chain_depth_range: (1, 4),
            noise_ratio: 0.3,
            move_mix: [0.25, 0.3, 0.35, 0.1],
            kinds_mix: vec![("image".into(), 0.5), ("prompt".into(), 0.3), ("video".into(), 0.2)],
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |s: &str| Err(SynthError::InvalidSpec(s.to_string()));
        let proportions_ok = |xs: &mut dyn Iterator<Item = f64>| {
            let mut sum = 0.0;
            for x in xs {
                if !(x.is_finite() && x >= 0.0) {
                    return false;
                }
                sum += x;
            }
            (sum - 1.0).abs() <= 1e-9
        };
        if !proportions_ok(&mut self.move_mix.iter().copied()) {
            return bad("move_mix must be non-negative and sum to 1");
        }
        if self.kinds_mix.is_empty() || !proportions_ok(&mut self.kinds_mix.iter().map(|k| k.1)) {
            return bad("kinds_mix must be non-empty, non-negative and sum to 1");
        }
        if self
            .kinds_mix
            .iter()
            .any(|(k, _)| k.is_empty() || k.chars().any(|c| c.is_whitespace() || c.is_uppercase()))
        {
            return bad("asset kinds must be non-empty lowercase identifiers");
        }
        if self.branch_factor_range.0 > self.branch_factor_range.1 {
            return bad("branch_factor_range is empty");
        }
        if self.chain_depth_range.0 > self.chain_depth_range.1 || self.chain_depth_range.0 == 0 {
            return bad("chain_depth_range must be non-empty and start at 1 or more");
        }
        if !(0.0..1.0).contains(&self.noise_ratio) {
            return bad("noise_ratio must lie in [0, 1)");
        }
        let creating = self.move_mix[0] + self.move_mix[2];
        if self.n_roots > 0 && creating <= 0.0 {
            return bad("INSERT and GENERATION cannot both have zero share");
        }
        Ok(())
    }
}

fn sample_kind(rng: &mut ChaCha8Rng, mix: &[(String, f64)]) -> String {
    let mut x: f64 = rng.gen();
    for (kind, p) in mix {
        if x < *p {
            return kind.clone();
        }
        x -= p;
    }
    mix.iter().rev().find(|k| k.1 > 0.0).unwrap_or(&mix[0]).0.clone()
}

struct Chain {
    tip: String,
    remaining: usize,
}

/// Generates a random scenario. Same spec, same bytes.
pub fn generate(spec: &ScenarioSpec) -> Result<(SessionLog, GroundTruth), SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut builder = SessionBuilder::new(format!("synth-{}", spec.seed), spec.seed ^ 0x5eed_5eed);

    // plan the forest: per root, the lengths of its chains
    let plan: Vec<Vec<usize>> = (0..spec.n_roots)
        .map(|_| {
            let branches = rng.gen_range(spec.branch_factor_range.0..=spec.branch_factor_range.1);
            (0..branches)
                .map(|_| rng.gen_range(spec.chain_depth_range.0..=spec.chain_depth_range.1))
                .collect()
        })
        .collect();
    let creations: usize = plan.iter().map(|c| 1 + c.iter().sum::<usize>()).sum();
    let [p_ins, p_mod, p_gen, p_rem] = spec.move_mix;
    let creating = p_ins + p_gen;
    let per_creation = |p: f64| if creating > 0.0 { (creations as f64 * p / creating).round() as usize } else { 0 };
    let (mut modifies_left, mut removes_left) = (per_creation(p_mod), per_creation(p_rem));
    let gen_share = if creating > 0.0 { p_gen / creating } else { 0.0 };

    let mut roots = plan.into_iter();
    let mut roots_left = spec.n_roots;
    let mut chains: Vec<Chain> = Vec::new();
    loop {
        let chain_work: usize = chains.iter().map(|c| c.remaining).sum();
        let create_work = roots_left + chain_work;
        let total = create_work + modifies_left + removes_left;
        if total == 0 {
            break;
        }
        let pick = rng.gen_range(0..total);
        if pick < create_work {
            let kind = sample_kind(&mut rng, &spec.kinds_mix);
            let as_generation = rng.gen_bool(gen_share.clamp(0.0, 1.0));
            if roots_left > 0 && (chains.is_empty() || pick < roots_left) {
                roots_left -= 1;
                let root = if as_generation {
                    builder.generate(&kind, &[])
                } else {
                    builder.insert(&kind, &[])
                };
                for remaining in roots.next().expect("one plan per root") {
                    chains.push(Chain {
                        tip: root.clone(),
                        remaining,
                    });
                }
            } else {
                let idx = rng.gen_range(0..chains.len());
                let mut parents = vec![chains[idx].tip.clone()];
                let live = builder.live_nodes();
                if live.len() > 1 && rng.gen_bool(0.2) {
                    parents.push(live[rng.gen_range(0..live.len())].clone());
                }
                let child = if as_generation {
                    builder.generate(&kind, &parents)
                } else {
                    builder.insert(&kind, &parents)
                };
                chains[idx].tip = child;
                chains[idx].remaining -= 1;
                if chains[idx].remaining == 0 {
                    chains.swap_remove(idx);
                }
            }
        } else if pick < create_work + modifies_left {
            modifies_left -= 1;
            let live = builder.live_nodes();
            if let Some(target) = live.choose(&mut rng) {
                builder.modify(target);
            }
        } else {
            removes_left -= 1;
            let tips: Vec<&String> = chains.iter().map(|c| &c.tip).collect();
            let candidates: Vec<String> = builder.live_nodes().into_iter().filter(|n| !tips.contains(&n)).collect();
            if let Some(target) = candidates.choose(&mut rng) {
                builder.remove(target);
            }
        }
    }

    let signals = builder.signal_count();
    let noise = (signals as f64 * spec.noise_ratio / (1.0 - spec.noise_ratio)).round() as usize;
    builder.scatter_noise(noise);
    Ok(builder.finish())
}

/// Realizes a token script as design moves.
///
/// INSERT creates a parentless manual node. GENERATION of an image draws on
/// the latest live manual prompt and manual image; GENERATION of a video draws
/// on the latest live generated image. MODIFY and REMOVE target the latest live
/// node of the token's kind.
pub fn realize_tokens(builder: &mut SessionBuilder, tokens: &[(MoveKind, &str)]) -> Result<(), SynthError> {
    for (step, &(move_kind, kind)) in tokens.iter().enumerate() {
        let target = |b: &SessionBuilder| {
            b.latest_live(|n| n.kind == kind).ok_or_else(|| SynthError::NoTarget {
                step,
                move_kind,
                kind: kind.to_string(),
            })
        };
        match move_kind {
            MoveKind::Insert => {
                builder.insert(kind, &[]);
            }
            MoveKind::Generation => {
                let parents: Vec<String> = if kind == "video" {
                    builder
                        .latest_live(|n| n.kind == "image" && n.generated)
                        .or_else(|| builder.latest_live(|n| n.kind == "image"))
                        .into_iter()
                        .collect()
                } else {
                    let mut ps: Vec<String> = [
                        builder.latest_live(|n| n.kind == "prompt" && !n.generated),
                        builder.latest_live(|n| n.kind == "image" && !n.generated),
                    ]
                    .into_iter()
                    .flatten()
                    .collect();
                    if ps.is_empty() {
                        ps.extend(builder.latest_live(|_| true));
                    }
                    ps
                };
                builder.generate(kind, &parents);
            }
            MoveKind::Modify => {
                let t = target(builder)?;
                builder.modify(&t);
            }
            MoveKind::Remove => {
                let t = target(builder)?;
                builder.remove(&t);
            }
        }
    }
    Ok(())
}

/// The 195-token script behind `pilot_bigrams` / `pilot_transitions`.
///
/// Nineteen episodes, each ending in a GENERATION_image run (18 runs of 3 and
/// one of 2: 56 tokens, 37 internal pairs). Sixteen setup episodes contain
/// INSERT_image → MODIFY_image; seven more INSERT_image tokens lead elsewhere.
pub fn pilot_token_script() -> Vec<(MoveKind, &'static str)> {
    use MoveKind::*;
    const Y_EPISODES: [usize; 3] = [5, 11, 17];
    const EXTRA_TAIL_EPISODES: [usize; 4] = [2, 6, 10, 14];
    let mut script = Vec::with_capacity(195);
    for episode in 1..=19 {
        if Y_EPISODES.contains(&episode) {
            script.extend([(Insert, "image"), (Generation, "video")]);
        } else {
            script.extend([(Insert, "prompt"), (Modify, "prompt"), (Insert, "image"), (Modify, "image")]);
        }
        let run = if episode == 19 { 2 } else { 3 };
        script.extend(std::iter::repeat_n((Generation, "image"), run));
        script.extend([(Modify, "image"), (Generation, "video"), (Modify, "video")]);
        if EXTRA_TAIL_EPISODES.contains(&episode) {
            script.extend([(Remove, "video"), (Insert, "image"), (Remove, "image")]);
        }
    }
    script
}

pub const PILOT_SEED: u64 = 2024;

/// 195 kept moves, no noise.
pub fn pilot_transitions() -> (SessionLog, GroundTruth) {
    let mut builder = SessionBuilder::new("pilot-transitions", PILOT_SEED);
    realize_tokens(&mut builder, &pilot_token_script()).expect("pilot script is realizable");
    builder.finish()
}

/// 927 raw events, 563 of them design moves.
pub fn pilot_927() -> (SessionLog, GroundTruth) {
    const SIGNAL: usize = 563;
    const NOISE: usize = 927 - SIGNAL;
    let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED + 927);
    let mut builder = SessionBuilder::new("pilot-927", PILOT_SEED + 1);
    let kinds = ["image", "prompt", "video"];
    while builder.signal_count() < SIGNAL {
        let live = builder.live_nodes();
        let roll: f64 = rng.gen();
        if live.is_empty() || roll < 0.2 {
            let kind = kinds[rng.gen_range(0..2)];
            builder.insert(kind, &[]);
        } else if roll < 0.55 {
            let kind = if rng.gen_bool(0.85) { "image" } else { "video" };
            let mut parents = vec![live[rng.gen_range(live.len().saturating_sub(4)..live.len())].clone()];
            if rng.gen_bool(0.3) {
                parents.push(live[rng.gen_range(0..live.len())].clone());
            }
            builder.generate(kind, &parents);
        } else if roll < 0.9 {
            let target = live[rng.gen_range(live.len().saturating_sub(3)..live.len())].clone();
            builder.modify(&target);
        } else {
            let target = live[rng.gen_range(0..live.len())].clone();
            builder.remove(&target);
        }
    }
    builder.scatter_noise(NOISE);
    builder.finish()
}

/// A branching, multi-kind session: parallel variations from one prompt, an
/// abandoned branch, and a long refinement lineage ending in videos.
pub fn figure1_like() -> (SessionLog, GroundTruth) {
    let mut b = SessionBuilder::new("figure1-like", 1);
    let p1 = b.insert("prompt", &[]);
    b.noise();
    b.modify(&p1);
    let ref1 = b.insert("image", &[]);
    b.modify(&ref1);
    let g1 = b.generate("image", &[p1.clone(), ref1.clone()]);
    b.noise();
    let g2 = b.generate("image", &[p1.clone(), ref1.clone()]);
    b.noise();
    let g3 = b.generate("image", &[p1.clone(), ref1.clone()]);
    b.remove(&g2);
    b.noise();
    b.modify(&p1);
    let g4 = b.generate("image", &[p1.clone(), g3.clone()]);
    b.modify(&g4);
    b.noise();
    let g5 = b.generate("image", std::slice::from_ref(&g4));
    let g6 = b.generate("image", std::slice::from_ref(&g5));
    b.noise();
    let v1 = b.generate("video", std::slice::from_ref(&g6));
    b.modify(&v1);
    let p2 = b.insert("prompt", &[]);
    let g7 = b.generate("image", &[p2.clone(), g1.clone()]);
    b.noise();
    b.remove(&g7);
    let v2 = b.generate("video", &[g6.clone(), p2.clone()]);
    b.modify(&v2);
    b.noise();
    b.finish()
}

/// Named fixture corpora.
pub fn named_fixtures() -> BTreeMap<&'static str, (SessionLog, GroundTruth)> {
    let transitions = pilot_transitions();
    BTreeMap::from([
        ("pilot_927", pilot_927()),
        ("pilot_bigrams", transitions.clone()),
        ("pilot_transitions", transitions),
        ("figure1_like", figure1_like()),
    ])
}

/// Looks up a fixture by name.
pub fn fixture(name: &str) -> Option<(SessionLog, GroundTruth)> {
    match name {
        "pilot_927" => Some(pilot_927()),
        "pilot_bigrams" | "pilot_transitions" => Some(pilot_transitions()),
        "figure1_like" => Some(figure1_like()),
        _ => None,
    }
}

pub const FIXTURE_NAMES: [&str; 4] = ["pilot_927", "pilot_bigrams", "pilot_transitions", "figure1_like"];
