//! Workflow-history digests for agent context windows.
//!
//! A [`ContextDigest`] bundles the latest tokens, graph shape, frequent bigrams,
//! the current phase, detected repetition runs and template-filled suggestion
//! strings. Nothing here calls a model; the output is plain data and text.

use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::lineage::{graph_stats, GraphStats, WorkflowGraph};
use crate::mining::{current_phase, top_ngrams, MiningError, NGramTable, PhaseLabel, PhaseThresholds, RankedNGram, TransitionModel};
use crate::scalar::percent_display;
use crate::token::TokenSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("graph session `{graph}` does not match token session `{tokens}`")]
    SessionMismatch { graph: String, tokens: String },
    #[error(transparent)]
    Mining(#[from] MiningError),
}

/// Default minimum number of consecutive repetitions.
pub const DEFAULT_REP_THRESHOLD: usize = 5;
/// Longest repeated pattern searched for.
pub const DEFAULT_MAX_PATTERN_LEN: usize = 3;

/// A pattern repeated back to back at least `threshold` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTrigger {
    pub pattern: Vec<String>,
    pub repetitions: usize,
    /// `[start, end)` token indices.
    pub span: (usize, usize),
    pub threshold: usize,
}

impl PatternTrigger {
    pub fn pattern_text(&self) -> String {
        self.pattern.join(" - ")
    }
}

/// Finds maximal back-to-back repetition runs.
///
/// For each pattern length `1..=max_pattern_len`, a run is reported only when
/// no other run of the same length covers a strictly larger span. A run is
/// then dropped if a longer pattern covers exactly the same span. Results are
/// ordered by start index, then pattern length.
pub fn detect_repetition(
    seq: &TokenSequence,
    max_pattern_len: usize,
    threshold: usize,
) -> Result<Vec<PatternTrigger>, AgentError> {
    if max_pattern_len < 1 {
        return Err(AgentError::InvalidParams("max_pattern_len must be at least 1".into()));
    }
    if threshold < 2 {
        return Err(AgentError::InvalidParams("repetition threshold must be at least 2".into()));
    }
    let texts = seq.texts();
    let n = texts.len();
    let mut found: Vec<PatternTrigger> = Vec::new();
    for len in 1..=max_pattern_len {
        if len * threshold > n {
            break;
        }
        // reps[i]: how many copies of texts[i..i+len] start back to back at i
        let mut reps = vec![0usize; n + 1];
        for i in (0..=n - len).rev() {
            reps[i] = if i + 2 * len <= n && texts[i..i + len] == texts[i + len..i + 2 * len] {
                reps[i + len] + 1
            } else {
                1
            };
        }
        let mut furthest_end = 0usize;
        for i in 0..=n - len {
            if reps[i] < threshold {
                continue;
            }
            let end = i + reps[i] * len;
            // an earlier run reaching at least as far contains this one
            if end <= furthest_end {
                continue;
            }
            furthest_end = end;
            found.push(PatternTrigger {
                pattern: texts[i..i + len].to_vec(),
                repetitions: reps[i],
                span: (i, end),
                threshold,
            });
        }
    }
    let spans_with_longer: Vec<bool> = found
        .iter()
        .map(|t| {
            found
                .iter()
                .any(|o| o.span == t.span && o.pattern.len() > t.pattern.len())
        })
        .collect();
    let mut triggers: Vec<PatternTrigger> = found
        .into_iter()
        .zip(spans_with_longer)
        .filter_map(|(t, shadowed)| (!shadowed).then_some(t))
        .collect();
    triggers.sort_by(|a, b| {
        a.span
            .0
            .cmp(&b.span.0)
            .then(a.pattern.len().cmp(&b.pattern.len()))
            .then_with(|| a.pattern.cmp(&b.pattern))
    });
    Ok(triggers)
}

/// A state's most likely successor, cited by a suggestion.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantTransition {
    pub from: String,
    pub to: String,
    pub count: u64,
    pub outgoing: u64,
    pub probability: f64,
    pub display: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigestConfig {
    /// Number of trailing tokens kept verbatim.
    pub window: usize,
    pub top_k: usize,
    pub phase_window: usize,
    pub thresholds: PhaseThresholds,
    /// A successor is dominant when its probability reaches this value.
    pub dominance: f64,
    /// States with fewer outgoing transitions are not cited.
    pub min_support: u64,
}

impl Default for DigestConfig {
    fn default() -> Self {
        DigestConfig {
            window: 20,
            top_k: 5,
            phase_window: crate::mining::DEFAULT_PHASE_WINDOW,
            thresholds: PhaseThresholds::default(),
            dominance: 0.5,
            min_support: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextDigest {
    pub session_id: String,
    pub token_tail: Vec<String>,
    pub token_count: usize,
    pub graph_summary: GraphStats,
    pub top_bigrams: Vec<RankedNGram<f64>>,
    pub current_phase: PhaseLabel,
    pub phase_window: usize,
    pub triggers: Vec<PatternTrigger>,
    pub transitions: Vec<DominantTransition>,
    pub suggestions: Vec<String>,
}

pub fn trigger_suggestion(t: &PatternTrigger) -> String {
    format!(
        "Detected {} repeated {} times; offer to automate this step.",
        t.pattern_text(),
        t.repetitions
    )
}

pub fn transition_suggestion(t: &DominantTransition) -> String {
    format!(
        "After {}, users proceed to {} with probability {}; consider pre-staging {}.",
        t.from, t.to, t.display, t.to
    )
}

/// Dominant successors ranked by probability, then support, capped at `limit`.
pub fn dominant_transitions(model: &TransitionModel<f64>, config: &DigestConfig, limit: usize) -> Vec<DominantTransition> {
    let mut picked: Vec<DominantTransition> = model
        .states
        .iter()
        .filter_map(|from| {
            let outgoing = model.outgoing_total(from);
            if outgoing < config.min_support.max(1) {
                return None;
            }
            let (to, count, probability) = model.dominant_successor(from)?;
            (probability >= config.dominance).then(|| DominantTransition {
                from: from.clone(),
                to: to.to_string(),
                count,
                outgoing,
                probability,
                display: percent_display(count, outgoing),
            })
        })
        .collect();
    // count/outgoing compared by cross-multiplication to stay exact
    picked.sort_by(|a, b| {
        (b.count as u128 * a.outgoing as u128)
            .cmp(&(a.count as u128 * b.outgoing as u128))
            .then_with(|| b.count.cmp(&a.count))
            .then_with(|| a.from.cmp(&b.from))
    });
    picked.truncate(limit);
    picked
}

pub fn build_digest(
    graph: &WorkflowGraph,
    tokens: &TokenSequence,
    bigrams: &NGramTable,
    model: &TransitionModel<f64>,
    triggers: &[PatternTrigger],
    config: &DigestConfig,
) -> Result<ContextDigest, AgentError> {
    if bigrams.n != 2 {
        return Err(AgentError::InvalidParams(format!("expected a bigram table, got n={}", bigrams.n)));
    }
    if config.window == 0 || config.phase_window == 0 {
        return Err(AgentError::InvalidParams("windows must be at least 1".into()));
    }
    config.thresholds.validate()?;
    // an empty graph or token stream cannot contradict the other side
    if !graph.nodes.is_empty() && !tokens.is_empty() && graph.session_id != tokens.session_id {
        return Err(AgentError::SessionMismatch {
            graph: graph.session_id.clone(),
            tokens: tokens.session_id.clone(),
        });
    }
    let texts = tokens.texts();
    let token_tail = texts[texts.len().saturating_sub(config.window)..].to_vec();
    let transitions = dominant_transitions(model, config, config.top_k);
    let suggestions = triggers
        .iter()
        .map(trigger_suggestion)
        .chain(transitions.iter().map(transition_suggestion))
        .collect();
    let session_id = if graph.session_id.is_empty() {
        tokens.session_id.clone()
    } else {
        graph.session_id.clone()
    };
    Ok(ContextDigest {
        session_id,
        token_tail,
        token_count: texts.len(),
        graph_summary: graph_stats(graph),
        top_bigrams: top_ngrams(bigrams, config.top_k),
        current_phase: current_phase(tokens, config.phase_window, config.thresholds)?,
        phase_window: config.phase_window,
        triggers: triggers.to_vec(),
        transitions,
        suggestions,
    })
}

/// Longest token text rendered verbatim; longer ones are clipped with `~`.
pub const RENDER_TOKEN_CHARS: usize = 32;
/// Longest rendered suggestion line.
pub const RENDER_SUGGESTION_CHARS: usize = 200;

fn clip(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        let mut out: String = s.chars().take(max - 1).collect();
        out.push('~');
        out
    }
}

fn clip_token(s: &str) -> String {
    clip(s, RENDER_TOKEN_CHARS)
}

/// Upper bound, in characters, on [`render_digest_text`] output.
///
/// Each section contributes a fixed header plus per-item lines whose length is
/// bounded by the token clip width and the width of a `u64`.
pub fn rendered_length_bound(window: usize, top_k: usize, triggers: usize) -> usize {
    const NUM: usize = 20;
    let tok = RENDER_TOKEN_CHARS;
    let header = 26 + tok + 1;
    let summary = 11 + 70 + 6 * NUM;
    let phase = 9 + 30 + NUM;
    let tail = 25 + NUM + window * (tok + 1) + 1;
    let bigrams = 15 + top_k * (2 + 2 * tok + 4 + 2 + NUM + 2 + 7 + 1);
    let trigger_line = 2 + 3 * tok + 6 + 2 + NUM + 5 + 2 * NUM + 2 + 1;
    let trig = 12 + triggers * trigger_line;
    let sugg = 15 + (triggers + top_k) * (2 + RENDER_SUGGESTION_CHARS + 1);
    header + summary + phase + tail + bigrams + trig + sugg
}

/// Plain-text rendering with fixed section order:
/// summary, phase, recent tokens, top bigrams, triggers, suggestions.
pub fn render_digest_text(d: &ContextDigest) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "workflow digest: session {}", clip_token(&d.session_id));
    if d.token_count == 0 && d.graph_summary.node_count == 0 {
        out.push_str("no activity\n");
        return out;
    }
    let s = &d.graph_summary;
    out.push_str("-- summary\n");
    let _ = writeln!(
        out,
        "nodes {}, edges {}, max depth {}, branches {}, leaves {}, widest depth {}",
        s.node_count, s.edge_count, s.max_depth, s.branch_count, s.leaf_count, s.widest_depth
    );
    out.push_str("-- phase\n");
    let _ = writeln!(out, "{} (last {} tokens)", d.current_phase, d.phase_window.min(d.token_count));
    let _ = writeln!(out, "-- recent tokens ({} of {})", d.token_tail.len(), d.token_count);
    let tail: Vec<String> = d.token_tail.iter().map(|t| clip_token(t)).collect();
    let _ = writeln!(out, "{}", tail.join(" "));
    out.push_str("-- top bigrams\n");
    for b in &d.top_bigrams {
        let _ = writeln!(
            out,
            "  {} -> {}  {}  {}",
            clip_token(&b.gram[0]),
            clip_token(&b.gram[1]),
            b.count,
            b.display
        );
    }
    out.push_str("-- triggers\n");
    for t in &d.triggers {
        let pattern: Vec<String> = t.pattern.iter().map(|p| clip_token(p)).collect();
        let _ = writeln!(out, "  {} x{} at [{}, {})", pattern.join(" - "), t.repetitions, t.span.0, t.span.1);
    }
    out.push_str("-- suggestions\n");
    for line in &d.suggestions {
        let _ = writeln!(out, "- {}", clip(line, RENDER_SUGGESTION_CHARS));
    }
    out
}

impl ContextDigest {
    pub fn to_value(&self) -> Value {
        json!({
            "session_id": self.session_id,
            "token_tail": self.token_tail,
            "token_count": self.token_count,
            "graph_summary": self.graph_summary,
            "top_bigrams": self.top_bigrams.iter().map(|b| json!({
                "gram": b.gram, "count": b.count, "share": b.share, "display": b.display,
            })).collect::<Vec<_>>(),
            "current_phase": self.current_phase.as_str(),
            "phase_window": self.phase_window,
            "triggers": self.triggers.iter().map(|t| json!({
                "pattern": t.pattern, "repetitions": t.repetitions,
                "span": [t.span.0, t.span.1], "threshold": t.threshold,
            })).collect::<Vec<_>>(),
            "transitions": self.transitions.iter().map(|t| json!({
                "from": t.from, "to": t.to, "count": t.count, "outgoing": t.outgoing,
                "probability": t.probability, "display": t.display,
            })).collect::<Vec<_>>(),
            "suggestions": self.suggestions,
        })
    }
}
