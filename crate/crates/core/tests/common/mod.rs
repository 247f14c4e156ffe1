//! Independent oracles and generators shared by the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tracelineage::filter::RuleSet;
use tracelineage::ingest::{self, Format, ParseOptions};
use tracelineage::pipeline::{self, PipelineConfig};
use tracelineage::synth::{GroundTruth, ScenarioSpec};
use tracelineage::{DesignMove, MoveKind, Origin, RawEvent, SessionLog, Timestamp};

pub fn event(id: &str, node: Option<&str>, kind: &str, parents: &[&str]) -> RawEvent {
    RawEvent {
        event_id: id.into(),
        timestamp: Timestamp::from_millis(0),
        session_id: "s".into(),
        action_type: "a".into(),
        raw_source_label: "b".into(),
        node_id: node.map(Into::into),
        node_kind: kind.into(),
        connected_from: parents.iter().map(|p| p.to_string()).collect(),
        origin: Origin::User,
        payload: String::new(),
    }
}

pub fn design_move(seq: usize, move_kind: MoveKind, node: &str, parents: &[&str]) -> DesignMove {
    DesignMove {
        move_kind,
        event: event(&format!("e{seq}"), Some(node), "image", parents),
        global_seq: seq,
    }
}

/// Counts every window by linear search over a list.
pub fn naive_ngrams(texts: &[String], n: usize) -> Vec<(Vec<String>, u64)> {
    let mut out: Vec<(Vec<String>, u64)> = Vec::new();
    if n == 0 || texts.len() < n {
        return out;
    }
    for i in 0..=texts.len() - n {
        let gram = texts[i..i + n].to_vec();
        match out.iter_mut().find(|(g, _)| *g == gram) {
            Some(entry) => entry.1 += 1,
            None => out.push((gram, 1)),
        }
    }
    out
}

/// Number of positions `i` with `texts[i] == from` and `texts[i + 1] == to`.
pub fn naive_pair_count(texts: &[String], from: &str, to: &str) -> u64 {
    texts.windows(2).filter(|w| w[0] == from && w[1] == to).count() as u64
}

/// Number of positions `i < len - 1` holding `from`.
pub fn naive_outgoing(texts: &[String], from: &str) -> u64 {
    texts.iter().take(texts.len().saturating_sub(1)).filter(|t| *t == from).count() as u64
}

/// `(start, end, repetitions, pattern)` for every reported run.
pub type Run = (usize, usize, usize, Vec<String>);

/// Enumerates every `(start, length, repetitions)` triple explicitly, then
/// keeps same-length maximal spans and lets longer patterns win ties.
pub fn brute_force_triggers(texts: &[String], max_len: usize, threshold: usize) -> Vec<Run> {
    let n = texts.len();
    let mut candidates: Vec<Run> = Vec::new();
    for len in 1..=max_len {
        for start in 0..n {
            let mut reps = 1;
            while start + (reps + 1) * len <= n {
                reps += 1;
                let whole = (0..reps).all(|r| texts[start + r * len..start + (r + 1) * len] == texts[start..start + len]);
                if whole && reps >= threshold {
                    candidates.push((start, start + reps * len, reps, texts[start..start + len].to_vec()));
                }
            }
        }
    }
    let contains = |outer: &Run, inner: &Run| outer.0 <= inner.0 && inner.1 <= outer.1 && (outer.0, outer.1) != (inner.0, inner.1);
    let maximal: Vec<Run> = candidates
        .iter()
        .filter(|c| !candidates.iter().any(|o| o.3.len() == c.3.len() && contains(o, c)))
        .cloned()
        .collect();
    let mut kept: Vec<Run> = maximal
        .iter()
        .filter(|c| !maximal.iter().any(|o| (o.0, o.1) == (c.0, c.1) && o.3.len() > c.3.len()))
        .cloned()
        .collect();
    kept.sort_by(|a, b| a.0.cmp(&b.0).then(a.3.len().cmp(&b.3.len())).then_with(|| a.3.cmp(&b.3)));
    kept.dedup();
    kept
}

/// Transitive closure by repeated relaxation; cyclic iff a node reaches itself.
pub fn brute_force_cyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut reach = vec![vec![false; n]; n];
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n).any(|i| reach[i][i])
}

/// A random scenario bounded to at most 200 emitted events.
pub fn random_spec(case: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_5500 + case);
    let creating: f64 = rng.gen_range(0.5..0.9);
    let ins_share: f64 = rng.gen_range(0.0..=1.0);
    let rest = 1.0 - creating;
    let mod_share: f64 = rng.gen_range(0.0..=1.0);
    let p_ins = creating * ins_share;
    let p_mod = rest * mod_share;
    let p_rem = rest - p_mod;
    let p_gen = 1.0 - p_ins - p_mod - p_rem;
    let branch_lo = rng.gen_range(0..=2);
    let chain_lo = rng.gen_range(1..=3);
    let kinds = ["image", "prompt", "video", "metadata_update"];
    let k = rng.gen_range(1..=kinds.len());
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut kinds_mix: Vec<(String, f64)> = kinds[..k].iter().zip(&weights).map(|(n, w)| (n.to_string(), w / total)).collect();
    let assigned: f64 = kinds_mix[..k - 1].iter().map(|x| x.1).sum();
    kinds_mix[k - 1].1 = 1.0 - assigned;
    ScenarioSpec {
        seed: case,
        n_roots: rng.gen_range(0..=4),
        branch_factor_range: (branch_lo, branch_lo + rng.gen_range(0..=1)),
        chain_depth_range: (chain_lo, chain_lo + rng.gen_range(0..=1)),
        noise_ratio: rng.gen_range(0.0..0.45),
        move_mix: [p_ins, p_mod, p_gen, p_rem],
        kinds_mix,
    }
}

/// Serializes, re-parses and runs the full pipeline, listing every way the
/// result differs from the declared ground truth.
pub fn truth_mismatches(log: &SessionLog, truth: &GroundTruth, format: Format) -> Vec<String> {
    let mut bytes = Vec::new();
    ingest::write_log(log, format, &mut bytes).expect("generated logs serialize");
    let (parsed, report) = match ingest::parse_events(&bytes[..], format, ParseOptions::default()) {
        Ok(x) => x,
        Err(e) => return vec![format!("parse failed: {e}")],
    };
    let mut problems = Vec::new();
    if !report.skipped.is_empty() {
        problems.push(format!("{} records skipped", report.skipped.len()));
    }
    let normalized = match ingest::normalize(parsed) {
        Ok(l) => l,
        Err(e) => return vec![format!("normalize failed: {e}")],
    };
    let out = match pipeline::run(&normalized, &RuleSet::default_rules(), &PipelineConfig::default()) {
        Ok(o) => o,
        Err(e) => return vec![format!("pipeline failed: {e}")],
    };
    let r = &out.filter.report;
    let t = &truth.report;
    if (r.input_count, r.kept_count, r.discarded_count) != (t.input_count, t.kept_count, t.discarded_count) {
        problems.push(format!("filter counts {:?} vs truth {:?}", (r.kept_count, r.discarded_count), (t.kept_count, t.discarded_count)));
    }
    if r.discarded_by_reason != t.discarded_by_reason || r.kept_by_move != t.kept_by_move {
        problems.push("per-reason or per-move counts differ".into());
    }
    let got_moves: Vec<(usize, MoveKind, &str)> = out.filter.moves.iter().map(|m| (m.global_seq, m.move_kind, m.event.event_id.as_str())).collect();
    let want_moves: Vec<(usize, MoveKind, &str)> = truth.moves.iter().map(|m| (m.global_seq, m.move_kind, m.event.event_id.as_str())).collect();
    if got_moves != want_moves {
        problems.push("global sequence stream differs".into());
    }
    let g = &out.graph.graph;
    let w = &truth.graph;
    if g.nodes.keys().ne(w.nodes.keys()) {
        problems.push("node sets differ".into());
    }
    if g.edges != w.edges {
        problems.push("edges differ".into());
    }
    for (id, want) in &w.nodes {
        let Some(got) = g.nodes.get(id) else { continue };
        if got.depth != want.depth {
            problems.push(format!("{id}: depth {} vs {}", got.depth, want.depth));
        }
        if got.created_global_seq != want.created_global_seq {
            problems.push(format!("{id}: created_global_seq differs"));
        }
        if got.modify_seqs != want.modify_seqs {
            problems.push(format!("{id}: modify_seqs {:?} vs {:?}", got.modify_seqs, want.modify_seqs));
        }
        if got.remove_seq != want.remove_seq {
            problems.push(format!("{id}: remove_seq differs"));
        }
        if (got.kind.as_str(), got.origin, got.created_at) != (want.kind.as_str(), want.origin, want.created_at) {
            problems.push(format!("{id}: attributes differ"));
        }
    }
    if g.max_depth != w.max_depth {
        problems.push("max depth differs".into());
    }
    if out.tokens.tokens != truth.tokens.tokens {
        problems.push("token sequences differ".into());
    }
    problems
}
