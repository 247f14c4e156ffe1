mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use tracelineage::agent::detect_repetition;
use tracelineage::export::{layout, read_graph_json, to_dot, to_json};
use tracelineage::filter::{apply, RuleSet};
use tracelineage::ingest::{normalize, parse_events, write_csv, write_jsonl, Format, ParseOptions};
use tracelineage::lineage::{build_graph, graph_stats, GraphError, GraphOptions};
use tracelineage::mining::{build_markov, count_ngrams};
use tracelineage::synth::generate;
use tracelineage::token::tokenize;
use tracelineage::{Exact, MoveKind, Origin, RawEvent, SessionLog, Timestamp, TokenSequence};

const ALPHABET: [&str; 6] = [
    "INSERT_image",
    "MODIFY_image",
    "GENERATION_image",
    "REMOVE_image",
    "INSERT_prompt",
    "GENERATION_video",
];

fn token_seq(max_len: usize, alphabet: usize) -> impl Strategy<Value = TokenSequence> {
    (1..=alphabet).prop_flat_map(move |a| {
        prop::collection::vec(0..a, 0..=max_len).prop_map(|idx| {
            let lines: Vec<&str> = idx.into_iter().map(|i| ALPHABET[i]).collect();
            TokenSequence::from_lines("s", &lines.join("\n")).unwrap()
        })
    })
}

fn any_event() -> impl Strategy<Value = RawEvent> {
    let actions = prop::sample::select(vec![
        "node_created",
        "image_imported",
        "prompt_edited",
        "param_changed",
        "generation_executed",
        "node_deleted",
        "temp_cache_purge",
        "edge_reroute",
        "generation_progress",
        "state_update",
        "hover",
        "viewport_pan",
    ]);
    let sources = prop::sample::select(vec!["canvas", "upload", "editor", "model_runner", "gc_worker", "state_sync", "ui"]);
    let origins = prop::sample::select(vec![Origin::User, Origin::System, Origin::Generated]);
    (actions, sources, origins, 0i64..5_000, "[a-z]{0,3}", "[a-z]{1,5}").prop_map(|(a, s, o, ts, node, kind)| RawEvent {
        event_id: String::new(),
        timestamp: Timestamp::from_millis(1_700_000_000_000 + ts),
        session_id: "s".into(),
        action_type: a.into(),
        raw_source_label: s.into(),
        node_id: (!node.is_empty()).then_some(node),
        node_kind: kind,
        connected_from: vec![],
        origin: o,
        payload: "{\"k\":\"a,b\"}".into(),
    })
}

fn any_log() -> impl Strategy<Value = SessionLog> {
    prop::collection::vec(any_event(), 0..60).prop_map(|events| {
        let mut log = SessionLog::new("s", Format::Csv);
        for (i, mut e) in events.into_iter().enumerate() {
            e.event_id = format!("ev{i:03}");
            log.events.push(e);
        }
        normalize(log).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn markov_rows_sum_to_one(seq in token_seq(50, 6)) {
        let model = build_markov::<f64>(&seq);
        for state in &model.states {
            if model.outgoing_total(state) == 0 {
                continue;
            }
            let sum: f64 = model.row(state).map(|(_, _, p)| p).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "{state}: {sum}");
        }
        let exact = build_markov::<Exact>(&seq);
        for state in &exact.states {
            if exact.outgoing_total(state) > 0 {
                let sum = exact.row(state).fold(Exact::from_integer(0), |acc, (_, _, p)| acc + p);
                prop_assert_eq!(sum, Exact::from_integer(1));
            }
        }
    }

    #[test]
    fn ngrams_match_naive_enumeration(seq in token_seq(50, 6), n in 1usize..=4) {
        let texts = seq.texts();
        let table = count_ngrams(&seq, n).unwrap();
        let naive = naive_ngrams(&texts, n);
        prop_assert_eq!(table.counts.len(), naive.len());
        for (gram, c) in &naive {
            prop_assert_eq!(table.counts.get(gram).copied(), Some(*c));
        }
        prop_assert_eq!(table.total, naive.iter().map(|x| x.1).sum::<u64>());
    }

    #[test]
    fn transitions_match_naive_counts(seq in token_seq(50, 6)) {
        let texts = seq.texts();
        let model = build_markov::<Exact>(&seq);
        for from in ALPHABET {
            for to in ALPHABET {
                let c = naive_pair_count(&texts, from, to);
                prop_assert_eq!(model.count(from, to), c);
                let out = naive_outgoing(&texts, from);
                if out > 0 {
                    prop_assert_eq!(model.transition_prob(from, to).unwrap(), Exact::new(c, out));
                }
            }
        }
    }

    #[test]
    fn triggers_match_brute_force(seq in token_seq(40, 3), max_len in 1usize..=3, threshold in 2usize..=5) {
        let texts = seq.texts();
        let got: Vec<Run> = detect_repetition(&seq, max_len, threshold)
            .unwrap()
            .into_iter()
            .map(|t| (t.span.0, t.span.1, t.repetitions, t.pattern))
            .collect();
        prop_assert_eq!(got.clone(), brute_force_triggers(&texts, max_len, threshold));
        for (start, end, reps, pattern) in got {
            prop_assert_eq!(end - start, reps * pattern.len());
            for r in 0..reps {
                prop_assert_eq!(&texts[start + r * pattern.len()..start + (r + 1) * pattern.len()], &pattern[..]);
            }
        }
    }

    #[test]
    fn acyclicity_matches_reachability(n in 1usize..=12, raw in prop::collection::vec((0usize..12, 0usize..12), 0..30)) {
        let edges: Vec<(usize, usize)> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect();
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let moves: Vec<_> = (0..n)
            .map(|child| {
                let parents: BTreeSet<&str> = edges.iter().filter(|e| e.1 == child).map(|e| names[e.0].as_str()).collect();
                let parents: Vec<&str> = parents.into_iter().collect();
                design_move(child + 1, MoveKind::Generation, &names[child], &parents)
            })
            .collect();
        let result = build_graph(&moves, GraphOptions::default());
        let cyclic = brute_force_cyclic(n, &edges);
        match result {
            Ok((g, _)) => {
                prop_assert!(!cyclic);
                for e in &g.edges {
                    prop_assert!(g.nodes[&e.parent_id].depth < g.nodes[&e.child_id].depth);
                }
            }
            Err(GraphError::CycleDetected(path)) => {
                prop_assert!(cyclic);
                prop_assert_eq!(path.first(), path.last());
                for w in path.windows(2) {
                    let (a, b) = (&w[0][1..], &w[1][1..]);
                    let (a, b): (usize, usize) = (a.parse().unwrap(), b.parse().unwrap());
                    prop_assert!(edges.contains(&(a, b)), "{a}->{b} is not an edge");
                }
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn filter_is_an_order_preserving_partition(log in any_log()) {
        let out = apply(&log, &RuleSet::default_rules());
        let r = &out.report;
        prop_assert_eq!(r.input_count, log.len());
        prop_assert_eq!(r.kept_count + r.discarded_count, r.input_count);
        prop_assert_eq!(r.kept_count, out.moves.len());
        prop_assert_eq!(r.discarded_by_reason.values().sum::<usize>(), r.discarded_count);
        prop_assert_eq!(r.kept_by_move.values().sum::<usize>(), r.kept_count);
        let mut cursor = 0;
        for (i, m) in out.moves.iter().enumerate() {
            prop_assert_eq!(m.global_seq, i + 1);
            let pos = log.events[cursor..].iter().position(|e| *e == m.event);
            prop_assert!(pos.is_some(), "kept events appear in input order");
            cursor += pos.unwrap() + 1;
        }
    }

    #[test]
    fn normalize_is_idempotent_and_csv_round_trips(log in any_log()) {
        prop_assert_eq!(normalize(log.clone()).unwrap(), log.clone());
        let mut csv = Vec::new();
        write_csv(&log, &mut csv).unwrap();
        let (back, _) = parse_events(&csv[..], Format::Csv, ParseOptions::default()).unwrap();
        prop_assert_eq!(&back.events, &log.events);
        let mut jsonl = Vec::new();
        write_jsonl(&log, &mut jsonl).unwrap();
        let (back, _) = parse_events(&jsonl[..], Format::Jsonl, ParseOptions::default()).unwrap();
        prop_assert_eq!(&back.events, &log.events);
    }

    #[test]
    fn counters_partition_and_rebuild_is_deterministic(seed in 0u64..10_000) {
        let (_, truth) = generate(&random_spec(seed)).unwrap();
        let (g1, _) = build_graph(&truth.moves, GraphOptions::default()).unwrap();
        let (g2, _) = build_graph(&truth.moves, GraphOptions::default()).unwrap();
        prop_assert_eq!(&g1, &g2);
        let modifies: Vec<usize> = {
            let mut v: Vec<usize> = g1.nodes.values().flat_map(|n| n.modify_seqs.clone()).collect();
            v.sort();
            v
        };
        let n_mod = truth.moves.iter().filter(|m| m.move_kind == MoveKind::Modify).count();
        prop_assert_eq!(modifies, (1..=n_mod).collect::<Vec<_>>());
        let mut removes: Vec<usize> = g1.nodes.values().filter_map(|n| n.remove_seq).collect();
        removes.sort();
        let n_rem = truth.moves.iter().filter(|m| m.move_kind == MoveKind::Remove).count();
        prop_assert_eq!(removes, (1..=n_rem).collect::<Vec<_>>());
    }

    #[test]
    fn dot_is_well_formed_and_json_round_trips(seed in 0u64..10_000) {
        let (_, truth) = generate(&random_spec(seed)).unwrap();
        let stats = graph_stats(&truth.graph);
        let lg = layout(truth.graph.clone());
        let dot = to_dot(&lg);
        check_dot(&dot, &lg.graph.nodes.keys().cloned().collect(), lg.graph.edges.len())?;
        let (back, back_stats) = read_graph_json(&to_json(&lg, Some(&stats), None)).unwrap();
        prop_assert_eq!(back, lg);
        prop_assert_eq!(back_stats, Some(stats));
    }

    #[test]
    fn tokens_follow_moves(seed in 0u64..10_000) {
        let (_, truth) = generate(&random_spec(seed)).unwrap();
        let tokens = tokenize(&truth.moves);
        prop_assert_eq!(tokens.len(), truth.moves.len());
        for (t, m) in tokens.tokens.iter().zip(&truth.moves) {
            prop_assert_eq!(t.move_kind, m.move_kind);
        }
    }
}

fn unquote(s: &str) -> Option<&str> {
    s.strip_prefix('"')?.strip_suffix('"')
}

fn check_dot(dot: &str, nodes: &BTreeSet<String>, edge_count: usize) -> Result<(), TestCaseError> {
    let lines: Vec<&str> = dot.lines().collect();
    let header_ok = lines.first().is_some_and(|l| l.starts_with("digraph \"") && l.ends_with("\" {"));
    prop_assert!(header_ok, "bad header");
    prop_assert_eq!(lines.last().copied(), Some("}"));
    prop_assert!(dot.ends_with("}\n"), "missing final newline");
    let mut declared = BTreeSet::new();
    let mut edges = 0;
    for line in &lines[1..lines.len() - 1] {
        let body = line.strip_prefix("  ").and_then(|l| l.strip_suffix(';'));
        prop_assert!(body.is_some(), "bad line {line}");
        let body = body.unwrap();
        if body.starts_with("graph [") || body.starts_with("node [") {
            continue;
        }
        if let Some((a, b)) = body.split_once(" -> ") {
            let (a, b) = (unquote(a), unquote(b));
            prop_assert!(a.is_some_and(|a| declared.contains(a)) && b.is_some_and(|b| declared.contains(b)), "edge before its nodes: {line}");
            edges += 1;
        } else {
            let (id, attrs) = body.split_once(" [").expect("node statement");
            prop_assert!(attrs.ends_with(']'));
            for key in ["label=", "shape=", "fillcolor=", "pos="] {
                prop_assert!(attrs.contains(key), "{key} missing in {line}");
            }
            declared.insert(unquote(id).expect("quoted node id").to_string());
        }
    }
    prop_assert_eq!(&declared, nodes);
    prop_assert_eq!(edges, edge_count);
    Ok(())
}
