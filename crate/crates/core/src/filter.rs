//! Rule-based de-noising and classification of raw events into design moves.
//!
//! A [`RuleSet`] is an ordered list of [`FilterRule`]s; the first rule whose
//! predicates all match decides the event's [`Verdict`]. Events no rule claims
//! are discarded as `unmatched`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{self, IngestError, Origin, RawEvent, SessionLog};
use crate::scalar::percent_display;

/// Rule file shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("default_rules.txt");

/// Reason tag of the fallback verdict.
pub const UNMATCHED: &str = "unmatched";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rules line {line}: {reason}")]
    RuleParseError { line: usize, reason: String },
    #[error("rules line {line}: unknown move kind `{name}`")]
    UnknownMoveKind { line: usize, name: String },
}

/// The four design moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MoveKind {
    Insert,
    Modify,
    Generation,
    Remove,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [MoveKind::Insert, MoveKind::Modify, MoveKind::Generation, MoveKind::Remove];

    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::Insert => "INSERT",
            MoveKind::Modify => "MODIFY",
            MoveKind::Generation => "GENERATION",
            MoveKind::Remove => "REMOVE",
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MoveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MoveKind::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown move kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Verdict {
    Discard(String),
    Keep(MoveKind),
}

/// Case-insensitive glob supporting `*` and `?`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Glob {
    pattern: Vec<char>,
}

impl Glob {
    pub fn new(pattern: &str) -> Self {
        Glob {
            pattern: pattern.to_lowercase().chars().collect(),
        }
    }

    pub fn any() -> Self {
        Glob::new("*")
    }

    pub fn is_match(&self, text: &str) -> bool {
        let text: Vec<char> = text.to_lowercase().chars().collect();
        let pat = &self.pattern;
        let (mut p, mut t) = (0, 0);
        let mut backtrack: Option<(usize, usize)> = None;
        while t < text.len() {
            if p < pat.len() && (pat[p] == '?' || pat[p] == text[t]) {
                p += 1;
                t += 1;
            } else if p < pat.len() && pat[p] == '*' {
                backtrack = Some((p, t));
                p += 1;
            } else if let Some((star_p, star_t)) = backtrack {
                p = star_p + 1;
                t = star_t + 1;
                backtrack = Some((star_p, star_t + 1));
            } else {
                return false;
            }
        }
        pat[p..].iter().all(|&c| c == '*')
    }
}

impl fmt::Display for Glob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.pattern.iter().collect();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterRule {
    pub action_glob: Glob,
    pub source_glob: Glob,
    pub kind_glob: Option<Glob>,
    pub origin_match: Option<Origin>,
    pub verdict: Verdict,
}

impl FilterRule {
    pub fn matches(&self, event: &RawEvent) -> bool {
        self.action_glob.is_match(&event.action_type)
            && self.source_glob.is_match(&event.raw_source_label)
            && self.kind_glob.as_ref().is_none_or(|g| g.is_match(&event.node_kind))
            && self.origin_match.is_none_or(|o| o == event.origin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<FilterRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<FilterRule>) -> Option<Self> {
        (!rules.is_empty()).then_some(RuleSet { rules })
    }

    /// The embedded [`DEFAULT_RULES`].
    pub fn default_rules() -> Self {
        load_rules(DEFAULT_RULES).expect("embedded default rules parse")
    }

    pub fn rules(&self) -> &[FilterRule] {
        &self.rules
    }

    /// Index of the first rule matching `event`, if any.
    pub fn first_match(&self, event: &RawEvent) -> Option<usize> {
        self.rules.iter().position(|r| r.matches(event))
    }
}

fn column_glob(col: &str) -> Option<Glob> {
    (col != "-").then(|| Glob::new(col))
}

/// Parses a rule file: `verdict action_glob source_glob kind_glob origin move_or_reason`.
pub fn load_rules(text: &str) -> Result<RuleSet, RuleError> {
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let cols: Vec<&str> = content.split_whitespace().collect();
        let parse_err = |reason: String| RuleError::RuleParseError { line, reason };
        if cols.len() != 6 {
            return Err(parse_err(format!("expected 6 columns, found {}", cols.len())));
        }
        let origin_match = match cols[4] {
            "-" | "*" => None,
            o => Some(o.parse::<Origin>().map_err(parse_err)?),
        };
        let verdict = match cols[0].to_ascii_lowercase().as_str() {
            "keep" => Verdict::Keep(cols[5].parse::<MoveKind>().map_err(|_| RuleError::UnknownMoveKind {
                line,
                name: cols[5].to_string(),
            })?),
            "discard" => Verdict::Discard(cols[5].to_string()),
            other => return Err(parse_err(format!("unknown verdict `{other}`"))),
        };
        rules.push(FilterRule {
            action_glob: column_glob(cols[1]).unwrap_or_else(Glob::any),
            source_glob: column_glob(cols[2]).unwrap_or_else(Glob::any),
            kind_glob: column_glob(cols[3]),
            origin_match,
            verdict,
        });
    }
    RuleSet::new(rules).ok_or(RuleError::RuleParseError {
        line: 0,
        reason: "rule set is empty".into(),
    })
}

/// First-match verdict, falling back to `DISCARD("unmatched")`.
pub fn classify(event: &RawEvent, rules: &RuleSet) -> Verdict {
    rules
        .first_match(event)
        .map(|idx| rules.rules[idx].verdict.clone())
        .unwrap_or_else(|| Verdict::Discard(UNMATCHED.to_string()))
}

/// A kept, classified event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignMove {
    pub move_kind: MoveKind,
    pub event: RawEvent,
    /// 1-based position among all kept moves.
    pub global_seq: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub discarded_count: usize,
    pub discarded_by_reason: BTreeMap<String, usize>,
    pub kept_by_move: BTreeMap<MoveKind, usize>,
}

impl FilterReport {
    fn empty() -> Self {
        FilterReport {
            input_count: 0,
            kept_count: 0,
            discarded_count: 0,
            discarded_by_reason: BTreeMap::new(),
            kept_by_move: MoveKind::ALL.into_iter().map(|m| (m, 0)).collect(),
        }
    }

    pub fn reduction_fraction(&self) -> f64 {
        if self.input_count == 0 {
            0.0
        } else {
            self.discarded_count as f64 / self.input_count as f64
        }
    }

    pub fn reduction_display(&self) -> String {
        percent_display(self.discarded_count as u64, self.input_count as u64)
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let kept_by_move: BTreeMap<&str, usize> = self.kept_by_move.iter().map(|(m, c)| (m.as_str(), *c)).collect();
        let value = serde_json::json!({
            "input_count": self.input_count,
            "kept_count": self.kept_count,
            "discarded_count": self.discarded_count,
            "discarded_by_reason": self.discarded_by_reason,
            "kept_by_move": kept_by_move,
            "reduction_fraction": self.reduction_fraction(),
            "reduction_display": self.reduction_display(),
        });
        let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
        text.push('\n');
        text
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    pub moves: Vec<DesignMove>,
    pub report: FilterReport,
    /// Event ids that fell through to the default verdict.
    pub unmatched: Vec<String>,
}

/// Classifies every event of a normalized log.
pub fn apply(log: &SessionLog, rules: &RuleSet) -> FilterOutcome {
    let mut report = FilterReport::empty();
    let mut moves = Vec::new();
    let mut unmatched = Vec::new();
    for event in &log.events {
        report.input_count += 1;
        match rules.first_match(event).map(|idx| &rules.rules[idx].verdict) {
            Some(Verdict::Keep(kind)) => {
                report.kept_count += 1;
                *report.kept_by_move.entry(*kind).or_default() += 1;
                moves.push(DesignMove {
                    move_kind: *kind,
                    event: event.clone(),
                    global_seq: moves.len() + 1,
                });
            }
            Some(Verdict::Discard(reason)) => {
                report.discarded_count += 1;
                *report.discarded_by_reason.entry(reason.clone()).or_default() += 1;
            }
            None => {
                report.discarded_count += 1;
                *report.discarded_by_reason.entry(UNMATCHED.to_string()).or_default() += 1;
                unmatched.push(event.event_id.clone());
            }
        }
    }
    FilterOutcome {
        moves,
        report,
        unmatched,
    }
}

/// Writes moves as JSON lines: `{"event":{..},"global_seq":n,"move":"KIND"}`.
pub fn write_moves_jsonl<W: Write>(moves: &[DesignMove], mut out: W) -> std::io::Result<()> {
    for m in moves {
        writeln!(
            out,
            "{{\"event\":{},\"global_seq\":{},\"move\":\"{}\"}}",
            ingest::event_to_json(&m.event),
            m.global_seq,
            m.move_kind
        )?;
    }
    Ok(())
}

/// Reads the format written by [`write_moves_jsonl`].
pub fn read_moves_jsonl(text: &str) -> Result<Vec<DesignMove>, IngestError> {
    let mut moves = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| IngestError::MalformedRecord { line, reason };
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
        let event = value.get("event").ok_or_else(|| bad("missing `event`".into()))?;
        let event = ingest::event_from_json(&event.to_string(), line)?;
        let global_seq = value
            .get("global_seq")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| bad("missing `global_seq`".into()))? as usize;
        let move_kind = value
            .get("move")
            .and_then(|v| v.as_str())
            .ok_or_else(|| bad("missing `move`".into()))?
            .parse::<MoveKind>()
            .map_err(bad)?;
        moves.push(DesignMove {
            move_kind,
            event,
            global_seq,
        });
    }
    Ok(moves)
}
