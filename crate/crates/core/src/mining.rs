//! N-gram frequencies, first-order Markov transitions and phase labels over
//! token sequences.
//!
//! Shares and probabilities are generic over [`Probability`] so the same
//! counting code yields `f64` estimates or exact [`Exact`](crate::scalar::Exact)
//! fractions.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::filter::MoveKind;
use crate::scalar::{percent_display, Probability};
use crate::token::TokenSequence;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MiningError {
    #[error("n-gram length must be at least 1, got {0}")]
    InvalidN(usize),
    #[error("`{0}` is not a state of the transition model")]
    UnknownState(String),
    #[error("phase window is empty")]
    EmptyWindow,
    #[error("phase threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
}

/// Sliding-window counts of length-`n` token tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramTable {
    pub n: usize,
    pub counts: BTreeMap<Vec<String>, u64>,
    pub total: u64,
}

impl NGramTable {
    pub fn new(n: usize) -> Result<Self, MiningError> {
        if n == 0 {
            return Err(MiningError::InvalidN(n));
        }
        Ok(NGramTable {
            n,
            counts: BTreeMap::new(),
            total: 0,
        })
    }

    /// Adds the windows of one sequence. Windows never span two sequences.
    pub fn add_sequence(&mut self, texts: &[String]) {
        for window in texts.windows(self.n) {
            *self.counts.entry(window.to_vec()).or_default() += 1;
            self.total += 1;
        }
    }

    pub fn count(&self, gram: &[&str]) -> u64 {
        let key: Vec<String> = gram.iter().map(|s| s.to_string()).collect();
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

pub fn count_ngrams(seq: &TokenSequence, n: usize) -> Result<NGramTable, MiningError> {
    count_ngrams_over(std::iter::once(seq), n)
}

/// Counts over several sequences (e.g. sessions) without cross-sequence windows.
pub fn count_ngrams_over<'a>(
    seqs: impl IntoIterator<Item = &'a TokenSequence>,
    n: usize,
) -> Result<NGramTable, MiningError> {
    let mut table = NGramTable::new(n)?;
    for seq in seqs {
        table.add_sequence(&seq.texts());
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedNGram<S> {
    pub gram: Vec<String>,
    pub count: u64,
    pub share: S,
    /// `count / total` as a one-decimal percentage.
    pub display: String,
}

/// The `k` most frequent n-grams; ties go to the lexicographically smaller tuple.
pub fn top_ngrams<S: Probability>(table: &NGramTable, k: usize) -> Vec<RankedNGram<S>> {
    let mut entries: Vec<(&Vec<String>, u64)> = table.counts.iter().map(|(g, &c)| (g, c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    entries
        .into_iter()
        .take(k)
        .map(|(gram, count)| RankedNGram {
            gram: gram.clone(),
            count,
            share: S::ratio(count, table.total),
            display: percent_display(count, table.total),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel<S> {
    /// Distinct token texts, sorted.
    pub states: Vec<String>,
    pub transition_counts: BTreeMap<(String, String), u64>,
    /// `P(to | from) = count(from, to) / outgoing(from)`.
    pub transition_probs: BTreeMap<(String, String), S>,
    pub outgoing: BTreeMap<String, u64>,
}

impl<S: Probability> TransitionModel<S> {
    pub fn transition_prob(&self, from: &str, to: &str) -> Result<S, MiningError> {
        if self.states.binary_search_by(|s| s.as_str().cmp(from)).is_err() {
            return Err(MiningError::UnknownState(from.to_string()));
        }
        Ok(self
            .transition_probs
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or_else(S::zero))
    }

    pub fn count(&self, from: &str, to: &str) -> u64 {
        self.transition_counts
            .get(&(from.to_string(), to.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn outgoing_total(&self, from: &str) -> u64 {
        self.outgoing.get(from).copied().unwrap_or(0)
    }

    /// One-decimal percentage computed from the integer counts.
    pub fn display(&self, from: &str, to: &str) -> String {
        percent_display(self.count(from, to), self.outgoing_total(from))
    }

    /// Outgoing transitions of `from` as `(to, count, probability)`, sorted by `to`.
    pub fn row<'a>(&'a self, from: &'a str) -> impl Iterator<Item = (&'a str, u64, S)> + 'a {
        self.transition_counts
            .iter()
            .filter(move |((f, _), _)| f == from)
            .map(move |((f, t), &c)| (t.as_str(), c, self.transition_probs[&(f.clone(), t.clone())]))
    }

    /// The most likely successor of `from` (ties to the smaller token).
    pub fn dominant_successor<'a>(&'a self, from: &'a str) -> Option<(&'a str, u64, S)> {
        self.row(from)
            .fold(None, |best: Option<(&str, u64, S)>, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            })
    }
}

pub fn build_markov<S: Probability>(seq: &TokenSequence) -> TransitionModel<S> {
    let texts = seq.texts();
    let mut states: Vec<String> = texts.clone();
    states.sort();
    states.dedup();
    let mut transition_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut outgoing: BTreeMap<String, u64> = BTreeMap::new();
    for pair in texts.windows(2) {
        *transition_counts.entry((pair[0].clone(), pair[1].clone())).or_default() += 1;
        *outgoing.entry(pair[0].clone()).or_default() += 1;
    }
    let transition_probs = transition_counts
        .iter()
        .map(|(key, &count)| (key.clone(), S::ratio(count, outgoing[&key.0])))
        .collect();
    TransitionModel {
        states,
        transition_counts,
        transition_probs,
        outgoing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseLabel {
    Setup,
    Exploration,
    Mixed,
}

impl PhaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Setup => "SETUP",
            PhaseLabel::Exploration => "EXPLORATION",
            PhaseLabel::Mixed => "MIXED",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of trailing tokens the current phase is judged on.
pub const DEFAULT_PHASE_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseThresholds {
    pub setup: f64,
    pub explore: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        PhaseThresholds {
            setup: 0.5,
            explore: 0.5,
        }
    }
}

impl PhaseThresholds {
    pub fn validate(&self) -> Result<(), MiningError> {
        for t in [self.setup, self.explore] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(MiningError::InvalidThreshold(t));
            }
        }
        Ok(())
    }
}

fn has_move_prefix(token: &str, kind: MoveKind) -> bool {
    token
        .split_once('_')
        .is_some_and(|(head, _)| head.eq_ignore_ascii_case(kind.as_str()))
}

/// SETUP when MODIFY tokens reach `setup`, else EXPLORATION when GENERATION
/// tokens reach `explore`, else MIXED.
pub fn classify_phase<T: AsRef<str>>(window: &[T], thresholds: PhaseThresholds) -> Result<PhaseLabel, MiningError> {
    thresholds.validate()?;
    if window.is_empty() {
        return Err(MiningError::EmptyWindow);
    }
    let len = window.len() as f64;
    let count = |kind| window.iter().filter(|t| has_move_prefix(t.as_ref(), kind)).count() as f64;
    Ok(if count(MoveKind::Modify) >= thresholds.setup * len {
        PhaseLabel::Setup
    } else if count(MoveKind::Generation) >= thresholds.explore * len {
        PhaseLabel::Exploration
    } else {
        PhaseLabel::Mixed
    })
}

/// Phase of the last `window` tokens; an empty sequence is MIXED.
pub fn current_phase(seq: &TokenSequence, window: usize, thresholds: PhaseThresholds) -> Result<PhaseLabel, MiningError> {
    let texts = seq.texts();
    let start = texts.len().saturating_sub(window.max(1));
    match classify_phase(&texts[start..], thresholds) {
        Err(MiningError::EmptyWindow) => Ok(PhaseLabel::Mixed),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiningConfig {
    /// N-gram tables are built for `1..=max_n`.
    pub max_n: usize,
    pub top_k: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { max_n: 3, top_k: 5 }
    }
}

/// Everything the miner produces for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningReport {
    pub ngrams: Vec<NGramTable>,
    pub top_k: usize,
    pub model: TransitionModel<f64>,
}

impl MiningReport {
    pub fn table(&self, n: usize) -> Option<&NGramTable> {
        self.ngrams.iter().find(|t| t.n == n)
    }

    pub fn bigrams(&self) -> Option<&NGramTable> {
        self.table(2)
    }
}

pub fn mine(seq: &TokenSequence, config: MiningConfig) -> Result<MiningReport, MiningError> {
    if config.max_n == 0 {
        return Err(MiningError::InvalidN(0));
    }
    let ngrams = (1..=config.max_n).map(|n| count_ngrams(seq, n)).collect::<Result<_, _>>()?;
    Ok(MiningReport {
        ngrams,
        top_k: config.top_k,
        model: build_markov(seq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn seq(tokens: &[&str]) -> TokenSequence {
        TokenSequence::from_lines("s", &tokens.join("\n")).unwrap()
    }

    const G: &str = "GENERATION_image";
    const M: &str = "MODIFY_image";
    const I: &str = "INSERT_image";
    const R: &str = "REMOVE_image";

    #[test]
    fn bigram_counts() {
        let t = count_ngrams(&seq(&[G, G, G]), 2).unwrap();
        assert_eq!(t.count(&[G, G]), 2);
        assert_eq!(t.total, 2);
        let t = count_ngrams(&seq(&[G]), 2).unwrap();
        assert!(t.counts.is_empty());
        assert_eq!(t.total, 0);
        assert_eq!(count_ngrams(&seq(&[G]), 0), Err(MiningError::InvalidN(0)));
    }

    #[test]
    fn windows_do_not_cross_sequences() {
        let a = seq(&[G, M]);
        let b = seq(&[I, R]);
        let t = count_ngrams_over([&a, &b], 2).unwrap();
        assert_eq!(t.total, 2);
        assert_eq!(t.count(&[M, I]), 0);
    }

    #[test]
    fn top_tie_break() {
        let t = count_ngrams(&seq(&["INSERT_a", "INSERT_b", "INSERT_a", "INSERT_b", "INSERT_a", "INSERT_b", "INSERT_a"]), 2)
            .unwrap();
        let top = top_ngrams::<Exact>(&t, 1);
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].gram, vec!["INSERT_a", "INSERT_b"]);
        assert_eq!(top[0].count, 3);
        assert_eq!(top[0].share, Exact::new(1, 2));
        assert!(top_ngrams::<f64>(&NGramTable::new(2).unwrap(), 3).is_empty());
    }

    #[test]
    fn markov_small_cases() {
        let m = build_markov::<f64>(&seq(&["INSERT_x", "MODIFY_x", "INSERT_x", "MODIFY_x"]));
        assert_eq!(m.transition_prob("INSERT_x", "MODIFY_x").unwrap(), 1.0);
        assert_eq!(m.transition_prob("MODIFY_x", "INSERT_x").unwrap(), 1.0);

        let m = build_markov::<Exact>(&seq(&[G, G, G, M]));
        assert_eq!(m.transition_prob(G, G).unwrap(), Exact::new(2, 3));
        assert_eq!(m.transition_prob(G, M).unwrap(), Exact::new(1, 3));
        // terminal-only state is still a state
        assert!(m.states.contains(&M.to_string()));
        assert_eq!(m.transition_prob(M, G).unwrap(), Exact::new(0, 1));
    }

    #[test]
    fn transition_queries() {
        let m = build_markov::<f64>(&seq(&["INSERT_x", "MODIFY_x"]));
        assert_eq!(m.transition_prob("INSERT_x", "MODIFY_x").unwrap(), 1.0);
        assert_eq!(m.transition_prob("INSERT_x", "INSERT_x").unwrap(), 0.0);
        assert_eq!(m.transition_prob("REMOVE_z", "INSERT_x"), Err(MiningError::UnknownState("REMOVE_z".into())));
    }

    #[test]
    fn phases() {
        let th = PhaseThresholds::default();
        assert_eq!(classify_phase(&[M, M, M, I], th).unwrap(), PhaseLabel::Setup);
        assert_eq!(classify_phase(&[G, G, G, G], th).unwrap(), PhaseLabel::Exploration);
        assert_eq!(classify_phase(&[I, R], th).unwrap(), PhaseLabel::Mixed);
        // setup wins when both thresholds are met
        assert_eq!(classify_phase(&[M, G], th).unwrap(), PhaseLabel::Setup);
        assert_eq!(classify_phase::<&str>(&[], th), Err(MiningError::EmptyWindow));
        let bad = PhaseThresholds { setup: 0.0, explore: 0.5 };
        assert_eq!(classify_phase(&[M], bad), Err(MiningError::InvalidThreshold(0.0)));
        assert_eq!(current_phase(&TokenSequence::default(), 5, th).unwrap(), PhaseLabel::Mixed);
        assert_eq!(current_phase(&seq(&[M, M, M, G, G, G, G]), 5, th).unwrap(), PhaseLabel::Exploration);
    }

    #[test]
    fn dominant_successor_picks_max() {
        let m = build_markov::<f64>(&seq(&[I, M, I, M, I, R, I]));
        let (to, count, p) = m.dominant_successor(I).unwrap();
        assert_eq!((to, count), (M, 2));
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.display(I, M), "66.7%");
    }

    #[test]
    fn mine_builds_all_tables() {
        let r = mine(&seq(&[G, G, M]), MiningConfig::default()).unwrap();
        assert_eq!(r.ngrams.iter().map(|t| (t.n, t.total)).collect::<Vec<_>>(), vec![(1, 3), (2, 2), (3, 1)]);
        assert_eq!(r.bigrams().unwrap().count(&[G, G]), 1);
    }
}
