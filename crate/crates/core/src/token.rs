//! Behavioral tokens: `MOVE_assetkind` strings such as `GENERATION_image`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::filter::{DesignMove, MoveKind};
use crate::ingest::DEFAULT_NODE_KIND;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("token `{0}` has no `_` separator")]
    MissingSeparator(String),
    #[error("token `{0}` names an unknown move")]
    UnknownMove(String),
    #[error("token `{0}` has an empty asset kind")]
    EmptyKind(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BehavioralToken {
    pub move_kind: MoveKind,
    /// Lowercase, non-empty; may itself contain `_` (e.g. `metadata_update`).
    pub asset_kind: String,
}

impl BehavioralToken {
    pub fn new(move_kind: MoveKind, asset_kind: &str) -> Self {
        let kind = asset_kind.trim().to_lowercase();
        BehavioralToken {
            move_kind,
            asset_kind: if kind.is_empty() { DEFAULT_NODE_KIND.to_string() } else { kind },
        }
    }

    pub fn text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BehavioralToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.move_kind, self.asset_kind)
    }
}

impl FromStr for BehavioralToken {
    type Err = TokenError;

    /// Accepts any casing; the first `_` ends the move name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, tail) = s.split_once('_').ok_or_else(|| TokenError::MissingSeparator(s.to_string()))?;
        let move_kind = head.parse::<MoveKind>().map_err(|_| TokenError::UnknownMove(s.to_string()))?;
        if tail.trim().is_empty() {
            return Err(TokenError::EmptyKind(s.to_string()));
        }
        Ok(BehavioralToken {
            move_kind,
            asset_kind: tail.trim().to_lowercase(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub session_id: String,
    pub tokens: Vec<BehavioralToken>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.tokens.iter().map(BehavioralToken::text).collect()
    }

    /// One token per line, each line newline-terminated.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(&t.text());
            out.push('\n');
        }
        out
    }

    /// Parses [`to_lines`](Self::to_lines) output; blank lines are ignored.
    pub fn from_lines(session_id: impl Into<String>, text: &str) -> Result<Self, TokenError> {
        let tokens = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        Ok(TokenSequence {
            session_id: session_id.into(),
            tokens,
        })
    }
}

pub fn tokenize(moves: &[DesignMove]) -> TokenSequence {
    TokenSequence {
        session_id: moves.first().map(|m| m.event.session_id.clone()).unwrap_or_default(),
        tokens: moves
            .iter()
            .map(|m| BehavioralToken::new(m.move_kind, &m.event.node_kind))
            .collect(),
    }
}

/// Distinct token texts with counts, sorted lexicographically.
pub fn vocabulary(seq: &TokenSequence) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in &seq.tokens {
        *counts.entry(t.text()).or_default() += 1;
    }
    counts.into_iter().collect()
}
