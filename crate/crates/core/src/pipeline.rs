//! Stage wiring shared by the `run` command and the per-stage commands.
//!
//! Every stage renders its artifact from the previous stage's in-memory
//! output, so composing the stages by hand yields the same bytes as [`run`].

use std::io::Read;

use thiserror::Error;

use crate::agent::{self, AgentError, DigestConfig, DEFAULT_MAX_PATTERN_LEN, DEFAULT_REP_THRESHOLD};
use crate::export::{self, ExportError, LayoutedGraph};
use crate::filter::{self, FilterOutcome, RuleError, RuleSet};
use crate::ingest::{self, Format, IngestError, ParseOptions, ParseReport, SessionLog};
use crate::lineage::{self, GraphError, GraphOptions, GraphStats, GraphWarning, WorkflowGraph};
use crate::mining::{self, MiningConfig, MiningError, MiningReport};
use crate::token::{self, TokenError, TokenSequence};
use crate::DesignMove;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

impl PipelineError {
    /// 1 usage or I/O, 2 parse, 3 graph or validation, 4 rules.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Ingest(IngestError::Io(_)) => 1,
            PipelineError::Ingest(_) | PipelineError::Token(_) | PipelineError::Export(_) => 2,
            PipelineError::Graph(_) | PipelineError::Agent(AgentError::SessionMismatch { .. }) => 3,
            PipelineError::Rules(_) => 4,
            PipelineError::Mining(_) | PipelineError::Agent(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub strict: bool,
    pub mining: MiningConfig,
    pub digest: DigestConfig,
    pub rep_threshold: usize,
    pub max_pattern_len: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strict: true,
            mining: MiningConfig::default(),
            digest: DigestConfig::default(),
            rep_threshold: DEFAULT_REP_THRESHOLD,
            max_pattern_len: DEFAULT_MAX_PATTERN_LEN,
        }
    }
}

impl PipelineConfig {
    /// Checks every numeric parameter before any work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Agent(AgentError::InvalidParams(m.to_string())));
        if self.digest.window == 0 || self.digest.phase_window == 0 {
            return bad("windows must be at least 1");
        }
        if self.rep_threshold < 2 {
            return bad("repetition threshold must be at least 2");
        }
        if self.max_pattern_len == 0 {
            return bad("max pattern length must be at least 1");
        }
        if self.mining.max_n == 0 {
            return bad("max n must be at least 1");
        }
        self.digest.thresholds.validate()?;
        Ok(())
    }
}

/// Artifact file names, in the order `run` writes them.
pub const ARTIFACT_FILES: [(&str, &str); 6] = [
    ("report", "report.json"),
    ("dot", "graph.dot"),
    ("graph", "graph.json"),
    ("tokens", "tokens.txt"),
    ("mining", "mining.json"),
    ("digest", "digest.txt"),
];

/// Rendered artifacts of one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub report_json: String,
    pub graph_dot: String,
    pub graph_json: String,
    pub tokens_txt: String,
    pub mining_json: String,
    pub digest_txt: String,
}

impl Artifacts {
    pub fn get(&self, name: &str) -> Option<&str> {
        Some(match name {
            "report" => &self.report_json,
            "dot" => &self.graph_dot,
            "graph" => &self.graph_json,
            "tokens" => &self.tokens_txt,
            "mining" => &self.mining_json,
            "digest" => &self.digest_txt,
            _ => return None,
        })
    }

    /// `(file name, contents)` pairs in write order.
    pub fn files(&self) -> Vec<(&'static str, &str)> {
        ARTIFACT_FILES
            .iter()
            .map(|(name, file)| (*file, self.get(name).expect("every artifact name resolves")))
            .collect()
    }
}

/// Everything computed by [`run`], for callers that want more than bytes.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub filter: FilterOutcome,
    pub graph: LayoutedGraph,
    pub stats: GraphStats,
    pub warnings: Vec<GraphWarning>,
    pub tokens: TokenSequence,
    pub mining: MiningReport,
    pub artifacts: Artifacts,
    pub summary: String,
}

pub fn summary_line(
    filter: &FilterOutcome,
    mining: &MiningReport,
    tokens: &TokenSequence,
    config: &DigestConfig,
) -> Result<String, MiningError> {
    let r = &filter.report;
    let mut line = format!("kept {} / {} ({} discarded)", r.kept_count, r.input_count, r.reduction_display());
    if let Some(top) = mining.bigrams().and_then(|t| mining::top_ngrams::<f64>(t, 1).into_iter().next()) {
        line.push_str(&format!("; top bigram {} ({})", top.gram.join(" -> "), top.display));
    }
    let phase = mining::current_phase(tokens, config.phase_window, config.thresholds)?;
    line.push_str(&format!("; phase {}", phase.as_str()));
    Ok(line)
}

/// Parses and normalizes a log. Returns the number of exact duplicates removed.
pub fn load_log<R: Read>(
    input: R,
    format: Format,
    strict: bool,
) -> Result<(SessionLog, ParseReport, usize), PipelineError> {
    let options = if strict { ParseOptions::default() } else { ParseOptions::lenient() };
    let (log, report) = ingest::parse_events(input, format, options)?;
    let (log, removed) = ingest::normalize_counted(log)?;
    Ok((log, report, removed))
}

pub fn csv_artifact(log: &SessionLog) -> Result<String, PipelineError> {
    let mut out = Vec::new();
    ingest::write_csv(log, &mut out)?;
    Ok(String::from_utf8(out).expect("CSV output is UTF-8"))
}

pub fn moves_artifact(moves: &[DesignMove]) -> Result<String, PipelineError> {
    let mut out = Vec::new();
    filter::write_moves_jsonl(moves, &mut out).map_err(IngestError::from)?;
    Ok(String::from_utf8(out).expect("JSON output is UTF-8"))
}

pub struct GraphStage {
    pub graph: LayoutedGraph,
    pub stats: GraphStats,
    pub warnings: Vec<GraphWarning>,
}

impl GraphStage {
    pub fn dot(&self) -> String {
        export::to_dot(&self.graph)
    }

    pub fn json(&self) -> String {
        export::to_json(&self.graph, Some(&self.stats), None)
    }
}

pub fn graph_stage(moves: &[DesignMove], session_id: &str, strict: bool) -> Result<GraphStage, PipelineError> {
    let (mut graph, warnings) = lineage::build_graph(moves, GraphOptions { strict })?;
    graph.session_id = session_id.to_string();
    let stats = lineage::graph_stats(&graph);
    Ok(GraphStage {
        graph: export::layout(graph),
        stats,
        warnings,
    })
}

pub fn token_stage(moves: &[DesignMove], session_id: &str) -> TokenSequence {
    let mut tokens = token::tokenize(moves);
    tokens.session_id = session_id.to_string();
    tokens
}

/// Builds the digest text from a graph and token stream.
pub fn digest_stage(graph: &WorkflowGraph, tokens: &TokenSequence, config: &PipelineConfig) -> Result<String, PipelineError> {
    let mining = mining::mine(
        tokens,
        MiningConfig {
            max_n: config.mining.max_n.max(2),
            top_k: config.mining.top_k,
        },
    )?;
    let triggers = agent::detect_repetition(tokens, config.max_pattern_len, config.rep_threshold)?;
    let bigrams = mining.bigrams().expect("bigram table is always built");
    let digest = agent::build_digest(graph, tokens, bigrams, &mining.model, &triggers, &config.digest)?;
    Ok(agent::render_digest_text(&digest))
}

/// Runs every stage on a normalized log.
pub fn run(log: &SessionLog, rules: &RuleSet, config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let filter = filter::apply(log, rules);
    let graph = graph_stage(&filter.moves, &log.session_id, config.strict)?;
    let tokens = token_stage(&filter.moves, &log.session_id);
    let mining = mining::mine(&tokens, config.mining)?;
    let digest_txt = digest_stage(&graph.graph.graph, &tokens, config)?;
    let summary = summary_line(&filter, &mining, &tokens, &config.digest)?;
    let artifacts = Artifacts {
        report_json: filter.report.to_json(),
        graph_dot: graph.dot(),
        graph_json: graph.json(),
        tokens_txt: tokens.to_lines(),
        mining_json: export::mining_to_json(&mining),
        digest_txt,
    };
    Ok(RunOutput {
        filter,
        stats: graph.stats,
        warnings: graph.warnings,
        graph: graph.graph,
        tokens,
        mining,
        artifacts,
        summary,
    })
}
