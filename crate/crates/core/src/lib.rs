//! Reconstruct creative workflow structure from node-based design tool event logs.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! 1. [`ingest`]: parse canonical CSV / JSON-lines logs into a [`SessionLog`].
//! 2. [`filter`]: discard system noise and classify kept events as [`DesignMove`]s.
//! 3. [`lineage`]: build the provenance DAG ([`WorkflowGraph`]).
//! 4. [`token`]: abstract moves into `MOVE_assetkind` tokens.
//! 5. [`mining`]: n-gram tables and Markov transitions.
//! 6. [`export`] and [`agent`]: layout, DOT / JSON documents, and context digests.
//!
//! [`synth`] generates logs with known ground truth, and [`pipeline`] wires the
//! stages into the artifact set the CLI writes.

pub mod agent;
pub mod export;
pub mod filter;
pub mod ingest;
pub mod lineage;
pub mod mining;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod token;

pub use agent::{ContextDigest, PatternTrigger};
pub use export::LayoutedGraph;
pub use filter::{DesignMove, FilterReport, MoveKind, RuleSet, Verdict};
pub use ingest::{Format, Origin, RawEvent, SessionLog, Timestamp};
pub use lineage::{AssetNode, GraphStats, LineageEdge, NodeOrigin, WorkflowGraph};
pub use mining::{NGramTable, PhaseLabel};
pub use scalar::{Exact, Probability};
pub use token::{BehavioralToken, TokenSequence};

/// Transition model with `f64` probabilities.
pub type F64TransitionModel = mining::TransitionModel<f64>;
/// Transition model with `f32` probabilities.
pub type F32TransitionModel = mining::TransitionModel<f32>;
/// Transition model with exact rational probabilities.
pub type ExactTransitionModel = mining::TransitionModel<Exact>;

/// Ranked n-gram with an `f64` share.
pub type F64RankedNGram = mining::RankedNGram<f64>;
/// Ranked n-gram with an exact share.
pub type ExactRankedNGram = mining::RankedNGram<Exact>;

pub const TOOL_NAME: &str = "tracelineage";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
