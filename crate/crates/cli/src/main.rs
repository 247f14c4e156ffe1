use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tracelineage::agent::{DigestConfig, DEFAULT_MAX_PATTERN_LEN, DEFAULT_REP_THRESHOLD};
use tracelineage::export::{self, read_graph_json};
use tracelineage::filter::{self, load_rules, read_moves_jsonl, RuleSet, DEFAULT_RULES};
use tracelineage::ingest;
use tracelineage::lineage::graph_stats;
use tracelineage::mining::{self, MiningConfig, PhaseThresholds, DEFAULT_PHASE_WINDOW};
use tracelineage::pipeline::{self, PipelineConfig, PipelineError};
use tracelineage::synth::{self, ScenarioSpec};
use tracelineage::{Format, SessionLog, TokenSequence};

#[derive(Parser)]
#[command(name = "tracelineage", version, about = "Reconstruct workflow lineage from design tool event logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and normalize a raw log into canonical events.csv
    Ingest(IngestArgs),
    /// Classify events; writes report.json and moves.jsonl
    Filter(FilterArgs),
    /// Build the lineage graph from moves.jsonl; writes graph.dot and graph.json
    Graph(GraphArgs),
    /// Turn moves.jsonl into tokens.txt
    Tokenize(TokenizeArgs),
    /// N-gram and transition statistics from tokens.txt; writes mining.json
    Mine(MineArgs),
    /// Context digest from graph.json and tokens.txt; writes digest.txt
    Digest(DigestArgs),
    /// Re-render graph.json as DOT and JSON
    Export(ExportArgs),
    /// Generate a synthetic log with its ground truth
    Synth(SynthArgs),
    /// Run every stage on a raw log
    Run(RunArgs),
    /// Inspect rule sets
    Rules {
        #[command(subcommand)]
        action: RulesAction,
    },
}

#[derive(Subcommand)]
enum RulesAction {
    /// Print the built-in rule set
    Dump,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input log
    input: PathBuf,
    /// Input format; inferred from the extension when omitted
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    /// Fail on the first malformed record (default)
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Skip malformed records instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct DigestOpts {
    /// Trailing tokens shown in the digest
    #[arg(long, default_value_t = 20)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = DEFAULT_REP_THRESHOLD)]
    rep_threshold: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_PATTERN_LEN)]
    max_pattern_len: usize,
    #[arg(long, default_value_t = DEFAULT_PHASE_WINDOW)]
    phase_window: usize,
    /// Minimum INSERT+MODIFY share of the phase window for SETUP
    #[arg(long, default_value_t = 0.5)]
    setup_threshold: f64,
    /// Minimum GENERATION share of the phase window for EXPLORATION
    #[arg(long, default_value_t = 0.5)]
    explore_threshold: f64,
}

impl DigestOpts {
    fn config(&self, strict: bool, max_n: usize) -> PipelineConfig {
        PipelineConfig {
            strict,
            mining: MiningConfig {
                max_n,
                top_k: self.top_k,
            },
            digest: DigestConfig {
                window: self.window,
                top_k: self.top_k,
                phase_window: self.phase_window,
                thresholds: PhaseThresholds {
                    setup: self.setup_threshold,
                    explore: self.explore_threshold,
                },
                ..DigestConfig::default()
            },
            rep_threshold: self.rep_threshold,
            max_pattern_len: self.max_pattern_len,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Print events.csv to stdout instead of writing it
    #[arg(long)]
    stdout: bool,
}

#[derive(Args)]
struct FilterArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Rule file; the built-in rules are used when omitted
    #[arg(long)]
    rules: Option<PathBuf>,
    /// List events no rule matched
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct GraphArgs {
    /// moves.jsonl
    moves: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// Reject unknown parents (default)
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Create placeholder nodes for unknown parents instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Args)]
struct TokenizeArgs {
    /// moves.jsonl
    moves: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    stdout: bool,
}

#[derive(Args)]
struct MineArgs {
    /// tokens.txt
    tokens: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long, default_value_t = 3)]
    max_n: usize,
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    #[arg(long)]
    stdout: bool,
}

#[derive(Args)]
struct DigestArgs {
    /// graph.json
    #[arg(long)]
    graph: PathBuf,
    /// tokens.txt
    #[arg(long)]
    tokens: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    opts: DigestOpts,
    #[arg(long)]
    stdout: bool,
}

#[derive(Args)]
struct ExportArgs {
    /// graph.json
    graph: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// Print one rendering to stdout instead of writing files
    #[arg(long, value_enum)]
    stdout: Option<ExportKind>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportKind {
    Dot,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    #[value(name = "pilot_927")]
    Pilot927,
    #[value(name = "pilot_transitions", alias = "pilot_bigrams")]
    PilotTransitions,
    #[value(name = "figure1_like")]
    Figure1Like,
    Random,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    scenario: Scenario,
    /// Seed for the random scenario
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: Format,
    /// Noise share for the random scenario
    #[arg(long)]
    noise_ratio: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[command(flatten)]
    opts: DigestOpts,
    #[arg(long, default_value_t = 3)]
    max_n: usize,
    /// Print a single artifact to stdout instead of writing files
    #[arg(long, value_parser = ["report", "dot", "graph", "tokens", "mining", "digest"])]
    stdout: Option<String>,
    #[arg(long)]
    verbose: bool,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse::<Format>().map_err(|e| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(String),
    Pipeline(PipelineError),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Pipeline(e) => e.exit_code() as u8,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Pipeline(e) => e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn infer_format(path: &Path, explicit: Option<Format>) -> Format {
    explicit.unwrap_or_else(|| {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("jsonl" | "json" | "ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    })
}

fn load(input: &InputArgs) -> CliResult<SessionLog> {
    let file = fs::File::open(&input.input).map_err(|e| CliError::Io(format!("{}: {e}", input.input.display())))?;
    let format = infer_format(&input.input, input.format);
    let (log, report, removed) = pipeline::load_log(io::BufReader::new(file), format, !input.lenient)?;
    for skipped in &report.skipped {
        eprintln!("skipped line {}: {}", skipped.line, skipped.reason);
    }
    if removed > 0 {
        eprintln!("removed {removed} duplicate events");
    }
    Ok(log)
}

fn rules(path: Option<&PathBuf>) -> CliResult<RuleSet> {
    match path {
        None => Ok(RuleSet::default_rules()),
        Some(p) => Ok(load_rules(&read_text(p)?).map_err(PipelineError::from)?),
    }
}

/// Writes all files or none: on failure, files already written are removed.
fn write_all(dir: &Path, files: &[(&str, &str)]) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, contents) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(CliError::Io(format!("{}: {e}", path.display())));
        }
        written.push(path);
    }
    Ok(())
}

fn emit(stdout: bool, dir: &Path, files: &[(&str, &str)]) -> CliResult<()> {
    if stdout {
        let mut out = io::stdout().lock();
        out.write_all(files[0].1.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))
    } else {
        write_all(dir, files)
    }
}

fn read_tokens(path: &Path, session_id: &str) -> CliResult<TokenSequence> {
    Ok(TokenSequence::from_lines(session_id, &read_text(path)?).map_err(PipelineError::from)?)
}

fn read_moves(path: &Path) -> CliResult<Vec<tracelineage::DesignMove>> {
    Ok(read_moves_jsonl(&read_text(path)?).map_err(PipelineError::from)?)
}

fn session_of(moves: &[tracelineage::DesignMove]) -> String {
    moves.first().map(|m| m.event.session_id.clone()).unwrap_or_default()
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Ingest(a) => {
            let log = load(&a.input)?;
            let csv = pipeline::csv_artifact(&log)?;
            emit(a.stdout, &a.out.out, &[("events.csv", &csv)])
        }
        Command::Filter(a) => {
            let rules = rules(a.rules.as_ref())?;
            let log = load(&a.input)?;
            let outcome = filter::apply(&log, &rules);
            if a.verbose {
                for id in &outcome.unmatched {
                    eprintln!("unmatched event {id}");
                }
            }
            let moves = pipeline::moves_artifact(&outcome.moves)?;
            write_all(&a.out.out, &[("report.json", &outcome.report.to_json()), ("moves.jsonl", &moves)])?;
            println!(
                "kept {} / {} ({} discarded)",
                outcome.report.kept_count,
                outcome.report.input_count,
                outcome.report.reduction_display()
            );
            Ok(())
        }
        Command::Graph(a) => {
            let moves = read_moves(&a.moves)?;
            let stage = pipeline::graph_stage(&moves, &session_of(&moves), !a.lenient)?;
            for w in &stage.warnings {
                eprintln!("warning: {w:?}");
            }
            write_all(&a.out.out, &[("graph.dot", &stage.dot()), ("graph.json", &stage.json())])
        }
        Command::Tokenize(a) => {
            let moves = read_moves(&a.moves)?;
            let tokens = pipeline::token_stage(&moves, &session_of(&moves));
            emit(a.stdout, &a.out.out, &[("tokens.txt", &tokens.to_lines())])
        }
        Command::Mine(a) => {
            let tokens = read_tokens(&a.tokens, "")?;
            let report = mining::mine(
                &tokens,
                MiningConfig {
                    max_n: a.max_n,
                    top_k: a.top_k,
                },
            )
            .map_err(PipelineError::from)?;
            emit(a.stdout, &a.out.out, &[("mining.json", &export::mining_to_json(&report))])
        }
        Command::Digest(a) => {
            let config = a.opts.config(true, 2);
            config.validate()?;
            let (lg, _) = read_graph_json(&read_text(&a.graph)?).map_err(PipelineError::from)?;
            let tokens = read_tokens(&a.tokens, &lg.graph.session_id)?;
            let text = pipeline::digest_stage(&lg.graph, &tokens, &config)?;
            emit(a.stdout, &a.out.out, &[("digest.txt", &text)])
        }
        Command::Export(a) => {
            let (lg, stats) = read_graph_json(&read_text(&a.graph)?).map_err(PipelineError::from)?;
            let stats = stats.unwrap_or_else(|| graph_stats(&lg.graph));
            let dot = export::to_dot(&lg);
            let json = export::to_json(&lg, Some(&stats), None);
            match a.stdout {
                Some(ExportKind::Dot) => emit(true, &a.out.out, &[("graph.dot", &dot)]),
                Some(ExportKind::Json) => emit(true, &a.out.out, &[("graph.json", &json)]),
                None => write_all(&a.out.out, &[("graph.dot", &dot), ("graph.json", &json)]),
            }
        }
        Command::Synth(a) => {
            let (log, truth) = match a.scenario {
                Scenario::Pilot927 => synth::pilot_927(),
                Scenario::PilotTransitions => synth::pilot_transitions(),
                Scenario::Figure1Like => synth::figure1_like(),
                Scenario::Random => {
                    let mut spec = ScenarioSpec::with_seed(a.seed);
                    if let Some(r) = a.noise_ratio {
                        spec.noise_ratio = r;
                    }
                    synth::generate(&spec).map_err(|e| CliError::Usage(e.to_string()))?
                }
            };
            let mut log_bytes = Vec::new();
            ingest::write_log(&log, a.format, &mut log_bytes).map_err(PipelineError::from)?;
            let log_text = String::from_utf8(log_bytes).expect("log output is UTF-8");
            let log_name = match a.format {
                Format::Csv => "session.csv",
                Format::Jsonl => "session.jsonl",
            };
            let truth_graph = export::layout(truth.graph);
            let truth_stats = graph_stats(&truth_graph.graph);
            write_all(
                &a.out.out,
                &[
                    (log_name, &log_text),
                    ("truth_report.json", &truth.report.to_json()),
                    ("truth_graph.json", &export::to_json(&truth_graph, Some(&truth_stats), None)),
                    ("truth_tokens.txt", &truth.tokens.to_lines()),
                ],
            )
        }
        Command::Run(a) => {
            let config = a.opts.config(!a.input.lenient, a.max_n);
            config.validate()?;
            let rules = rules(a.rules.as_ref())?;
            let log = load(&a.input)?;
            let out = pipeline::run(&log, &rules, &config)?;
            if a.verbose {
                for id in &out.filter.unmatched {
                    eprintln!("unmatched event {id}");
                }
                for w in &out.warnings {
                    eprintln!("warning: {w:?}");
                }
            }
            if let Some(name) = a.stdout {
                let text = out.artifacts.get(&name).expect("value parser restricts names");
                return io::stdout()
                    .lock()
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(e.to_string()));
            }
            write_all(&a.out.out, &out.artifacts.files())?;
            println!("{}", out.summary);
            Ok(())
        }
        Command::Rules {
            action: RulesAction::Dump,
        } => {
            print!("{DEFAULT_RULES}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
