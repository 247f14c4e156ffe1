//! Canonical event schema plus CSV / JSON-lines ingestion.
//!
//! Every other stage consumes [`SessionLog`]s produced here. The canonical
//! record has ten fields:
//!
//! ```text
//! event_id,timestamp,session_id,action_type,raw_source_label,node_id,node_kind,connected_from,origin,payload
//! ```
//!
//! `connected_from` is `;`-joined in CSV and an array in JSON-lines.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column order of the canonical CSV header.
pub const CSV_HEADER: [&str; 10] = [
    "event_id",
    "timestamp",
    "session_id",
    "action_type",
    "raw_source_label",
    "node_id",
    "node_kind",
    "connected_from",
    "origin",
    "payload",
];

/// Asset kind assigned when a record carries none.
pub const DEFAULT_NODE_KIND: &str = "other";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingRequiredField { line: u64, field: &'static str },
    #[error("conflicting records share event_id `{0}`")]
    ConflictingEventId(String),
    #[error("event `{event_id}` cannot be written as canonical CSV: {reason}")]
    Unrepresentable { event_id: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for IngestError {
    fn from(err: std::io::Error) -> Self {
        IngestError::Io(err.to_string())
    }
}

/// UTC instant with millisecond precision, stored as milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_millis(millis: i64) -> Self {
        Timestamp(millis)
    }

    pub fn millis(self) -> i64 {
        self.0
    }

    /// Parses an RFC 3339 instant. An explicit offset is required; sub-millisecond
    /// digits are truncated.
    pub fn parse(text: &str) -> Result<Self, String> {
        let parsed = DateTime::parse_from_rfc3339(text.trim())
            .map_err(|e| format!("invalid timestamp `{text}`: {e}"))?;
        Ok(Timestamp(parsed.with_timezone(&Utc).timestamp_millis()))
    }

    pub fn to_datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0)
            .single()
            .expect("millisecond timestamps produced by parse are in range")
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_datetime().to_rfc3339_opts(SecondsFormat::Millis, true))
    }
}

/// Who produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Origin {
    #[default]
    User,
    System,
    Generated,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::User => "user",
            Origin::System => "system",
            Origin::Generated => "generated",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "user" => Ok(Origin::User),
            "system" => Ok(Origin::System),
            "generated" => Ok(Origin::Generated),
            other => Err(format!("unknown origin `{other}`")),
        }
    }
}

/// One parsed log record.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawEvent {
    pub event_id: String,
    pub timestamp: Timestamp,
    pub session_id: String,
    pub action_type: String,
    pub raw_source_label: String,
    pub node_id: Option<String>,
    /// Lowercased asset kind; `"other"` when the record has none.
    pub node_kind: String,
    pub connected_from: Vec<String>,
    pub origin: Origin,
    /// Carried verbatim, never interpreted.
    pub payload: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" | "ndjson" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionLog {
    pub session_id: String,
    pub events: Vec<RawEvent>,
    pub source_format: Format,
}

impl SessionLog {
    pub fn new(session_id: impl Into<String>, source_format: Format) -> Self {
        SessionLog {
            session_id: session_id.into(),
            events: Vec::new(),
            source_format,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Strict parsing fails on the first bad record; lenient parsing skips and counts it.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true }
    }
}

impl ParseOptions {
    pub fn lenient() -> Self {
        ParseOptions { strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SkippedRecord {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseReport {
    pub records_seen: usize,
    pub parsed: usize,
    pub skipped: Vec<SkippedRecord>,
}

impl ParseReport {
    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }
}

/// Field values of one record before validation, keyed by canonical name.
#[derive(Default)]
struct RecordFields {
    event_id: Option<String>,
    timestamp: Option<String>,
    session_id: Option<String>,
    action_type: Option<String>,
    raw_source_label: Option<String>,
    node_id: Option<String>,
    node_kind: Option<String>,
    connected_from: Vec<String>,
    origin: Option<String>,
    payload: Option<String>,
}

fn non_empty(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.trim().is_empty())
}

fn build_event(line: u64, fields: RecordFields) -> Result<RawEvent, IngestError> {
    let missing = |field| IngestError::MissingRequiredField { line, field };
    let malformed = |reason: String| IngestError::MalformedRecord { line, reason };

    let event_id = non_empty(fields.event_id).ok_or_else(|| missing("event_id"))?;
    let timestamp = non_empty(fields.timestamp).ok_or_else(|| missing("timestamp"))?;
    let action_type = non_empty(fields.action_type).ok_or_else(|| missing("action_type"))?;
    let timestamp = Timestamp::parse(&timestamp).map_err(malformed)?;
    let origin = match non_empty(fields.origin) {
        Some(o) => o.parse::<Origin>().map_err(malformed)?,
        None => Origin::default(),
    };
    let node_id = non_empty(fields.node_id);
    let node_kind = non_empty(fields.node_kind)
        .map(|k| k.trim().to_lowercase())
        .unwrap_or_else(|| DEFAULT_NODE_KIND.to_string());
    let connected_from: Vec<String> = fields
        .connected_from
        .into_iter()
        .map(|p| p.trim().to_string())
        .filter(|p| !p.is_empty())
        .collect();
    if let Some(own) = &node_id {
        if connected_from.iter().any(|p| p == own) {
            return Err(malformed(format!("node `{own}` lists itself in connected_from")));
        }
    }

    Ok(RawEvent {
        event_id,
        timestamp,
        session_id: fields.session_id.unwrap_or_default(),
        action_type,
        raw_source_label: fields.raw_source_label.unwrap_or_default(),
        node_id,
        node_kind,
        connected_from,
        origin,
        payload: fields.payload.unwrap_or_default(),
    })
}

/// Accumulates records into a single-session log, honoring strict/lenient mode.
struct Collector {
    options: ParseOptions,
    log: SessionLog,
    report: ParseReport,
}

impl Collector {
    fn new(format: Format, options: ParseOptions) -> Self {
        Collector {
            options,
            log: SessionLog::new("", format),
            report: ParseReport::default(),
        }
    }

    fn push(&mut self, line: u64, outcome: Result<RawEvent, IngestError>) -> Result<(), IngestError> {
        self.report.records_seen += 1;
        let outcome = outcome.and_then(|event| {
            if !self.log.events.is_empty() && event.session_id != self.log.session_id {
                Err(IngestError::MalformedRecord {
                    line,
                    reason: format!(
                        "session_id `{}` differs from `{}`",
                        event.session_id, self.log.session_id
                    ),
                })
            } else {
                Ok(event)
            }
        });
        match outcome {
            Ok(event) => {
                if self.log.events.is_empty() {
                    self.log.session_id = event.session_id.clone();
                }
                self.log.events.push(event);
                self.report.parsed += 1;
                Ok(())
            }
            Err(err) if self.options.strict => Err(err),
            Err(err) => {
                self.report.skipped.push(SkippedRecord {
                    line,
                    reason: err.to_string(),
                });
                Ok(())
            }
        }
    }
}

/// Parses a whole log in the given container format.
pub fn parse_events<R: Read>(
    input: R,
    format: Format,
    options: ParseOptions,
) -> Result<(SessionLog, ParseReport), IngestError> {
    match format {
        Format::Csv => parse_csv(input, options),
        Format::Jsonl => parse_jsonl(input, options),
    }
}

fn parse_csv<R: Read>(input: R, options: ParseOptions) -> Result<(SessionLog, ParseReport), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = match reader.byte_headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            return Err(IngestError::MalformedRecord {
                line: 1,
                reason: e.to_string(),
            })
        }
    };
    let mut collector = Collector::new(Format::Csv, options);
    if headers.is_empty() {
        return Ok((collector.log, collector.report));
    }
    let mut columns: HashMap<&str, usize> = HashMap::new();
    for (idx, name) in headers.iter().enumerate() {
        let name = std::str::from_utf8(name).map_err(|_| IngestError::MalformedRecord {
            line: 1,
            reason: "header is not valid UTF-8".into(),
        })?;
        if let Some(canonical) = CSV_HEADER.iter().find(|c| c.eq_ignore_ascii_case(name.trim())) {
            columns.insert(canonical, idx);
        }
    }
    for required in ["event_id", "timestamp", "action_type"] {
        if !columns.contains_key(required) {
            return Err(IngestError::MissingRequiredField {
                line: 1,
                field: required,
            });
        }
    }

    let mut record = csv::ByteRecord::new();
    loop {
        let read = reader.read_byte_record(&mut record);
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        match read {
            Ok(false) => break,
            Ok(true) => {
                let outcome = csv_fields(&record, &columns, line).and_then(|f| build_event(line, f));
                collector.push(line, outcome)?;
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(line);
                let err = IngestError::MalformedRecord {
                    line,
                    reason: e.to_string(),
                };
                collector.push(line, Err(err))?;
            }
        }
    }
    Ok((collector.log, collector.report))
}

fn csv_fields(
    record: &csv::ByteRecord,
    columns: &HashMap<&str, usize>,
    line: u64,
) -> Result<RecordFields, IngestError> {
    let get = |name: &str| -> Result<Option<String>, IngestError> {
        match columns.get(name).and_then(|&idx| record.get(idx)) {
            None => Ok(None),
            Some(bytes) => std::str::from_utf8(bytes)
                .map(|s| Some(s.to_string()))
                .map_err(|_| IngestError::MalformedRecord {
                    line,
                    reason: format!("field `{name}` is not valid UTF-8"),
                }),
        }
    };
    Ok(RecordFields {
        event_id: get("event_id")?,
        timestamp: get("timestamp")?,
        session_id: get("session_id")?,
        action_type: get("action_type")?,
        raw_source_label: get("raw_source_label")?,
        node_id: get("node_id")?,
        node_kind: get("node_kind")?,
        connected_from: get("connected_from")?
            .map(|s| s.split(';').map(str::to_string).collect())
            .unwrap_or_default(),
        origin: get("origin")?,
        payload: get("payload")?,
    })
}

#[derive(Deserialize)]
struct JsonRecord {
    event_id: Option<String>,
    timestamp: Option<String>,
    session_id: Option<String>,
    action_type: Option<String>,
    raw_source_label: Option<String>,
    node_id: Option<String>,
    node_kind: Option<String>,
    connected_from: Option<Vec<String>>,
    origin: Option<String>,
    payload: Option<String>,
}

/// Parses one canonical JSON object into an event; `line` is used for error reporting.
pub fn event_from_json(text: &str, line: u64) -> Result<RawEvent, IngestError> {
    let record: JsonRecord = serde_json::from_str(text).map_err(|e| IngestError::MalformedRecord {
        line,
        reason: e.to_string(),
    })?;
    build_event(
        line,
        RecordFields {
            event_id: record.event_id,
            timestamp: record.timestamp,
            session_id: record.session_id,
            action_type: record.action_type,
            raw_source_label: record.raw_source_label,
            node_id: record.node_id,
            node_kind: record.node_kind,
            connected_from: record.connected_from.unwrap_or_default(),
            origin: record.origin,
            payload: record.payload,
        },
    )
}

fn parse_jsonl<R: Read>(mut input: R, options: ParseOptions) -> Result<(SessionLog, ParseReport), IngestError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut collector = Collector::new(Format::Jsonl, options);
    for (idx, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx as u64 + 1;
        let outcome = match std::str::from_utf8(raw_line) {
            Err(_) => Err(IngestError::MalformedRecord {
                line,
                reason: "line is not valid UTF-8".into(),
            }),
            Ok(text) if text.trim().is_empty() => continue,
            Ok(text) => event_from_json(text, line),
        };
        collector.push(line, outcome)?;
    }
    Ok((collector.log, collector.report))
}

/// Sorts by `(timestamp, event_id)` and drops exact duplicates.
pub fn normalize(log: SessionLog) -> Result<SessionLog, IngestError> {
    normalize_counted(log).map(|(log, _)| log)
}

/// Like [`normalize`], also returning how many exact duplicates were removed.
pub fn normalize_counted(log: SessionLog) -> Result<(SessionLog, usize), IngestError> {
    let SessionLog {
        session_id,
        events,
        source_format,
    } = log;
    let mut seen: HashMap<&str, &RawEvent> = HashMap::with_capacity(events.len());
    let mut keep = vec![true; events.len()];
    for (idx, event) in events.iter().enumerate() {
        match seen.get(event.event_id.as_str()) {
            Some(prior) if *prior == event => keep[idx] = false,
            Some(_) => return Err(IngestError::ConflictingEventId(event.event_id.clone())),
            None => {
                seen.insert(&event.event_id, event);
            }
        }
    }
    drop(seen);
    let original = events.len();
    let mut deduped: Vec<RawEvent> = events
        .into_iter()
        .zip(keep)
        .filter_map(|(e, k)| k.then_some(e))
        .collect();
    let removed = original - deduped.len();
    deduped.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
    Ok((
        SessionLog {
            session_id,
            events: deduped,
            source_format,
        },
        removed,
    ))
}

/// Writes the canonical CSV form, header included.
pub fn write_csv<W: Write>(log: &SessionLog, out: W) -> Result<(), IngestError> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| IngestError::Io(e.to_string());
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    for event in &log.events {
        if let Some(bad) = event.connected_from.iter().find(|p| p.contains(';')) {
            return Err(IngestError::Unrepresentable {
                event_id: event.event_id.clone(),
                reason: format!("parent id `{bad}` contains `;`"),
            });
        }
        let timestamp = event.timestamp.to_string();
        let parents = event.connected_from.join(";");
        writer
            .write_record([
                event.event_id.as_str(),
                timestamp.as_str(),
                event.session_id.as_str(),
                event.action_type.as_str(),
                event.raw_source_label.as_str(),
                event.node_id.as_deref().unwrap_or(""),
                event.node_kind.as_str(),
                parents.as_str(),
                event.origin.as_str(),
                event.payload.as_str(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRecordOut<'a> {
    event_id: &'a str,
    timestamp: String,
    session_id: &'a str,
    action_type: &'a str,
    raw_source_label: &'a str,
    node_id: Option<&'a str>,
    node_kind: &'a str,
    connected_from: &'a [String],
    origin: &'a str,
    payload: &'a str,
}

/// Renders one event as a canonical JSON object (no trailing newline).
pub fn event_to_json(event: &RawEvent) -> String {
    let record = JsonRecordOut {
        event_id: &event.event_id,
        timestamp: event.timestamp.to_string(),
        session_id: &event.session_id,
        action_type: &event.action_type,
        raw_source_label: &event.raw_source_label,
        node_id: event.node_id.as_deref(),
        node_kind: &event.node_kind,
        connected_from: &event.connected_from,
        origin: event.origin.as_str(),
        payload: &event.payload,
    };
    serde_json::to_string(&record).expect("plain strings always serialize")
}

/// Writes the canonical JSON-lines form, one object per line.
pub fn write_jsonl<W: Write>(log: &SessionLog, mut out: W) -> Result<(), IngestError> {
    for event in &log.events {
        out.write_all(event_to_json(event).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_log<W: Write>(log: &SessionLog, format: Format, out: W) -> Result<(), IngestError> {
    match format {
        Format::Csv => write_csv(log, out),
        Format::Jsonl => write_jsonl(log, out),
    }
}
