//! Event logs: CSV ingestion, trace reconstruction, the temporal train/test
//! split and prefix/suffix pair enumeration.
//!
//! Only completion timestamps are modeled. A case's start time is the
//! completion time of its first event.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute instant in milliseconds since the Unix epoch (UTC).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_millis(millis: i64) -> Self {
        Timestamp(millis)
    }

    pub const fn from_secs(secs: i64) -> Self {
        Timestamp(secs * 1000)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// Seconds elapsed from `earlier` to `self` (negative if `earlier` is later).
    pub fn secs_since(self, earlier: Timestamp) -> f64 {
        (self.0 - earlier.0) as f64 / 1000.0
    }

    pub fn parse(value: &str, format: &TimeFormat) -> Option<Self> {
        let value = value.trim();
        let parsed = match format {
            TimeFormat::Iso8601 => parse_iso8601(value),
            TimeFormat::Custom(fmt) => parse_custom(value, fmt),
        }?;
        Some(Timestamp(parsed.timestamp_millis()))
    }

    /// ISO-8601 in UTC, fractional seconds only when non-zero.
    pub fn to_iso8601(self) -> String {
        match DateTime::<Utc>::from_timestamp_millis(self.0) {
            Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.f").to_string(),
            None => self.0.to_string(),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}

fn parse_iso8601(value: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(value) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(dt) = DateTime::parse_from_str(value, fmt) {
            return Some(dt.with_timezone(&Utc));
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(value, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

fn parse_custom(value: &str, fmt: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_str(value, fmt) {
        return Some(dt.with_timezone(&Utc));
    }
    if let Ok(naive) = NaiveDateTime::parse_from_str(value, fmt) {
        return Some(naive.and_utc());
    }
    NaiveDate::parse_from_str(value, fmt)
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| naive.and_utc())
}

/// How timestamp cells are interpreted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum TimeFormat {
    /// `YYYY-MM-DDTHH:MM:SS` with optional fractional seconds and UTC offset.
    /// Values without an offset are taken as UTC.
    #[default]
    Iso8601,
    /// A `chrono` strftime-style pattern.
    Custom(String),
}

impl TimeFormat {
    pub fn from_flag(flag: &str) -> Self {
        match flag.to_ascii_lowercase().as_str() {
            "iso" | "iso8601" | "iso-8601" => TimeFormat::Iso8601,
            _ => TimeFormat::Custom(flag.to_string()),
        }
    }
}

/// Header names of the columns read from a CSV log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnMapping {
    pub case_id: String,
    pub activity: String,
    pub end_time: String,
    /// Read when present in the header; never required.
    pub role: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            case_id: "case_id".into(),
            activity: "activity".into(),
            end_time: "end_time".into(),
            role: Some("role".into()),
        }
    }
}

/// Activity labels in first-appearance order. The end-of-case symbol takes
/// the index right after the last label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `label`, inserting it if unseen.
    pub fn intern(&mut self, label: &str) -> usize {
        if let Some(&idx) = self.index.get(label) {
            return idx;
        }
        let idx = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), idx);
        idx
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Label for an activity index; `None` for the end-of-case index or out of range.
    pub fn label(&self, idx: usize) -> Option<&str> {
        self.labels.get(idx).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of real activity labels (EOC excluded).
    pub fn num_activities(&self) -> usize {
        self.labels.len()
    }

    pub fn eoc_index(&self) -> usize {
        self.labels.len()
    }

    /// Size of the prediction space: activities plus EOC.
    pub fn len_with_eoc(&self) -> usize {
        self.labels.len() + 1
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(labels: Vec<String>) -> Self {
        let mut vocab = Vocabulary::new();
        for label in &labels {
            vocab.intern(label);
        }
        vocab
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(vocab: Vocabulary) -> Self {
        vocab.labels
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub activity: usize,
    pub end_time: Timestamp,
    pub role: Option<String>,
}

/// One case: non-empty, events ordered by completion time (file order on ties).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub case_id: String,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn start_time(&self) -> Timestamp {
        self.events[0].end_time
    }

    pub fn activities(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.activity).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventLog {
    pub traces: Vec<Trace>,
    pub vocabulary: Vocabulary,
}

impl EventLog {
    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn max_trace_len(&self) -> usize {
        self.traces.iter().map(Trace::len).max().unwrap_or(0)
    }

    /// Same vocabulary, different trace subset.
    pub fn with_traces(&self, traces: Vec<Trace>) -> EventLog {
        EventLog {
            traces,
            vocabulary: self.vocabulary.clone(),
        }
    }

    /// Writes the log with the default column names and ISO-8601 UTC timestamps.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["case_id", "activity", "end_time", "role"])?;
        for trace in &self.traces {
            for event in &trace.events {
                let label = self.vocabulary.label(event.activity).unwrap_or_default();
                out.write_record([
                    trace.case_id.as_str(),
                    label,
                    event.end_time.to_iso8601().as_str(),
                    event.role.as_deref().unwrap_or(""),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Accumulates events in arrival order and assembles an [`EventLog`].
///
/// Traces appear in first-appearance order of their case id; the vocabulary
/// in first-appearance order of each label.
#[derive(Debug, Default)]
pub struct LogBuilder {
    vocabulary: Vocabulary,
    case_index: HashMap<String, usize>,
    traces: Vec<Trace>,
}

impl LogBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, case_id: &str, activity: &str, end_time: Timestamp, role: Option<String>) {
        let activity = self.vocabulary.intern(activity);
        let slot = match self.case_index.get(case_id) {
            Some(&slot) => slot,
            None => {
                self.case_index.insert(case_id.to_string(), self.traces.len());
                self.traces.push(Trace {
                    case_id: case_id.to_string(),
                    events: Vec::new(),
                });
                self.traces.len() - 1
            }
        };
        self.traces[slot].events.push(Event {
            activity,
            end_time,
            role,
        });
    }

    pub fn event(mut self, case_id: &str, activity: &str, end_time: Timestamp) -> Self {
        self.push(case_id, activity, end_time, None);
        self
    }

    pub fn build(self) -> Result<EventLog> {
        let mut traces = self.traces;
        if traces.is_empty() {
            return Err(Error::EmptyLog);
        }
        for trace in &mut traces {
            // stable: ties keep arrival order
            trace.events.sort_by_key(|e| e.end_time);
        }
        Ok(EventLog {
            traces,
            vocabulary: self.vocabulary,
        })
    }
}

/// Reads a CSV event log with a header row.
pub fn parse_csv_log<R: Read>(source: R, mapping: &ColumnMapping, format: &TimeFormat) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn { column: name.to_string() })
    };
    let case_col = column(&mapping.case_id)?;
    let activity_col = column(&mapping.activity)?;
    let time_col = column(&mapping.end_time)?;
    let role_col = mapping
        .role
        .as_deref()
        .and_then(|name| headers.iter().position(|h| h.trim() == name));

    let mut builder = LogBuilder::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |idx: usize| record.get(idx).unwrap_or("").trim();

        let case_id = cell(case_col);
        if case_id.is_empty() {
            return Err(Error::EmptyField { row, field: "case id" });
        }
        let activity = cell(activity_col);
        if activity.is_empty() {
            return Err(Error::EmptyField { row, field: "activity" });
        }
        let raw_time = cell(time_col);
        let end_time = Timestamp::parse(raw_time, format).ok_or_else(|| Error::Timestamp {
            row,
            value: raw_time.to_string(),
        })?;
        let role = role_col.map(cell).filter(|r| !r.is_empty()).map(str::to_string);
        builder.push(case_id, activity, end_time, role);
    }
    builder.build()
}

/// Orders traces by start time (case id on ties) and cuts after
/// `floor(train_fraction * n)` traces, clamped to `[1, n - 1]`.
pub fn temporal_split(log: &EventLog, train_fraction: f64) -> Result<(EventLog, EventLog)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = log.traces.len();
    if n < 2 {
        return Err(Error::TooFewTraces(n));
    }
    let mut ordered: Vec<&Trace> = log.traces.iter().collect();
    ordered.sort_by(|a, b| {
        a.start_time()
            .cmp(&b.start_time())
            .then_with(|| a.case_id.cmp(&b.case_id))
    });
    let n_train = ((train_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let train = ordered[..n_train].iter().map(|t| (*t).clone()).collect();
    let test = ordered[n_train..].iter().map(|t| (*t).clone()).collect();
    Ok((log.with_traces(train), log.with_traces(test)))
}

/// A case prefix of length `k` and the remainder of the case.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrefixSuffixPair<'a> {
    pub case_id: &'a str,
    pub k: usize,
    pub prefix: &'a [Event],
    pub true_suffix: &'a [Event],
}

impl PrefixSuffixPair<'_> {
    pub fn prefix_end_time(&self) -> Timestamp {
        self.prefix[self.k - 1].end_time
    }

    pub fn prefix_activities(&self) -> Vec<usize> {
        self.prefix.iter().map(|e| e.activity).collect()
    }

    pub fn suffix_activities(&self) -> Vec<usize> {
        self.true_suffix.iter().map(|e| e.activity).collect()
    }

    /// Completion of the last suffix event minus completion of the last prefix event.
    pub fn actual_remaining_secs(&self) -> f64 {
        let last = self.true_suffix[self.true_suffix.len() - 1].end_time;
        last.secs_since(self.prefix_end_time())
    }
}

/// All pairs with `1 <= k <= len - 1`, ascending in `k`. Traces of length 1
/// yield nothing.
pub fn enumerate_prefix_pairs(trace: &Trace) -> Vec<PrefixSuffixPair<'_>> {
    (1..trace.len())
        .map(|k| {
            let (prefix, true_suffix) = trace.events.split_at(k);
            PrefixSuffixPair {
                case_id: &trace.case_id,
                k,
                prefix,
                true_suffix,
            }
        })
        .collect()
}

/// Pairs of every trace in log order.
pub fn enumerate_log_pairs(log: &EventLog) -> Vec<PrefixSuffixPair<'_>> {
    log.traces.iter().flat_map(enumerate_prefix_pairs).collect()
}
