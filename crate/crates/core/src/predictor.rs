//! Next-activity predictors.
//!
//! [`Predictor`] is the contract the generator drives; [`NgramModel`] is the
//! reference implementation: add-alpha smoothed n-gram transitions over the
//! activity vocabulary plus an end-of-case symbol, with longest-suffix backoff
//! when `alpha == 0`, and log-space duration tables for timestamp prediction.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{EventLog, Vocabulary};

const SUM_TOLERANCE: f64 = 1e-9;

/// Probability vector over the vocabulary with EOC as the last entry.
#[derive(Clone, Debug, PartialEq)]
pub struct NextStepDistribution {
    probs: Vec<f64>,
}

impl NextStepDistribution {
    /// Validates non-negativity and that entries sum to 1 within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter(
                "distribution entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "distribution sums to {total}, expected 1"
            )));
        }
        Ok(NextStepDistribution { probs })
    }

    /// Normalizes non-negative weights with a positive sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Ok(NextStepDistribution {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        NextStepDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs.get(index).copied().unwrap_or(0.0)
    }
}

/// What the suffix generator needs from a next-activity model.
///
/// Prefixes are activity indices (never EOC). Implementations must be
/// immutable after construction so one instance can serve many workers.
pub trait Predictor: Send + Sync {
    /// Vocabulary size including EOC.
    fn vocab_size(&self) -> usize;

    fn eoc_index(&self) -> usize;

    fn predict_next(&self, prefix: &[usize]) -> NextStepDistribution;

    /// Estimated seconds between the last prefix event and completion of `next_activity`.
    fn predict_delta(&self, prefix: &[usize], next_activity: usize) -> f64;
}

/// Context token padding the start of every trace.
pub const BEGIN: u32 = u32::MAX;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub next: BTreeMap<usize, u64>,
    pub total: u64,
}

impl TransitionCounts {
    fn add(&mut self, next: usize) {
        *self.next.entry(next).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn count(&self, next: usize) -> u64 {
        self.next.get(&next).copied().unwrap_or(0)
    }
}

/// Running log-space statistics of inter-event durations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DurationStat {
    pub log_sum: f64,
    pub count: u64,
    pub min_secs: f64,
    pub max_secs: f64,
}

impl Default for DurationStat {
    fn default() -> Self {
        DurationStat {
            log_sum: 0.0,
            count: 0,
            min_secs: f64::INFINITY,
            max_secs: f64::NEG_INFINITY,
        }
    }
}

impl DurationStat {
    fn add(&mut self, secs: f64) {
        let secs = secs.max(0.0);
        self.log_sum += secs.ln_1p();
        self.count += 1;
        self.min_secs = self.min_secs.min(secs);
        self.max_secs = self.max_secs.max(secs);
    }

    /// Geometric mean of `1 + dt`, minus one. Constant samples come back exactly.
    pub fn estimate(&self) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        if self.min_secs == self.max_secs {
            return Some(self.min_secs);
        }
        Some((self.log_sum / self.count as f64).exp_m1().max(0.0))
    }
}

/// Smoothed n-gram next-activity model with duration tables.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramModel {
    order: usize,
    alpha: f64,
    vocabulary: Vocabulary,
    /// `transitions[j]` holds contexts of exactly `j` tokens, `0 <= j < order`.
    transitions: Vec<HashMap<Vec<u32>, TransitionCounts>>,
    context_durations: HashMap<(Vec<u32>, usize), DurationStat>,
    activity_durations: Vec<DurationStat>,
    global_duration: DurationStat,
    num_traces: usize,
    max_trace_len: usize,
}

/// Counts transitions of every trace in `log`, EOC after the last event.
pub fn train_ngram(log: &EventLog, order: usize, alpha: f64) -> Result<NgramModel> {
    if order < 1 {
        return Err(Error::InvalidParameter(format!("n-gram order must be >= 1, got {order}")));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "smoothing alpha must be finite and >= 0, got {alpha}"
        )));
    }
    if log.traces.is_empty() || log.num_events() == 0 {
        return Err(Error::EmptyLog);
    }
    let vocabulary = log.vocabulary.clone();
    let eoc = vocabulary.eoc_index();
    let mut model = NgramModel {
        order,
        alpha,
        transitions: vec![HashMap::new(); order],
        context_durations: HashMap::new(),
        activity_durations: vec![DurationStat::default(); vocabulary.num_activities()],
        global_duration: DurationStat::default(),
        num_traces: log.traces.len(),
        max_trace_len: log.max_trace_len(),
        vocabulary,
    };

    let width = order - 1;
    for trace in &log.traces {
        let mut history: Vec<u32> = vec![BEGIN; width];
        for (i, event) in trace.events.iter().enumerate() {
            model.count_transition(&history, event.activity);
            if i > 0 {
                let dt = event.end_time.secs_since(trace.events[i - 1].end_time);
                let context = history[history.len() - width..].to_vec();
                model
                    .context_durations
                    .entry((context, event.activity))
                    .or_default()
                    .add(dt);
                model.activity_durations[event.activity].add(dt);
                model.global_duration.add(dt);
            }
            history.push(event.activity as u32);
        }
        model.count_transition(&history, eoc);
    }
    Ok(model)
}

impl NgramModel {
    fn count_transition(&mut self, history: &[u32], next: usize) {
        let n = history.len();
        for (len, table) in self.transitions.iter_mut().enumerate() {
            table.entry(history[n - len..].to_vec()).or_default().add(next);
        }
    }

    /// Last `order - 1` tokens of `prefix`, left-padded with [`BEGIN`].
    fn context(&self, prefix: &[usize]) -> Vec<u32> {
        let width = self.order - 1;
        let take = prefix.len().min(width);
        let mut ctx = vec![BEGIN; width - take];
        ctx.extend(prefix[prefix.len() - take..].iter().map(|&a| a as u32));
        ctx
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn num_traces(&self) -> usize {
        self.num_traces
    }

    pub fn max_trace_len(&self) -> usize {
        self.max_trace_len
    }

    /// Raw counts for an exact context of `order - 1` tokens (use [`BEGIN`] for padding).
    pub fn transition_counts(&self, context: &[u32]) -> Option<&TransitionCounts> {
        self.transitions.get(context.len())?.get(context)
    }

    fn distribution_from(&self, counts: Option<&TransitionCounts>) -> NextStepDistribution {
        let v = self.vocabulary.len_with_eoc();
        let total = counts.map_or(0, |c| c.total) as f64;
        let denom = total + self.alpha * v as f64;
        let mut probs = vec![self.alpha / denom; v];
        if let Some(counts) = counts {
            for (&next, &count) in &counts.next {
                probs[next] = (count as f64 + self.alpha) / denom;
            }
        }
        NextStepDistribution { probs }
    }

    fn lookup_counts(&self, context: &[u32]) -> Option<&TransitionCounts> {
        let exact = self.transitions[context.len()].get(context);
        if exact.is_some() || self.alpha > 0.0 {
            return exact;
        }
        // alpha == 0: back off to the longest observed suffix context
        (0..context.len())
            .rev()
            .find_map(|len| self.transitions[len].get(&context[context.len() - len..]))
    }

    /// Serializes to a versioned JSON document.
    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, &ModelFile::from(self))?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(reader)?;
        file.try_into()
    }
}

impl Predictor for NgramModel {
    fn vocab_size(&self) -> usize {
        self.vocabulary.len_with_eoc()
    }

    fn eoc_index(&self) -> usize {
        self.vocabulary.eoc_index()
    }

    fn predict_next(&self, prefix: &[usize]) -> NextStepDistribution {
        let context = self.context(prefix);
        self.distribution_from(self.lookup_counts(&context))
    }

    fn predict_delta(&self, prefix: &[usize], next_activity: usize) -> f64 {
        let context = self.context(prefix);
        self.context_durations
            .get(&(context, next_activity))
            .and_then(DurationStat::estimate)
            .or_else(|| {
                self.activity_durations
                    .get(next_activity)
                    .and_then(DurationStat::estimate)
            })
            .or_else(|| self.global_duration.estimate())
            .unwrap_or(0.0)
    }
}

const MODEL_FORMAT: &str = "suffixpred-ngram";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    alpha: f64,
    vocabulary: Vocabulary,
    num_traces: usize,
    max_trace_len: usize,
    transitions: Vec<TransitionEntry>,
    context_durations: Vec<DurationEntry>,
    activity_durations: Vec<DurationStatFile>,
    global_duration: DurationStatFile,
}

#[derive(Serialize, Deserialize)]
struct TransitionEntry {
    context: Vec<u32>,
    next: Vec<(usize, u64)>,
}

#[derive(Serialize, Deserialize)]
struct DurationEntry {
    context: Vec<u32>,
    activity: usize,
    stat: DurationStatFile,
}

/// JSON has no infinities; empty stats serialize their bounds as null.
#[derive(Serialize, Deserialize)]
struct DurationStatFile {
    log_sum: f64,
    count: u64,
    min_secs: Option<f64>,
    max_secs: Option<f64>,
}

impl From<&DurationStat> for DurationStatFile {
    fn from(s: &DurationStat) -> Self {
        let bounded = s.count > 0;
        DurationStatFile {
            log_sum: s.log_sum,
            count: s.count,
            min_secs: bounded.then_some(s.min_secs),
            max_secs: bounded.then_some(s.max_secs),
        }
    }
}

impl From<DurationStatFile> for DurationStat {
    fn from(f: DurationStatFile) -> Self {
        DurationStat {
            log_sum: f.log_sum,
            count: f.count,
            min_secs: f.min_secs.unwrap_or(f64::INFINITY),
            max_secs: f.max_secs.unwrap_or(f64::NEG_INFINITY),
        }
    }
}

impl From<&NgramModel> for ModelFile {
    fn from(m: &NgramModel) -> Self {
        let mut transitions: Vec<TransitionEntry> = m
            .transitions
            .iter()
            .flat_map(|table| table.iter())
            .map(|(context, counts)| TransitionEntry {
                context: context.clone(),
                next: counts.next.iter().map(|(&a, &c)| (a, c)).collect(),
            })
            .collect();
        transitions.sort_by(|a, b| (a.context.len(), &a.context).cmp(&(b.context.len(), &b.context)));
        let mut context_durations: Vec<DurationEntry> = m
            .context_durations
            .iter()
            .map(|((context, activity), stat)| DurationEntry {
                context: context.clone(),
                activity: *activity,
                stat: stat.into(),
            })
            .collect();
        context_durations.sort_by(|a, b| (&a.context, a.activity).cmp(&(&b.context, b.activity)));
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            order: m.order,
            alpha: m.alpha,
            vocabulary: m.vocabulary.clone(),
            num_traces: m.num_traces,
            max_trace_len: m.max_trace_len,
            transitions,
            context_durations,
            activity_durations: m.activity_durations.iter().map(Into::into).collect(),
            global_duration: (&m.global_duration).into(),
        }
    }
}

impl TryFrom<ModelFile> for NgramModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unknown format tag `{}`", f.format)));
        }
        if f.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", f.version)));
        }
        if f.order < 1 {
            return Err(Error::ModelFormat("order must be >= 1".into()));
        }
        let v = f.vocabulary.len_with_eoc();
        let valid_token = |t: &u32| *t == BEGIN || (*t as usize) < f.vocabulary.num_activities();
        let mut transitions = vec![HashMap::new(); f.order];
        for entry in f.transitions {
            if entry.context.len() >= f.order || !entry.context.iter().all(valid_token) {
                return Err(Error::ModelFormat("malformed transition context".into()));
            }
            let mut counts = TransitionCounts::default();
            for (next, count) in entry.next {
                if next >= v || count == 0 {
                    return Err(Error::ModelFormat("malformed transition count".into()));
                }
                counts.next.insert(next, count);
                counts.total += count;
            }
            transitions[entry.context.len()].insert(entry.context, counts);
        }
        if f.activity_durations.len() != f.vocabulary.num_activities() {
            return Err(Error::ModelFormat("duration table size mismatch".into()));
        }
        let context_durations = f
            .context_durations
            .into_iter()
            .map(|e| ((e.context, e.activity), e.stat.into()))
            .collect();
        Ok(NgramModel {
            order: f.order,
            alpha: f.alpha,
            vocabulary: f.vocabulary,
            transitions,
            context_durations,
            activity_durations: f.activity_durations.into_iter().map(Into::into).collect(),
            global_duration: f.global_duration.into(),
            num_traces: f.num_traces,
            max_trace_len: f.max_trace_len,
        })
    }
}
