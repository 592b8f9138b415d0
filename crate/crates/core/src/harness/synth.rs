//! Synthetic event logs with a bounded rework loop and an optional branch.
//!
//! Specs are TOML documents:
//!
//! ```toml
//! base_path = ["register", "check", "review", "approve", "archive"]
//! n_cases = 1000
//! case_spacing_secs = 3600       # gap between consecutive case starts
//! start_time = "2024-01-01T00:00:00"
//!
//! [loop]                         # optional
//! start = 2                      # index into base_path where a repeat re-enters
//! end = 2                        # index after which a repeat may happen
//! continue_prob = 0.7            # probability of repeating, in [0, 1)
//! max_iterations = 4             # maximum number of repeats per case
//!
//! [branch]                       # optional
//! index = 3
//! label = "escalate"
//! prob = 0.2
//!
//! [durations.default]            # log-space law of the gap before each event
//! log_mean = 8.0
//! log_sd = 0.5
//! [durations.review]
//! log_mean = 9.0
//! log_sd = 0.0
//! ```
//!
//! Gaps are `exp(N(log_mean, log_sd))` rounded to whole seconds; the first
//! event of a case completes one gap after the case start.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{EventLog, LogBuilder, TimeFormat, Timestamp};
use crate::sampling::RandomStream;

/// Bundled loop-heavy spec used when no spec file is given.
pub const DEFAULT_SPEC: &str = include_str!("../../data/loop_heavy.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSpec {
    pub start: usize,
    pub end: usize,
    pub continue_prob: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub index: usize,
    pub label: String,
    pub prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalLaw {
    pub log_mean: f64,
    pub log_sd: f64,
}

impl Default for LogNormalLaw {
    /// One hour, no spread.
    fn default() -> Self {
        LogNormalLaw {
            log_mean: 3600f64.ln(),
            log_sd: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub base_path: Vec<String>,
    pub n_cases: usize,
    #[serde(default = "default_spacing")]
    pub case_spacing_secs: f64,
    #[serde(default)]
    pub start_time: Option<String>,
    #[serde(default, rename = "loop")]
    pub rework: Option<LoopSpec>,
    #[serde(default)]
    pub branch: Option<BranchSpec>,
    /// Per-label laws; the key `default` covers labels without their own entry.
    #[serde(default)]
    pub durations: BTreeMap<String, LogNormalLaw>,
}

fn default_spacing() -> f64 {
    3600.0
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn bundled() -> Self {
        Self::from_toml(DEFAULT_SPEC).expect("bundled synthetic spec is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        let n = self.base_path.len();
        if n == 0 {
            return bad("base_path must not be empty".into());
        }
        if self.base_path.iter().any(|l| l.trim().is_empty()) {
            return bad("base_path labels must be non-empty".into());
        }
        if self.n_cases < 1 {
            return bad("n_cases must be >= 1".into());
        }
        if !(self.case_spacing_secs.is_finite() && self.case_spacing_secs >= 0.0) {
            return bad("case_spacing_secs must be a non-negative number".into());
        }
        if let Some(l) = &self.rework {
            if l.start > l.end || l.end >= n {
                return bad(format!("loop indices {}..={} outside base path of length {n}", l.start, l.end));
            }
            if !(0.0..1.0).contains(&l.continue_prob) {
                return bad(format!("loop continue_prob must lie in [0, 1), got {}", l.continue_prob));
            }
        }
        if let Some(b) = &self.branch {
            if b.index >= n {
                return bad(format!("branch index {} outside base path of length {n}", b.index));
            }
            if !(0.0..=1.0).contains(&b.prob) {
                return bad(format!("branch prob must lie in [0, 1], got {}", b.prob));
            }
            if b.label.trim().is_empty() {
                return bad("branch label must be non-empty".into());
            }
        }
        for (label, law) in &self.durations {
            if !law.log_mean.is_finite() || !law.log_sd.is_finite() || law.log_sd < 0.0 {
                return bad(format!("duration law for `{label}` needs finite log_mean and log_sd >= 0"));
            }
        }
        if let Some(start) = &self.start_time {
            if Timestamp::parse(start, &TimeFormat::Iso8601).is_none() {
                return bad(format!("start_time `{start}` is not ISO-8601"));
            }
        }
        Ok(())
    }

    fn law(&self, label: &str) -> LogNormalLaw {
        self.durations
            .get(label)
            .or_else(|| self.durations.get("default"))
            .copied()
            .unwrap_or_default()
    }

    fn start(&self) -> Timestamp {
        self.start_time
            .as_deref()
            .and_then(|s| Timestamp::parse(s, &TimeFormat::Iso8601))
            .unwrap_or(Timestamp::from_secs(1_704_067_200))
    }
}

/// Walks the base path once per case; after the loop end, repeats from the
/// loop start with `continue_prob` until `max_iterations` repeats were made.
pub fn generate_synthetic_log(spec: &SynthSpec, rng: &mut RandomStream) -> Result<EventLog> {
    spec.validate()?;
    let laws: BTreeMap<&str, Normal<f64>> = spec
        .base_path
        .iter()
        .chain(spec.branch.as_ref().map(|b| &b.label))
        .map(|label| {
            let law = spec.law(label);
            let normal = Normal::new(law.log_mean, law.log_sd)
                .map_err(|e| Error::InvalidSpec(format!("duration law for `{label}`: {e}")))?;
            Ok((label.as_str(), normal))
        })
        .collect::<Result<_>>()?;

    let start = spec.start();
    let spacing_ms = (spec.case_spacing_secs * 1000.0).round() as i64;
    let width = spec.n_cases.to_string().len();
    let mut builder = LogBuilder::new();
    for case in 0..spec.n_cases {
        let case_id = format!("case-{case:0width$}");
        let mut clock = start.millis() + case as i64 * spacing_ms;
        let mut repeats = 0;
        let mut i = 0;
        while i < spec.base_path.len() {
            let mut label = spec.base_path[i].as_str();
            if let Some(b) = spec.branch.as_ref().filter(|b| b.index == i) {
                if rng.next_unit() < b.prob {
                    label = b.label.as_str();
                }
            }
            let gap_secs = laws[label].sample(rng.rng()).exp().round().max(0.0);
            clock += gap_secs as i64 * 1000;
            builder.push(&case_id, label, Timestamp::from_millis(clock), None);

            if let Some(l) = spec.rework.as_ref().filter(|l| l.end == i) {
                if repeats < l.max_iterations && rng.next_unit() < l.continue_prob {
                    repeats += 1;
                    i = l.start;
                    continue;
                }
            }
            i += 1;
        }
    }
    builder.build()
}
