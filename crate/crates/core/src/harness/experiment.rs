//! Hyperparameter search and multi-policy evaluation.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{enumerate_log_pairs, temporal_split, EventLog, PrefixSuffixPair};
use crate::generation::{generate_suffix, pair_seed, splitmix64, GenerationLimits};
use crate::metrics::{self, merge_profile, repetition_profile, MetricSummary, RepetitionProfile};
use crate::predictor::{train_ngram, NgramModel, Predictor};
use crate::sampling::{RandomStream, SamplerPolicy};

const SECS_PER_HOUR: f64 = 3600.0;

/// Candidate n-gram orders and smoothing values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub orders: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            orders: vec![2, 3, 4, 5],
            alphas: vec![0.0, 0.1, 0.5, 1.0],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidParameter("search space lists must be non-empty".into()));
        }
        if self.orders.contains(&0) {
            return Err(Error::InvalidParameter("n-gram orders must be >= 1".into()));
        }
        if self.alphas.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidParameter("smoothing values must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub order: usize,
    pub alpha: f64,
    pub validation_mae_hours: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub order: usize,
    pub alpha: f64,
    pub validation_mae_hours: f64,
    /// Every evaluated candidate, in draw order.
    pub trials: Vec<Trial>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub iterations: usize,
    pub seed: u64,
    /// Fraction of the training log used for fitting; the rest validates.
    pub fit_fraction: f64,
    pub max_steps_factor: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            iterations: 50,
            seed: 42,
            fit_fraction: 0.8,
            max_steps_factor: 2,
        }
    }
}

/// Uniform draws with replacement over `space`; each candidate is fitted on
/// the earlier part of `train` and scored by argmax-decoded remaining-time MAE
/// on the later part. The first candidate reaching the minimum wins.
pub fn random_search(train: &EventLog, space: &SearchSpace, options: &SearchOptions) -> Result<SearchOutcome> {
    space.validate()?;
    if options.iterations < 1 {
        return Err(Error::InvalidParameter("search needs at least one iteration".into()));
    }
    let (fit, validation) = temporal_split(train, options.fit_fraction)?;
    let pairs = enumerate_log_pairs(&validation);
    let limits = GenerationLimits::from_training(fit.max_trace_len(), options.max_steps_factor);
    let mut rng = RandomStream::new(splitmix64(options.seed.wrapping_add(1)));

    let mut trials = Vec::with_capacity(options.iterations);
    for _ in 0..options.iterations {
        let order = space.orders[rng.next_index(space.orders.len())];
        let alpha = space.alphas[rng.next_index(space.alphas.len())];
        let model = train_ngram(&fit, order, alpha)?;
        let outcomes = evaluate_pairs(&model, &SamplerPolicy::Argmax, &pairs, limits, options.seed);
        let errors: Vec<(f64, f64)> = outcomes.iter().map(|o| (o.actual_secs, o.predicted_secs)).collect();
        trials.push(Trial {
            order,
            alpha,
            validation_mae_hours: metrics::mae(&errors)? / SECS_PER_HOUR,
        });
    }
    let best = trials
        .iter()
        .fold(None::<&Trial>, |best, t| match best {
            Some(b) if b.validation_mae_hours <= t.validation_mae_hours => Some(b),
            _ => Some(t),
        })
        .copied()
        .expect("at least one trial");
    Ok(SearchOutcome {
        order: best.order,
        alpha: best.alpha,
        validation_mae_hours: best.validation_mae_hours,
        trials,
    })
}

/// Scores of one generated suffix against its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub case_id: String,
    pub k: usize,
    pub sdl: f64,
    pub ras: f64,
    pub actual_secs: f64,
    pub predicted_secs: f64,
    pub generated: Vec<usize>,
    pub terminated_by_eoc: bool,
}

impl PairOutcome {
    pub fn abs_error_secs(&self) -> f64 {
        (self.actual_secs - self.predicted_secs).abs()
    }
}

/// Generates and scores every pair; output order follows `pairs`.
pub fn evaluate_pairs<P: Predictor + ?Sized>(
    model: &P,
    policy: &SamplerPolicy,
    pairs: &[PrefixSuffixPair<'_>],
    limits: GenerationLimits,
    seed: u64,
) -> Vec<PairOutcome> {
    pairs
        .par_iter()
        .map(|pair| {
            let mut rng = RandomStream::new(pair_seed(seed, pair.case_id, pair.k));
            let prefix = pair.prefix_activities();
            let truth = pair.suffix_activities();
            let generated = generate_suffix(model, policy, &prefix, pair.prefix_end_time(), limits, &mut rng);
            PairOutcome {
                case_id: pair.case_id.to_string(),
                k: pair.k,
                sdl: metrics::sdl(&truth, &generated.activities),
                ras: metrics::ras(&truth, &generated.activities),
                actual_secs: pair.actual_remaining_secs(),
                predicted_secs: generated.remaining_secs(pair.prefix_end_time()),
                generated: generated.activities,
                terminated_by_eoc: generated.terminated_by_eoc,
            }
        })
        .collect()
}

/// Means over a fixed manifest, summed in manifest order.
pub fn summarize(outcomes: &[PairOutcome]) -> Result<MetricSummary> {
    let errors: Vec<(f64, f64)> = outcomes.iter().map(|o| (o.actual_secs, o.predicted_secs)).collect();
    let mae = metrics::mae(&errors)?;
    let n = outcomes.len() as f64;
    Ok(MetricSummary {
        mean_sdl: outcomes.iter().map(|o| o.sdl).sum::<f64>() / n,
        mean_ras: outcomes.iter().map(|o| o.ras).sum::<f64>() / n,
        mae_hours: mae / SECS_PER_HOUR,
        n_pairs: outcomes.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub train_fraction: f64,
    pub space: SearchSpace,
    pub hpo_iterations: usize,
    pub seed: u64,
    /// Worker threads for pair evaluation; 0 uses all available cores.
    pub workers: usize,
    pub max_steps_factor: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: "log".into(),
            train_fraction: 0.8,
            space: SearchSpace::default(),
            hpo_iterations: 50,
            seed: 42,
            workers: 0,
            max_steps_factor: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n_traces: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_activities: usize,
    pub max_train_trace_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyReport {
    pub policy: SamplerPolicy,
    pub summary: MetricSummary,
    /// Run-length histogram summed over all generated suffixes.
    pub profile: RepetitionProfile,
    pub outcomes: Vec<PairOutcome>,
}

impl PolicyReport {
    pub fn manifest(&self) -> Vec<(&str, usize)> {
        self.outcomes.iter().map(|o| (o.case_id.as_str(), o.k)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub dataset: DatasetInfo,
    pub order: usize,
    pub alpha: f64,
    /// `None` when a pre-trained model was evaluated.
    pub search: Option<SearchOutcome>,
    pub seed: u64,
    pub max_steps: usize,
    /// Run-length histogram summed over all ground-truth suffixes.
    pub truth_profile: RepetitionProfile,
    pub policies: Vec<PolicyReport>,
    pub wall_clock: Duration,
}

impl EvaluationReport {
    pub fn policy(&self, policy: &SamplerPolicy) -> Option<&PolicyReport> {
        self.policies.iter().find(|p| p.policy == *policy)
    }

    /// L1 distance between a policy's normalized run-length profile and the ground truth's.
    pub fn profile_distance(&self, policy: &PolicyReport) -> f64 {
        metrics::profile_l1(&policy.profile, &self.truth_profile)
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

fn check_inputs(policies: &[SamplerPolicy], config: &ExperimentConfig) -> Result<()> {
    if policies.is_empty() {
        return Err(Error::InvalidParameter("no sampler policies given".into()));
    }
    for p in policies {
        p.validate()?;
    }
    if config.max_steps_factor < 1 {
        return Err(Error::InvalidParameter("max steps factor must be >= 1".into()));
    }
    Ok(())
}

/// Split, tune on the training part, retrain on all of it, then generate and
/// score every test pair under each policy.
pub fn run_experiment(log: &EventLog, policies: &[SamplerPolicy], config: &ExperimentConfig) -> Result<EvaluationReport> {
    check_inputs(policies, config)?;
    let started = Instant::now();
    thread_pool(config.workers)?.install(|| {
        let (train, test) = temporal_split(log, config.train_fraction)?;
        let options = SearchOptions {
            iterations: config.hpo_iterations,
            seed: config.seed,
            fit_fraction: config.train_fraction,
            max_steps_factor: config.max_steps_factor,
        };
        let search = random_search(&train, &config.space, &options)?;
        let model = train_ngram(&train, search.order, search.alpha)?;
        score_policies(log, &train, &test, &model, Some(search), policies, config, started)
    })
}

/// Scores an already trained model on the test part of `log`'s temporal split.
pub fn evaluate_model(
    log: &EventLog,
    model: &NgramModel,
    policies: &[SamplerPolicy],
    config: &ExperimentConfig,
) -> Result<EvaluationReport> {
    check_inputs(policies, config)?;
    if model.vocabulary() != &log.vocabulary {
        return Err(Error::InvalidParameter(
            "model vocabulary differs from the log's vocabulary".into(),
        ));
    }
    let started = Instant::now();
    thread_pool(config.workers)?.install(|| {
        let (train, test) = temporal_split(log, config.train_fraction)?;
        score_policies(log, &train, &test, model, None, policies, config, started)
    })
}

#[allow(clippy::too_many_arguments)]
fn score_policies(
    log: &EventLog,
    train: &EventLog,
    test: &EventLog,
    model: &NgramModel,
    search: Option<SearchOutcome>,
    policies: &[SamplerPolicy],
    config: &ExperimentConfig,
    started: Instant,
) -> Result<EvaluationReport> {
    let limits = GenerationLimits::from_training(train.max_trace_len(), config.max_steps_factor);
    let pairs = enumerate_log_pairs(test);

    let mut truth_profile = RepetitionProfile::new();
    for pair in &pairs {
        merge_profile(&mut truth_profile, &repetition_profile(&pair.suffix_activities()));
    }

    let mut reports = Vec::with_capacity(policies.len());
    for policy in policies {
        let outcomes = evaluate_pairs(model, policy, &pairs, limits, config.seed);
        let summary = summarize(&outcomes)?;
        let mut profile = RepetitionProfile::new();
        for o in &outcomes {
            merge_profile(&mut profile, &repetition_profile(&o.generated));
        }
        reports.push(PolicyReport {
            policy: *policy,
            summary,
            profile,
            outcomes,
        });
    }

    Ok(EvaluationReport {
        dataset: DatasetInfo {
            name: config.dataset.clone(),
            n_traces: log.traces.len(),
            n_train: train.traces.len(),
            n_test: test.traces.len(),
            n_activities: log.vocabulary.num_activities(),
            max_train_trace_len: train.max_trace_len(),
        },
        order: model.order(),
        alpha: model.alpha(),
        search,
        seed: config.seed,
        max_steps: limits.max_steps(),
        truth_profile,
        policies: reports,
        wall_clock: started.elapsed(),
    })
}
