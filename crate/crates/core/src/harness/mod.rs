//! Experimental protocol: synthetic logs, hyperparameter search,
//! multi-sampler evaluation and rank tables.

pub mod experiment;
pub mod rank;
pub mod report;
pub mod synth;

pub use experiment::{
    evaluate_model, evaluate_pairs, random_search, run_experiment, summarize, DatasetInfo, EvaluationReport, ExperimentConfig,
    PairOutcome, PolicyReport, SearchOptions, SearchOutcome, SearchSpace, Trial,
};
pub use rank::{competition_ranks, rank_table, Metric, RankRow, RankTable};
pub use report::{summary_markdown, write_report_csv, REPORT_HEADER};
pub use synth::{generate_synthetic_log, BranchSpec, LogNormalLaw, LoopSpec, SynthSpec};
