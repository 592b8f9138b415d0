//! `suffixpred`: train, evaluate and compare suffix samplers on event logs.
//!
//! Data goes to files or standard output; progress and errors go to
//! standard error. Exit status 0 on success, 2 on usage errors, 1 otherwise.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use suffixpred::harness::{
    self, generate_synthetic_log, rank_table, summary_markdown, write_report_csv, EvaluationReport, ExperimentConfig,
    Metric, SearchSpace, SynthSpec,
};
use suffixpred::{
    parse_csv_log, train_ngram, ColumnMapping, Error, EventLog, NgramModel, RandomStream, SamplerPolicy, TimeFormat,
};

const DEFAULT_POLICIES: &str = "argmax,random,topk:2,nucleus:0.7,daemon";

#[derive(Parser, Debug)]
#[command(name = "suffixpred", version, about = "Case suffix prediction with exploration-aware samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train an n-gram model on a log and save it.
    Train(TrainArgs),
    /// Evaluate a single sampler policy.
    Evaluate(EvaluateArgs),
    /// Run the full comparison protocol over several policies.
    Compare(CompareArgs),
    /// Generate a synthetic CSV log.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
struct CsvArgs {
    #[arg(long, default_value = "case_id")]
    case_col: String,
    #[arg(long, default_value = "activity")]
    activity_col: String,
    #[arg(long, default_value = "end_time")]
    time_col: String,
    /// `iso8601` or a chrono strftime pattern.
    #[arg(long, default_value = "iso8601")]
    time_format: String,
}

impl CsvArgs {
    fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            case_id: self.case_col.clone(),
            activity: self.activity_col.clone(),
            end_time: self.time_col.clone(),
            ..ColumnMapping::default()
        }
    }

    fn read(&self, path: &Path) -> anyhow::Result<EventLog> {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let log = parse_csv_log(BufReader::new(file), &self.mapping(), &TimeFormat::from_flag(&self.time_format))
            .with_context(|| format!("cannot parse {}", path.display()))?;
        Ok(log)
    }
}

#[derive(Args, Debug, Clone)]
struct ProtocolArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    hpo_iters: u64,
    /// Fraction of cases (by start time) used for training.
    #[arg(long, default_value_t = 0.8, value_parser = parse_fraction)]
    split: f64,
    /// Generation cap as a multiple of the longest training trace.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps_factor: u64,
    /// Candidate n-gram orders for the search.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5", value_parser = clap::value_parser!(u64).range(1..))]
    orders: Vec<u64>,
    /// Candidate smoothing values for the search.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.5,1.0", value_parser = parse_alpha)]
    alphas: Vec<f64>,
}

impl ProtocolArgs {
    fn config(&self, dataset: &str) -> ExperimentConfig {
        ExperimentConfig {
            dataset: dataset.to_string(),
            train_fraction: self.split,
            space: SearchSpace {
                orders: self.orders.iter().map(|&o| o as usize).collect(),
                alphas: self.alphas.clone(),
            },
            hpo_iterations: self.hpo_iters as usize,
            seed: self.seed,
            workers: self.workers,
            max_steps_factor: self.max_steps_factor as usize,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    order: u64,
    #[arg(long, default_value_t = 0.0, value_parser = parse_alpha)]
    alpha: f64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Markdown,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// CSV log; without it the bundled synthetic spec is used.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Synthetic spec to generate the log from (ignored with --log).
    #[arg(long)]
    synth: Option<PathBuf>,
    /// A single policy, e.g. `daemon` or `topk:3`.
    #[arg(long = "policies", value_parser = parse_policy, default_value = "daemon")]
    policy: SamplerPolicy,
    /// Pre-trained model; skips the hyperparameter search.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// One or more CSV logs; without any the bundled synthetic spec is used.
    #[arg(long)]
    log: Vec<PathBuf>,
    /// Synthetic spec to generate the log from (ignored with --log).
    #[arg(long)]
    synth: Option<PathBuf>,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', value_parser = parse_policy, default_value = DEFAULT_POLICIES)]
    policies: Vec<SamplerPolicy>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Rank table format printed to standard output.
    #[arg(long, value_enum, default_value = "markdown")]
    format: OutputFormat,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// TOML spec; defaults to the bundled loop-heavy process.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV file to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<SamplerPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and >= 0"))
    }
}

/// Failure class: usage errors exit with 2.
enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::InvalidSpec(_) | Error::InvalidPolicy(_)) => Failure::Usage(format!("{e:#}")),
            _ => Failure::Run(e),
        }
    }
}

/// Writes through a temporary file in the target directory so a failed
/// command leaves no partial output behind.
fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<&mut File>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("cannot write into {}", dir.display()))?;
    {
        let mut out = BufWriter::new(tmp.as_file_mut());
        write(&mut out)?;
        out.flush()?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load_spec(path: Option<&Path>) -> Result<SynthSpec, Failure> {
    match path {
        None => Ok(SynthSpec::bundled()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(Failure::Run)?;
            SynthSpec::from_toml(&text)
                .with_context(|| format!("bad spec {}", p.display()))
                .map_err(Failure::from)
        }
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Logs named by `--log`, or one synthetic log generated from the seed.
fn input_logs(
    logs: &[PathBuf],
    synth: Option<&Path>,
    csv: &CsvArgs,
    seed: u64,
) -> Result<Vec<(String, EventLog)>, Failure> {
    if logs.is_empty() {
        let spec = load_spec(synth)?;
        let name = synth.map(dataset_name).unwrap_or_else(|| "synthetic".into());
        let log = generate_synthetic_log(&spec, &mut RandomStream::new(seed)).map_err(|e| Failure::from(anyhow::Error::from(e)))?;
        return Ok(vec![(name, log)]);
    }
    let mut names: Vec<String> = Vec::new();
    let mut out = Vec::new();
    for path in logs {
        let mut name = dataset_name(path);
        if names.contains(&name) {
            name = path.display().to_string();
        }
        names.push(name.clone());
        out.push((name, csv.read(path)?));
    }
    Ok(out)
}

fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    let log = args.csv.read(&args.log)?;
    let model = train_ngram(&log, args.order as usize, args.alpha).map_err(anyhow::Error::from)?;
    write_atomic(&args.out, |w| Ok(model.save(w)?))?;
    println!("vocabulary_size\t{}", log.vocabulary.num_activities());
    println!("traces\t{}", log.traces.len());
    println!("max_trace_length\t{}", log.max_trace_len());
    eprintln!("model written to {}", args.out.display());
    Ok(())
}

fn write_outputs(out_dir: &Path, reports: &[EvaluationReport]) -> anyhow::Result<harness::RankTable> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write_atomic(&out_dir.join("report.csv"), |w| Ok(write_report_csv(reports, w)?))?;
    let summary: Vec<String> = reports.iter().map(summary_markdown).collect();
    write_atomic(&out_dir.join("summary.md"), |w| {
        w.write_all(summary.join("\n").as_bytes())?;
        Ok(())
    })?;
    let named: Vec<(&str, &EvaluationReport)> = reports.iter().map(|r| (r.dataset.name.as_str(), r)).collect();
    let ranks = rank_table(&named)?;
    write_atomic(&out_dir.join("ranks.csv"), |w| Ok(w.write_all(ranks.to_csv().as_bytes())?))?;
    write_atomic(&out_dir.join("ranks.md"), |w| Ok(w.write_all(ranks.to_markdown().as_bytes())?))?;
    Ok(ranks)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let logs: Vec<PathBuf> = args.log.iter().cloned().collect();
    let (name, log) = input_logs(&logs, args.synth.as_deref(), &args.csv, args.protocol.seed)?
        .pop()
        .expect("one input log");
    let config = args.protocol.config(&name);
    let report = match &args.model {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let model = NgramModel::load(BufReader::new(file))
                .with_context(|| format!("cannot load model {}", path.display()))?;
            harness::evaluate_model(&log, &model, &[args.policy], &config).map_err(anyhow::Error::from)?
        }
        None => harness::run_experiment(&log, &[args.policy], &config).map_err(anyhow::Error::from)?,
    };
    write_outputs(&args.out, std::slice::from_ref(&report))?;
    print!("{}", summary_markdown(&report));
    eprintln!("finished in {:.2?}; outputs in {}", report.wall_clock, args.out.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Failure> {
    let inputs = input_logs(&args.log, args.synth.as_deref(), &args.csv, args.protocol.seed)?;
    let mut reports = Vec::with_capacity(inputs.len());
    for (name, log) in &inputs {
        eprintln!(
            "{name}: {} traces, {} events, {} activities",
            log.traces.len(),
            log.num_events(),
            log.vocabulary.num_activities()
        );
        let report = harness::run_experiment(log, &args.policies, &args.protocol.config(name))
            .with_context(|| format!("experiment on {name} failed"))?;
        eprintln!(
            "{name}: order {} alpha {} chosen, {} test pairs, {:.2?}",
            report.order,
            report.alpha,
            report.policies[0].summary.n_pairs,
            report.wall_clock
        );
        reports.push(report);
    }
    let ranks = write_outputs(&args.out, &reports)?;
    match args.format {
        OutputFormat::Csv => print!("{}", ranks.to_csv()),
        OutputFormat::Markdown => print!("{}", ranks.to_markdown()),
    }
    for (name, _) in &inputs {
        for metric in Metric::ALL {
            println!("{name}\t{}\tbest: {}", metric.name(), ranks.winners(name, metric).join(", "));
        }
    }
    eprintln!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    let spec = load_spec(args.spec.as_deref())?;
    let log = generate_synthetic_log(&spec, &mut RandomStream::new(args.seed)).map_err(anyhow::Error::from)?;
    match &args.out {
        Some(path) => {
            write_atomic(path, |w| Ok(log.write_csv(w)?))?;
            eprintln!("{} cases, {} events written to {}", log.traces.len(), log.num_events(), path.display());
        }
        None => log.write_csv(io::stdout().lock()).map_err(anyhow::Error::from)?,
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Compare(args) => {
            if args.policies.is_empty() {
                return Err(Failure::Usage("--policies must name at least one policy".into()));
            }
            cmd_compare(args)
        }
        Command::Synth(args) => cmd_synth(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
