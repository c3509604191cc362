use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use imbench_core::data::{
    load_csv, preprocess, stratified_split, synth_generate, ColumnSchema, Dataset, SplitFractions,
    SynthConfig,
};
use imbench_core::harness::{
    hpo_random_search, pivot_results, read_results, run_sweep, write_degradation, write_results,
    write_summary, ExperimentConfig, HpoSpec, Metric,
};
use imbench_core::metrics::{confusion, evaluate, recall};
use imbench_core::model::{fit, Family, ModelParams};
use imbench_core::stats::{
    rank_analysis, render_cd_svg, render_cd_text, Direction, PValueMode, RankAnalysis,
};
use imbench_core::weighting::{ClassWeights, WeightingStrategy, DEFAULT_BETA};
use imbench_core::LabelDistribution;

/// Quantify class imbalance, train classifiers under class weighting, and
/// compare them with rank statistics.
#[derive(Parser)]
#[command(name = "imbench", version)]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print imbalance metrics for one or more label columns.
    Inspect(InspectArgs),
    /// Print the per-class weights of every weighting strategy.
    Weights(WeightsArgs),
    /// Generate a synthetic dataset and its schema.
    Synth(SynthArgs),
    /// Fit one model on a stratified split and report test metrics.
    Train(TrainArgs),
    /// Run a full sweep described by a config file.
    Bench(BenchArgs),
    /// Friedman, pairwise Wilcoxon-Holm and critical-difference output for a results CSV.
    Stats(StatsArgs),
    /// Random hyperparameter search for one classifier.
    Hpo(HpoArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// TOML column schema.
    #[arg(long)]
    schema: PathBuf,
}

impl DataArgs {
    fn load(&self, label: Option<&str>) -> Result<Dataset> {
        let mut schema = ColumnSchema::load(&self.schema)?;
        if let Some(label) = label {
            schema = schema.with_label(label)?;
        }
        let raw = load_csv(&self.data, &schema)?;
        Ok(preprocess(&raw)?)
    }
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Label column to report; repeatable. Defaults to the schema's label.
    #[arg(long)]
    label: Vec<String>,
    /// Also write the reports as JSON to this path ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    label: Option<String>,
    /// Smoothing factor of the effective-number scheme.
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n_samples: usize,
    #[arg(long, default_value_t = 2)]
    n_classes: usize,
    #[arg(long, default_value_t = 4)]
    n_features: usize,
    /// Comma-separated explicit class counts; overrides --exponent.
    #[arg(long, value_delimiter = ',')]
    class_counts: Option<Vec<usize>>,
    /// Power-law skew of the class sizes; 0 is balanced.
    #[arg(long, default_value_t = 0.0)]
    exponent: f64,
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; the schema is written next to it with a .toml extension.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "label")]
    label_name: String,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value = "none")]
    weighting: WeightingStrategy,
    /// JSON file with model parameters; defaults to the family defaults.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop classes with fewer samples than this before splitting.
    #[arg(long, default_value_t = 1)]
    threshold: usize,
}

impl ModelArgs {
    fn params(&self) -> Result<ModelParams> {
        let Some(path) = &self.params else {
            return Ok(ModelParams::default_for(self.family));
        };
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let params: ModelParams = serde_json::from_str(&text)
            .with_context(|| format!("parsing parameters in {}", path.display()))?;
        if params.family() != self.family {
            bail!(usage(format!(
                "{} holds {} parameters, not {}",
                path.display(),
                params.family(),
                self.family
            )));
        }
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    label: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    /// Write the fitted model as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Directory for results.csv, summary.csv, degradation.csv and cd.svg.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Run one block at a time for clean timings.
    #[arg(long)]
    sequential_timing: bool,
    #[arg(long)]
    runs: Option<usize>,
    /// Enable tuning with this many trials per classifier.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct StatsArgs {
    /// Results CSV written by `bench`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, default_value = "weighted_f1")]
    metric: Metric,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// maximize or minimize; defaults to the metric's natural direction.
    #[arg(long)]
    direction: Option<Direction>,
    #[arg(long)]
    out_svg: Option<PathBuf>,
    #[arg(long)]
    out_text: Option<PathBuf>,
    /// Write the full analysis as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct HpoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    label: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 25)]
    trials: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    no_pruning: bool,
    /// Write the best parameters as JSON, usable with `train --params`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `println!` that propagates write errors instead of panicking, so a closed
/// pipe ends the program quietly.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

/// An error caused by the invocation rather than by the data or I/O.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// The error chain joined by ": ", skipping causes already quoted by an outer message.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
}

fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Inspect(a) => inspect(a),
        Command::Weights(a) => weights(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Bench(a) => bench(a),
        Command::Stats(a) => stats(a),
        Command::Hpo(a) => hpo(a),
    }
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        out!("{text}");
        Ok(())
    } else {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

fn inspect(a: InspectArgs) -> Result<()> {
    let labels: Vec<Option<&str>> = if a.label.is_empty() {
        vec![None]
    } else {
        a.label.iter().map(|l| Some(l.as_str())).collect()
    };
    let schema_label = ColumnSchema::load(&a.data.schema)?
        .label_column()
        .map(|c| c.name.clone())
        .unwrap_or_default();
    let mut reports = Vec::new();
    out!(
        "{:<20} {:>8} {:>4} {:>10} {:>12} {:>8}",
        "label",
        "rows",
        "K",
        "cvcf",
        "ir",
        "necd"
    );
    for label in labels {
        let data = a.data.load(label)?;
        let name = label.unwrap_or(&schema_label).to_string();
        let dist = LabelDistribution::from_counts(data.class_counts())?;
        let report = dist.report()?;
        out!(
            "{:<20} {:>8} {:>4} {:>10.4} {:>12.4} {:>8.4}",
            name,
            data.n_samples(),
            data.n_classes(),
            report.cvcf,
            report.ir,
            report.necd
        );
        reports.push(serde_json::json!({
            "label": name,
            "n_samples": data.n_samples(),
            "class_names": data.class_names(),
            "class_counts": data.class_counts(),
            "cvcf": report.cvcf,
            "ir": report.ir,
            "necd": report.necd,
        }));
    }
    if let Some(path) = &a.json {
        write_output(path, &serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(())
}

fn weights(a: WeightsArgs) -> Result<()> {
    if !(a.beta > 0.0 && a.beta < 1.0) {
        bail!(usage("--beta must lie in (0, 1)"));
    }
    let data = a.data.load(a.label.as_deref())?;
    let dist = LabelDistribution::from_counts(data.class_counts())?;
    let all: Vec<ClassWeights> = WeightingStrategy::ALL
        .iter()
        .map(|&s| ClassWeights::compute(s, &dist, a.beta))
        .collect::<Result<_, _>>()?;
    write!(std::io::stdout(), "{:<20} {:>8}", "class", "count")?;
    for w in &all {
        write!(std::io::stdout(), " {:>12}", w.strategy.as_str())?;
    }
    out!();
    for (c, name) in data.class_names().iter().enumerate() {
        write!(std::io::stdout(), "{:<20} {:>8}", name, dist.counts()[c])?;
        for w in &all {
            write!(std::io::stdout(), " {:>12.6}", w.weights[c])?;
        }
        out!();
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_samples: a.n_samples,
        n_classes: a.n_classes,
        n_features: a.n_features,
        class_counts: a.class_counts,
        power_law_exponent: a.exponent,
        cluster_separation: a.separation,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let data = synth_generate(&cfg)?;
    data.write_csv(&a.out, &a.label_name)?;
    let schema_path = a.out.with_extension("toml");
    data.schema(&a.label_name).save(&schema_path)?;
    out!(
        "wrote {} rows to {} (schema {})",
        data.n_samples(),
        a.out.display(),
        schema_path.display()
    );
    Ok(())
}

/// Filtered data and its stratified split.
fn prepare(data: Dataset, threshold: usize, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let data = data.filter_min_class_count(threshold)?;
    let s = stratified_split(&data, SplitFractions::default(), seed)?;
    Ok((
        data.subset(&s.train),
        data.subset(&s.validation),
        data.subset(&s.test),
    ))
}

fn train(a: TrainArgs) -> Result<()> {
    let params = a.model.params()?;
    let data = a.data.load(a.label.as_deref())?;
    let (train, validation, test) = prepare(data, a.model.threshold, a.model.seed)?;
    let dist = LabelDistribution::from_counts(train.class_counts())?;
    let weights = ClassWeights::compute(a.model.weighting, &dist, a.model.beta)?;
    let model = fit(&params, &train, Some(&validation), &weights, a.model.seed)?;
    let pred = model.predict(test.features().view())?;
    let k = test.n_classes();
    let eval = evaluate(test.labels(), &pred, k)?;
    let cm = confusion(test.labels(), &pred, k)?;
    out!("family            {}", model.family);
    out!("weighting         {}", a.model.weighting);
    out!("train samples     {}", train.n_samples());
    out!("training seconds  {:.4}", model.training_seconds);
    out!("accuracy          {:.4}", eval.accuracy);
    out!("macro f1          {:.4}", eval.macro_f1);
    out!("weighted f1       {:.4}", eval.weighted_f1);
    for (c, name) in test.class_names().iter().enumerate() {
        out!("recall[{name}]  {:.4}", recall(&cm, c));
    }
    if let Some(out) = &a.out {
        write_output(out, &model.to_json()?)?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = match ExperimentConfig::load(&a.config) {
        Ok(cfg) => cfg,
        Err(e @ imbench_core::Error::Io { .. }) => return Err(e.into()),
        Err(e) => bail!(usage(e.to_string())),
    };
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(r) = a.runs {
        cfg.n_runs = r;
    }
    if let Some(t) = a.trials {
        cfg.hpo.enabled = true;
        cfg.hpo.search.n_trials = t;
    }
    cfg.sequential_timing |= a.sequential_timing;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let out = run_sweep(&cfg)?;
    write_results(&out.results, a.out_dir.join("results.csv"))?;
    write_summary(&out.summary, a.out_dir.join("summary.csv"))?;
    write_degradation(&out.summary, a.out_dir.join("degradation.csv"))?;
    if !out.tuned.is_empty() {
        let tuned: Vec<_> = out
            .tuned
            .iter()
            .map(|(id, t, p)| serde_json::json!({"classifier": id, "threshold": t, "params": p}))
            .collect();
        write_output(
            &a.out_dir.join("tuned.json"),
            &serde_json::to_string_pretty(&tuned)?,
        )?;
    }
    let skipped = out.results.iter().filter(|r| !r.is_ok()).count();
    out!(
        "{} rows ({} skipped), {} summary rows written to {}",
        out.results.len(),
        skipped,
        out.summary.len(),
        a.out_dir.display()
    );

    match pivot_results(&out.results, Metric::WeightedF1)
        .and_then(|m| rank_analysis(&m, 0.05, Direction::Maximize, PValueMode::Auto))
    {
        Ok(analysis) => {
            write_output(&a.out_dir.join("cd.svg"), &render_cd_svg(&analysis))?;
            write_output(&a.out_dir.join("cd.txt"), &render_cd_text(&analysis))?;
        }
        Err(e) => log::warn!("no critical-difference diagram: {e}"),
    }
    Ok(())
}

fn print_analysis(analysis: &RankAnalysis, n_blocks: usize) -> Result<()> {
    let f = &analysis.friedman;
    out!(
        "Friedman chi2({}, N={}) = {:.4}, p = {:.6}",
        f.df,
        n_blocks,
        f.statistic,
        f.p_value
    );
    out!();
    out!("{:<28} {:>8}", "classifier", "avg rank");
    let mut order: Vec<usize> = (0..analysis.treatments.len()).collect();
    order.sort_by(|&i, &j| analysis.average_ranks[i].total_cmp(&analysis.average_ranks[j]));
    for &i in &order {
        out!(
            "{:<28} {:>8.3}",
            analysis.treatments[i],
            analysis.average_ranks[i]
        );
    }
    out!();
    out!(
        "{:<28} {:<28} {:>10} {:>10} {:>10}",
        "a",
        "b",
        "W",
        "p",
        "p_holm"
    );
    for t in &analysis.pairwise {
        out!(
            "{:<28} {:<28} {:>10} {:>10.6} {:>10.6}",
            analysis.treatments[t.a],
            analysis.treatments[t.b],
            t.statistic
                .map(|s| format!("{s:.1}"))
                .unwrap_or_else(|| "-".into()),
            t.p_value,
            t.p_adjusted
        );
    }
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        bail!(usage("--alpha must lie in (0, 1)"));
    }
    let rows = read_results(&a.results)?;
    let matrix = pivot_results(&rows, a.metric)?;
    let direction = a.direction.unwrap_or_else(|| a.metric.natural_direction());
    let analysis = rank_analysis(&matrix, a.alpha, direction, PValueMode::Auto)?;
    print_analysis(&analysis, matrix.n_blocks())?;
    out!();
    write!(std::io::stdout(), "{}", render_cd_text(&analysis))?;
    if let Some(p) = &a.out_svg {
        write_output(p, &render_cd_svg(&analysis))?;
    }
    if let Some(p) = &a.out_text {
        write_output(p, &render_cd_text(&analysis))?;
    }
    if let Some(p) = &a.json {
        write_output(p, &serde_json::to_string_pretty(&analysis)?)?;
    }
    Ok(())
}

fn hpo(a: HpoArgs) -> Result<()> {
    let base = a.model.params()?;
    let spec = HpoSpec {
        n_trials: a.trials,
        cv_folds: a.folds,
        pruning: !a.no_pruning,
        seed: a.model.seed,
        ..HpoSpec::default()
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let data = a.data.load(a.label.as_deref())?;
    let data = data.filter_min_class_count(a.model.threshold)?;
    let split = stratified_split(&data, SplitFractions::default(), a.model.seed)?;
    let mut dev_idx = split.train;
    dev_idx.extend(split.validation);
    dev_idx.sort_unstable();
    let dev = data.subset(&dev_idx);
    let out = hpo_random_search(
        &base,
        a.model.weighting,
        a.model.beta,
        &spec,
        &dev,
        a.model.seed,
    )?;
    out!("{:>5} {:>10} {:>6}  status", "trial", "score", "folds");
    for t in &out.trials {
        out!(
            "{:>5} {:>10} {:>6}  {:?}{}",
            t.index,
            t.score
                .map(|s| format!("{s:.4}"))
                .unwrap_or_else(|| "-".into()),
            t.fold_scores.len(),
            t.status,
            t.message
                .as_deref()
                .map(|m| format!(" ({m})"))
                .unwrap_or_default()
        );
    }
    out!();
    out!(
        "best trial {} with mean weighted F1 {:.4}",
        out.best_index,
        out.best_score
    );
    let json = serde_json::to_string_pretty(&out.best)?;
    match &a.out {
        Some(p) => write_output(p, &json)?,
        None => out!("{json}"),
    }
    Ok(())
}
