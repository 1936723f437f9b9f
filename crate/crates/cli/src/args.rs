use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "labmine",
    version,
    about = "Mine ICU lab events for deterioration prediction",
    after_help = "Exit status: 0 on success, 1 on usage errors, 2 on data errors."
)]
pub struct Cli {
    /// Worker threads for data-parallel work; 0 uses every core.
    #[arg(long, global = true, env = "LABMINE_JOBS", default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,

    /// Report style on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Directory holding labevents.csv, outcomes.csv and labitems.csv, used
    /// when the matching path flag is absent.
    #[arg(long, global = true, env = "LABMINE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Build a patient-by-test feature table from lab events.
    Ingest(IngestArgs),
    /// Rank tests by information gain with the class.
    Rank(RankArgs),
    /// Cross-validate a learner on growing heads of the ranking.
    Sweep(SweepArgs),
    /// Train a model and save it.
    Train(TrainArgs),
    /// Evaluate learners by cross-validation or repeated splits.
    Eval(EvalArgs),
    /// Replay lab events through a saved model and emit warnings.
    Monitor(MonitorArgs),
    /// Generate a synthetic corpus with planted informative tests.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Avg,
    Count,
}

impl From<Mode> for labmine::dataset::AggregationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Avg => labmine::dataset::AggregationMode::Avg,
            Mode::Count => labmine::dataset::AggregationMode::Count,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Lab events file (SUBJECT_ID, ITEMID, CHARTTIME, VALUE, VALUENUM, ...).
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Outcomes file with SUBJECT_ID,DIED.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Lab item catalog; fixes the attribute universe when given.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Prebuilt feature table (.csv or .arff) instead of raw events.
    #[arg(long, conflicts_with_all = ["events", "outcomes", "items"])]
    pub table: Option<PathBuf>,
    /// Per-patient aggregation of each test.
    #[arg(long, value_enum, default_value_t = Mode::Avg)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HyperArgs {
    /// Trees in the random forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Attributes sampled per forest node.
    #[arg(long)]
    pub features: Option<usize>,
    /// Grow forest members on the full training set.
    #[arg(long)]
    pub no_bootstrap: bool,
    /// Pruning confidence factor of the decision tree.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Minimum rows per tree leaf.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Skip pruning of the decision tree.
    #[arg(long)]
    pub unpruned: bool,
    /// SVM complexity constant.
    #[arg(long = "svm-c")]
    pub svm_c: Option<f64>,
    /// SMO stopping tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Polynomial kernel degree; 1 is the linear kernel.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Naive Bayes variance floor.
    #[arg(long)]
    pub variance_floor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Rank once on the whole table.
    FullTable,
    /// Rank again inside every training fold.
    PerFold,
}

impl From<Selection> for labmine::featsel::SelectionMode {
    fn from(s: Selection) -> Self {
        match s {
            Selection::FullTable => labmine::featsel::SelectionMode::FullTable,
            Selection::PerFold => labmine::featsel::SelectionMode::PerFold,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Output table; `.arff` selects the attribute-relation format.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Ranking file (RANK,ITEMID,GAIN_BITS).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rows shown in the text report.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "j48")]
    pub algo: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Percentages of the ranking to keep, strictly increasing.
    #[arg(long, value_delimiter = ',', default_values_t = labmine::eval::DEFAULT_PERCENTS)]
    pub percents: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Selection::FullTable)]
    pub selection: Selection,
    /// Precomputed ranking to use instead of ranking the table.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accuracy-versus-percentage series (percent,accuracy).
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "j48")]
    pub algo: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Keep only this percentage of the ranked attributes.
    #[arg(long, default_value_t = 100)]
    pub percent: u32,
    /// Model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Stratified k-fold cross-validation.
    Cv,
    /// Repeated randomized train/test split.
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainSide {
    /// Inner cross-validation on the training side.
    Cv,
    /// Score the model on its own training rows.
    Resub,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// A learner name (zeror, nb, j48, rf, smo) or `all`.
    #[arg(long, default_value = "all")]
    pub algo: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, value_enum, default_value_t = Protocol::Cv)]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Keep only this percentage of the ranked attributes.
    #[arg(long, default_value_t = 100)]
    pub percent: u32,
    #[arg(long, value_enum, default_value_t = Selection::FullTable)]
    pub selection: Selection,
    /// Training share of each split.
    #[arg(long, default_value_t = 0.66)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// How the training side of a split is scored.
    #[arg(long, value_enum, default_value_t = TrainSide::Cv)]
    pub train_side: TrainSide,
    /// Report file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuppressionArg {
    /// Warn on every event at or above the threshold.
    None,
    /// Warn once per run of events at or above the threshold.
    Episode,
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorArgs {
    /// Model saved by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Lab events to replay; `-` reads standard input.
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Death-class probability that raises a warning.
    #[arg(long, default_value_t = labmine::monitor::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = SuppressionArg::Episode)]
    pub suppression: SuppressionArg,
    /// Warning records; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-patient final scores.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Output directory; defaults to the data directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 3000)]
    pub patients: usize,
    #[arg(long, default_value_t = 700)]
    pub items: usize,
    /// Tests whose values and frequencies depend on the class.
    #[arg(long, default_value_t = 10)]
    pub informative: usize,
    #[arg(long, default_value_t = 0.3)]
    pub dead_fraction: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}
