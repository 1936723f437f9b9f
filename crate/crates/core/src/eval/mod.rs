//! Confusion matrices, weighted metrics and the evaluation protocols:
//! stratified k-fold cross-validation, repeated percentage splits and the
//! feature-fraction sweep.

pub mod report;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, Algorithm, ClassifierError, ModelSpec};
use crate::dataset::{split_indices, stratified_folds, Class, DatasetError, FeatureTable, SplitPlan};
use crate::featsel::{self, FeatselError, RankedAttributes, SelectionMode};
use crate::par;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("ranking does not cover the table's attributes: {0}")]
    RankingMismatch(String),
    #[error("invalid sweep fractions: {0}")]
    InvalidFractions(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Featsel(#[from] FeatselError),
}

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: Class, predicted: Class) {
        self.counts[actual.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for a in 0..2 {
            for p in 0..2 {
                self.counts[a][p] += other.counts[a][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }
}

pub fn confusion(predictions: &[Class], truths: &[Class]) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), truths: truths.len() });
    }
    if truths.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        cm.record(t, p);
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f_measure: f64,
}

impl MetricsReport {
    fn mean(reports: &[MetricsReport]) -> MetricsReport {
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        MetricsReport {
            accuracy: avg(|r| r.accuracy),
            weighted_precision: avg(|r| r.weighted_precision),
            weighted_recall: avg(|r| r.weighted_recall),
            weighted_f_measure: avg(|r| r.weighted_f_measure),
        }
    }
}

/// Per-class precision, recall and F1 averaged with class-support weights.
/// A class that is never predicted has precision 0.
pub fn weighted_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let n = total as f64;
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for c in 0..2 {
        let tp = cm.counts[c][c] as f64;
        let support = (cm.counts[c][0] + cm.counts[c][1]) as f64;
        let predicted = (cm.counts[0][c] + cm.counts[1][c]) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let w = support / n;
        wp += w * precision;
        wr += w * recall;
        wf += w * f;
    }
    Ok(MetricsReport { accuracy: cm.accuracy(), weighted_precision: wp, weighted_recall: wr, weighted_f_measure: wf })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
}

impl Evaluation {
    fn of(confusion: ConfusionMatrix) -> Result<Self, EvalError> {
        Ok(Self { metrics: weighted_metrics(&confusion)?, confusion })
    }
}

fn predict_classes(model: &classifiers::Model, table: &FeatureTable) -> Result<Vec<Class>, EvalError> {
    Ok(model.predict_table(table)?.into_iter().map(Class::argmax).collect())
}

fn evaluate_on(model: &classifiers::Model, table: &FeatureTable) -> Result<ConfusionMatrix, EvalError> {
    confusion(&predict_classes(model, table)?, &table.labels())
}

/// Head of a ranking kept at an integer percentage.
#[derive(Debug, Clone, Copy)]
pub struct HeadSelection<'a> {
    pub percent: u32,
    pub mode: SelectionMode,
    /// Ranking over the whole table, used by [`SelectionMode::FullTable`].
    pub ranked: &'a RankedAttributes,
}

/// Names of the top `count` ranked attributes, in the table's column order.
fn kept_columns(table: &FeatureTable, ranked: &RankedAttributes, count: usize) -> Vec<String> {
    let head: HashSet<&str> = ranked.top(count).iter().map(|e| e.name.as_str()).collect();
    table.attribute_names().iter().filter(|n| head.contains(n.as_str())).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub evaluation: Evaluation,
}

/// Stratified k-fold cross-validation with predictions pooled into one
/// confusion matrix.
pub fn cross_validate(spec: &ModelSpec, table: &FeatureTable, k: usize, seed: u64) -> Result<CvResult, EvalError> {
    cross_validate_with(spec, table, k, seed, None)
}

/// Cross-validation that optionally keeps only a ranked head of the
/// attributes, ranked on the whole table or inside each training fold.
pub fn cross_validate_with(
    spec: &ModelSpec,
    table: &FeatureTable,
    k: usize,
    seed: u64,
    selection: Option<HeadSelection>,
) -> Result<CvResult, EvalError> {
    spec.validate()?;
    let plan = stratified_folds(table, k, seed)?;
    let full_table_view;
    let (table, selection) = match selection {
        Some(s) if s.mode == SelectionMode::FullTable => {
            let count = featsel::head_count_percent(table.n_attributes(), s.percent)?;
            full_table_view = table.project_columns(&kept_columns(table, s.ranked, count))?;
            (&full_table_view, None)
        }
        other => (table, other),
    };
    let folds = par::try_map_range(k, |f| -> Result<ConfusionMatrix, EvalError> {
        let (train_idx, test_idx) = plan.split(f);
        let mut train = table.subset(&train_idx);
        let mut test = table.subset(&test_idx);
        if let Some(s) = selection {
            let ranked = featsel::rank_all(&train)?;
            let count = featsel::head_count_percent(train.n_attributes(), s.percent)?;
            let keep = kept_columns(&train, &ranked, count);
            train = train.project_columns(&keep)?;
            test = test.project_columns(&keep)?;
        }
        let model = classifiers::train(spec, &train)?;
        evaluate_on(&model, &test)
    })?;
    let mut pooled = ConfusionMatrix::default();
    folds.iter().for_each(|cm| pooled.merge(cm));
    Ok(CvResult { k, seed, fold_sizes: plan.fold_sizes(), evaluation: Evaluation::of(pooled)? })
}

/// How the training side of a split is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainSideEval {
    /// k-fold cross-validation inside the training side.
    CrossValidation { k: usize },
    /// The model trained on the training side scored on itself.
    Resubstitution,
}

impl Default for TrainSideEval {
    fn default() -> Self {
        TrainSideEval::CrossValidation { k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRepeat {
    pub repeat: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train: Evaluation,
    pub test: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub train_fraction: f64,
    pub seed: u64,
    pub train_side: TrainSideEval,
    pub repeats: Vec<SplitRepeat>,
    pub mean_train: MetricsReport,
    pub mean_test: MetricsReport,
}

/// Repeated randomized train/test splits. Each repeat trains on the
/// training side and scores the held-out side; the training side is scored
/// as configured by `train_side`.
pub fn split_eval(
    spec: &ModelSpec,
    table: &FeatureTable,
    plan: &SplitPlan,
    train_side: TrainSideEval,
) -> Result<SplitReport, EvalError> {
    spec.validate()?;
    let repeats = par::try_map_range(plan.repeats, |r| -> Result<SplitRepeat, EvalError> {
        let (train_idx, test_idx) = split_indices(table.n_rows(), plan, r)?;
        let train = table.subset(&train_idx);
        let test = table.subset(&test_idx);
        let model = classifiers::train(spec, &train)?;
        let test_eval = Evaluation::of(evaluate_on(&model, &test)?)?;
        let train_eval = match train_side {
            TrainSideEval::Resubstitution => Evaluation::of(evaluate_on(&model, &train)?)?,
            TrainSideEval::CrossValidation { k } => {
                cross_validate(spec, &train, k, plan.seed.wrapping_add(r as u64))?.evaluation
            }
        };
        Ok(SplitRepeat { repeat: r, train_rows: train.n_rows(), test_rows: test.n_rows(), train: train_eval, test: test_eval })
    })?;
    let mean_train = MetricsReport::mean(&repeats.iter().map(|r| r.train.metrics).collect::<Vec<_>>());
    let mean_test = MetricsReport::mean(&repeats.iter().map(|r| r.test.metrics).collect::<Vec<_>>());
    Ok(SplitReport { train_fraction: plan.train_fraction, seed: plan.seed, train_side, repeats, mean_train, mean_test })
}

pub const DEFAULT_PERCENTS: [u32; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub percent: u32,
    pub selected: usize,
    pub evaluation: Evaluation,
    /// Leaf count of a tree trained on the whole projected table.
    pub leaves: Option<usize>,
    /// Node count of that tree.
    pub tree_size: Option<usize>,
}

impl SweepRow {
    pub fn accuracy(&self) -> f64 {
        self.evaluation.metrics.accuracy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub algorithm: String,
    pub k: usize,
    pub seed: u64,
    pub selection: SelectionMode,
    pub rows: Vec<SweepRow>,
}

/// Cross-validates the ranked head at each percentage of the attributes.
pub fn sweep(
    spec: &ModelSpec,
    table: &FeatureTable,
    ranked: &RankedAttributes,
    percents: &[u32],
    k: usize,
    seed: u64,
    selection: SelectionMode,
) -> Result<SweepReport, EvalError> {
    spec.validate()?;
    if percents.is_empty() || percents.windows(2).any(|w| w[0] >= w[1]) || percents.iter().any(|&p| p == 0 || p > 100) {
        return Err(EvalError::InvalidFractions(format!("{percents:?} must be strictly increasing within 1..=100")));
    }
    let names: HashSet<&str> = table.attribute_names().iter().map(String::as_str).collect();
    let ranked_names: HashSet<&str> = ranked.entries.iter().map(|e| e.name.as_str()).collect();
    if names != ranked_names || ranked.len() != table.n_attributes() {
        return Err(EvalError::RankingMismatch(format!(
            "{} ranked attributes against {} table columns",
            ranked.len(),
            table.n_attributes()
        )));
    }
    let rows = par::try_map_range(percents.len(), |i| -> Result<SweepRow, EvalError> {
        let percent = percents[i];
        let selected = featsel::head_count_percent(table.n_attributes(), percent)?;
        let cv = cross_validate_with(spec, table, k, seed, Some(HeadSelection { percent, mode: selection, ranked }))?;
        let (leaves, tree_size) = match &spec.algorithm {
            Algorithm::DecisionTree(p) => {
                let projected = table.project_columns(&kept_columns(table, ranked, selected))?;
                let tree = classifiers::induce_c45(&projected, p)?;
                (Some(tree.leaf_count()), Some(tree.node_count()))
            }
            _ => (None, None),
        };
        Ok(SweepRow { percent, selected, evaluation: cv.evaluation, leaves, tree_size })
    })?;
    Ok(SweepReport { algorithm: spec.algorithm.display_name().to_string(), k, seed, selection, rows })
}
