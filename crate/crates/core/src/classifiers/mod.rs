//! The five learners behind one train/predict contract, plus model
//! persistence.

pub mod forest;
pub mod naive_bayes;
pub mod render;
pub mod smo;
pub mod svm;
pub mod tree;
pub mod zeror;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AggregationMode, Class, FeatureTable};
use crate::par;

pub use forest::{Forest, ForestParams};
pub use naive_bayes::{NaiveBayes, NaiveBayesParams};
pub use render::{parse_tree, render_tree};
pub use smo::{kkt_violation, smo_solve, DenseGram, Kernel, KernelMatrix, SmoState};
pub use svm::{SvmModel, SvmParams};
pub use tree::{induce_c45, TreeNode, TreeParams};
pub use zeror::ZeroR;

pub const MODEL_FORMAT: &str = "labmine-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("training table is empty")]
    EmptyTable,
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("kernel matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("invalid labels: {0}")]
    InvalidLabels(String),
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("tree text line {line}: {message}")]
    TreeParse { line: usize, message: String },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    ZeroR,
    NaiveBayes(NaiveBayesParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    SvmSmo(SvmParams),
}

impl Algorithm {
    pub fn short_name(&self) -> &'static str {
        match self {
            Algorithm::ZeroR => "zeror",
            Algorithm::NaiveBayes(_) => "nb",
            Algorithm::DecisionTree(_) => "j48",
            Algorithm::RandomForest(_) => "rf",
            Algorithm::SvmSmo(_) => "smo",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            Algorithm::ZeroR => "ZeroR",
            Algorithm::NaiveBayes(_) => "NaiveBayes",
            Algorithm::DecisionTree(_) => "J48",
            Algorithm::RandomForest(_) => "RandomForest",
            Algorithm::SvmSmo(_) => "SMO",
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        match self {
            Algorithm::ZeroR => Ok(()),
            Algorithm::NaiveBayes(p) => p.validate(),
            Algorithm::DecisionTree(p) => p.validate(),
            Algorithm::RandomForest(p) => p.validate(),
            Algorithm::SvmSmo(p) => p.validate(),
        }
    }

    /// The five learners with default hyperparameters, in report order.
    pub fn all_defaults() -> Vec<Algorithm> {
        ["nb", "smo", "zeror", "j48", "rf"].iter().map(|s| s.parse().unwrap()).collect()
    }
}

impl FromStr for Algorithm {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "zeror" => Ok(Algorithm::ZeroR),
            "nb" | "naivebayes" | "naive_bayes" => Ok(Algorithm::NaiveBayes(NaiveBayesParams::default())),
            "j48" | "tree" | "c45" | "decision_tree" => Ok(Algorithm::DecisionTree(TreeParams::default())),
            "rf" | "randomforest" | "random_forest" => Ok(Algorithm::RandomForest(ForestParams::default())),
            "smo" | "svm" => Ok(Algorithm::SvmSmo(SvmParams::default())),
            _ => Err(ClassifierError::UnknownAlgorithm(s.to_string())),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self { algorithm, seed }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        self.algorithm.validate()
    }
}

/// Attribute names and aggregation mode a model was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attribute_names: Vec<String>,
    pub mode: AggregationMode,
    pub class_labels: [String; 2],
}

impl Schema {
    pub fn of(table: &FeatureTable) -> Self {
        Self {
            attribute_names: table.attribute_names().to_vec(),
            mode: table.mode(),
            class_labels: ["0".into(), "1".into()],
        }
    }

    pub fn check_table(&self, table: &FeatureTable) -> Result<(), ClassifierError> {
        if table.mode() != self.mode {
            return Err(ClassifierError::SchemaMismatch(format!(
                "model expects {} features, table has {}",
                self.mode,
                table.mode()
            )));
        }
        if table.attribute_names() != self.attribute_names.as_slice() {
            return Err(ClassifierError::SchemaMismatch("attribute names differ from training".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    /// Every training row had this class.
    Constant { class: Class },
    ZeroR(ZeroR),
    NaiveBayes(NaiveBayes),
    Tree { root: TreeNode },
    Forest(Forest),
    Svm(SvmModel),
}

impl Fitted {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        match self {
            Fitted::Constant { class } => {
                let mut p = [0.0; 2];
                p[class.index()] = 1.0;
                p
            }
            Fitted::ZeroR(m) => m.predict_proba(),
            Fitted::NaiveBayes(m) => m.predict_proba(row),
            Fitted::Tree { root } => root.distribution(row),
            Fitted::Forest(m) => m.predict_proba(row),
            Fitted::Svm(m) => m.predict_proba(row),
        }
    }
}

/// A trained, immutable predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub spec: ModelSpec,
    pub schema: Schema,
    pub fitted: Fitted,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: Model,
}

/// Trains `spec` on `table`.
///
/// A table with a single class yields a constant model for every learner.
pub fn train(spec: &ModelSpec, table: &FeatureTable) -> Result<Model, ClassifierError> {
    spec.validate()?;
    if table.is_empty() {
        return Err(ClassifierError::EmptyTable);
    }
    let schema = Schema::of(table);
    let counts = table.class_counts();
    let fitted = match &spec.algorithm {
        Algorithm::ZeroR => Fitted::ZeroR(ZeroR::fit(table)),
        _ if counts[0] == 0 || counts[1] == 0 => {
            Fitted::Constant { class: if counts[1] > 0 { Class::Dead } else { Class::Alive } }
        }
        Algorithm::NaiveBayes(p) => Fitted::NaiveBayes(NaiveBayes::fit(table, p)),
        Algorithm::DecisionTree(p) => Fitted::Tree { root: induce_c45(table, p)? },
        Algorithm::RandomForest(p) => Fitted::Forest(Forest::fit(table, p, spec.seed)?),
        Algorithm::SvmSmo(p) => Fitted::Svm(SvmModel::fit(table, p)?),
    };
    Ok(Model { spec: spec.clone(), schema, fitted })
}

impl Model {
    /// Class probabilities `(p_alive, p_dead)` for one feature row.
    pub fn predict_proba(&self, row: &[f64]) -> Result<[f64; 2], ClassifierError> {
        if row.len() != self.schema.attribute_names.len() {
            return Err(ClassifierError::SchemaMismatch(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.schema.attribute_names.len()
            )));
        }
        Ok(self.fitted.predict_proba(row))
    }

    pub fn predict(&self, row: &[f64]) -> Result<Class, ClassifierError> {
        self.predict_proba(row).map(Class::argmax)
    }

    /// Probabilities for every row of a table with the training schema.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<[f64; 2]>, ClassifierError> {
        self.schema.check_table(table)?;
        Ok(par::map_slice(table.rows(), |r| self.fitted.predict_proba(&r.features)))
    }

    pub fn tree(&self) -> Option<&TreeNode> {
        match &self.fitted {
            Fitted::Tree { root } => Some(root),
            _ => None,
        }
    }

    /// Text readout of a decision-tree model.
    pub fn tree_text(&self) -> Option<String> {
        self.tree().map(|t| render_tree(t, &self.schema.attribute_names))
    }

    pub fn save<W: Write>(&self, out: W) -> Result<(), ClassifierError> {
        let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: self.clone() };
        serde_json::to_writer_pretty(out, &file)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self, ClassifierError> {
        let file: ModelFile = serde_json::from_reader(input)?;
        if file.format != MODEL_FORMAT {
            return Err(ClassifierError::Format(format!("unexpected format {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(ClassifierError::Format(format!("unsupported version {}", file.version)));
        }
        file.model.spec.validate()?;
        let width = file.model.schema.attribute_names.len();
        let trees: Vec<&TreeNode> = match &file.model.fitted {
            Fitted::Tree { root } => vec![root],
            Fitted::Forest(f) => f.members.iter().collect(),
            _ => vec![],
        };
        if trees.iter().any(|t| t.max_attribute().is_some_and(|a| a >= width)) {
            return Err(ClassifierError::Format("tree references an attribute outside the schema".into()));
        }
        Ok(file.model)
    }
}
