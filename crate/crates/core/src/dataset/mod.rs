//! Feature-table data model: one row per patient, one column per lab item,
//! plus a binary outcome class.

mod io;
mod split;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{read_table, write_table, TableFormat};
pub use split::{shuffle_split, split_indices, stratified_folds, FoldPlan, SplitPlan};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("row {row}: expected {expected} features, found {found}")]
    RowWidth { row: usize, expected: usize, found: usize },
    #[error("duplicate attribute name {0:?}")]
    DuplicateAttribute(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("projection must keep at least one attribute")]
    EmptyProjection,
    #[error("fold count {k} invalid for {rows} rows")]
    InvalidFoldCount { k: usize, rows: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How lab events for one (patient, item) pair collapse into a feature cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    /// Mean numeric result.
    Avg,
    /// Number of times the test was performed.
    Count,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::Avg => "avg",
            AggregationMode::Count => "count",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "average" | "mean" => Ok(AggregationMode::Avg),
            "count" => Ok(AggregationMode::Count),
            other => Err(format!("unknown aggregation mode {other:?} (expected avg or count)")),
        }
    }
}

/// Outcome class. `Dead` is the positive class and is written as `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Alive = 0,
    Dead = 1,
}

impl Class {
    pub const ALL: [Class; 2] = [Class::Alive, Class::Dead];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        match i {
            0 => Some(Class::Alive),
            1 => Some(Class::Dead),
            _ => None,
        }
    }

    pub fn from_died(died: bool) -> Class {
        if died {
            Class::Dead
        } else {
            Class::Alive
        }
    }

    /// Argmax of a probability pair; ties go to `Alive`.
    pub fn argmax(p: [f64; 2]) -> Class {
        if p[1] > p[0] {
            Class::Dead
        } else {
            Class::Alive
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub key: u64,
    pub features: Vec<f64>,
    pub class: Class,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    attribute_names: Vec<String>,
    rows: Vec<Row>,
    mode: AggregationMode,
}

impl FeatureTable {
    pub fn new(
        attribute_names: Vec<String>,
        rows: Vec<Row>,
        mode: AggregationMode,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(attribute_names.len());
        for name in &attribute_names {
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::DuplicateAttribute(name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != attribute_names.len() {
                return Err(DatasetError::RowWidth {
                    row: i,
                    expected: attribute_names.len(),
                    found: row.features.len(),
                });
            }
        }
        Ok(Self { attribute_names, rows, mode })
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn mode(&self) -> AggregationMode {
        self.mode
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_attributes(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attribute_names.iter().position(|n| n == name)
    }

    pub fn column(&self, attribute: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.features[attribute]).collect()
    }

    pub fn labels(&self) -> Vec<Class> {
        self.rows.iter().map(|r| r.class).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for r in &self.rows {
            counts[r.class.index()] += 1;
        }
        counts
    }

    /// New table holding the given rows (by index, in that order).
    pub fn subset(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            attribute_names: self.attribute_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            mode: self.mode,
        }
    }

    /// Keeps the named attributes, in `keep` order. Row order and classes are
    /// unchanged.
    pub fn project_columns<S: AsRef<str>>(&self, keep: &[S]) -> Result<FeatureTable, DatasetError> {
        if keep.is_empty() {
            return Err(DatasetError::EmptyProjection);
        }
        let mut idx = Vec::with_capacity(keep.len());
        for name in keep {
            let name = name.as_ref();
            idx.push(
                self.attribute_index(name)
                    .ok_or_else(|| DatasetError::UnknownAttribute(name.to_string()))?,
            );
        }
        let names: Vec<String> = idx.iter().map(|&i| self.attribute_names[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|r| Row {
                key: r.key,
                features: idx.iter().map(|&i| r.features[i]).collect(),
                class: r.class,
            })
            .collect();
        FeatureTable::new(names, rows, self.mode)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn small_table() -> FeatureTable {
        let names = vec!["50177".to_string(), "50090".to_string(), "50060".to_string()];
        let rows = (0..6)
            .map(|i| Row {
                key: i as u64 + 1,
                features: vec![i as f64, 10.0 - i as f64, 0.5 * i as f64],
                class: if i < 3 { Class::Alive } else { Class::Dead },
            })
            .collect();
        FeatureTable::new(names, rows, AggregationMode::Avg).unwrap()
    }

    #[test]
    fn rejects_duplicate_names_and_ragged_rows() {
        let err = FeatureTable::new(vec!["a".into(), "a".into()], vec![], AggregationMode::Avg);
        assert!(matches!(err, Err(DatasetError::DuplicateAttribute(_))));
        let rows = vec![Row { key: 1, features: vec![1.0], class: Class::Alive }];
        let err = FeatureTable::new(vec!["a".into(), "b".into()], rows, AggregationMode::Avg);
        assert!(matches!(err, Err(DatasetError::RowWidth { .. })));
    }

    #[test]
    fn identity_projection() {
        let t = small_table();
        let p = t.project_columns(t.attribute_names()).unwrap();
        assert_eq!(p, t);
    }

    #[test]
    fn projection_reorders_and_validates() {
        let t = small_table();
        let p = t.project_columns(&["50060", "50177"]).unwrap();
        assert_eq!(p.attribute_names(), &["50060".to_string(), "50177".to_string()]);
        assert_eq!(p.rows()[4].features, vec![2.0, 4.0]);
        assert_eq!(p.labels(), t.labels());
        let empty: [&str; 0] = [];
        assert!(matches!(t.project_columns(&empty), Err(DatasetError::EmptyProjection)));
        assert!(matches!(t.project_columns(&["999"]), Err(DatasetError::UnknownAttribute(_))));
    }

    #[test]
    fn argmax_ties_go_to_alive() {
        assert_eq!(Class::argmax([0.5, 0.5]), Class::Alive);
        assert_eq!(Class::argmax([0.4, 0.6]), Class::Dead);
    }
}
