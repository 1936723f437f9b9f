use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Class, DatasetError, FeatureTable};
use crate::rng::{stream, stream_rng};

/// Assignment of every row to one of `k` stratified folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Row indices of fold `f` (test side) and of all other folds (train side),
    /// both ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment.
///
/// Rows of each class are shuffled with the seeded stream and dealt
/// round-robin; the dealing position carries over from one class to the
/// next, so fold sizes differ by at most one and per-class fold counts are
/// within one of `n_c / k`.
pub fn stratified_folds(table: &FeatureTable, k: usize, seed: u64) -> Result<FoldPlan, DatasetError> {
    let n = table.n_rows();
    if k < 2 || k > n {
        return Err(DatasetError::InvalidFoldCount { k, rows: n });
    }
    let mut rng = stream_rng(seed, stream::FOLDS);
    let mut assignments = vec![0; n];
    let mut position = 0usize;
    for class in Class::ALL {
        let mut members: Vec<usize> = table
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.class == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = position % k;
            position += 1;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

/// Repeated randomized train/test split protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub const DEFAULT_TRAIN_FRACTION: f64 = 0.66;

    pub fn new(train_fraction: f64, repeats: usize, seed: u64) -> Result<Self, DatasetError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(DatasetError::InvalidSplit(format!(
                "train fraction {train_fraction} outside (0, 1)"
            )));
        }
        if repeats == 0 {
            return Err(DatasetError::InvalidSplit("repeats must be at least 1".into()));
        }
        Ok(Self { train_fraction, repeats, seed })
    }

    pub fn train_size(&self, n: usize) -> usize {
        (self.train_fraction * n as f64).round() as usize
    }
}

/// Row indices (train, test), each ascending, for one repeat.
pub fn split_indices(n: usize, plan: &SplitPlan, repeat_index: usize) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if repeat_index >= plan.repeats {
        return Err(DatasetError::InvalidSplit(format!(
            "repeat index {repeat_index} out of range for {} repeats",
            plan.repeats
        )));
    }
    let n_train = plan.train_size(n);
    if n_train == 0 || n_train >= n {
        return Err(DatasetError::InvalidSplit(format!(
            "{n_train} of {n} rows in the training side leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(plan.seed, stream::SPLIT_BASE + repeat_index as u64);
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn shuffle_split(
    table: &FeatureTable,
    plan: &SplitPlan,
    repeat_index: usize,
) -> Result<(FeatureTable, FeatureTable), DatasetError> {
    let (train, test) = split_indices(table.n_rows(), plan, repeat_index)?;
    Ok((table.subset(&train), table.subset(&test)))
}
