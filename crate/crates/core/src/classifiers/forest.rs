//! Bagged ensembles of unpruned random trees.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_sampled, Criterion, GrowConfig, TrainingView, TreeNode};
use super::ClassifierError;
use crate::dataset::FeatureTable;
use crate::par;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    /// Attributes sampled per node; `None` means floor(log2 M) + 1.
    pub features: Option<usize>,
    pub bootstrap: bool,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 10, features: None, bootstrap: true, min_leaf: 1 }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.trees == 0 {
            return Err(ClassifierError::InvalidParams("tree count must be >= 1".into()));
        }
        if self.features == Some(0) {
            return Err(ClassifierError::InvalidParams("feature subset size must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidParams("min instances per leaf must be >= 1".into()));
        }
        Ok(())
    }

    pub fn subset_size(&self, n_attributes: usize) -> usize {
        let default = if n_attributes == 0 { 1 } else { n_attributes.ilog2() as usize + 1 };
        self.features.unwrap_or(default).min(n_attributes.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub members: Vec<TreeNode>,
}

impl Forest {
    /// Member `t` draws from its own stream of `seed`, so members can grow
    /// concurrently.
    pub fn fit(table: &FeatureTable, params: &ForestParams, seed: u64) -> Result<Self, ClassifierError> {
        params.validate()?;
        if table.is_empty() {
            return Err(ClassifierError::EmptyTable);
        }
        let view = TrainingView::new(table);
        let n = view.n_rows();
        let cfg = GrowConfig {
            criterion: Criterion::InfoGain,
            min_leaf: params.min_leaf,
            sample: Some(params.subset_size(view.n_attributes())),
        };
        let members = par::map_range(params.trees, |t| {
            let mut rng = stream_rng(seed, stream::FOREST_BASE + t as u64);
            let rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                (0..n as u32).collect()
            };
            grow_sampled(&view, rows, cfg, &mut rng).into_node()
        });
        Ok(Self { members })
    }

    /// Mean of the member leaf distributions.
    pub fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for m in &self.members {
            let d = m.distribution(row);
            p[0] += d[0];
            p[1] += d[1];
        }
        let b = self.members.len() as f64;
        [p[0] / b, p[1] / b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AggregationMode, Class, Row};

    fn noisy_table(n: usize, m: usize) -> FeatureTable {
        let mut rng = stream_rng(5, 0);
        let rows = (0..n)
            .map(|i| {
                let features: Vec<f64> = (0..m).map(|_| rng.random_range(0..10) as f64).collect();
                let class = Class::from_died(features[0] + features[1] + rng.random_range(0.0..4.0) > 11.0);
                Row { key: i as u64, features, class }
            })
            .collect();
        let names = (0..m).map(|a| format!("{a}")).collect();
        FeatureTable::new(names, rows, AggregationMode::Avg).unwrap()
    }

    #[test]
    fn default_subset_size() {
        let p = ForestParams::default();
        assert_eq!(p.subset_size(619), 10);
        assert_eq!(p.subset_size(700), 10);
        assert_eq!(p.subset_size(1), 1);
        assert_eq!(ForestParams { features: Some(50), ..p }.subset_size(3), 3);
    }

    #[test]
    fn all_features_without_bootstrap_gives_identical_members() {
        let t = noisy_table(120, 5);
        let p = ForestParams { trees: 4, features: Some(5), bootstrap: false, min_leaf: 1 };
        let f = Forest::fit(&t, &p, 17).unwrap();
        assert!(f.members.windows(2).all(|w| w[0] == w[1]));
        assert!(f.members[0].leaf_count() > 1);
    }

    #[test]
    fn single_member_matches_its_tree() {
        let t = noisy_table(80, 4);
        let f = Forest::fit(&t, &ForestParams { trees: 1, ..Default::default() }, 3).unwrap();
        for r in t.rows() {
            assert_eq!(f.predict_proba(&r.features), f.members[0].distribution(&r.features));
        }
    }

    #[test]
    fn seeded_fit_is_reproducible() {
        let t = noisy_table(100, 6);
        let a = Forest::fit(&t, &ForestParams::default(), 9).unwrap();
        let b = Forest::fit(&t, &ForestParams::default(), 9).unwrap();
        assert_eq!(a, b);
        let c = Forest::fit(&t, &ForestParams::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unpruned_members_fit_training_data() {
        let t = noisy_table(100, 6);
        let p = ForestParams { trees: 1, bootstrap: false, features: Some(6), min_leaf: 1 };
        let f = Forest::fit(&t, &p, 1).unwrap();
        let correct = t.rows().iter().filter(|r| Class::argmax(f.predict_proba(&r.features)) == r.class).count();
        assert!(correct as f64 / 100.0 > 0.9);
    }
}
