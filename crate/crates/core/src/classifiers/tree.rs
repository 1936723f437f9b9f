//! C4.5-style decision trees over numeric attributes: binary threshold
//! splits, gain-ratio selection, and pessimistic error pruning. The same
//! grower, switched to plain information gain with per-node attribute
//! sampling, builds random-forest members.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ClassifierError;
use crate::dataset::{Class, FeatureTable};
use crate::featsel::TIE_EPS;
use crate::par;
use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class: Class,
        weight_total: f64,
        weight_misclassified: f64,
    },
    /// Rows with `row[attribute] <= threshold` go left.
    Split {
        attribute: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Total node count, the usual "size of the tree".
    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// The leaf reached by `row`.
    pub fn leaf_for(&self, row: &[f64]) -> &TreeNode {
        let mut node = self;
        while let TreeNode::Split { attribute, threshold, left, right } = node {
            node = if row[*attribute] <= *threshold { left } else { right };
        }
        node
    }

    /// Class distribution at the leaf reached by `row`.
    pub fn distribution(&self, row: &[f64]) -> [f64; 2] {
        match self.leaf_for(row) {
            TreeNode::Leaf { class, weight_total, weight_misclassified } => {
                leaf_distribution(*class, *weight_total, *weight_misclassified)
            }
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    /// Largest attribute index referenced by any split.
    pub fn max_attribute(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { attribute, left, right, .. } => {
                Some((*attribute).max(left.max_attribute().unwrap_or(0)).max(right.max_attribute().unwrap_or(0)))
            }
        }
    }
}

/// Two-class distribution of a leaf holding `total` weight of which
/// `misclassified` belongs to the other class.
pub fn leaf_distribution(class: Class, total: f64, misclassified: f64) -> [f64; 2] {
    let mut p = [0.0; 2];
    if total > 0.0 {
        p[class.index()] = (total - misclassified) / total;
        p[1 - class.index()] = misclassified / total;
    } else {
        p[class.index()] = 1.0;
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Confidence factor for pessimistic pruning, in (0, 0.5].
    pub confidence: f64,
    /// Minimum instances per leaf.
    pub min_leaf: usize,
    pub prune: bool,
    /// Fold subtrees that do not reduce training error.
    pub collapse: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { confidence: 0.25, min_leaf: 2, prune: true, collapse: true }
    }
}

impl TreeParams {
    pub fn unpruned() -> Self {
        Self { prune: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.confidence > 0.0 && self.confidence <= 0.5) {
            return Err(ClassifierError::InvalidParams(format!(
                "confidence factor {} outside (0, 0.5]",
                self.confidence
            )));
        }
        if self.min_leaf == 0 {
            return Err(ClassifierError::InvalidParams("min instances per leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Column-major training data shared by the growers.
pub(crate) struct TrainingView {
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<Class>,
}

impl TrainingView {
    pub fn new(table: &FeatureTable) -> Self {
        let columns = par::map_range(table.n_attributes(), |a| table.column(a));
        Self { columns, labels: table.labels() }
    }

    pub fn n_attributes(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Criterion {
    /// Gain corrected by log2(#candidates)/n, chosen by gain ratio among
    /// attributes with at least average gain.
    GainRatio,
    /// Raw information gain.
    InfoGain,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowConfig {
    pub criterion: Criterion,
    pub min_leaf: usize,
    /// Attributes sampled per node; `None` evaluates all of them.
    pub sample: Option<usize>,
}

/// Tree with training class counts at every node, before pruning.
#[derive(Debug, Clone)]
pub(crate) struct Grown {
    counts: [u64; 2],
    split: Option<GrownSplit>,
}

#[derive(Debug, Clone)]
struct GrownSplit {
    attribute: usize,
    threshold: f64,
    left: Box<Grown>,
    right: Box<Grown>,
}

fn majority(counts: [u64; 2]) -> Class {
    if counts[1] > counts[0] {
        Class::Dead
    } else {
        Class::Alive
    }
}

fn h2(c: [u64; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    c.iter()
        .filter(|&&x| x > 0)
        .map(|&x| {
            let p = x as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
struct AttributeSplit {
    threshold: f64,
    gain: f64,
    split_info: f64,
}

/// Best threshold on a node's (value, class) pairs sorted by value.
/// Candidates sit between adjacent distinct values except between two pure
/// runs of the same class; both sides must hold at least `min_split` rows.
fn best_threshold(sorted: &[(f64, Class)], total: [u64; 2], min_split: f64, criterion: Criterion) -> Option<AttributeSplit> {
    let n = (total[0] + total[1]) as f64;
    // runs of equal values
    let mut runs: Vec<(f64, [u64; 2])> = Vec::new();
    for &(v, c) in sorted {
        match runs.last_mut() {
            Some(r) if r.0 == v => r.1[c.index()] += 1,
            _ => {
                let mut counts = [0; 2];
                counts[c.index()] = 1;
                runs.push((v, counts));
            }
        }
    }
    if runs.len() < 2 {
        return None;
    }
    let pure = |c: [u64; 2]| -> Option<usize> {
        match (c[0] > 0, c[1] > 0) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    };
    let h = h2(total);
    let mut left = [0u64; 2];
    let mut best: Option<(usize, f64, [u64; 2])> = None;
    let mut candidates = 0usize;
    for j in 1..runs.len() {
        left[0] += runs[j - 1].1[0];
        left[1] += runs[j - 1].1[1];
        if matches!((pure(runs[j - 1].1), pure(runs[j].1)), (Some(x), Some(y)) if x == y) {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (left[0] + left[1]) as f64;
        let nr = (right[0] + right[1]) as f64;
        if nl < min_split || nr < min_split {
            continue;
        }
        candidates += 1;
        let gain = h - (nl * h2(left) + nr * h2(right)) / n;
        if best.is_none_or(|(_, g, _)| gain > g + TIE_EPS) {
            best = Some((j, gain, left));
        }
    }
    let (j, mut gain, left) = best?;
    if criterion == Criterion::GainRatio {
        gain -= (candidates as f64).log2() / n;
    }
    if gain <= TIE_EPS {
        return None;
    }
    let nl = (left[0] + left[1]) as f64;
    let split_info = h2([left[0] + left[1], total[0] + total[1] - left[0] - left[1]]);
    debug_assert!(nl > 0.0);
    Some(AttributeSplit {
        threshold: crate::featsel::midpoint(runs[j - 1].0, runs[j].0),
        gain,
        split_info,
    })
}

/// Rows of a node: either one value-sorted row list per attribute, or a
/// plain row list sorted on demand.
enum NodeRows {
    Presorted(Vec<Vec<u32>>),
    Plain(Vec<u32>),
}

impl NodeRows {
    fn len(&self) -> usize {
        match self {
            NodeRows::Presorted(lists) => lists.first().map_or(0, Vec::len),
            NodeRows::Plain(rows) => rows.len(),
        }
    }

    fn sorted_pairs(&self, view: &TrainingView, attribute: usize) -> Vec<(f64, Class)> {
        let col = &view.columns[attribute];
        match self {
            NodeRows::Presorted(lists) => {
                lists[attribute].iter().map(|&r| (col[r as usize], view.labels[r as usize])).collect()
            }
            NodeRows::Plain(rows) => {
                let mut pairs: Vec<(f64, Class)> =
                    rows.iter().map(|&r| (col[r as usize], view.labels[r as usize])).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                pairs
            }
        }
    }

    fn for_each_row(&self, mut f: impl FnMut(u32)) {
        match self {
            NodeRows::Presorted(lists) => lists.first().into_iter().flatten().for_each(|&r| f(r)),
            NodeRows::Plain(rows) => rows.iter().for_each(|&r| f(r)),
        }
    }

    fn partition(self, view: &TrainingView, attribute: usize, threshold: f64) -> (NodeRows, NodeRows) {
        let col = &view.columns[attribute];
        let goes_left = |r: u32| col[r as usize] <= threshold;
        match self {
            NodeRows::Presorted(lists) => {
                let mut mask = vec![false; view.n_rows()];
                for &r in &lists[attribute] {
                    mask[r as usize] = goes_left(r);
                }
                let (l, r): (Vec<_>, Vec<_>) = lists
                    .into_iter()
                    .map(|list| list.into_iter().partition::<Vec<u32>, _>(|&r| mask[r as usize]))
                    .unzip();
                (NodeRows::Presorted(l), NodeRows::Presorted(r))
            }
            NodeRows::Plain(rows) => {
                let (l, r) = rows.into_iter().partition(|&r| goes_left(r));
                (NodeRows::Plain(l), NodeRows::Plain(r))
            }
        }
    }
}

fn presort(view: &TrainingView) -> Vec<Vec<u32>> {
    par::map_range(view.n_attributes(), |a| {
        let col = &view.columns[a];
        let mut idx: Vec<u32> = (0..view.n_rows() as u32).collect();
        idx.sort_by(|&x, &y| col[x as usize].total_cmp(&col[y as usize]).then(x.cmp(&y)));
        idx
    })
}

/// Grows a C4.5 tree over every row of `view`, evaluating all attributes.
pub(crate) fn grow_full(view: &TrainingView, cfg: GrowConfig) -> Grown {
    let rows = if view.n_attributes() > 0 {
        NodeRows::Presorted(presort(view))
    } else {
        NodeRows::Plain((0..view.n_rows() as u32).collect())
    };
    grow(view, rows, cfg, None)
}

/// Grows over the given rows (duplicates allowed), sampling attributes per
/// node from `rng` when `cfg.sample` is set.
pub(crate) fn grow_sampled(view: &TrainingView, rows: Vec<u32>, cfg: GrowConfig, rng: &mut StreamRng) -> Grown {
    grow(view, NodeRows::Plain(rows), cfg, Some(rng))
}

fn grow(view: &TrainingView, rows: NodeRows, cfg: GrowConfig, mut rng: Option<&mut StreamRng>) -> Grown {
    let mut counts = [0u64; 2];
    rows.for_each_row(|r| counts[view.labels[r as usize].index()] += 1);
    let n = rows.len();
    let leaf = |counts| Grown { counts, split: None };
    if counts[0] == 0 || counts[1] == 0 || n < 2 * cfg.min_leaf || view.n_attributes() == 0 {
        return leaf(counts);
    }
    let min_split = match cfg.criterion {
        Criterion::GainRatio => (0.1 * n as f64 / 2.0).clamp(cfg.min_leaf as f64, 25f64.max(cfg.min_leaf as f64)),
        Criterion::InfoGain => cfg.min_leaf as f64,
    };

    let chosen = match (cfg.sample, rng.as_deref_mut()) {
        (Some(k), Some(rng)) => choose_sampled(view, &rows, counts, min_split, k, rng),
        _ => choose_all(view, &rows, counts, min_split, cfg.criterion),
    };
    let Some((attribute, threshold)) = chosen else { return leaf(counts) };

    let (l, r) = rows.partition(view, attribute, threshold);
    if l.len() == 0 || r.len() == 0 {
        return leaf(counts);
    }
    let left = grow(view, l, cfg, rng.as_deref_mut());
    let right = grow(view, r, cfg, rng);
    Grown {
        counts,
        split: Some(GrownSplit { attribute, threshold, left: Box::new(left), right: Box::new(right) }),
    }
}

fn choose_all(view: &TrainingView, rows: &NodeRows, counts: [u64; 2], min_split: f64, criterion: Criterion) -> Option<(usize, f64)> {
    let splits: Vec<Option<AttributeSplit>> = par::map_range(view.n_attributes(), |a| {
        best_threshold(&rows.sorted_pairs(view, a), counts, min_split, criterion)
    });
    match criterion {
        Criterion::InfoGain => {
            let mut best: Option<(usize, AttributeSplit)> = None;
            for (a, s) in splits.iter().enumerate() {
                if let Some(s) = s {
                    if best.is_none_or(|(_, b)| s.gain > b.gain + TIE_EPS) {
                        best = Some((a, *s));
                    }
                }
            }
            best.map(|(a, s)| (a, s.threshold))
        }
        Criterion::GainRatio => {
            let valid: Vec<(usize, AttributeSplit)> =
                splits.iter().enumerate().filter_map(|(a, s)| s.map(|s| (a, s))).collect();
            if valid.is_empty() {
                return None;
            }
            let average = valid.iter().map(|(_, s)| s.gain).sum::<f64>() / valid.len() as f64;
            let mut best: Option<(usize, f64, f64)> = None;
            for (a, s) in valid {
                if s.gain < average - 1e-3 || s.split_info <= 0.0 {
                    continue;
                }
                let ratio = s.gain / s.split_info;
                if best.is_none_or(|(_, r, _)| ratio > r + TIE_EPS) {
                    best = Some((a, ratio, s.threshold));
                }
            }
            best.map(|(a, _, t)| (a, t))
        }
    }
}

/// Evaluates attributes in random order: at least `k` of them, and more
/// until one yields a positive gain. Ties go to the lower attribute index so
/// that sampling every attribute is equivalent to evaluating them all.
fn choose_sampled(
    view: &TrainingView,
    rows: &NodeRows,
    counts: [u64; 2],
    min_split: f64,
    k: usize,
    rng: &mut StreamRng,
) -> Option<(usize, f64)> {
    let m = view.n_attributes();
    let mut window: Vec<usize> = (0..m).collect();
    let mut remaining = m;
    let mut evaluated = 0;
    let mut best: Option<(usize, AttributeSplit)> = None;
    while remaining > 0 && (evaluated < k || best.is_none()) {
        let pick = rng.random_range(0..remaining);
        let a = window[pick];
        window.swap(pick, remaining - 1);
        remaining -= 1;
        evaluated += 1;
        if let Some(s) = best_threshold(&rows.sorted_pairs(view, a), counts, min_split, Criterion::InfoGain) {
            let better = match best {
                None => true,
                Some((ba, b)) => s.gain > b.gain + TIE_EPS || ((s.gain - b.gain).abs() <= TIE_EPS && a < ba),
            };
            if better {
                best = Some((a, s));
            }
        }
    }
    best.map(|(a, s)| (a, s.threshold))
}

impl Grown {
    fn errors_as_leaf(&self) -> u64 {
        self.counts[0].min(self.counts[1])
    }

    fn training_errors(&self) -> u64 {
        match &self.split {
            None => self.errors_as_leaf(),
            Some(s) => s.left.training_errors() + s.right.training_errors(),
        }
    }

    /// Replaces subtrees whose training error is no better than a leaf's.
    pub(crate) fn collapse(&mut self) {
        let as_leaf = self.errors_as_leaf();
        if let Some(s) = &mut self.split {
            if s.left.training_errors() + s.right.training_errors() >= as_leaf {
                self.split = None;
            } else {
                s.left.collapse();
                s.right.collapse();
            }
        }
    }

    /// Bottom-up subtree replacement using pessimistic error estimates.
    /// Returns the estimated errors of the (possibly pruned) subtree.
    pub(crate) fn prune(&mut self, confidence: f64) -> f64 {
        let n = (self.counts[0] + self.counts[1]) as f64;
        let e = self.errors_as_leaf() as f64;
        let as_leaf = e + added_errors(n, e, confidence);
        let Some(s) = &mut self.split else { return as_leaf };
        let as_tree = s.left.prune(confidence) + s.right.prune(confidence);
        if as_leaf <= as_tree + 0.1 {
            self.split = None;
            as_leaf
        } else {
            as_tree
        }
    }

    pub(crate) fn into_node(self) -> TreeNode {
        match self.split {
            None => {
                let class = majority(self.counts);
                let total = (self.counts[0] + self.counts[1]) as f64;
                TreeNode::Leaf {
                    class,
                    weight_total: total,
                    weight_misclassified: self.counts[1 - class.index()] as f64,
                }
            }
            Some(s) => TreeNode::Split {
                attribute: s.attribute,
                threshold: s.threshold,
                left: Box::new(s.left.into_node()),
                right: Box::new(s.right.into_node()),
            },
        }
    }
}

/// Extra errors predicted for a leaf with `e` training errors out of `n`,
/// from the upper confidence bound on the binomial error rate.
pub fn added_errors(n: f64, e: f64, confidence: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - confidence.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (added_errors(n, 1.0, confidence) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - confidence);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - e
}

/// C4.5 induction with the given parameters.
pub fn induce_c45(table: &FeatureTable, params: &TreeParams) -> Result<TreeNode, ClassifierError> {
    params.validate()?;
    if table.is_empty() {
        return Err(ClassifierError::EmptyTable);
    }
    let view = TrainingView::new(table);
    Ok(induce_view(&view, params))
}

pub(crate) fn induce_view(view: &TrainingView, params: &TreeParams) -> TreeNode {
    let cfg = GrowConfig { criterion: Criterion::GainRatio, min_leaf: params.min_leaf, sample: None };
    let mut grown = grow_full(view, cfg);
    if params.collapse {
        grown.collapse();
    }
    if params.prune {
        grown.prune(params.confidence);
    }
    grown.into_node()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AggregationMode, Row};
    use approx::assert_abs_diff_eq;

    fn table(cols: &[Vec<f64>], labels: &[u8]) -> FeatureTable {
        let names = (0..cols.len()).map(|i| format!("a{i}")).collect();
        let rows = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Row {
                key: i as u64,
                features: cols.iter().map(|c| c[i]).collect(),
                class: Class::from_index(l as usize).unwrap(),
            })
            .collect();
        FeatureTable::new(names, rows, AggregationMode::Avg).unwrap()
    }

    #[test]
    fn pure_table_is_single_leaf() {
        let t = table(&[vec![1.0, 2.0, 3.0]], &[1, 1, 1]);
        let tree = induce_c45(&t, &TreeParams::default()).unwrap();
        assert_eq!(tree, TreeNode::Leaf { class: Class::Dead, weight_total: 3.0, weight_misclassified: 0.0 });
    }

    #[test]
    fn separable_four_rows() {
        let t = table(&[vec![1.0, 2.0, 3.0, 4.0]], &[0, 0, 1, 1]);
        for params in [TreeParams::default(), TreeParams::unpruned()] {
            let tree = induce_c45(&t, &params).unwrap();
            match &tree {
                TreeNode::Split { attribute: 0, threshold, left, right } => {
                    assert_eq!(*threshold, 2.5);
                    assert!(matches!(**left, TreeNode::Leaf { class: Class::Alive, weight_total: 2.0, weight_misclassified: 0.0 }));
                    assert!(matches!(**right, TreeNode::Leaf { class: Class::Dead, weight_total: 2.0, weight_misclassified: 0.0 }));
                }
                other => panic!("unexpected tree {other:?}"),
            }
        }
    }

    #[test]
    fn leaf_distribution_matches_readout() {
        let p = leaf_distribution(Class::Dead, 772.0, 22.0);
        assert_abs_diff_eq!(p[1], 750.0 / 772.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-15);
        assert_eq!(leaf_distribution(Class::Alive, 0.0, 0.0), [1.0, 0.0]);
    }

    #[test]
    fn added_errors_reference_values() {
        // z(0.75) = 0.6744897501960817
        assert_abs_diff_eq!(added_errors(6.0, 0.0, 0.25), 6.0 * (1.0 - 0.25f64.powf(1.0 / 6.0)), epsilon = 1e-12);
        assert_eq!(added_errors(2.0, 2.0, 0.25), 0.0);
        let z: f64 = 0.6744897501960817;
        let (n, e) = (100.0, 10.0);
        let f: f64 = (e + 0.5) / n;
        let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
        assert_abs_diff_eq!(added_errors(n, e, 0.25), r * n - e, epsilon = 1e-9);
    }

    #[test]
    fn invalid_params_rejected() {
        let t = table(&[vec![1.0]], &[0]);
        assert!(induce_c45(&t, &TreeParams { confidence: 0.0, ..Default::default() }).is_err());
        assert!(induce_c45(&t, &TreeParams { confidence: 0.6, ..Default::default() }).is_err());
        assert!(induce_c45(&t, &TreeParams { min_leaf: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn gain_ratio_prefers_informative_attribute() {
        let labels: Vec<u8> = (0..40).map(|i| (i % 4 == 0) as u8).collect();
        let noise: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64).collect();
        let signal: Vec<f64> = labels.iter().enumerate().map(|(i, &l)| l as f64 * 10.0 + (i % 3) as f64).collect();
        let t = table(&[noise, signal], &labels);
        let tree = induce_c45(&t, &TreeParams::default()).unwrap();
        assert!(matches!(tree, TreeNode::Split { attribute: 1, .. }));
        assert_eq!(tree.leaf_count(), 2);
        assert_eq!(tree.node_count(), 3);
    }
}
