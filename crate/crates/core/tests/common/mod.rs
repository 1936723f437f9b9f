//! Independent oracles shared by integration tests.
#![allow(dead_code)]

use labmine::dataset::{AggregationMode, Class, FeatureTable, Row};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TIE: f64 = 1e-12;

pub fn entropy_of(labels: &[bool]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let n = labels.len() as f64;
    let dead = labels.iter().filter(|&&d| d).count() as f64;
    [dead, n - dead].iter().filter(|&&c| c > 0.0).map(|&c| -(c / n) * (c / n).log2()).sum()
}

fn distinct_classes(labels: &[bool]) -> f64 {
    (labels.iter().any(|&d| d) as u8 + labels.iter().any(|&d| !d) as u8) as f64
}

/// Cut between adjacent observed values; the lower value when no float lies
/// strictly between them.
pub fn cut_between(lo: f64, hi: f64) -> f64 {
    let m = (lo + hi) / 2.0;
    if lo < m && m < hi {
        m
    } else {
        lo
    }
}

/// MDL cut points of one column, found by recounting every candidate split
/// of every subrange from scratch.
pub fn brute_mdl_cuts(values: &[f64], labels: &[bool]) -> Vec<f64> {
    let mut cuts = Vec::new();
    let rows: Vec<usize> = (0..values.len()).collect();
    brute_split(values, labels, &rows, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn brute_split(values: &[f64], labels: &[bool], rows: &[usize], cuts: &mut Vec<f64>) {
    let mut distinct: Vec<f64> = rows.iter().map(|&r| values[r]).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return;
    }
    let all: Vec<bool> = rows.iter().map(|&r| labels[r]).collect();
    let n = all.len() as f64;
    let classes_at = |v: f64| -> Vec<bool> { rows.iter().filter(|&&r| values[r] == v).map(|&r| labels[r]).collect() };
    let mut best: Option<(f64, f64, f64)> = None; // (entropy, lo, hi)
    for w in distinct.windows(2) {
        let (a, b) = (classes_at(w[0]), classes_at(w[1]));
        let pure = |x: &[bool]| x.iter().all(|&d| d) || x.iter().all(|&d| !d);
        if pure(&a) && pure(&b) && a[0] == b[0] {
            continue;
        }
        let left: Vec<bool> = rows.iter().filter(|&&r| values[r] <= w[0]).map(|&r| labels[r]).collect();
        let right: Vec<bool> = rows.iter().filter(|&&r| values[r] > w[0]).map(|&r| labels[r]).collect();
        let e = (left.len() as f64 * entropy_of(&left) + right.len() as f64 * entropy_of(&right)) / n;
        if best.is_none_or(|(be, _, _)| e < be - TIE) {
            best = Some((e, w[0], w[1]));
        }
    }
    let Some((e, lo, hi)) = best else { return };
    let left_rows: Vec<usize> = rows.iter().copied().filter(|&r| values[r] <= lo).collect();
    let right_rows: Vec<usize> = rows.iter().copied().filter(|&r| values[r] > lo).collect();
    let left: Vec<bool> = left_rows.iter().map(|&r| labels[r]).collect();
    let right: Vec<bool> = right_rows.iter().map(|&r| labels[r]).collect();
    let h = entropy_of(&all);
    let (k, k1, k2) = (distinct_classes(&all), distinct_classes(&left), distinct_classes(&right));
    let delta = (3f64.powf(k) - 2.0).log2() - (k * h - k1 * entropy_of(&left) - k2 * entropy_of(&right));
    if h - e > ((n - 1.0).log2() + delta) / n {
        cuts.push(cut_between(lo, hi));
        brute_split(values, labels, &left_rows, cuts);
        brute_split(values, labels, &right_rows, cuts);
    }
}

/// Information gain of a column after discretizing at `cuts`, where a value
/// equal to a cut belongs to the lower bin.
pub fn brute_gain(values: &[f64], labels: &[bool], cuts: &[f64]) -> f64 {
    if cuts.is_empty() {
        return 0.0;
    }
    let n = labels.len() as f64;
    let mut conditional = 0.0;
    for b in 0..=cuts.len() {
        let members: Vec<bool> = values
            .iter()
            .zip(labels)
            .filter(|(&v, _)| cuts.iter().filter(|&&c| c < v).count() == b)
            .map(|(_, &l)| l)
            .collect();
        conditional += members.len() as f64 / n * entropy_of(&members);
    }
    entropy_of(labels) - conditional
}

/// Oracle ranking: gain descending; gains within `TIE` order by numeric name.
pub fn brute_ranking(names: &[String], gains: &[f64]) -> Vec<String> {
    let mut idx: Vec<usize> = (0..names.len()).collect();
    idx.sort_by_key(|&i| names[i].parse::<u64>().unwrap());
    // insertion sort keeps the name order among ties
    let mut out: Vec<usize> = Vec::new();
    for i in idx {
        let pos = out.iter().position(|&j| gains[i] > gains[j] + TIE).unwrap_or(out.len());
        out.insert(pos, i);
    }
    out.into_iter().map(|i| names[i].clone()).collect()
}

/// Random table mixing small integer codes, sparse zero-heavy values and
/// continuous columns. Names are distinct numeric item ids.
pub fn random_mixed_table(seed: u64, max_rows: usize, max_attrs: usize) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_rows);
    let m = rng.random_range(1..=max_attrs);
    let bias: f64 = rng.random_range(0.2..0.8);
    let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(bias)).collect();
    let kinds: Vec<u8> = (0..m).map(|_| rng.random_range(0..4)).collect();
    let mut ids: Vec<u64> = Vec::new();
    while ids.len() < m {
        let id = rng.random_range(1..1000);
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    let rows = (0..n)
        .map(|i| {
            let features = kinds
                .iter()
                .map(|&k| match k {
                    0 => rng.random_range(0..4) as f64,
                    1 => {
                        if rng.random_bool(0.6) {
                            0.0
                        } else {
                            (rng.random_range(0.0..50.0f64) * 10.0).round() / 10.0
                        }
                    }
                    2 => rng.random_range(-5.0..5.0) + if labels[i] { 1.5 } else { 0.0 },
                    _ => (if labels[i] { 3.0 } else { 1.0 }) + rng.random_range(0..3) as f64,
                })
                .collect();
            Row { key: i as u64, features, class: Class::from_died(labels[i]) }
        })
        .collect();
    FeatureTable::new(ids.iter().map(|i| i.to_string()).collect(), rows, AggregationMode::Avg).unwrap()
}

pub fn labels_of(table: &FeatureTable) -> Vec<bool> {
    table.labels().iter().map(|&c| c == Class::Dead).collect()
}

/// Dual objective e'a - 1/2 a'Qa of the SVM problem solved by an interior
/// point method.
pub fn reference_dual_objective(gram: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT};
    let n = y.len();
    let q_rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * gram[i][j]).collect()).collect();
    let p = CscMatrix::from(&q_rows).to_triu();
    let q = vec![-1.0; n];
    let mut a_rows = vec![y.to_vec()];
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = -1.0;
        a_rows.push(r);
    }
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = 1.0;
        a_rows.push(r);
    }
    let a = CscMatrix::from(&a_rows);
    let mut b = vec![0.0; 1 + n];
    b.extend(std::iter::repeat_n(c, n));
    let cones = [ZeroConeT(1), NonnegativeConeT(2 * n)];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        max_iter: 500,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "reference solver status {:?}",
        solver.solution.status
    );
    -solver.solution.obj_val
}

/// Random SVM problem of at most `max_n` points in 2 to 4 dimensions.
/// Returns points and labels; `separable` shifts the classes apart.
pub fn random_svm_problem(seed: u64, max_n: usize, separable: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=max_n);
    let d = rng.random_range(2..=4);
    let mut y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let shift = if separable { 3.0 } else { 0.5 };
    let pts = y
        .iter()
        .map(|&yi| (0..d).map(|k| rng.random_range(-1.0..1.0) + if k == 0 { yi * shift } else { 0.0 }).collect())
        .collect();
    (pts, y)
}
