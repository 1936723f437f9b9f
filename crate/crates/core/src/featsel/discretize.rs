//! Entropy and supervised MDL discretization of numeric columns.

use super::FeatselError;
use crate::dataset::Class;

/// Two entropies closer than this are treated as equal when picking cuts, so
/// that the lowest tied cut wins regardless of rounding noise.
pub const TIE_EPS: f64 = 1e-12;

/// Shannon entropy in bits of a class-count vector.
pub fn entropy(class_counts: &[u64]) -> Result<f64, FeatselError> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(FeatselError::EmptyCounts);
    }
    Ok(entropy_unchecked(class_counts, total))
}

pub(crate) fn entropy_unchecked(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

fn h2(c: [u64; 2]) -> f64 {
    entropy_unchecked(&c, c[0] + c[1])
}

fn n_classes(c: [u64; 2]) -> u32 {
    (c[0] > 0) as u32 + (c[1] > 0) as u32
}

/// A run of equal values in sorted order with its class counts.
#[derive(Debug, Clone, Copy)]
struct Group {
    value: f64,
    counts: [u64; 2],
}

impl Group {
    fn pure_class(&self) -> Option<usize> {
        match (self.counts[0] > 0, self.counts[1] > 0) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }
}

/// Whether the boundary between two adjacent value groups can hold a cut:
/// everywhere except between two pure groups of the same class.
fn is_boundary(a: &Group, b: &Group) -> bool {
    !matches!((a.pure_class(), b.pure_class()), (Some(x), Some(y)) if x == y)
}

/// Cut placed between two adjacent distinct values; values `<=` the cut fall
/// in the lower bin.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m > lo && m < hi {
        m
    } else {
        lo
    }
}

fn groups(values: &[f64], labels: &[Class]) -> Vec<Group> {
    let mut pairs: Vec<(f64, Class)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Group> = Vec::new();
    for (v, c) in pairs {
        match out.last_mut() {
            Some(g) if g.value == v => g.counts[c.index()] += 1,
            _ => {
                let mut counts = [0; 2];
                counts[c.index()] = 1;
                out.push(Group { value: v, counts });
            }
        }
    }
    out
}

/// Recursive entropy-minimizing binary cuts, each accepted only when it
/// passes the minimum-description-length test. Returns ascending cut points.
pub fn mdl_discretize(values: &[f64], labels: &[Class]) -> Vec<f64> {
    assert_eq!(values.len(), labels.len(), "values and labels differ in length");
    let groups = groups(values, labels);
    let mut cuts = Vec::new();
    split_range(&groups, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn split_range(groups: &[Group], cuts: &mut Vec<f64>) {
    if groups.len() < 2 {
        return;
    }
    let mut total = [0u64; 2];
    for g in groups {
        total[0] += g.counts[0];
        total[1] += g.counts[1];
    }
    let n = (total[0] + total[1]) as f64;
    let mut left = [0u64; 2];
    let mut best: Option<(usize, f64, [u64; 2])> = None;
    for j in 1..groups.len() {
        left[0] += groups[j - 1].counts[0];
        left[1] += groups[j - 1].counts[1];
        if !is_boundary(&groups[j - 1], &groups[j]) {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (left[0] + left[1]) as f64;
        let nr = (right[0] + right[1]) as f64;
        let e = (nl * h2(left) + nr * h2(right)) / n;
        if best.is_none_or(|(_, b, _)| e < b - TIE_EPS) {
            best = Some((j, e, left));
        }
    }
    let Some((j, e, left)) = best else { return };
    let right = [total[0] - left[0], total[1] - left[1]];
    let h = h2(total);
    let gain = h - e;
    let k = n_classes(total) as f64;
    let k1 = n_classes(left) as f64;
    let k2 = n_classes(right) as f64;
    let delta = (3f64.powf(k) - 2.0).log2() - (k * h - k1 * h2(left) - k2 * h2(right));
    let threshold = ((n - 1.0).log2() + delta) / n;
    if gain > threshold {
        cuts.push(midpoint(groups[j - 1].value, groups[j].value));
        split_range(&groups[..j], cuts);
        split_range(&groups[j..], cuts);
    }
}

/// Bin index of `value`: the number of cuts strictly below it.
pub fn bin_of(value: f64, cuts: &[f64]) -> usize {
    cuts.partition_point(|&c| c < value)
}
