//! Filter-style feature selection: information gain of each attribute
//! (after supervised discretization) against the class, ranking, and
//! fraction-based head selection.

mod discretize;

use std::cmp::Ordering;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use discretize::{bin_of, entropy, mdl_discretize, TIE_EPS};
pub(crate) use discretize::midpoint;

use crate::dataset::FeatureTable;
use crate::par;

#[derive(Debug, Error)]
pub enum FeatselError {
    #[error("entropy of an all-zero count vector is undefined")]
    EmptyCounts,
    #[error("cannot rank an empty table")]
    EmptyTable,
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("fraction {fraction} of {total} attributes selects nothing")]
    EmptySelection { fraction: f64, total: usize },
    #[error("ranking line {line}: {message}")]
    BadRanking { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where the ranking is computed inside cross-validated protocols.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Rank once on the whole table, test folds included.
    #[default]
    FullTable,
    /// Re-rank on each training fold only.
    PerFold,
}

/// Ascending cut points per attribute, aligned with the table's columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationScheme {
    pub attribute_names: Vec<String>,
    pub cuts: Vec<Vec<f64>>,
}

impl DiscretizationScheme {
    /// Discretizes every column of `table` against its class.
    pub fn fit(table: &FeatureTable) -> Self {
        let labels = table.labels();
        let cuts = par::map_range(table.n_attributes(), |a| mdl_discretize(&table.column(a), &labels));
        Self { attribute_names: table.attribute_names().to_vec(), cuts }
    }

    /// Attributes with no cut carry no information.
    pub fn is_uninformative(&self, attribute: usize) -> bool {
        self.cuts[attribute].is_empty()
    }
}

/// Information gain in bits of `attribute` under `scheme`.
pub fn info_gain(table: &FeatureTable, attribute: usize, scheme: &DiscretizationScheme) -> f64 {
    let cuts = &scheme.cuts[attribute];
    if cuts.is_empty() || table.is_empty() {
        return 0.0;
    }
    let mut bins = vec![[0u64; 2]; cuts.len() + 1];
    let mut total = [0u64; 2];
    for row in table.rows() {
        let c = row.class.index();
        bins[bin_of(row.features[attribute], cuts)][c] += 1;
        total[c] += 1;
    }
    gain_from_contingency(total, &mut bins)
}

/// H(class) minus the weighted bin entropies. Bins are summed in sorted
/// order so equal contingency tables give bit-identical gains.
pub(crate) fn gain_from_contingency(total: [u64; 2], bins: &mut [[u64; 2]]) -> f64 {
    let n_total = total[0] + total[1];
    if n_total == 0 {
        return 0.0;
    }
    bins.sort_unstable();
    let n = n_total as f64;
    let h = discretize::entropy_unchecked(&total, n_total);
    let conditional: f64 = bins
        .iter()
        .filter(|b| b[0] + b[1] > 0)
        .map(|b| {
            let nb = b[0] + b[1];
            nb as f64 / n * discretize::entropy_unchecked(b, nb)
        })
        .sum();
    (h - conditional).clamp(0.0, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub name: String,
    pub gain: f64,
}

/// Attributes sorted by gain, descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAttributes {
    pub entries: Vec<RankedAttribute>,
}

/// Name order used to break gain ties: numeric when both names are item
/// ids, lexicographic otherwise.
pub fn compare_names(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// Ranking order: gain descending, gains within [`TIE_EPS`] tie and fall
/// back to [`compare_names`].
pub fn compare_ranked(a: &RankedAttribute, b: &RankedAttribute) -> Ordering {
    if (a.gain - b.gain).abs() <= TIE_EPS {
        compare_names(&a.name, &b.name)
    } else {
        b.gain.total_cmp(&a.gain)
    }
}

impl RankedAttributes {
    pub fn from_gains(mut entries: Vec<RankedAttribute>) -> Self {
        // name order first so the gain pass only needs a stable sort
        entries.sort_by(|a, b| compare_names(&a.name, &b.name));
        entries.sort_by(compare_ranked);
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn top(&self, n: usize) -> &[RankedAttribute] {
        &self.entries[..n.min(self.entries.len())]
    }

    /// `RANK,ITEMID,GAIN_BITS`, rank starting at 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatselError> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "RANK,ITEMID,GAIN_BITS")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, e.name, e.gain)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatselError> {
        let bad = |line: usize, message: String| FeatselError::BadRanking { line, message };
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line_no == 1 {
                if line.trim() != "RANK,ITEMID,GAIN_BITS" {
                    return Err(bad(1, "expected header RANK,ITEMID,GAIN_BITS".into()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad(line_no, format!("expected 3 fields, found {}", f.len())));
            }
            let rank: usize = f[0].parse().map_err(|_| bad(line_no, format!("bad rank {:?}", f[0])))?;
            if rank != entries.len() + 1 {
                return Err(bad(line_no, format!("rank {rank} out of sequence")));
            }
            let gain: f64 = f[2]
                .parse()
                .ok()
                .filter(|g: &f64| g.is_finite() && *g >= 0.0)
                .ok_or_else(|| bad(line_no, format!("bad gain {:?}", f[2])))?;
            entries.push(RankedAttribute { name: f[1].to_string(), gain });
        }
        Ok(Self { entries })
    }
}

/// Discretizes and scores every attribute on the full table, then sorts.
pub fn rank_all(table: &FeatureTable) -> Result<RankedAttributes, FeatselError> {
    Ok(rank_with_scheme(table)?.0)
}

pub fn rank_with_scheme(table: &FeatureTable) -> Result<(RankedAttributes, DiscretizationScheme), FeatselError> {
    if table.is_empty() {
        return Err(FeatselError::EmptyTable);
    }
    let scheme = DiscretizationScheme::fit(table);
    let gains = par::map_range(table.n_attributes(), |a| info_gain(table, a, &scheme));
    let entries = table
        .attribute_names()
        .iter()
        .zip(gains)
        .map(|(name, gain)| RankedAttribute { name: name.clone(), gain })
        .collect();
    Ok((RankedAttributes::from_gains(entries), scheme))
}

/// Number of attributes kept from `total` at fraction `p`, rounding half up.
pub fn head_count(total: usize, p: f64) -> Result<usize, FeatselError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(FeatselError::InvalidFraction(p));
    }
    // the small slack absorbs representation error in products like 0.7 * 619
    let n = (p * total as f64 + 0.5 + 1e-9).floor() as usize;
    if n == 0 {
        return Err(FeatselError::EmptySelection { fraction: p, total });
    }
    Ok(n.min(total))
}

/// Same as [`head_count`] for an integer percentage, in exact arithmetic.
pub fn head_count_percent(total: usize, percent: u32) -> Result<usize, FeatselError> {
    if percent == 0 || percent > 100 {
        return Err(FeatselError::InvalidFraction(percent as f64 / 100.0));
    }
    let n = (percent as usize * total + 50) / 100;
    if n == 0 {
        return Err(FeatselError::EmptySelection { fraction: percent as f64 / 100.0, total });
    }
    Ok(n)
}

/// The first `round_half_up(p * M)` attribute names.
pub fn head_fraction(ranked: &RankedAttributes, p: f64) -> Result<Vec<String>, FeatselError> {
    let n = head_count(ranked.len(), p)?;
    Ok(ranked.top(n).iter().map(|e| e.name.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AggregationMode, Class, Row};
    use approx::assert_abs_diff_eq;

    fn table(cols: Vec<(&str, Vec<f64>)>, labels: &[u8]) -> FeatureTable {
        let names = cols.iter().map(|c| c.0.to_string()).collect();
        let rows = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| Row {
                key: i as u64,
                features: cols.iter().map(|c| c.1[i]).collect(),
                class: Class::from_index(l as usize).unwrap(),
            })
            .collect();
        FeatureTable::new(names, rows, AggregationMode::Avg).unwrap()
    }

    #[test]
    fn perfect_attribute_gains_class_entropy() {
        let labels = [0, 0, 0, 1, 1, 0, 1, 0];
        let x: Vec<f64> = labels.iter().map(|&l| l as f64 * 3.0 + 1.0).collect();
        let t = table(vec![("50", vec![7.0; 8]), ("10", x), ("20", vec![0.0; 8])], &labels);
        let ranked = rank_all(&t).unwrap();
        let h = entropy(&[5, 3]).unwrap();
        assert_eq!(ranked.entries[0].name, "10");
        assert_abs_diff_eq!(ranked.entries[0].gain, h, epsilon = 1e-12);
        assert_eq!(ranked.entries[1].gain, 0.0);
        // zero-gain ties ordered by item id
        assert_eq!(ranked.names(), vec!["10", "20", "50"]);
    }

    #[test]
    fn two_bin_example() {
        // bins (6 alive, 2 dead) and (3 alive, 3 dead)
        let labels: Vec<u8> = [vec![0; 6], vec![1; 2], vec![0; 3], vec![1; 3]].concat();
        let x: Vec<f64> = (0..14).map(|i| if i < 8 { 1.0 } else { 2.0 }).collect();
        let t = table(vec![("a", x)], &labels);
        let scheme = DiscretizationScheme { attribute_names: vec!["a".into()], cuts: vec![vec![1.5]] };
        assert_abs_diff_eq!(info_gain(&t, 0, &scheme), 0.0481270304082694, epsilon = 1e-12);
        let none = DiscretizationScheme { attribute_names: vec!["a".into()], cuts: vec![vec![]] };
        assert_eq!(info_gain(&t, 0, &none), 0.0);
    }

    #[test]
    fn duplicate_columns_tie_adjacent() {
        let labels = [0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1];
        let x: Vec<f64> = vec![1., 9., 2., 8., 7., 9., 3., 1., 2., 2., 8., 9.];
        let t = table(vec![("300", x.clone()), ("7", vec![1.0; 12]), ("200", x)], &labels);
        let r = rank_all(&t).unwrap();
        assert_eq!(r.names(), vec!["200", "300", "7"]);
        assert_eq!(r.entries[0].gain, r.entries[1].gain);
    }

    #[test]
    fn head_counts_match_published_sizes() {
        let expected = [62, 124, 186, 248, 310, 371, 433, 495, 557, 619];
        for (i, &e) in expected.iter().enumerate() {
            let pct = (i as u32 + 1) * 10;
            assert_eq!(head_count(619, pct as f64 / 100.0).unwrap(), e);
            assert_eq!(head_count_percent(619, pct).unwrap(), e);
        }
        assert_eq!(head_count(5, 1.0).unwrap(), 5);
        assert!(matches!(head_count(3, 0.1), Err(FeatselError::EmptySelection { .. })));
        assert!(head_count(3, 0.0).is_err());
        assert!(head_count(3, 1.5).is_err());
    }

    #[test]
    fn ranking_csv_round_trip() {
        let r = RankedAttributes::from_gains(vec![
            RankedAttribute { name: "50177".into(), gain: 0.1234567890123 },
            RankedAttribute { name: "50090".into(), gain: 0.0 },
        ]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("RANK,ITEMID,GAIN_BITS\n1,50177,0.1234567890123\n"));
        assert_eq!(RankedAttributes::read_csv(buf.as_slice()).unwrap(), r);
        assert!(RankedAttributes::read_csv("RANK,ITEMID\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_table_is_rejected() {
        let t = FeatureTable::new(vec!["a".into()], vec![], AggregationMode::Avg).unwrap();
        assert!(matches!(rank_all(&t), Err(FeatselError::EmptyTable)));
    }
}
