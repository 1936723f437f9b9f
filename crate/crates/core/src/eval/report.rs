//! Report rendering: aligned text tables, JSON lines and plot series.

use serde_json::json;

use super::{CvResult, MetricsReport, SplitReport, SweepReport};

pub const METRICS_FOOTER: &str = "Precision, recall and F-measure are class-support weighted averages; \
a class that is never predicted counts with precision 0.";

/// Accuracy as a two-decimal percentage, e.g. `75.10%`.
pub fn percent(accuracy: f64) -> String {
    format!("{:.2}%", accuracy * 100.0)
}

fn three(v: f64) -> String {
    format!("{v:.3}")
}

/// Left-aligned first column, right-aligned others, two-space gutters.
pub fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                s.push_str(&format!("{c:<w$}", w = widths[i]));
            } else {
                s.push_str(&format!("{c:>w$}", w = widths[i]));
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn metric_cells(name: &str, m: &MetricsReport) -> Vec<String> {
    vec![
        name.to_string(),
        percent(m.accuracy),
        three(m.weighted_precision),
        three(m.weighted_recall),
        three(m.weighted_f_measure),
    ]
}

const METRIC_HEADER: [&str; 5] = ["Algorithm", "Accuracy", "Precision", "Recall", "F-Measure"];

/// One row per learner, as in a per-algorithm results table.
pub fn metrics_table(rows: &[(String, MetricsReport)]) -> String {
    let cells: Vec<Vec<String>> = rows.iter().map(|(n, m)| metric_cells(n, m)).collect();
    format!("{}\n{}\n", aligned(&METRIC_HEADER, &cells), METRICS_FOOTER)
}

pub fn cv_text(algorithm: &str, cv: &CvResult) -> String {
    let c = &cv.evaluation.confusion.counts;
    format!(
        "{}-fold cross-validation, seed {}\n\n{}\nConfusion matrix (rows actual, columns predicted)\n      0      1\n0 {:>6} {:>6}\n1 {:>6} {:>6}\n",
        cv.k,
        cv.seed,
        metrics_table(&[(algorithm.to_string(), cv.evaluation.metrics)]),
        c[0][0],
        c[0][1],
        c[1][0],
        c[1][1]
    )
}

pub fn split_text(algorithm: &str, report: &SplitReport) -> String {
    let mut out = format!(
        "{} repeats of a {:.0}% randomized split, seed {}\n\n",
        report.repeats.len(),
        report.train_fraction * 100.0,
        report.seed
    );
    let side = match report.train_side {
        super::TrainSideEval::CrossValidation { k } => format!("Training side ({k}-fold cross-validation), mean"),
        super::TrainSideEval::Resubstitution => "Training side (resubstitution), mean".to_string(),
    };
    out.push_str(&side);
    out.push('\n');
    out.push_str(&aligned(&METRIC_HEADER, &[metric_cells(algorithm, &report.mean_train)]));
    out.push_str("\nTest side, mean\n");
    out.push_str(&aligned(&METRIC_HEADER, &[metric_cells(algorithm, &report.mean_test)]));
    out.push_str("\nPer repeat\n");
    let rows: Vec<Vec<String>> = report
        .repeats
        .iter()
        .map(|r| {
            vec![
                (r.repeat + 1).to_string(),
                r.train_rows.to_string(),
                r.test_rows.to_string(),
                percent(r.train.metrics.accuracy),
                percent(r.test.metrics.accuracy),
            ]
        })
        .collect();
    out.push_str(&aligned(&["Repeat", "Train rows", "Test rows", "Train accuracy", "Test accuracy"], &rows));
    out.push('\n');
    out.push_str(METRICS_FOOTER);
    out.push('\n');
    out
}

pub fn sweep_text(report: &SweepReport) -> String {
    let dash = || "-".to_string();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                format!("{}%", r.percent),
                r.selected.to_string(),
                percent(r.accuracy()),
                r.leaves.map_or_else(dash, |v| v.to_string()),
                r.tree_size.map_or_else(dash, |v| v.to_string()),
            ]
        })
        .collect();
    format!(
        "{} with {}-fold cross-validation, seed {}, ranking {}\n\n{}",
        report.algorithm,
        report.k,
        report.seed,
        match report.selection {
            crate::featsel::SelectionMode::FullTable => "on the full table",
            crate::featsel::SelectionMode::PerFold => "per training fold",
        },
        aligned(&["% Selected", "# Selected", "Accuracy", "Number of leaves", "Size of the tree"], &rows)
    )
}

/// One JSON object per sweep row.
pub fn sweep_jsonl(report: &SweepReport) -> String {
    report
        .rows
        .iter()
        .map(|r| {
            json!({
                "algorithm": report.algorithm,
                "k": report.k,
                "seed": report.seed,
                "selection": report.selection,
                "percent": r.percent,
                "selected": r.selected,
                "accuracy": r.evaluation.metrics.accuracy,
                "weighted_precision": r.evaluation.metrics.weighted_precision,
                "weighted_recall": r.evaluation.metrics.weighted_recall,
                "weighted_f_measure": r.evaluation.metrics.weighted_f_measure,
                "confusion": r.evaluation.confusion.counts,
                "leaves": r.leaves,
                "tree_size": r.tree_size,
            })
            .to_string()
                + "\n"
        })
        .collect()
}

/// Two-column accuracy-versus-fraction series for plotting.
pub fn sweep_series_csv(report: &SweepReport) -> String {
    let mut out = String::from("percent,accuracy\n");
    for r in &report.rows {
        out.push_str(&format!("{},{}\n", r.percent, r.accuracy()));
    }
    out
}

/// One JSON object per algorithm row.
pub fn metrics_jsonl(rows: &[(String, MetricsReport)], extra: &serde_json::Value) -> String {
    rows.iter()
        .map(|(name, m)| {
            let mut v = json!({
                "algorithm": name,
                "accuracy": m.accuracy,
                "weighted_precision": m.weighted_precision,
                "weighted_recall": m.weighted_recall,
                "weighted_f_measure": m.weighted_f_measure,
            });
            if let (Some(obj), Some(more)) = (v.as_object_mut(), extra.as_object()) {
                obj.extend(more.clone());
            }
            v.to_string() + "\n"
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ConfusionMatrix, Evaluation, SweepRow};
    use crate::featsel::SelectionMode;

    fn report() -> SweepReport {
        let m = MetricsReport { accuracy: 0.751, weighted_precision: 0.7, weighted_recall: 0.751, weighted_f_measure: 0.72 };
        let row = |percent, selected, leaves| SweepRow {
            percent,
            selected,
            evaluation: Evaluation { confusion: ConfusionMatrix { counts: [[1, 0], [0, 1]] }, metrics: m },
            leaves: Some(leaves),
            tree_size: Some(2 * leaves - 1),
        };
        SweepReport {
            algorithm: "J48".into(),
            k: 10,
            seed: 42,
            selection: SelectionMode::FullTable,
            rows: vec![row(10, 62, 200), row(100, 619, 184)],
        }
    }

    #[test]
    fn percent_style() {
        assert_eq!(percent(0.7024), "70.24%");
        assert_eq!(percent(0.751), "75.10%");
    }

    #[test]
    fn sweep_text_layout() {
        let text = sweep_text(&report());
        assert!(text.starts_with("J48 with 10-fold cross-validation, seed 42"));
        assert!(text.contains("\n10%                 62    75.10%               200               399\n"));
        let widths: Vec<usize> = text.lines().skip(2).map(|l| l.len()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn structured_outputs() {
        let r = report();
        let lines: Vec<serde_json::Value> =
            sweep_jsonl(&r).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1]["selected"], 619);
        assert_eq!(lines[0]["seed"], 42);
        assert_eq!(sweep_series_csv(&r), "percent,accuracy\n10,0.751\n100,0.751\n");
    }

    #[test]
    fn metrics_table_has_footer() {
        let m = MetricsReport { accuracy: 0.7024, weighted_precision: 0.4934, weighted_recall: 0.7024, weighted_f_measure: 0.5796 };
        let t = metrics_table(&[("ZeroR".into(), m)]);
        assert!(t.contains("\nZeroR        70.24%      0.493   0.702      0.580\n"));
        assert!(t.ends_with(&format!("{METRICS_FOOTER}\n")));
    }
}
